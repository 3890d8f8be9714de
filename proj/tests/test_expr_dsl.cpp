#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "imtsforge/expr_dsl.hpp"
#include "imtsforge/rng.hpp"

using namespace imts;

namespace {

const char* kLinSource = R"(system lin
channels 1
constants a=1.0
init 1.0
d0 = a * x0
)";

const char* kLorenzSource = R"(# chaotic reference system
system lorenz
channels 3
constants rho=28.0 sigma=10.0 beta=8/3
init 2.0 1.0 1.0
duration_unit "1"
d0 = sigma * (x1 - x0)
d1 = x0 * (rho - x2) - x1
d2 = x0 * x1 - beta * x2
)";

}  // namespace

TEST_CASE("parses the linear growth system") {
    const auto spec = dsl::parse_system(kLinSource);
    CHECK(spec.name == "lin");
    CHECK(spec.channels == 1);
    REQUIRE(spec.constant_names.size() == 1);
    CHECK(spec.constant_names[0] == "a");
    CHECK(spec.constant_values[0] == 1.0);
    REQUIRE(spec.initial_values.size() == 1);
    CHECK(spec.initial_values[0] == 1.0);
}

TEST_CASE("parses the three-channel chaotic system with a ratio constant") {
    const auto spec = dsl::parse_system(kLorenzSource);
    CHECK(spec.channels == 3);
    REQUIRE(spec.constant_values.size() == 3);
    CHECK(spec.constant_values[0] == 28.0);
    CHECK(spec.constant_values[1] == 10.0);
    CHECK(spec.constant_values[2] == 8.0 / 3.0);
    CHECK(spec.rhs.size() == 3);
}

TEST_CASE("unknown symbol fails at the offending token") {
    const char* source = "system s\nchannels 1\ninit 1.0\nd0 = b * x0\n";
    try {
        dsl::parse_system(source);
        FAIL("expected a parse error");
    } catch (const dsl::ParseError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
        CHECK(e.where().line == 4);
        CHECK(e.where().column > 4);
    }
}

TEST_CASE("structural errors are reported") {
    CHECK_THROWS_AS(dsl::parse_system("system s\nchannels 2\ninit 1.0\nd0 = x0\nd1 = x1\n"),
                    dsl::ParseError);  // init arity
    CHECK_THROWS_AS(dsl::parse_system("system s\nchannels 2\ninit 1.0 2.0\nd0 = x0\n"),
                    dsl::ParseError);  // rhs count
    CHECK_THROWS_AS(
        dsl::parse_system("system s\nchannels 1\nconstants a=1 a=2\ninit 1.0\nd0 = x0\n"),
        dsl::ParseError);  // duplicate constant
    CHECK_THROWS_AS(dsl::parse_system("system s\nchannels 1\ninit 1.0\nd0 = x0\nd0 = x0\n"),
                    dsl::ParseError);  // duplicate derivative
    CHECK_THROWS_AS(dsl::parse_system("system s\nchannels 1\ninit 1.0\nd0 = x1\n"),
                    dsl::ParseError);  // channel out of range
    CHECK_THROWS_AS(dsl::parse_system("channels 1\ninit 1.0\nd0 = x0\n"), dsl::ParseError);
}

TEST_CASE("evaluates the linear system") {
    const auto spec = dsl::parse_system(kLinSource);
    const std::vector<double> x{2.0}, a{3.0};
    const auto dxdt = dsl::eval_rhs_checked(spec, 0.0, x, a);
    CHECK(dxdt[0] == 6.0);
}

TEST_CASE("evaluates the chaotic system at a hand-checked point") {
    const auto spec = dsl::parse_system(kLorenzSource);
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> a{28.0, 10.0, 8.0 / 3.0};
    const auto dxdt = dsl::eval_rhs_checked(spec, 0.0, x, a);
    CHECK(dxdt[0] == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(dxdt[1] == doctest::Approx(23.0).epsilon(1e-14));
    CHECK(dxdt[2] == doctest::Approx(-6.0).epsilon(1e-14));
}

TEST_CASE("NaN in the state is a domain error") {
    const auto spec = dsl::parse_system(kLinSource);
    const std::vector<double> x{std::nan("")}, a{1.0};
    std::vector<double> out(1);
    const auto status = dsl::eval_rhs(spec, 0.0, x, a, out);
    CHECK_FALSE(status.ok);
    CHECK(status.channel == 0);
    CHECK_THROWS_AS((void)dsl::eval_rhs_checked(spec, 0.0, x, a), dsl::EvalError);
}

TEST_CASE("division, log, sqrt and pow domain failures carry the channel") {
    const auto spec = dsl::parse_system(
        "system s\nchannels 2\ninit 1.0 1.0\nd0 = x0\nd1 = log(x1 - 2)\n");
    const std::vector<double> x{1.0, 1.0};
    std::vector<double> out(2);
    const auto status = dsl::eval_rhs(spec, 0.0, x, {}, out);
    CHECK_FALSE(status.ok);
    CHECK(status.channel == 1);

    const auto div_spec = dsl::parse_system("system s\nchannels 1\ninit 0.0\nd0 = 1 / x0\n");
    const std::vector<double> zero{0.0};
    std::vector<double> out1(1);
    CHECK_FALSE(dsl::eval_rhs(div_spec, 0.0, zero, {}, out1).ok);

    const auto sqrt_spec = dsl::parse_system("system s\nchannels 1\ninit -4.0\nd0 = sqrt(x0)\n");
    const std::vector<double> neg{-4.0};
    CHECK_FALSE(dsl::eval_rhs(sqrt_spec, 0.0, neg, {}, out1).ok);
}

TEST_CASE("expression grammar: precedence, power, unary, functions") {
    const auto spec = dsl::parse_system(
        "system s\nchannels 1\nconstants k=2.0\ninit 1.0\n"
        "d0 = -x0^2 + k * sin(t) / 2 - 3^-1 + abs(-x0) + tanh(0) + 2^2^2\n");
    const std::vector<double> x{3.0};
    const std::vector<double> a{2.0};
    const double t = 1.5707963267948966;  // pi/2
    const auto dxdt = dsl::eval_rhs_checked(spec, t, x, a);
    // -(3^2) + 2*1/2 - 1/3 + 3 + 0 + 2^(2^2) = -9 + 1 - 1/3 + 3 + 0 + 16
    CHECK(dxdt[0] == doctest::Approx(-9.0 + 1.0 - 1.0 / 3.0 + 3.0 + 16.0).epsilon(1e-12));
}

TEST_CASE("eval_rhs is referentially transparent") {
    const auto spec = dsl::parse_system(kLorenzSource);
    const std::vector<double> x{0.3, -1.7, 2.9};
    const std::vector<double> a{28.0, 10.0, 8.0 / 3.0};
    const auto first = dsl::eval_rhs_checked(spec, 0.25, x, a);
    const auto second = dsl::eval_rhs_checked(spec, 0.25, x, a);
    CHECK(std::memcmp(first.data(), second.data(), first.size() * sizeof(double)) == 0);
}

TEST_CASE("render/parse round trip is structurally identical") {
    for (const char* source : {kLinSource, kLorenzSource}) {
        const auto spec = dsl::parse_system(source);
        const auto reparsed = dsl::parse_system(dsl::render_system(spec));
        CHECK(dsl::structurally_equal(spec, reparsed));
        // and rendering is a fixed point
        CHECK(dsl::render_system(spec) == dsl::render_system(reparsed));
    }
}

TEST_CASE("round trip preserves tricky expressions") {
    const auto spec = dsl::parse_system(
        "system s\nchannels 2\nconstants k=0.1\ninit 1.0 2.0\n"
        "d0 = (x0 + x1)^2 - -x0 * k^-2\n"
        "d1 = x0 - (x1 - k) - sqrt(x0 * x0)\n");
    const auto reparsed = dsl::parse_system(dsl::render_system(spec));
    REQUIRE(dsl::structurally_equal(spec, reparsed));
    const std::vector<double> x{1.5, -2.5};
    const std::vector<double> a{0.1};
    CHECK(dsl::eval_rhs_checked(spec, 0.0, x, a) ==
          dsl::eval_rhs_checked(reparsed, 0.0, x, a));
}

TEST_CASE("parser survives arbitrary byte input") {
    rng::Stream stream(2024);
    for (int round = 0; round < 500; ++round) {
        const auto len = static_cast<std::size_t>(stream.next_u64() % 200);
        std::string garbage(len, '\0');
        for (auto& c : garbage) c = static_cast<char>(stream.next_u64() & 0xFF);
        try {
            (void)dsl::parse_system(garbage);
        } catch (const dsl::ParseError&) {
            // structured failure is the contract
        }
    }
    // mutated valid sources as well
    for (int round = 0; round < 500; ++round) {
        std::string source = kLorenzSource;
        const auto pos = static_cast<std::size_t>(stream.next_u64() % source.size());
        source[pos] = static_cast<char>(stream.next_u64() & 0xFF);
        try {
            (void)dsl::parse_system(source);
        } catch (const dsl::ParseError&) {
        }
    }
}
