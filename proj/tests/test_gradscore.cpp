#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "imtsforge/gradscore.hpp"
#include "imtsforge/ode_solver.hpp"
#include "imtsforge/rng.hpp"
#include "imtsforge/systems_registry.hpp"
#include "oracles.hpp"

using namespace imts;

namespace {

std::vector<double> sample_function(const std::function<double(double)>& f, double duration,
                                    std::size_t steps) {
    std::vector<double> series(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        series[m] = f(duration * static_cast<double>(m) / static_cast<double>(steps - 1));
    }
    return series;
}

grad::GriddedSample random_sample(std::size_t n, std::size_t m, int c, std::uint64_t seed) {
    grad::GriddedSample sample;
    sample.instances = n;
    sample.steps = m;
    sample.channels = c;
    sample.duration = 1.0 + static_cast<double>(seed % 5);
    sample.values.resize(n * m * static_cast<std::size_t>(c));
    rng::Stream stream(seed);
    for (auto& v : sample.values) v = 3.0 * stream.next_symmetric();
    return sample;
}

}  // namespace

TEST_CASE("linear functions have zero deviation") {
    // dyadic grid: samples, differences and their mean are exact
    std::vector<double> series;
    for (int m = 0; m <= 4; ++m) series.push_back(2.0 * (0.25 * m) + 1.0);
    CHECK(grad::mgd_estimate(series, 0.25) == 0.0);

    const auto fine = sample_function([](double t) { return 2.0 * t + 1.0; }, 1.0, 9731);
    CHECK(grad::mgd_estimate(fine, 1.0 / 9730.0) <= 1e-9);
}

TEST_CASE("sine deviation matches the closed form omega / sqrt(2)") {
    const double duration = 2.0 * std::numbers::pi;
    const auto series =
        sample_function([](double t) { return std::sin(4.0 * t); }, duration, 20001);
    const double estimate = grad::mgd_estimate(series, duration / 20000.0);
    const double exact = 4.0 / std::numbers::sqrt2;
    CHECK(std::fabs(estimate - exact) / exact <= 1e-3);
}

TEST_CASE("exponential deviation matches the quadrature oracle") {
    for (const double a : {0.5, 1.0, 2.0}) {
        CAPTURE(a);
        const auto series =
            sample_function([a](double t) { return std::exp(a * t); }, 1.0, 20001);
        const double estimate = grad::mgd_estimate(series, 1.0 / 20000.0);
        const double exact = oracles::mgd_quadrature(
            [a](double t) { return a * std::exp(a * t); }, 1.0, std::exp(a), 1.0);
        CHECK(std::fabs(estimate - exact) / exact <= 1e-3);
    }
}

TEST_CASE("shift invariance and scale equivariance") {
    // exactly representable values keep the properties bit-exact
    std::vector<double> series{1.0, 1.25, 2.0, 1.5, 3.75, 2.25};
    std::vector<double> shifted = series;
    for (auto& v : shifted) v += 4.0;
    CHECK(grad::mgd_estimate(series, 0.5) == grad::mgd_estimate(shifted, 0.5));

    std::vector<double> doubled = series;
    for (auto& v : doubled) v *= 2.0;
    CHECK(grad::mgd_estimate(doubled, 0.5) == 2.0 * grad::mgd_estimate(series, 0.5));

    // and approximately on arbitrary data
    rng::Stream stream(5);
    std::vector<double> xs(64);
    for (auto& v : xs) v = stream.next_symmetric();
    std::vector<double> moved = xs;
    for (auto& v : moved) v = v * 1.7 + 0.3;
    CHECK(grad::mgd_estimate(moved, 0.1) ==
          doctest::Approx(1.7 * grad::mgd_estimate(xs, 0.1)).epsilon(1e-12));
}

TEST_CASE("frequency doubling doubles the deviation") {
    const double duration = 2.0 * std::numbers::pi;
    const auto slow = sample_function([](double t) { return std::sin(2.0 * t); }, duration, 40001);
    const auto fast = sample_function([](double t) { return std::sin(4.0 * t); }, duration, 40001);
    const double ratio = grad::mgd_estimate(fast, duration / 40000.0) /
                         grad::mgd_estimate(slow, duration / 40000.0);
    CHECK(std::fabs(ratio - 2.0) / 2.0 <= 1e-3);
}

TEST_CASE("growth against the stiffness parameter of exponential solutions") {
    // from solver trajectories of x' = a x over [0, 1]
    const auto registry = systems::Registry::with_builtins();
    const auto& spec = registry.get("lin").spec;
    std::vector<double> log_mgd;
    for (int a = 1; a <= 6; ++a) {
        const std::vector<double> consts{static_cast<double>(a)}, x0{1.0};
        const auto result = ode::solve_to_matrix(spec, consts, x0, 1.0, 4001);
        REQUIRE(result.ok());
        std::vector<double> series(4001);
        for (std::size_t m = 0; m < series.size(); ++m) series[m] = result.trajectory->at(m, 0);
        log_mgd.push_back(std::log(grad::mgd_estimate(series, 1.0 / 4000.0)));
    }
    // growth rate stays above 0.9 per unit and approaches 1 from above
    for (std::size_t i = 1; i < log_mgd.size(); ++i) {
        const double diff = log_mgd[i] - log_mgd[i - 1];
        CHECK(diff >= 0.9);
        CHECK(diff >= 1.0);  // slope limit is T = 1, approached from above
    }
    // faster than plain exponential: log MGD(a) - a keeps increasing
    for (std::size_t i = 1; i < log_mgd.size(); ++i) {
        CHECK(log_mgd[i] - static_cast<double>(i + 1) >
              log_mgd[i - 1] - static_cast<double>(i));
    }
    // matches the quadrature oracle pointwise
    for (int a = 1; a <= 6; ++a) {
        const double exact = oracles::mgd_quadrature(
            [a](double t) { return a * std::exp(a * t); }, 1.0, std::exp(a), 1.0);
        CHECK(log_mgd[static_cast<std::size_t>(a - 1)] ==
              doctest::Approx(std::log(exact)).epsilon(1e-3));
    }
}

TEST_CASE("point-wise deviation: degenerate and exact families") {
    // a single function has no across-instance spread
    grad::GriddedSample single = random_sample(1, 20, 1, 3);
    CHECK(grad::mpgd_estimate(single, 0) == 0.0);

    // slopes -1 and +1 on a dyadic grid: point-wise std is exactly 1
    grad::GriddedSample slopes;
    slopes.instances = 2;
    slopes.steps = 5;
    slopes.channels = 1;
    slopes.duration = 1.0;
    slopes.values.resize(10);
    for (std::size_t m = 0; m < 5; ++m) {
        slopes.at(0, m, 0) = -0.25 * static_cast<double>(m);
        slopes.at(1, m, 0) = 0.25 * static_cast<double>(m);
    }
    CHECK(grad::mpgd_estimate(slopes, 0) == 1.0);

    // vertical shifts have identical derivatives
    grad::GriddedSample shifts = slopes;
    for (std::size_t m = 0; m < 5; ++m) {
        shifts.at(0, m, 0) = 0.25 * static_cast<double>(m) + 1.0;
        shifts.at(1, m, 0) = 0.25 * static_cast<double>(m) + 3.0;
    }
    CHECK(grad::mpgd_estimate(shifts, 0) == 0.0);
}

TEST_CASE("point-wise deviation equals the brute-force oracle") {
    rng::Stream seeds(99);
    for (int round = 0; round < 25; ++round) {
        const auto n = 1 + seeds.next_u64() % 5;
        const auto m = 2 + seeds.next_u64() % 19;
        const auto c = 1 + seeds.next_u64() % 4;
        const auto sample = random_sample(n, m, static_cast<int>(c), 1000 + round);
        for (int channel = 0; channel < static_cast<int>(c); ++channel) {
            const double fast = grad::mpgd_estimate(sample, channel);
            const double brute = oracles::mpgd_brute(sample, channel);
            CHECK(std::fabs(fast - brute) <= 1e-12 * std::max(1.0, std::fabs(brute)));
        }
    }
}

TEST_CASE("top-channel aggregation") {
    std::vector<double> twelve;
    for (int v = 12; v >= 1; --v) twelve.push_back(v);
    CHECK(grad::aggregate_top_channels(twelve) == 7.5);

    const std::vector<double> three{3.0, 2.0, 1.0};
    CHECK(grad::aggregate_top_channels(three) == 2.0);

    // ties keep the lower channel index; result unchanged either way but the
    // selection must be deterministic
    const std::vector<double> tied{5.0, 5.0, 1.0};
    CHECK(grad::aggregate_top_channels(tied) == doctest::Approx(11.0 / 3.0));
}

TEST_CASE("joint score: single instance scores zero") {
    const auto sample = random_sample(1, 30, 3, 8);
    const auto report = grad::jgd_estimate(sample);
    for (const double jgd : report.per_channel_jgd) CHECK(jgd == 0.0);
    CHECK(report.aggregated_jgd == 0.0);
}

TEST_CASE("joint score: constant channel is degenerate") {
    auto sample = random_sample(4, 10, 2, 9);
    for (std::size_t n = 0; n < 4; ++n) {
        for (std::size_t m = 0; m < 10; ++m) sample.at(n, m, 1) = 2.5;
    }
    try {
        (void)grad::jgd_estimate(sample);
        FAIL("expected degenerate channel");
    } catch (const grad::DegenerateChannelError& e) {
        CHECK(e.channel() == 1);
    }
}

TEST_CASE("joint score is invariant under per-channel positive affine maps") {
    const auto sample = random_sample(6, 25, 3, 10);
    auto transformed = sample;
    const double scales[3] = {3.0, 0.25, 12.0};
    const double shifts[3] = {-5.0, 0.75, 100.0};
    for (std::size_t n = 0; n < sample.instances; ++n) {
        for (std::size_t m = 0; m < sample.steps; ++m) {
            for (int c = 0; c < 3; ++c) {
                transformed.at(n, m, c) = sample.at(n, m, c) * scales[c] + shifts[c];
            }
        }
    }
    const auto base = grad::jgd_estimate(sample);
    const auto mapped = grad::jgd_estimate(transformed);
    for (int c = 0; c < 3; ++c) {
        CHECK(mapped.per_channel_jgd[static_cast<std::size_t>(c)] ==
              doctest::Approx(base.per_channel_jgd[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
    CHECK(mapped.aggregated_jgd == doctest::Approx(base.aggregated_jgd).epsilon(1e-12));
}

TEST_CASE("convergence probe: error decreases at first order or better") {
    const double duration = 2.0 * std::numbers::pi;
    const std::vector<double> epsilons{duration / 100.0, duration / 200.0, duration / 400.0,
                                       duration / 800.0};
    const auto sin_points = grad::mgd_convergence_probe(
        [](double t) { return std::sin(4.0 * t); }, duration, 4.0 / std::numbers::sqrt2,
        epsilons);
    for (std::size_t i = 1; i < sin_points.size(); ++i) {
        CHECK(sin_points[i].abs_error < sin_points[i - 1].abs_error);
    }
    CHECK(oracles::convergence_order(sin_points) >= 0.9);

    const double exp_exact = oracles::mgd_quadrature(
        [](double t) { return std::exp(t); }, 1.0, std::exp(1.0), 1.0);
    const std::vector<double> exp_eps{1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0};
    const auto exp_points = grad::mgd_convergence_probe(
        [](double t) { return std::exp(t); }, 1.0, exp_exact, exp_eps);
    for (std::size_t i = 1; i < exp_points.size(); ++i) {
        CHECK(exp_points[i].abs_error < exp_points[i - 1].abs_error);
        // divided differences act like midpoint derivatives, so the realized
        // rate is second order: halving eps quarters the error
        const double ratio = exp_points[i - 1].abs_error / exp_points[i].abs_error;
        CHECK(ratio > 3.2);
        CHECK(ratio < 4.8);
    }

    const auto line_points = grad::mgd_convergence_probe(
        [](double t) { return 2.0 * t + 1.0; }, 1.0, 0.0, exp_eps);
    for (const auto& p : line_points) CHECK(p.abs_error <= 1e-10);
}
