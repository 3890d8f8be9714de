#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Line-oriented definition language for parametrized first-order ODE systems:
//
//   system <ident>
//   channels <int>
//   constants <name>=<value> [<name>=<value> ...]   # may repeat across lines
//   init <value> [<value> ...]                      # exactly C values total
//   duration_unit "<string>"                        # optional
//   d<idx> = <expression>                           # one per channel
//
// Values are real literals, optionally a ratio like 8/3. Expressions are
// infix arithmetic over `t`, channel symbols x0..x{C-1} and declared
// constants, with ^ for powers and calls sin, cos, exp, log, sqrt, abs, tanh.
namespace imts::dsl {

enum class UnaryOp : std::uint8_t { neg, sin, cos, exp, log, sqrt, abs, tanh };
enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };

struct ExprNode {
    enum class Kind : std::uint8_t { literal, time_ref, channel_ref, constant_ref, unary, binary };
    Kind kind{};
    double value = 0.0;  // literal
    int index = -1;      // channel or constant index
    UnaryOp uop{};
    BinaryOp bop{};
    int lhs = -1;  // arena index; unary operand
    int rhs = -1;
};

// Postfix instruction stream compiled from the tree; evaluation runs on a
// small value stack with no allocation.
struct Instr {
    enum class Op : std::uint8_t {
        push_literal, push_time, push_channel, push_constant,
        neg, sin, cos, exp, log, sqrt, abs, tanh,
        add, sub, mul, div, pow,
    };
    Op op{};
    double imm = 0.0;
    int index = -1;
};

struct Expr {
    std::vector<ExprNode> nodes;  // arena
    int root = -1;
    std::vector<Instr> tape;      // postfix order
    int stack_depth = 0;
};

struct SystemSpec {
    std::string name;
    int channels = 0;
    std::vector<std::string> constant_names;
    std::vector<double> constant_values;  // literature values, one per name
    std::vector<double> initial_values;   // literature values, length channels
    std::string duration_unit;            // informational
    std::vector<Expr> rhs;                // length channels
};

struct SourceLocation {
    int line = 0;    // 1-based
    int column = 0;  // 1-based
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, SourceLocation where)
        : std::runtime_error(std::move(message)), where_(where) {}
    SourceLocation where() const { return where_; }

private:
    SourceLocation where_;
};

SystemSpec parse_system(std::string_view source);

// Canonical source for a spec; parse(render(spec)) is structurally identical.
std::string render_system(const SystemSpec& spec);

bool structurally_equal(const SystemSpec& a, const SystemSpec& b);

struct EvalStatus {
    bool ok = true;
    int channel = -1;  // offending channel when !ok
};

// Evaluates x' = f(t, x; a) into dxdt. Any non-finite operand or result of a
// division, log, sqrt or pow (and any non-finite final value, including NaN
// already present in x) fails with the channel index; callers treat that
// like a solver failure.
EvalStatus eval_rhs(const SystemSpec& spec, double t, std::span<const double> x,
                    std::span<const double> a, std::span<double> dxdt) noexcept;

class EvalError : public std::runtime_error {
public:
    EvalError(std::string message, int channel)
        : std::runtime_error(std::move(message)), channel_(channel) {}
    int channel() const { return channel_; }

private:
    int channel_;
};

// Convenience wrapper; throws EvalError on domain failures.
std::vector<double> eval_rhs_checked(const SystemSpec& spec, double t,
                                     std::span<const double> x, std::span<const double> a);

}  // namespace imts::dsl
