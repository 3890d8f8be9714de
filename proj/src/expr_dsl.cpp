#include "imtsforge/expr_dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "imtsforge/float_text.hpp"

namespace imts::dsl {
namespace {

constexpr int kMaxStackDepth = 64;

struct Token {
    enum class Kind { number, ident, op, end };
    Kind kind{};
    std::string_view text;
    double number = 0.0;
    char op = 0;
    SourceLocation loc;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class ExprLexer {
public:
    ExprLexer(std::string_view text, int line, int column_offset)
        : text_(text), line_(line), column_offset_(column_offset) {
        advance();
    }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        current_.loc = {line_, column_offset_ + static_cast<int>(pos_) + 1};
        if (pos_ >= text_.size()) {
            current_.kind = Token::Kind::end;
            current_.text = {};
            return;
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = text_.data() + pos_;
            const char* end = text_.data() + text_.size();
            double value = 0.0;
            const auto res = std::from_chars(begin, end, value);
            if (res.ec != std::errc{}) {
                throw ParseError("malformed number", current_.loc);
            }
            current_.kind = Token::Kind::number;
            current_.number = value;
            current_.text = std::string_view(begin, static_cast<std::size_t>(res.ptr - begin));
            pos_ += current_.text.size();
            return;
        }
        if (is_ident_start(c)) {
            std::size_t end = pos_;
            while (end < text_.size() && is_ident_char(text_[end])) ++end;
            current_.kind = Token::Kind::ident;
            current_.text = text_.substr(pos_, end - pos_);
            pos_ = end;
            return;
        }
        if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
            current_.kind = Token::Kind::op;
            current_.op = c;
            current_.text = text_.substr(pos_, 1);
            ++pos_;
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", current_.loc);
    }

    std::string_view text_;
    int line_;
    int column_offset_;
    std::size_t pos_ = 0;
    Token current_;
};

std::optional<UnaryOp> function_by_name(std::string_view name) {
    if (name == "sin") return UnaryOp::sin;
    if (name == "cos") return UnaryOp::cos;
    if (name == "exp") return UnaryOp::exp;
    if (name == "log") return UnaryOp::log;
    if (name == "sqrt") return UnaryOp::sqrt;
    if (name == "abs") return UnaryOp::abs;
    if (name == "tanh") return UnaryOp::tanh;
    return std::nullopt;
}

// Expression parser bound to a SystemSpec being built; resolves symbols while
// parsing so unknown names fail at their exact token.
class ExprParser {
public:
    ExprParser(ExprLexer& lexer, const SystemSpec& spec) : lexer_(lexer), spec_(spec) {}

    Expr parse() {
        Expr expr;
        nodes_ = &expr.nodes;
        expr.root = parse_sum();
        const Token& t = lexer_.peek();
        if (t.kind != Token::Kind::end) {
            throw ParseError("unexpected trailing input '" + std::string(t.text) + "'", t.loc);
        }
        compile(expr);
        return expr;
    }

private:
    int add_node(ExprNode node) {
        nodes_->push_back(node);
        return static_cast<int>(nodes_->size()) - 1;
    }

    int parse_sum() {
        int lhs = parse_product();
        while (lexer_.peek().kind == Token::Kind::op &&
               (lexer_.peek().op == '+' || lexer_.peek().op == '-')) {
            const char op = lexer_.take().op;
            const int rhs = parse_product();
            ExprNode node;
            node.kind = ExprNode::Kind::binary;
            node.bop = op == '+' ? BinaryOp::add : BinaryOp::sub;
            node.lhs = lhs;
            node.rhs = rhs;
            lhs = add_node(node);
        }
        return lhs;
    }

    int parse_product() {
        int lhs = parse_unary();
        while (lexer_.peek().kind == Token::Kind::op &&
               (lexer_.peek().op == '*' || lexer_.peek().op == '/')) {
            const char op = lexer_.take().op;
            const int rhs = parse_unary();
            ExprNode node;
            node.kind = ExprNode::Kind::binary;
            node.bop = op == '*' ? BinaryOp::mul : BinaryOp::div;
            node.lhs = lhs;
            node.rhs = rhs;
            lhs = add_node(node);
        }
        return lhs;
    }

    int parse_unary() {
        const Token& t = lexer_.peek();
        if (t.kind == Token::Kind::op && (t.op == '-' || t.op == '+')) {
            const char op = lexer_.take().op;
            const int operand = parse_unary();
            if (op == '+') return operand;
            ExprNode node;
            node.kind = ExprNode::Kind::unary;
            node.uop = UnaryOp::neg;
            node.lhs = operand;
            return add_node(node);
        }
        return parse_power();
    }

    int parse_power() {
        const int base = parse_primary();
        if (lexer_.peek().kind == Token::Kind::op && lexer_.peek().op == '^') {
            lexer_.take();
            const int exponent = parse_unary();  // right-associative, signed exponents
            ExprNode node;
            node.kind = ExprNode::Kind::binary;
            node.bop = BinaryOp::pow;
            node.lhs = base;
            node.rhs = exponent;
            return add_node(node);
        }
        return base;
    }

    int parse_primary() {
        Token t = lexer_.take();
        if (t.kind == Token::Kind::number) {
            ExprNode node;
            node.kind = ExprNode::Kind::literal;
            node.value = t.number;
            return add_node(node);
        }
        if (t.kind == Token::Kind::op && t.op == '(') {
            const int inner = parse_sum();
            expect_op(')');
            return inner;
        }
        if (t.kind == Token::Kind::ident) {
            if (lexer_.peek().kind == Token::Kind::op && lexer_.peek().op == '(') {
                const auto fn = function_by_name(t.text);
                if (!fn) {
                    throw ParseError("unknown function '" + std::string(t.text) + "'", t.loc);
                }
                lexer_.take();
                const int arg = parse_sum();
                expect_op(')');
                ExprNode node;
                node.kind = ExprNode::Kind::unary;
                node.uop = *fn;
                node.lhs = arg;
                return add_node(node);
            }
            return resolve_symbol(t);
        }
        throw ParseError(t.kind == Token::Kind::end
                             ? std::string("unexpected end of expression")
                             : "unexpected token '" + std::string(t.text) + "'",
                         t.loc);
    }

    int resolve_symbol(const Token& t) {
        if (t.text == "t") {
            ExprNode node;
            node.kind = ExprNode::Kind::time_ref;
            return add_node(node);
        }
        if (t.text.size() >= 2 && t.text[0] == 'x' &&
            std::all_of(t.text.begin() + 1, t.text.end(),
                        [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            int idx = -1;
            std::from_chars(t.text.data() + 1, t.text.data() + t.text.size(), idx);
            if (idx < 0 || idx >= spec_.channels) {
                throw ParseError("channel symbol '" + std::string(t.text) + "' out of range (" +
                                     std::to_string(spec_.channels) + " channels)",
                                 t.loc);
            }
            ExprNode node;
            node.kind = ExprNode::Kind::channel_ref;
            node.index = idx;
            return add_node(node);
        }
        const auto it = std::find(spec_.constant_names.begin(), spec_.constant_names.end(),
                                  std::string(t.text));
        if (it == spec_.constant_names.end()) {
            throw ParseError("unknown symbol '" + std::string(t.text) + "'", t.loc);
        }
        ExprNode node;
        node.kind = ExprNode::Kind::constant_ref;
        node.index = static_cast<int>(it - spec_.constant_names.begin());
        return add_node(node);
    }

    void expect_op(char op) {
        const Token t = lexer_.take();
        if (t.kind != Token::Kind::op || t.op != op) {
            throw ParseError(std::string("expected '") + op + "'", t.loc);
        }
    }

    void compile(Expr& expr) {
        int depth = 0;
        emit(expr, expr.root, depth);
        if (expr.stack_depth > kMaxStackDepth) {
            throw ParseError("expression too deeply nested", {0, 0});
        }
    }

    void emit(Expr& expr, int node_index, int& depth) {
        const ExprNode& node = expr.nodes[static_cast<std::size_t>(node_index)];
        switch (node.kind) {
            case ExprNode::Kind::literal:
                expr.tape.push_back({Instr::Op::push_literal, node.value, -1});
                bump(expr, ++depth);
                return;
            case ExprNode::Kind::time_ref:
                expr.tape.push_back({Instr::Op::push_time, 0.0, -1});
                bump(expr, ++depth);
                return;
            case ExprNode::Kind::channel_ref:
                expr.tape.push_back({Instr::Op::push_channel, 0.0, node.index});
                bump(expr, ++depth);
                return;
            case ExprNode::Kind::constant_ref:
                expr.tape.push_back({Instr::Op::push_constant, 0.0, node.index});
                bump(expr, ++depth);
                return;
            case ExprNode::Kind::unary: {
                emit(expr, node.lhs, depth);
                static constexpr Instr::Op kUnary[] = {
                    Instr::Op::neg, Instr::Op::sin, Instr::Op::cos,  Instr::Op::exp,
                    Instr::Op::log, Instr::Op::sqrt, Instr::Op::abs, Instr::Op::tanh,
                };
                expr.tape.push_back({kUnary[static_cast<int>(node.uop)], 0.0, -1});
                return;
            }
            case ExprNode::Kind::binary: {
                emit(expr, node.lhs, depth);
                emit(expr, node.rhs, depth);
                static constexpr Instr::Op kBinary[] = {
                    Instr::Op::add, Instr::Op::sub, Instr::Op::mul, Instr::Op::div,
                    Instr::Op::pow,
                };
                expr.tape.push_back({kBinary[static_cast<int>(node.bop)], 0.0, -1});
                --depth;
                return;
            }
        }
    }

    void bump(Expr& expr, int depth) { expr.stack_depth = std::max(expr.stack_depth, depth); }

    ExprLexer& lexer_;
    const SystemSpec& spec_;
    std::vector<ExprNode>* nodes_ = nullptr;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// strips a trailing comment, respecting the quoted duration_unit string
std::string_view strip_comment(std::string_view line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

// real literal, optionally a ratio real/real (so constants like 8/3 stay exact
// in source form)
double parse_value(std::string_view text, SourceLocation loc) {
    const std::size_t slash = text.find('/');
    try {
        if (slash == std::string_view::npos) return parse_double(text);
        const double num = parse_double(trim(text.substr(0, slash)));
        const double den = parse_double(trim(text.substr(slash + 1)));
        return num / den;
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), loc);
    }
}

std::vector<std::string_view> split_fields(std::string_view s) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) fields.push_back(s.substr(start, i - start));
    }
    return fields;
}

bool looks_like_channel_symbol(std::string_view name) {
    return name.size() >= 2 && name[0] == 'x' &&
           std::all_of(name.begin() + 1, name.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

int render_precedence(const ExprNode& node) {
    switch (node.kind) {
        case ExprNode::Kind::binary:
            switch (node.bop) {
                case BinaryOp::add:
                case BinaryOp::sub: return 1;
                case BinaryOp::mul:
                case BinaryOp::div: return 2;
                case BinaryOp::pow: return 4;
            }
            return 1;
        case ExprNode::Kind::unary:
            return node.uop == UnaryOp::neg ? 3 : 5;
        case ExprNode::Kind::literal:
            return node.value < 0.0 ? 3 : 5;  // negative literal prints a leading '-'
        default:
            return 5;
    }
}

void render_expr_named(const SystemSpec& spec, const Expr& expr, int index, int min_prec,
                       std::string& out) {
    const ExprNode& node = expr.nodes[static_cast<std::size_t>(index)];
    const int prec = render_precedence(node);
    const bool parens = prec < min_prec;
    if (parens) out += '(';
    switch (node.kind) {
        case ExprNode::Kind::literal:
            out += format_double(node.value);
            break;
        case ExprNode::Kind::time_ref:
            out += 't';
            break;
        case ExprNode::Kind::channel_ref:
            out += 'x';
            out += std::to_string(node.index);
            break;
        case ExprNode::Kind::constant_ref:
            out += spec.constant_names[static_cast<std::size_t>(node.index)];
            break;
        case ExprNode::Kind::unary:
            if (node.uop == UnaryOp::neg) {
                out += '-';
                render_expr_named(spec, expr, node.lhs, 3, out);
            } else {
                static constexpr const char* kNames[] = {"-",   "sin",  "cos", "exp",
                                                         "log", "sqrt", "abs", "tanh"};
                out += kNames[static_cast<int>(node.uop)];
                out += '(';
                render_expr_named(spec, expr, node.lhs, 0, out);
                out += ')';
            }
            break;
        case ExprNode::Kind::binary: {
            static constexpr const char* kOps[] = {" + ", " - ", " * ", " / ", "^"};
            if (node.bop == BinaryOp::pow) {
                render_expr_named(spec, expr, node.lhs, 5, out);
                out += '^';
                render_expr_named(spec, expr, node.rhs, 3, out);
            } else {
                render_expr_named(spec, expr, node.lhs, prec, out);
                out += kOps[static_cast<int>(node.bop)];
                render_expr_named(spec, expr, node.rhs, prec + 1, out);
            }
            break;
        }
    }
    if (parens) out += ')';
}

bool expr_equal(const Expr& a, int ia, const Expr& b, int ib) {
    const ExprNode& na = a.nodes[static_cast<std::size_t>(ia)];
    const ExprNode& nb = b.nodes[static_cast<std::size_t>(ib)];
    if (na.kind != nb.kind) return false;
    switch (na.kind) {
        case ExprNode::Kind::literal: return na.value == nb.value;
        case ExprNode::Kind::time_ref: return true;
        case ExprNode::Kind::channel_ref:
        case ExprNode::Kind::constant_ref: return na.index == nb.index;
        case ExprNode::Kind::unary:
            return na.uop == nb.uop && expr_equal(a, na.lhs, b, nb.lhs);
        case ExprNode::Kind::binary:
            return na.bop == nb.bop && expr_equal(a, na.lhs, b, nb.lhs) &&
                   expr_equal(a, na.rhs, b, nb.rhs);
    }
    return false;
}

}  // namespace

SystemSpec parse_system(std::string_view source) {
    SystemSpec spec;
    bool have_name = false;
    bool have_channels = false;
    std::vector<int> rhs_defined;  // channel indices with a d-line
    std::vector<std::pair<int, Expr>> rhs_exprs;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        const std::size_t nl = source.find('\n', pos);
        std::string_view raw = source.substr(pos, nl == std::string_view::npos ? source.size() - pos
                                                                               : nl - pos);
        pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const std::string_view line = trim(strip_comment(raw));
        if (line.empty()) continue;

        const std::size_t head_end = line.find_first_of(" \t=");
        const std::string_view head = line.substr(0, head_end);
        const int head_col = static_cast<int>(raw.find(head.front()) + 1);
        const SourceLocation loc{line_no, head_col};
        const std::string_view rest =
            head_end == std::string_view::npos ? std::string_view{} : trim(line.substr(head_end));

        if (head == "system") {
            if (have_name) throw ParseError("duplicate 'system' line", loc);
            if (rest.empty()) throw ParseError("missing system name", loc);
            const auto fields = split_fields(rest);
            if (fields.size() != 1 || !is_ident_start(fields[0].front()) ||
                !std::all_of(fields[0].begin(), fields[0].end(), is_ident_char)) {
                throw ParseError("system name must be a single identifier", loc);
            }
            spec.name = std::string(fields[0]);
            have_name = true;
        } else if (head == "channels") {
            if (have_channels) throw ParseError("duplicate 'channels' line", loc);
            int value = 0;
            const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), value);
            if (res.ec != std::errc{} || res.ptr != rest.data() + rest.size() || value < 1) {
                throw ParseError("channels must be a positive integer", loc);
            }
            spec.channels = value;
            have_channels = true;
        } else if (head == "constants") {
            for (const auto field : split_fields(rest)) {
                const std::size_t eq = field.find('=');
                if (eq == std::string_view::npos || eq == 0 || eq == field.size() - 1) {
                    throw ParseError("constants entries must look like name=value", loc);
                }
                const std::string name(field.substr(0, eq));
                if (!is_ident_start(name.front()) ||
                    !std::all_of(name.begin(), name.end(), is_ident_char)) {
                    throw ParseError("invalid constant name '" + name + "'", loc);
                }
                if (name == "t" || looks_like_channel_symbol(name)) {
                    throw ParseError("constant name '" + name + "' collides with a reserved symbol",
                                     loc);
                }
                if (std::find(spec.constant_names.begin(), spec.constant_names.end(), name) !=
                    spec.constant_names.end()) {
                    throw ParseError("duplicate constant name '" + name + "'", loc);
                }
                spec.constant_names.push_back(name);
                spec.constant_values.push_back(parse_value(field.substr(eq + 1), loc));
            }
        } else if (head == "init") {
            for (const auto field : split_fields(rest)) {
                spec.initial_values.push_back(parse_value(field, loc));
            }
        } else if (head == "duration_unit") {
            const std::size_t open = rest.find('"');
            const std::size_t close = rest.rfind('"');
            if (open == std::string_view::npos || close == open) {
                throw ParseError("duration_unit expects a quoted string", loc);
            }
            spec.duration_unit = std::string(rest.substr(open + 1, close - open - 1));
        } else if (head.size() >= 2 && head[0] == 'd' &&
                   std::all_of(head.begin() + 1, head.end(), [](char c) {
                       return std::isdigit(static_cast<unsigned char>(c));
                   })) {
            if (!have_channels) {
                throw ParseError("'channels' must appear before derivative lines", loc);
            }
            int idx = -1;
            std::from_chars(head.data() + 1, head.data() + head.size(), idx);
            if (idx < 0 || idx >= spec.channels) {
                throw ParseError("derivative index d" + std::to_string(idx) + " out of range", loc);
            }
            if (std::find(rhs_defined.begin(), rhs_defined.end(), idx) != rhs_defined.end()) {
                throw ParseError("duplicate derivative line d" + std::to_string(idx), loc);
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ParseError("derivative line requires '='", loc);
            }
            const int expr_col = static_cast<int>(raw.find('=')) + 1;
            ExprLexer lexer(line.substr(eq + 1), line_no, head_col - 1 + expr_col);
            ExprParser parser(lexer, spec);
            rhs_exprs.emplace_back(idx, parser.parse());
            rhs_defined.push_back(idx);
        } else {
            throw ParseError("unknown directive '" + std::string(head) + "'", loc);
        }
    }

    if (!have_name) throw ParseError("missing 'system' line", {line_no, 1});
    if (!have_channels) throw ParseError("missing 'channels' line", {line_no, 1});
    if (static_cast<int>(spec.initial_values.size()) != spec.channels) {
        throw ParseError("init provides " + std::to_string(spec.initial_values.size()) +
                             " values for " + std::to_string(spec.channels) + " channels",
                         {line_no, 1});
    }
    if (static_cast<int>(rhs_exprs.size()) != spec.channels) {
        throw ParseError("found " + std::to_string(rhs_exprs.size()) +
                             " derivative lines for " + std::to_string(spec.channels) +
                             " channels",
                         {line_no, 1});
    }
    spec.rhs.resize(static_cast<std::size_t>(spec.channels));
    for (auto& [idx, expr] : rhs_exprs) {
        spec.rhs[static_cast<std::size_t>(idx)] = std::move(expr);
    }
    return spec;
}

std::string render_system(const SystemSpec& spec) {
    std::string out;
    out += "system " + spec.name + "\n";
    out += "channels " + std::to_string(spec.channels) + "\n";
    if (!spec.constant_names.empty()) {
        out += "constants";
        for (std::size_t j = 0; j < spec.constant_names.size(); ++j) {
            out += ' ';
            out += spec.constant_names[j];
            out += '=';
            out += format_double(spec.constant_values[j]);
        }
        out += '\n';
    }
    out += "init";
    for (const double v : spec.initial_values) {
        out += ' ';
        out += format_double(v);
    }
    out += '\n';
    if (!spec.duration_unit.empty()) {
        out += "duration_unit \"" + spec.duration_unit + "\"\n";
    }
    for (int c = 0; c < spec.channels; ++c) {
        out += 'd';
        out += std::to_string(c);
        out += " = ";
        render_expr_named(spec, spec.rhs[static_cast<std::size_t>(c)],
                          spec.rhs[static_cast<std::size_t>(c)].root, 0, out);
        out += '\n';
    }
    return out;
}

bool structurally_equal(const SystemSpec& a, const SystemSpec& b) {
    if (a.name != b.name || a.channels != b.channels ||
        a.constant_names != b.constant_names || a.constant_values != b.constant_values ||
        a.initial_values != b.initial_values || a.duration_unit != b.duration_unit) {
        return false;
    }
    for (int c = 0; c < a.channels; ++c) {
        const auto& ea = a.rhs[static_cast<std::size_t>(c)];
        const auto& eb = b.rhs[static_cast<std::size_t>(c)];
        if (!expr_equal(ea, ea.root, eb, eb.root)) return false;
    }
    return true;
}

EvalStatus eval_rhs(const SystemSpec& spec, double t, std::span<const double> x,
                    std::span<const double> a, std::span<double> dxdt) noexcept {
    for (std::size_t c = 0; c < x.size(); ++c) {
        if (!std::isfinite(x[c])) return {false, static_cast<int>(c)};
    }
    std::array<double, kMaxStackDepth> stack;
    for (int c = 0; c < spec.channels; ++c) {
        const Expr& expr = spec.rhs[static_cast<std::size_t>(c)];
        int top = -1;
        for (const Instr& instr : expr.tape) {
            switch (instr.op) {
                case Instr::Op::push_literal: stack[++top] = instr.imm; break;
                case Instr::Op::push_time: stack[++top] = t; break;
                case Instr::Op::push_channel:
                    stack[++top] = x[static_cast<std::size_t>(instr.index)];
                    break;
                case Instr::Op::push_constant:
                    stack[++top] = a[static_cast<std::size_t>(instr.index)];
                    break;
                case Instr::Op::neg: stack[top] = -stack[top]; break;
                case Instr::Op::sin: stack[top] = std::sin(stack[top]); break;
                case Instr::Op::cos: stack[top] = std::cos(stack[top]); break;
                case Instr::Op::exp: stack[top] = std::exp(stack[top]); break;
                case Instr::Op::tanh: stack[top] = std::tanh(stack[top]); break;
                case Instr::Op::abs: stack[top] = std::fabs(stack[top]); break;
                case Instr::Op::log:
                    stack[top] = std::log(stack[top]);
                    if (!std::isfinite(stack[top])) return {false, c};
                    break;
                case Instr::Op::sqrt:
                    stack[top] = std::sqrt(stack[top]);
                    if (!std::isfinite(stack[top])) return {false, c};
                    break;
                case Instr::Op::add: --top; stack[top] += stack[top + 1]; break;
                case Instr::Op::sub: --top; stack[top] -= stack[top + 1]; break;
                case Instr::Op::mul: --top; stack[top] *= stack[top + 1]; break;
                case Instr::Op::div:
                    --top;
                    stack[top] /= stack[top + 1];
                    if (!std::isfinite(stack[top])) return {false, c};
                    break;
                case Instr::Op::pow:
                    --top;
                    stack[top] = std::pow(stack[top], stack[top + 1]);
                    if (!std::isfinite(stack[top])) return {false, c};
                    break;
            }
        }
        if (!std::isfinite(stack[0])) return {false, c};
        dxdt[static_cast<std::size_t>(c)] = stack[0];
    }
    return {};
}

std::vector<double> eval_rhs_checked(const SystemSpec& spec, double t,
                                     std::span<const double> x, std::span<const double> a) {
    std::vector<double> dxdt(static_cast<std::size_t>(spec.channels));
    const EvalStatus status = eval_rhs(spec, t, x, a, dxdt);
    if (!status.ok) {
        throw EvalError("domain error evaluating derivative of channel " +
                            std::to_string(status.channel),
                        status.channel);
    }
    return dxdt;
}

}  // namespace imts::dsl
