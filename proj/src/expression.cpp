#include "magweyl/expression.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <tuple>

namespace magweyl {

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& msg)
    : std::runtime_error(msg), offset_(offset), expected_(std::move(expected)) {}

namespace {

using Op = Expression::Op;

std::shared_ptr<const Expression::Node> make_node(Op op, double value = 0.0, int axis = 0,
                                                  std::vector<Expression> args = {}) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->value = value;
    n->axis = axis;
    n->args = std::move(args);
    return n;
}

bool is_const(const Expression& e, double v) { return e.op() == Op::Const && e.value() == v; }
bool is_literal(const Expression& e) { return e.op() == Op::Const; }

const char* function_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Arctan: return "arctan";
        case Op::Tanh: return "tanh";
        case Op::Abs: return "abs";
        case Op::Jap:
        case Op::JapXi: return "jap";
        default: return nullptr;
    }
}

double apply_unary(Op op, double a) {
    switch (op) {
        case Op::Neg: return -a;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Log:
            if (!(a > 0.0)) throw EvaluationError("log of non-positive value");
            return std::log(a);
        case Op::Sqrt:
            if (a < 0.0) throw EvaluationError("sqrt of negative value");
            return std::sqrt(a);
        case Op::Arctan: return std::atan(a);
        case Op::Tanh: return std::tanh(a);
        case Op::Abs: return std::fabs(a);
        default: throw EvaluationError("bad unary op");
    }
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div:
            if (std::fabs(b) < 1e-300) throw EvaluationError("division by (near) zero");
            return a / b;
        case Op::Pow: {
            if (a < 0.0 && b != std::floor(b))
                throw EvaluationError("negative base with non-integer exponent");
            if (a == 0.0 && b < 0.0) throw EvaluationError("zero raised to a negative power");
            if (b == 2.0) return a * a;
            return std::pow(a, b);
        }
        default: throw EvaluationError("bad binary op");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// construction

Expression::Expression() : node_(make_node(Op::Const, 0.0)) {}
Expression::Expression(double c) : node_(make_node(Op::Const, c)) {}

Expression Expression::x(int axis) { return Expression(make_node(Op::VarX, 0.0, axis)); }
Expression Expression::xi(int axis) { return Expression(make_node(Op::VarXi, 0.0, axis)); }
Expression Expression::pi() { return Expression(make_node(Op::Pi)); }
Expression Expression::jap_xi() { return Expression(make_node(Op::JapXi)); }

Expression Expression::unary(Op op, const Expression& a) {
    if (op == Op::Neg) {
        if (is_literal(a)) return Expression(-a.value());
        if (a.op() == Op::Neg) return a.child(0);
    }
    return Expression(make_node(op, 0.0, 0, {a}));
}

Expression Expression::binary(Op op, const Expression& a, const Expression& b) {
    switch (op) {
        case Op::Add:
            if (is_literal(a) && is_literal(b)) return Expression(a.value() + b.value());
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Op::Sub:
            if (is_literal(a) && is_literal(b)) return Expression(a.value() - b.value());
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return unary(Op::Neg, b);
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return Expression(0.0);
            if (is_literal(a) && is_literal(b)) return Expression(a.value() * b.value());
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Div:
            if (is_const(a, 0.0)) return Expression(0.0);
            if (is_const(b, 1.0)) return a;
            if (is_literal(a) && is_literal(b) && b.value() != 0.0) return Expression(a.value() / b.value());
            break;
        case Op::Pow:
            if (is_const(b, 0.0)) return Expression(1.0);
            if (is_const(b, 1.0)) return a;
            break;
        default: break;
    }
    return Expression(make_node(op, 0.0, 0, {a, b}));
}

Expression Expression::jap(const std::vector<Expression>& args) {
    return Expression(make_node(Op::Jap, 0.0, 0, args));
}

Expression operator+(const Expression& a, const Expression& b) { return Expression::binary(Op::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return Expression::binary(Op::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return Expression::binary(Op::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return Expression::binary(Op::Div, a, b); }
Expression operator-(const Expression& a) { return Expression::unary(Op::Neg, a); }

Expression::Op Expression::op() const { return node_->op; }
double Expression::value() const { return node_->value; }
int Expression::axis() const { return node_->axis; }
std::size_t Expression::arity() const { return node_->args.size(); }
Expression Expression::child(std::size_t i) const { return node_->args.at(i); }

// ---------------------------------------------------------------------------
// evaluation

double Expression::evaluate(std::span<const double> x, std::span<const double> xi) const {
    const Node& n = *node_;
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Pi: return std::numbers::pi;
        case Op::E: return std::numbers::e;
        case Op::VarX:
            if (n.axis >= static_cast<int>(x.size())) throw EvaluationError("x index out of range");
            return x[n.axis];
        case Op::VarXi:
            if (n.axis >= static_cast<int>(xi.size())) throw EvaluationError("xi index out of range");
            return xi[n.axis];
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
            return apply_binary(n.op, n.args[0].evaluate(x, xi), n.args[1].evaluate(x, xi));
        case Op::Jap: {
            double s = 1.0;
            for (const auto& a : n.args) {
                double v = a.evaluate(x, xi);
                s += v * v;
            }
            return std::sqrt(s);
        }
        case Op::JapXi: {
            double s = 1.0;
            for (double v : xi) s += v * v;
            return std::sqrt(s);
        }
        default: return apply_unary(n.op, n.args[0].evaluate(x, xi));
    }
}

// ---------------------------------------------------------------------------
// differentiation

Expression Expression::derivative(Variable v) const {
    const Node& n = *node_;
    auto d = [&](std::size_t i) { return n.args[i].derivative(v); };
    const Expression self(node_);
    switch (n.op) {
        case Op::Const: case Op::Pi: case Op::E: return Expression(0.0);
        case Op::VarX: return Expression(v.kind == VarKind::X && v.index == n.axis ? 1.0 : 0.0);
        case Op::VarXi: return Expression(v.kind == VarKind::Xi && v.index == n.axis ? 1.0 : 0.0);
        case Op::Add: return d(0) + d(1);
        case Op::Sub: return d(0) - d(1);
        case Op::Neg: return -d(0);
        case Op::Mul: return d(0) * n.args[1] + n.args[0] * d(1);
        case Op::Div: {
            const auto& a = n.args[0];
            const auto& b = n.args[1];
            Expression db = d(1);
            if (is_const(db, 0.0)) return d(0) / b;
            return d(0) / b - a * db / binary(Op::Pow, b, Expression(2.0));
        }
        case Op::Pow: {
            const auto& a = n.args[0];
            const auto& b = n.args[1];
            if (b.is_constant()) {
                Expression da = d(0);
                if (is_const(da, 0.0)) return Expression(0.0);
                return b * binary(Op::Pow, a, b - Expression(1.0)) * da;
            }
            return self * (d(1) * unary(Op::Log, a) + b * d(0) / a);
        }
        case Op::Sin: return unary(Op::Cos, n.args[0]) * d(0);
        case Op::Cos: return -(unary(Op::Sin, n.args[0]) * d(0));
        case Op::Exp: return self * d(0);
        case Op::Log: return d(0) / n.args[0];
        case Op::Sqrt: return d(0) / (Expression(2.0) * self);
        case Op::Arctan:
            return d(0) / (Expression(1.0) + binary(Op::Pow, n.args[0], Expression(2.0)));
        case Op::Tanh:
            return (Expression(1.0) - binary(Op::Pow, self, Expression(2.0))) * d(0);
        case Op::Abs: return n.args[0] / self * d(0);
        case Op::Jap: {
            Expression num(0.0);
            for (std::size_t i = 0; i < n.args.size(); ++i) num = num + n.args[i] * d(i);
            return num / self;
        }
        case Op::JapXi:
            if (v.kind == VarKind::X) return Expression(0.0);
            return xi(v.index) / self;
    }
    return Expression(0.0);
}

// ---------------------------------------------------------------------------
// queries

bool Expression::depends_on(VarKind kind) const {
    const Node& n = *node_;
    if (n.op == Op::VarX) return kind == VarKind::X;
    if (n.op == Op::VarXi) return kind == VarKind::Xi;
    if (n.op == Op::JapXi) return kind == VarKind::Xi;
    for (const auto& a : n.args)
        if (a.depends_on(kind)) return true;
    return false;
}

int Expression::max_axis(VarKind kind) const {
    const Node& n = *node_;
    int m = 0;
    if (n.op == Op::VarX && kind == VarKind::X) m = n.axis + 1;
    if (n.op == Op::VarXi && kind == VarKind::Xi) m = n.axis + 1;
    for (const auto& a : n.args) m = std::max(m, a.max_axis(kind));
    return m;
}

bool Expression::uses_jap_xi() const {
    if (node_->op == Op::JapXi) return true;
    for (const auto& a : node_->args)
        if (a.uses_jap_xi()) return true;
    return false;
}

int Expression::polynomial_degree_x() const {
    const Node& n = *node_;
    if (depends_on_xi()) return -1;
    if (!depends_on_x()) return 0;
    switch (n.op) {
        case Op::VarX: return 1;
        case Op::Neg: return n.args[0].polynomial_degree_x();
        case Op::Add:
        case Op::Sub: {
            int a = n.args[0].polynomial_degree_x();
            int b = n.args[1].polynomial_degree_x();
            return (a < 0 || b < 0) ? -1 : std::max(a, b);
        }
        case Op::Mul: {
            int a = n.args[0].polynomial_degree_x();
            int b = n.args[1].polynomial_degree_x();
            return (a < 0 || b < 0) ? -1 : a + b;
        }
        case Op::Div:
            if (n.args[1].depends_on_x()) return -1;
            return n.args[0].polynomial_degree_x();
        case Op::Pow: {
            if (n.args[1].depends_on_x()) return -1;
            double p = n.args[1].evaluate({}, {});
            int a = n.args[0].polynomial_degree_x();
            if (a < 0 || p < 0 || p != std::floor(p) || p > 64) return -1;
            return a * static_cast<int>(p);
        }
        default: return -1;
    }
}

bool Expression::structurally_equal(const Expression& other) const {
    const Node& a = *node_;
    const Node& b = *other.node_;
    if (a.op != b.op || a.args.size() != b.args.size()) return false;
    if (a.op == Op::Const && a.value != b.value) return false;
    if ((a.op == Op::VarX || a.op == Op::VarXi) && a.axis != b.axis) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!a.args[i].structurally_equal(b.args[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// printing

namespace {

int precedence(Op op) {
    switch (op) {
        case Op::Add: case Op::Sub: return 1;
        case Op::Mul: case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string print(const Expression& e);

std::string wrap(const Expression& e, int min_prec) {
    int p = precedence(e.op());
    if (e.op() == Op::Const && e.value() < 0) p = 3;  // prints with a leading minus
    std::string s = print(e);
    return p < min_prec ? "(" + s + ")" : s;
}

std::string print(const Expression& e) {
    switch (e.op()) {
        case Op::Const: return format_number(e.value());
        case Op::Pi: return "pi";
        case Op::E: return "e";
        case Op::VarX: return "x" + std::to_string(e.axis() + 1);
        case Op::VarXi: return "xi" + std::to_string(e.axis() + 1);
        case Op::Add: return wrap(e.child(0), 1) + " + " + wrap(e.child(1), 2);
        case Op::Sub: return wrap(e.child(0), 1) + " - " + wrap(e.child(1), 2);
        case Op::Mul: return wrap(e.child(0), 2) + "*" + wrap(e.child(1), 3);
        case Op::Div: return wrap(e.child(0), 2) + "/" + wrap(e.child(1), 3);
        case Op::Neg: return "-" + wrap(e.child(0), 3);
        case Op::Pow: {
            std::string base = wrap(e.child(0), 5);
            if (e.child(0).op() == Op::Const && e.child(0).value() < 0) base = "(" + print(e.child(0)) + ")";
            return base + "^" + wrap(e.child(1), 3);
        }
        case Op::JapXi: return "jap(xi)";
        case Op::Jap: {
            std::string s = "jap(";
            for (std::size_t i = 0; i < e.arity(); ++i) {
                if (i) s += ", ";
                s += print(e.child(i));
            }
            return s + ")";
        }
        default: return std::string(function_name(e.op())) + "(" + print(e.child(0)) + ")";
    }
}

}  // namespace

std::string Expression::to_string() const { return print(*this); }

// ---------------------------------------------------------------------------
// parsing

namespace {

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    Expression parse() {
        Expression e = expr();
        skip();
        if (pos_ < s_.size()) fail({"operator", "end of input"}, "unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(std::vector<std::string> expected, const std::string& what) {
        std::string msg = "parse error at offset " + std::to_string(pos_ + 1) + ": " + what;
        if (!expected.empty()) {
            msg += ", expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i) msg += " or ";
                msg += "'" + expected[i] + "'";
            }
        }
        throw ParseError(pos_ + 1, std::move(expected), msg);
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    static Expression build(Op op, std::vector<Expression> args) { return Expression::raw(op, std::move(args)); }

    Expression expr() {
        Expression lhs = term();
        for (;;) {
            if (accept('+')) lhs = build(Op::Add, {lhs, term()});
            else if (accept('-')) lhs = build(Op::Sub, {lhs, term()});
            else return lhs;
        }
    }

    Expression term() {
        Expression lhs = unary();
        for (;;) {
            if (accept('*')) lhs = build(Op::Mul, {lhs, unary()});
            else if (accept('/')) lhs = build(Op::Div, {lhs, unary()});
            else return lhs;
        }
    }

    Expression unary() {
        if (accept('-')) return build(Op::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    Expression power() {
        Expression base = primary();
        if (accept('^')) return build(Op::Pow, {base, unary()});
        return base;
    }

    Expression primary() {
        skip();
        if (pos_ >= s_.size()) fail({"number", "identifier", "("}, "unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expression e = expr();
            if (!accept(')')) {
                skip();
                fail({")"}, pos_ >= s_.size() ? "unexpected end of input" : "unbalanced parenthesis");
            }
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail({"number", "identifier", "("}, "unexpected '" + std::string(1, c) + "'");
    }

    Expression number() {
        const char* begin = s_.data() + pos_;
        std::string tmp(s_.substr(pos_));
        char* end = nullptr;
        double v = std::strtod(tmp.c_str(), &end);
        std::size_t len = static_cast<std::size_t>(end - tmp.c_str());
        if (len == 0) fail({"number"}, "malformed number");
        (void)begin;
        pos_ += len;
        return Expression(v);
    }

    Expression identifier() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string name(s_.substr(start, pos_ - start));

        auto var_index = [&](std::string_view prefix) -> int {
            if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return -1;
            std::string digits = name.substr(prefix.size());
            for (char d : digits)
                if (!std::isdigit(static_cast<unsigned char>(d))) return -1;
            if (digits[0] == '0') return -1;
            return std::stoi(digits) - 1;
        };

        if (name == "pi") return build(Op::Pi, {});
        if (name == "e") return build(Op::E, {});
        if (int k = var_index("xi"); k >= 0) return Expression::xi(k);
        if (int k = var_index("x"); k >= 0) return Expression::x(k);

        Op op;
        if (name == "sin") op = Op::Sin;
        else if (name == "cos") op = Op::Cos;
        else if (name == "exp") op = Op::Exp;
        else if (name == "log") op = Op::Log;
        else if (name == "sqrt") op = Op::Sqrt;
        else if (name == "arctan") op = Op::Arctan;
        else if (name == "tanh") op = Op::Tanh;
        else if (name == "abs") op = Op::Abs;
        else if (name == "jap") op = Op::Jap;
        else {
            pos_ = start;
            fail({}, "unknown identifier '" + name + "'");
        }

        if (!accept('(')) fail({"("}, "function '" + name + "' requires an argument list");
        std::vector<Expression> args;
        if (op == Op::Jap) {
            // jap(xi) is the bracket of the whole momentum vector
            std::size_t save = pos_;
            skip();
            if (s_.substr(pos_, 2) == "xi") {
                std::size_t after = pos_ + 2;
                while (after < s_.size() && std::isspace(static_cast<unsigned char>(s_[after]))) ++after;
                if (after < s_.size() && s_[after] == ')') {
                    pos_ = after + 1;
                    return Expression::jap_xi();
                }
            }
            pos_ = save;
        }
        args.push_back(expr());
        while (accept(',')) {
            if (op != Op::Jap) {
                --pos_;
                fail({")"}, "arity mismatch: '" + name + "' takes one argument");
            }
            args.push_back(expr());
        }
        if (!accept(')')) {
            skip();
            std::vector<std::string> exp = {")"};
            if (op == Op::Jap) exp.push_back(",");
            fail(exp, pos_ >= s_.size() ? "unexpected end of input" : "unbalanced parenthesis");
        }
        return build(op, std::move(args));
    }
};

}  // namespace

Expression parse_expression(std::string_view text) { return Parser(text).parse(); }

// Parser output keeps the literal structure of the text (no folding) so that
// parse(print(parse(s))) reproduces the same tree.
Expression Expression::raw(Op op, std::vector<Expression> args) {
    return Expression(make_node(op, 0.0, 0, std::move(args)));
}

// ---------------------------------------------------------------------------
// compiled evaluation

namespace {

void emit(const Expression& e, std::vector<std::tuple<Op, double, int, int>>& out) {
    for (std::size_t i = 0; i < e.arity(); ++i) emit(e.child(i), out);
    out.emplace_back(e.op(), e.op() == Op::Const ? e.value() : 0.0, e.axis(), static_cast<int>(e.arity()));
}

}  // namespace

CompiledExpression::CompiledExpression(const Expression& e) : source_(e) {
    std::vector<std::tuple<Op, double, int, int>> flat;
    emit(e, flat);
    int depth = 0;
    for (auto& [op, v, ax, cnt] : flat) {
        code_.push_back({op, v, ax, cnt});
        depth += 1 - cnt;
        max_stack_ = std::max(max_stack_, depth);
    }
}

double CompiledExpression::evaluate(std::span<const double> x, std::span<const double> xi) const {
    double small[64] = {};
    std::vector<double> big;
    double* st = small;
    if (max_stack_ > 64) {
        big.resize(max_stack_);
        st = big.data();
    }
    int top = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Op::Const: st[top++] = in.value; break;
            case Op::Pi: st[top++] = std::numbers::pi; break;
            case Op::E: st[top++] = std::numbers::e; break;
            case Op::VarX:
                if (in.axis >= static_cast<int>(x.size())) throw EvaluationError("x index out of range");
                st[top++] = x[in.axis];
                break;
            case Op::VarXi:
                if (in.axis >= static_cast<int>(xi.size())) throw EvaluationError("xi index out of range");
                st[top++] = xi[in.axis];
                break;
            case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
                --top;
                st[top - 1] = apply_binary(in.op, st[top - 1], st[top]);
                break;
            case Op::Jap: {
                double s = 1.0;
                for (int k = 0; k < in.count; ++k) s += st[top - 1 - k] * st[top - 1 - k];
                top -= in.count;
                st[top++] = std::sqrt(s);
                break;
            }
            case Op::JapXi: {
                double s = 1.0;
                for (double v : xi) s += v * v;
                st[top++] = std::sqrt(s);
                break;
            }
            default: st[top - 1] = apply_unary(in.op, st[top - 1]); break;
        }
    }
    return st[0];
}

}  // namespace magweyl
