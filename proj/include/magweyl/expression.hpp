#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magweyl {

// Parse failure. offset is the 1-based byte position of the offending token
// (one past the last character when the input ended early).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& msg);
    std::size_t offset() const { return offset_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class VarKind { X, Xi };

struct Variable {
    VarKind kind;
    int index;  // 0-based axis
};

// Immutable expression tree over x1..xn, xi1..xin.
class Expression {
public:
    enum class Op {
        Const, Pi, E, VarX, VarXi,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp, Log, Sqrt, Arctan, Tanh, Abs,
        Jap,    // sqrt(1 + sum of squared arguments)
        JapXi,  // sqrt(1 + |xi|^2) over every momentum component
    };

    struct Node;

    Expression();  // the constant 0
    explicit Expression(double c);

    static Expression constant(double c) { return Expression(c); }
    static Expression x(int axis);
    static Expression xi(int axis);
    static Expression pi();
    static Expression jap_xi();
    static Expression unary(Op op, const Expression& a);
    static Expression binary(Op op, const Expression& a, const Expression& b);
    static Expression jap(const std::vector<Expression>& args);
    // Node without constant folding (the parser uses this).
    static Expression raw(Op op, std::vector<Expression> args);

    Op op() const;
    double value() const;   // literal value for Const
    int axis() const;       // axis for VarX / VarXi
    std::size_t arity() const;
    Expression child(std::size_t i) const;

    // Tree-walking evaluation; prefer CompiledExpression in hot loops.
    double evaluate(std::span<const double> x, std::span<const double> xi) const;

    Expression derivative(Variable v) const;
    Expression derivative(VarKind kind, int axis) const { return derivative(Variable{kind, axis}); }

    std::string to_string() const;

    bool depends_on(VarKind kind) const;
    bool depends_on_x() const { return depends_on(VarKind::X); }
    bool depends_on_xi() const { return depends_on(VarKind::Xi); }
    bool is_constant() const { return !depends_on_x() && !depends_on_xi(); }
    // Largest axis index referenced (+1) for the given kind; JapXi counts as 0.
    int max_axis(VarKind kind) const;
    bool uses_jap_xi() const;

    // Total polynomial degree in the x variables, treating xi as absent.
    // Returns -1 when the expression is not a polynomial in x (or uses xi).
    int polynomial_degree_x() const;

    bool structurally_equal(const Expression& other) const;

    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression operator/(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a);

    const std::shared_ptr<const Node>& node() const { return node_; }

private:
    explicit Expression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct Expression::Node {
    Op op;
    double value = 0.0;
    int axis = 0;
    std::vector<Expression> args;
};

Expression parse_expression(std::string_view text);

// Flat postfix program for fast repeated evaluation. Thread-safe for
// concurrent evaluate() calls (scratch storage is per call).
class CompiledExpression {
public:
    CompiledExpression() = default;
    explicit CompiledExpression(const Expression& e);

    double evaluate(std::span<const double> x, std::span<const double> xi) const;
    const Expression& source() const { return source_; }

private:
    struct Instr {
        Expression::Op op;
        double value;
        int axis;
        int count;
    };
    Expression source_;
    std::vector<Instr> code_;
    int max_stack_ = 0;
};

}  // namespace magweyl
