#pragma once

#include "stein/numerics.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace stein {

/// Node kinds of the test-function expression language.
enum class Op { constant, variable, neg, sin, cos, exp, log, abs, sqrt, sign, add, sub, mul, div, pow };

struct ExprNode;
using ExprNodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    Op op = Op::constant;
    double value = 0.0;  // constant payload, or the exponent of Op::pow
    ExprNodePtr lhs;
    ExprNodePtr rhs;
};

/// Immutable expression tree in one real variable `x`.
class Expr {
public:
    Expr();  // the constant 0
    explicit Expr(ExprNodePtr root) : root_(std::move(root)) {}

    static Expr constant(double c);
    static Expr variable();

    double operator()(double x) const;
    const ExprNode& root() const { return *root_; }
    const ExprNodePtr& node() const { return root_; }

    bool depends_on_x() const;
    /// log and sqrt restrict the domain; flagged so callers can pick an interval.
    bool domain_restricted() const;

private:
    ExprNodePtr root_;
};

/// Grammar (see docs/expression_grammar.md):
///   expr  := term  (('+' | '-') term)*
///   term  := unary (('*' | '/') unary)*
///   unary := ('-' | '+') unary | power
///   power := primary ('^' unary)?        exponent must not depend on x
///   primary := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
Expr parse_expression(std::string_view text);

/// Exact symbolic derivative with light constant folding. abs uses the
/// almost-everywhere derivative sign(u) u', with sign(0) = 0.
Expr differentiate(const Expr& e);

/// Prints a fully parenthesised form that parses back to the same function.
std::string print(const Expr& e);

/// The expression with x replaced by (x + c).
Expr shift(const Expr& e, double c);

/// Test function g bundled with its first two derivatives and a grid
/// estimate of sup |g' g''| over the effective interval.
struct TestFunction {
    Expr g;
    Expr d1;
    Expr d2;
    Interval effective;
    double sup_g1g2 = 0.0;
    std::string text;

    double value(double x) const { return g(x); }
    double deriv(double x) const { return d1(x); }
    double deriv2(double x) const { return d2(x); }

    /// x -> g(x + c), with the effective interval moved by -c.
    TestFunction shifted(double c) const;
};

inline constexpr std::size_t kDefaultProbeCount = 256;

TestFunction make_test_function(const Expr& e, Interval effective, std::size_t probe_count = kDefaultProbeCount);
TestFunction make_test_function(std::string_view text, Interval effective,
                                std::size_t probe_count = kDefaultProbeCount);

/// Named built-ins: identity, square, sin, cosh.
Expr builtin_expression(std::string_view name);

/// Estimated polynomial growth order of |g| as x -> +inf (upper = true) or
/// -inf. Bounded functions give ~0, x^k gives ~k.
double growth_order(const Expr& g, bool upper);
double growth_order(const RealFn& g, bool upper);

}  // namespace stein
