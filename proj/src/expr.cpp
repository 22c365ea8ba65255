#include "stein/expr.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace stein {

namespace {

ExprNodePtr leaf(Op op, double value = 0.0) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    return n;
}

ExprNodePtr node(Op op, ExprNodePtr lhs, ExprNodePtr rhs = nullptr, double value = 0.0) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->value = value;
    return n;
}

bool is_const(const ExprNodePtr& n) { return n->op == Op::constant; }
bool is_const(const ExprNodePtr& n, double c) { return n->op == Op::constant && n->value == c; }

double eval(const ExprNode& n, double x) {
    switch (n.op) {
        case Op::constant: return n.value;
        case Op::variable: return x;
        case Op::neg: return -eval(*n.lhs, x);
        case Op::sin: return std::sin(eval(*n.lhs, x));
        case Op::cos: return std::cos(eval(*n.lhs, x));
        case Op::exp: return std::exp(eval(*n.lhs, x));
        case Op::log: return std::log(eval(*n.lhs, x));
        case Op::abs: return std::abs(eval(*n.lhs, x));
        case Op::sqrt: return std::sqrt(eval(*n.lhs, x));
        case Op::sign: {
            const double u = eval(*n.lhs, x);
            return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
        }
        case Op::add: return eval(*n.lhs, x) + eval(*n.rhs, x);
        case Op::sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
        case Op::mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
        case Op::div: return eval(*n.lhs, x) / eval(*n.rhs, x);
        case Op::pow: {
            const double u = eval(*n.lhs, x);
            const double c = n.value;
            if (c == 2.0) return u * u;
            if (c == 3.0) return u * u * u;
            return std::pow(u, c);
        }
    }
    return std::nan("");
}

bool depends(const ExprNode& n) {
    if (n.op == Op::variable) return true;
    if (n.lhs && depends(*n.lhs)) return true;
    if (n.rhs && depends(*n.rhs)) return true;
    return false;
}

bool restricted(const ExprNode& n) {
    if (n.op == Op::log || n.op == Op::sqrt) return true;
    if (n.op == Op::pow && n.value != std::floor(n.value)) return true;
    if (n.lhs && restricted(*n.lhs)) return true;
    if (n.rhs && restricted(*n.rhs)) return true;
    return false;
}

// Smart constructors with constant folding.
ExprNodePtr mk_const(double c) { return leaf(Op::constant, c); }

ExprNodePtr mk_neg(ExprNodePtr a) {
    if (is_const(a)) return mk_const(-a->value);
    if (a->op == Op::neg) return a->lhs;
    return node(Op::neg, std::move(a));
}

ExprNodePtr mk_add(ExprNodePtr a, ExprNodePtr b) {
    if (is_const(a) && is_const(b)) return mk_const(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return node(Op::add, std::move(a), std::move(b));
}

ExprNodePtr mk_sub(ExprNodePtr a, ExprNodePtr b) {
    if (is_const(a) && is_const(b)) return mk_const(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return mk_neg(std::move(b));
    return node(Op::sub, std::move(a), std::move(b));
}

ExprNodePtr mk_mul(ExprNodePtr a, ExprNodePtr b) {
    if (is_const(a) && is_const(b)) return mk_const(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return mk_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    if (is_const(a, -1.0)) return mk_neg(std::move(b));
    if (is_const(b, -1.0)) return mk_neg(std::move(a));
    return node(Op::mul, std::move(a), std::move(b));
}

ExprNodePtr mk_div(ExprNodePtr a, ExprNodePtr b) {
    if (is_const(a) && is_const(b)) return mk_const(a->value / b->value);
    if (is_const(a, 0.0)) return mk_const(0.0);
    if (is_const(b, 1.0)) return a;
    return node(Op::div, std::move(a), std::move(b));
}

ExprNodePtr mk_pow(ExprNodePtr a, double c) {
    if (c == 0.0) return mk_const(1.0);
    if (c == 1.0) return a;
    if (is_const(a)) return mk_const(std::pow(a->value, c));
    return node(Op::pow, std::move(a), nullptr, c);
}

ExprNodePtr mk_unary(Op op, ExprNodePtr a) {
    if (is_const(a)) return mk_const(eval(*node(op, a), 0.0));
    return node(op, std::move(a));
}

ExprNodePtr diff(const ExprNodePtr& n) {
    switch (n->op) {
        case Op::constant: return mk_const(0.0);
        case Op::variable: return mk_const(1.0);
        case Op::neg: return mk_neg(diff(n->lhs));
        case Op::sin: return mk_mul(mk_unary(Op::cos, n->lhs), diff(n->lhs));
        case Op::cos: return mk_neg(mk_mul(mk_unary(Op::sin, n->lhs), diff(n->lhs)));
        case Op::exp: return mk_mul(n, diff(n->lhs));
        case Op::log: return mk_div(diff(n->lhs), n->lhs);
        case Op::abs: return mk_mul(mk_unary(Op::sign, n->lhs), diff(n->lhs));
        case Op::sqrt: return mk_div(diff(n->lhs), mk_mul(mk_const(2.0), n));
        case Op::sign: return mk_const(0.0);
        case Op::add: return mk_add(diff(n->lhs), diff(n->rhs));
        case Op::sub: return mk_sub(diff(n->lhs), diff(n->rhs));
        case Op::mul:
            return mk_add(mk_mul(diff(n->lhs), n->rhs), mk_mul(n->lhs, diff(n->rhs)));
        case Op::div:
            return mk_div(mk_sub(mk_mul(diff(n->lhs), n->rhs), mk_mul(n->lhs, diff(n->rhs))),
                          mk_pow(n->rhs, 2.0));
        case Op::pow:
            return mk_mul(mk_mul(mk_const(n->value), mk_pow(n->lhs, n->value - 1.0)), diff(n->lhs));
    }
    return mk_const(0.0);
}

ExprNodePtr substitute_shift(const ExprNodePtr& n, double c) {
    switch (n->op) {
        case Op::constant: return n;
        case Op::variable: return mk_add(n, mk_const(c));
        case Op::pow: return mk_pow(substitute_shift(n->lhs, c), n->value);
        default: break;
    }
    auto out = std::make_shared<ExprNode>(*n);
    if (n->lhs) out->lhs = substitute_shift(n->lhs, c);
    if (n->rhs) out->rhs = substitute_shift(n->rhs, c);
    return out;
}

std::string format_number(double v) {
    char buf[32];
    std::string s(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    if (v < 0.0 || s.find_first_of("eE") != std::string::npos) return "(" + s + ")";
    return s;
}

const char* func_name(Op op) {
    switch (op) {
        case Op::sin: return "sin";
        case Op::cos: return "cos";
        case Op::exp: return "exp";
        case Op::log: return "log";
        case Op::abs: return "abs";
        case Op::sqrt: return "sqrt";
        case Op::sign: return "sign";
        default: return nullptr;
    }
}

void print_node(const ExprNode& n, std::string& out) {
    switch (n.op) {
        case Op::constant: out += format_number(n.value); return;
        case Op::variable: out += "x"; return;
        case Op::neg:
            out += "(-";
            print_node(*n.lhs, out);
            out += ")";
            return;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
            const char sym = n.op == Op::add ? '+' : n.op == Op::sub ? '-' : n.op == Op::mul ? '*' : '/';
            out += "(";
            print_node(*n.lhs, out);
            out += sym;
            print_node(*n.rhs, out);
            out += ")";
            return;
        }
        case Op::pow:
            out += "(";
            print_node(*n.lhs, out);
            out += "^";
            out += format_number(n.value);
            out += ")";
            return;
        default:
            out += func_name(n.op);
            out += "(";
            print_node(*n.lhs, out);
            out += ")";
            return;
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprNodePtr parse() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError(Errc::parse_error, "empty expression", pos_);
        ExprNodePtr e = parse_expr();
        skip_ws();
        if (pos_ < text_.size())
            throw ParseError(Errc::parse_error, std::string("unexpected '") + text_[pos_] + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= text_.size())
                throw ParseError(Errc::parse_error, std::string("expected '") + c + "' before end of input", pos_);
            throw ParseError(Errc::parse_error, std::string("expected '") + c + "'", pos_);
        }
    }

    ExprNodePtr parse_expr() {
        ExprNodePtr lhs = parse_term();
        for (;;) {
            if (accept('+'))
                lhs = node(Op::add, lhs, parse_term());
            else if (accept('-'))
                lhs = node(Op::sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    ExprNodePtr parse_term() {
        ExprNodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*'))
                lhs = node(Op::mul, lhs, parse_unary());
            else if (accept('/'))
                lhs = node(Op::div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    ExprNodePtr parse_unary() {
        if (accept('-')) {
            ExprNodePtr inner = parse_unary();
            if (is_const(inner)) return mk_const(-inner->value);
            return node(Op::neg, inner);
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    ExprNodePtr parse_power() {
        ExprNodePtr base = parse_primary();
        skip_ws();
        const std::size_t at = pos_;
        if (accept('^')) {
            ExprNodePtr exponent = parse_unary();
            if (depends(*exponent))
                throw ParseError(Errc::parse_error, "exponent must not depend on x", at);
            const double c = eval(*exponent, 0.0);
            if (!std::isfinite(c)) throw ParseError(Errc::parse_error, "exponent is not finite", at);
            if (is_const(base)) return mk_const(std::pow(base->value, c));
            return node(Op::pow, base, nullptr, c);
        }
        return base;
    }

    ExprNodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError(Errc::parse_error, "unexpected end of input", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            ExprNodePtr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(Errc::parse_error, std::string("unexpected '") + c + "'", pos_);
    }

    ExprNodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) throw ParseError(Errc::parse_error, "malformed number '" + token + "'", start);
        return mk_const(v);
    }

    ExprNodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") return leaf(Op::variable);
        if (name == "pi") return mk_const(std::numbers::pi);
        if (name == "e") return mk_const(std::numbers::e);
        Op op;
        if (name == "sin") op = Op::sin;
        else if (name == "cos") op = Op::cos;
        else if (name == "exp") op = Op::exp;
        else if (name == "log") op = Op::log;
        else if (name == "abs") op = Op::abs;
        else if (name == "sqrt") op = Op::sqrt;
        else if (name == "sign") op = Op::sign;
        else throw ParseError(Errc::unknown_identifier, "unknown identifier '" + std::string(name) + "'", start);
        expect('(');
        ExprNodePtr arg = parse_expr();
        expect(')');
        if (is_const(arg)) return mk_const(eval(*node(op, arg), 0.0));
        return node(op, arg);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr::Expr() : root_(mk_const(0.0)) {}

Expr Expr::constant(double c) { return Expr(mk_const(c)); }
Expr Expr::variable() { return Expr(leaf(Op::variable)); }

double Expr::operator()(double x) const { return eval(*root_, x); }

bool Expr::depends_on_x() const { return depends(*root_); }
bool Expr::domain_restricted() const { return restricted(*root_); }

Expr parse_expression(std::string_view text) { return Expr(Parser(text).parse()); }

Expr differentiate(const Expr& e) { return Expr(diff(e.node())); }

std::string print(const Expr& e) {
    std::string out;
    print_node(e.root(), out);
    return out;
}

Expr shift(const Expr& e, double c) {
    if (c == 0.0) return e;
    return Expr(substitute_shift(e.node(), c));
}

TestFunction TestFunction::shifted(double c) const {
    TestFunction out;
    out.g = shift(g, c);
    out.d1 = shift(d1, c);
    out.d2 = shift(d2, c);
    out.effective = Interval(effective.lo - c, effective.hi - c);
    out.sup_g1g2 = sup_g1g2;
    out.text = text;
    return out;
}

namespace {

// Centered difference agreement, tolerating genuine kinks where the one-sided
// quotients disagree.
bool derivative_agrees(const Expr& f, const Expr& df, double x, double h_rel, double rel_tol) {
    const double h = h_rel * std::max(1.0, std::abs(x));
    const double fp = f(x + h);
    const double fm = f(x - h);
    const double f0 = f(x);
    if (!std::isfinite(fp) || !std::isfinite(fm)) return true;  // probe straddles the domain edge
    const double centered = (fp - fm) / (2.0 * h);
    const double sym = df(x);
    const double scale = std::max({1.0, std::abs(sym), std::abs(centered)});
    const double noise = 1e-13 * std::max({std::abs(fp), std::abs(fm), std::abs(f0)}) / h;
    if (std::abs(centered - sym) <= rel_tol * scale + noise) return true;
    const double right = (fp - f0) / h;
    const double left = (f0 - fm) / h;
    return std::abs(right - left) > 100.0 * rel_tol * scale;
}

}  // namespace

TestFunction make_test_function(const Expr& e, Interval effective, std::size_t probe_count) {
    if (!effective.finite()) fail(Errc::invalid_argument, "effective interval for a test function must be finite");
    if (probe_count < 2) fail(Errc::invalid_argument, "probe_count must be at least 2");
    TestFunction tf;
    tf.g = e;
    tf.d1 = differentiate(e);
    tf.d2 = differentiate(tf.d1);
    tf.effective = effective;
    tf.text = print(e);

    double sup = 0.0;
    const auto grid = linspace(effective.lo, effective.hi, probe_count);
    for (double x : grid) {
        const double g0 = tf.g(x);
        const double g1 = tf.d1(x);
        const double g2 = tf.d2(x);
        if (!std::isfinite(g0) || !std::isfinite(g1)) {
            std::ostringstream os;
            os << "test function '" << tf.text << "' is not evaluable at x = " << x;
            fail(Errc::invalid_argument, os.str());
        }
        if (std::isfinite(g2)) sup = std::max(sup, std::abs(g1 * g2));
        if (x == effective.lo || x == effective.hi) continue;
        if (!derivative_agrees(tf.g, tf.d1, x, 1e-5, 1e-4) || !derivative_agrees(tf.d1, tf.d2, x, 1e-5, 1e-4)) {
            std::ostringstream os;
            os << "symbolic derivative of '" << tf.text << "' disagrees with finite differences at x = " << x;
            fail(Errc::derivative_mismatch, os.str());
        }
    }
    tf.sup_g1g2 = sup;
    return tf;
}

TestFunction make_test_function(std::string_view text, Interval effective, std::size_t probe_count) {
    TestFunction tf = make_test_function(parse_expression(text), effective, probe_count);
    tf.text = std::string(text);
    return tf;
}

Expr builtin_expression(std::string_view name) {
    if (name == "identity") return parse_expression("x");
    if (name == "square") return parse_expression("x^2");
    if (name == "sin") return parse_expression("sin(x)");
    if (name == "cosh") return parse_expression("(exp(x)+exp(-x))/2");
    fail(Errc::unknown_identifier, "unknown built-in test function '" + std::string(name) + "'");
}

double growth_order(const RealFn& g, bool upper) {
    // Compare envelopes of |g| on two far dyadic shells.
    auto envelope = [&](double r) {
        double m = 0.0;
        for (int k = 0; k <= 16; ++k) {
            const double x = r * (1.0 + k / 16.0);
            const double v = std::abs(g(upper ? x : -x));
            if (std::isfinite(v)) m = std::max(m, v);
            else return kInf;
        }
        return m;
    };
    const double r1 = 1e4;
    const double r2 = 1e8;
    const double e1 = envelope(r1);
    const double e2 = envelope(r2);
    if (!std::isfinite(e1) || !std::isfinite(e2)) return kInf;
    if (e1 > 0.0) return std::max(0.0, std::log(e2 / e1) / std::log(r2 / r1));
    return std::max(0.0, std::log1p(e2) / std::log(r2 / r1));
}

double growth_order(const Expr& g, bool upper) {
    return growth_order([&g](double x) { return g(x); }, upper);
}

}  // namespace stein
