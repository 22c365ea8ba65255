#include "stein/error.hpp"
#include "stein/expr.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

TEST_SUITE("exprfn") {

TEST_CASE("parse and evaluate") {
    CHECK(parse_expression("x^2 + 1")(3.0) == 10.0);
    CHECK(parse_expression("sin(x)*exp(-x)")(0.0) == 0.0);
    CHECK(parse_expression("2*x^3 - x")(1.5) == doctest::Approx(5.25));
    CHECK(parse_expression("-x^2")(2.0) == -4.0);
    CHECK(parse_expression("2^-1")(0.0) == 0.5);
    CHECK(parse_expression("pi")(0.0) == doctest::Approx(M_PI));
}

TEST_CASE("parse errors carry a position") {
    CHECK_THROWS_AS(parse_expression("x +"), ParseError);
    CHECK_THROWS_AS(parse_expression("foo(x)"), Error);
    CHECK_THROWS_AS(parse_expression("2^x"), Error);
    try {
        parse_expression("x * * 2");
        FAIL("no throw");
    } catch (const ParseError& e) {
        CHECK(e.position() == 4);
    }
}

TEST_CASE("differentiate") {
    CHECK(differentiate(parse_expression("x^2"))(3.0) == doctest::Approx(6.0));
    CHECK(differentiate(parse_expression("sin(x)"))(0.0) == doctest::Approx(1.0));
    CHECK(differentiate(parse_expression("exp(-x^2)"))(1.0) == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(differentiate(parse_expression("log(1+x^2)"))(2.0) == doctest::Approx(0.8));
}

TEST_CASE("derivative agrees with central differences") {
    for (const char* text : {"sin(x)*exp(-x)", "x^3/3 - 2*x", "sqrt(1+x^2)", "cos(x)^2", "x/(1+x^2)"}) {
        const Expr e = parse_expression(text);
        const Expr d = differentiate(e);
        for (double x : {-1.3, -0.2, 0.4, 2.1}) {
            const double h = 1e-5;
            const double fd = (e(x + h) - e(x - h)) / (2 * h);
            CHECK(d(x) == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("print round trips") {
    for (const char* text : {"x^2 + 1", "-(x-1)^3", "exp(-x^2/2)", "abs(x)*x/2", "0.1*x - 1e-3"}) {
        const Expr e = parse_expression(text);
        const Expr back = parse_expression(print(e));
        for (double x : {-2.0, -0.5, 0.0, 0.7, 3.0}) CHECK(back(x) == doctest::Approx(e(x)).epsilon(1e-15));
    }
}

TEST_CASE("sup |g' g''| estimates") {
    CHECK(make_test_function("x", {-5.0, 5.0}).sup_g1g2 == 0.0);
    CHECK(make_test_function("x^2/2", {0.0, 2.0}).sup_g1g2 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(make_test_function("sin(x)", {-M_PI, M_PI}).sup_g1g2 == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("shift and builtins") {
    const Expr e = parse_expression("x^2");
    CHECK(shift(e, 1.0)(2.0) == 9.0);
    CHECK(builtin_expression("square")(3.0) == 9.0);
    CHECK(builtin_expression("identity")(3.0) == 3.0);
    CHECK_THROWS_AS(builtin_expression("nope"), Error);
}

TEST_CASE("growth orders") {
    CHECK(growth_order(parse_expression("x^3"), true) == doctest::Approx(3.0).epsilon(1e-2));
    CHECK(growth_order(parse_expression("sin(x)"), true) < 0.05);
    CHECK(std::isinf(growth_order(parse_expression("exp(x)"), true)));
    CHECK(growth_order(parse_expression("exp(x)"), false) < 0.05);
}

}
