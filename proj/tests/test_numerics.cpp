#include "stein/error.hpp"
#include "stein/numerics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace stein;

TEST_SUITE("numerics") {

TEST_CASE("integrate: polynomial and gaussian moments") {
    CHECK(integrate([](double x) { return x; }, {0.0, 1.0}).value == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(integrate(normal_pdf, Interval::real_line()).value == doctest::Approx(1.0).epsilon(1e-12));
    const double m2 = integrate([](double x) { return x * x * normal_pdf(x); }, Interval::real_line()).value;
    // fixed 60-point Gauss rule on [-12, 12]
    const double oracle = boost::math::quadrature::gauss<double, 60>::integrate(
        [](double x) { return x * x * normal_pdf(x); }, -12.0, 12.0);
    CHECK(std::abs(m2 - 1.0) < 1e-8);
    CHECK(std::abs(m2 - oracle) < 1e-8);
}

TEST_CASE("integrate: semi-infinite and pieces") {
    const double e1 = integrate([](double x) { return x * std::exp(-x); }, {0.0, kInf}).value;
    CHECK(e1 == doctest::Approx(1.0).epsilon(1e-10));
    const double br[] = {-1.0, 0.0, 2.0};
    const auto r = integrate_pieces([](double x) { return std::abs(x); }, br, QuadOptions{});
    CHECK(r.value == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("integrate: oscillating tail with slow envelope") {
    // cos(1) - (pi/2 - Si(1)), Si from scipy.special.sici
    const auto r = integrate([](double x) { return std::cos(x) / (x * x); }, {1.0, kInf});
    CHECK(r.value == doctest::Approx(-0.0844109505595737).epsilon(1e-9));
    const auto l = integrate([](double x) { return std::cos(x) / (x * x); }, {-kInf, -1.0});
    CHECK(l.value == doctest::Approx(-0.0844109505595737).epsilon(1e-9));
}

TEST_CASE("integrate: budget is enforced") {
    QuadOptions o;
    o.max_evaluations = 50;
    o.rel_tol = 1e-15;
    CHECK_THROWS_AS(integrate([](double x) { return std::sin(1.0 / x); }, {1e-6, 1.0}, o), Error);
}

TEST_CASE("inverse_cdf") {
    CHECK(inverse_cdf([](double x) { return x; }, 0.25, {0.0, 1.0}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::abs(inverse_cdf(normal_cdf, 0.5, Interval::real_line())) < 1e-12);
    const double p = 1.0 - std::exp(-1.0);
    CHECK(inverse_cdf([](double x) { return 1.0 - std::exp(-x); }, p, {0.0, kInf}) ==
          doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("gaussian helpers") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.0) + normal_sf(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(normal_quantile(normal_cdf(1.2345)) == doctest::Approx(1.2345).epsilon(1e-12));
    // Mills-ratio asymptotics, kept in log space
    const double z = 40.0;
    const double mills = -z * z / 2 - 0.5 * std::log(2 * std::numbers::pi) - std::log(z) + std::log1p(-1 / (z * z) + 3 / (z * z * z * z));
    CHECK(normal_log_sf(z) == doctest::Approx(mills).epsilon(1e-9));
}

TEST_CASE("random streams are deterministic and distinct") {
    RandomStream a(42, 0), b(42, 0), c(42, 1);
    bool same = true, differ = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        same = same && x == b.next_u64();
        differ = differ || x != c.next_u64();
    }
    CHECK(same);
    CHECK(differ);

    RandomStream u(7, 3);
    double s = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) s += u.uniform();
    CHECK(std::abs(s / n - 0.5) < 0.002);
}

TEST_CASE("Moments merge equals sequential accumulation") {
    Moments all, left, right;
    RandomStream r(1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double x = r.normal();
        all.add(x);
        (i < 400 ? left : right).add(x);
    }
    left.merge(right);
    CHECK(left.n == all.n);
    CHECK(left.mean == doctest::Approx(all.mean).epsilon(1e-12));
    CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    CHECK(left.m4 == doctest::Approx(all.m4).epsilon(1e-10));
}

TEST_CASE("Interval rejects empty ranges") {
    CHECK_THROWS_AS(Interval(1.0, 1.0), Error);
    CHECK_THROWS_AS(Interval(2.0, 1.0), Error);
}

}
