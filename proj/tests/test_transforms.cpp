#include "stein/error.hpp"
#include "stein/transforms.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <doctest.h>

#include <cmath>

using namespace stein;

TEST_SUITE("transforms") {

TEST_CASE("two-point zero bias is uniform") {
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{1.0, 2.0}, std::pair{0.5, 3.0}}) {
        const auto zb = zero_bias(two_point(a, b));
        for (int i = 1; i < 20; ++i) {
            const double w = -a + (a + b) * i / 20.0;
            CHECK(std::abs(zb.density(w) - 1.0 / (a + b)) <= 1e-9);
        }
        // closed-interval convention at both ends, like uniform(-a, b)
        CHECK(zb.density(-a) == doctest::Approx(1.0 / (a + b)).epsilon(1e-12));
        CHECK(zb.density(b) == doctest::Approx(1.0 / (a + b)).epsilon(1e-12));
        CHECK(zb.density(-a - 0.1) == 0.0);
        CHECK(zb.density(b + 0.1) == 0.0);
    }
}

TEST_CASE("gaussian is the zero-bias fixed point") {
    const auto zb = zero_bias(gaussian(0, 2));
    const auto g = gaussian(0, 2);
    double worst = 0.0;
    for (const double w : linspace(-5, 5, 64)) worst = std::max(worst, std::abs(zb.density(w) - g.density(w)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("uniform[-1,1] zero bias") {
    const auto zb = zero_bias(uniform(-1, 1));
    for (double w : {-0.9, -0.3, 0.0, 0.5}) CHECK(zb.density(w) == doctest::Approx(0.75 * (1 - w * w)).epsilon(1e-9));
    CHECK(zb.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("heavy-tailed zero bias far out") {
    // W = X - 3/2, X ~ Pareto(3, 1): P(W* > w) = (3 / (2u) - 3 / (4u^2)) / (3/4) with u = w + 3/2
    const auto zb = zero_bias(centered(pareto(3, 1)));
    for (double w : {0.5, 100.0, 1e4, 1e8, 1e11}) {
        const double u = w + 1.5;
        const double oracle = (1.5 / u - 0.75 / (u * u)) / 0.75;
        CHECK(zb.survival(w) == doctest::Approx(oracle).epsilon(1e-8));
    }
    RandomStream rng(1, 0);
    CHECK(zb.sample(rng) >= -1.5);
}

TEST_CASE("zero bias requires mean zero") {
    CHECK_THROWS_AS(zero_bias(exponential(1)), Error);
}

TEST_CASE("zero-bias identity E[W phi(W)] = sigma^2 E[phi'(W*)]") {
    const auto zb = zero_bias(centered(gamma_dist(3, 1)));
    const auto star = zb.law();
    const double lhs = expect(zb.base(), [](double x) { return x * std::sin(x); });
    const double rhs = zb.sigma2() * expect(star, [](double x) { return std::cos(x); });
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("bernoulli sum coupling gap") {
    std::vector<DistributionSpec> parts(30, standardized_bernoulli(0.3, 30));
    const auto c = zero_bias_sum(parts);
    const double p = 0.3, q = 0.7;
    const double gap = (p * p + q * q) / (2 * std::sqrt(30 * p * q));
    CHECK(c.exact_gap() == doctest::Approx(gap).epsilon(1e-9));
    CHECK(gap == doctest::Approx(0.11557).epsilon(1e-4));
    const auto mc = c.mc_gap(400000, 42);
    CHECK(std::abs(mc.value - gap) <= 4 * mc.se);
}

TEST_CASE("gaussian parts have a vanishing gap") {
    std::vector<DistributionSpec> parts(4, gaussian(0, 0.25));
    const auto c = zero_bias_sum(parts);
    const auto mc = c.mc_gap(100000, 5);
    CHECK(mc.value < 0.01);
}

TEST_CASE("independent two-point coupling gap vs double integral") {
    // X = +-1, U ~ U[-1, 1] independent: E|X - U| = integral over u of |1 - u|/2 = 1
    const auto c = zero_bias_sum({two_point(1, 1)}, CouplingMode::independent);
    const double oracle = 0.5 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                                    [](double u) { return 0.5 * (std::abs(1 - u) + std::abs(-1 - u)); }, -1.0, 1.0);
    CHECK(oracle == doctest::Approx(1.0));
    CHECK(c.exact_gap() == doctest::Approx(oracle).epsilon(1e-8));
    const auto mc = c.mc_gap(200000, 9);
    CHECK(std::abs(mc.value - oracle) <= 4 * mc.se);
}

TEST_CASE("equilibrium transforms") {
    const auto e = equilibrium(exponential(2));
    CHECK(e.lambda() == doctest::Approx(2.0));
    double worst = 0.0;
    for (const double x : linspace(0, 5, 64)) worst = std::max(worst, std::abs(e.cdf(x) - (1 - std::exp(-2 * x))));
    CHECK(worst <= 1e-8);

    const auto u = equilibrium(uniform(0, 1));
    CHECK(u.survival(0.3) == doctest::Approx(0.49).epsilon(1e-9));
    CHECK(u.density(0.3) == doctest::Approx(1.4).epsilon(1e-9));

    const auto pm = equilibrium(point_mass(2));
    CHECK(pm.density(0.5) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(pm.survival(1.5) == doctest::Approx(0.25).epsilon(1e-9));

    CHECK_THROWS_AS(equilibrium(gaussian(0, 1)), Error);
}

TEST_CASE("equilibrium identity residuals") {
    std::vector<TestPhi> battery = {{"x", [](double x) { return x; }, [](double) { return 1.0; }},
                                    {"x^2", [](double x) { return x * x; }, [](double x) { return 2 * x; }},
                                    {"x^3", [](double x) { return x * x * x; }, [](double x) { return 3 * x * x; }}};
    for (const auto& r : equilibrium_identity_check(equilibrium(exponential(1)), battery))
        CHECK(std::abs(r.residual) <= 1e-8);
    const auto rows = equilibrium_identity_check(equilibrium(uniform(0, 1)), battery);
    CHECK(rows[2].lhs == doctest::Approx(0.25));
    CHECK(std::abs(rows[2].residual) <= 1e-8);
}

}
