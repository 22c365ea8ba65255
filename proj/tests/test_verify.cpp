#include "stein/error.hpp"
#include "stein/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

TEST_SUITE("verify") {

TEST_CASE("mc_variance") {
    const auto g = gaussian(0, 1);
    const Sampler s = [&g](RandomStream& r) { return g.sample(r); };
    const auto id = mc_variance([](double x) { return x; }, s, 1'000'000, 42);
    CHECK(std::abs(id.estimate - 1.0) <= id.ci_halfwidth);
    CHECK(id.ci_halfwidth == doctest::Approx(0.0036).epsilon(0.1));
    const auto sq = mc_variance([](double x) { return x * x; }, s, 1'000'000, 42);
    CHECK(std::abs(sq.estimate - 2.0) <= sq.ci_halfwidth);

    const auto pm = point_mass(3.0);
    const auto z = mc_variance([](double x) { return x; }, [&pm](RandomStream& r) { return pm.sample(r); }, 10000, 1);
    CHECK(z.estimate == 0.0);

    CHECK_THROWS_AS(mc_variance([](double x) { return x; }, s, 9999, 1), Error);
    CHECK_THROWS_AS(mc_variance([](double x) { return std::log(x); }, s, 10000, 1), Error);
}

TEST_CASE("mc_variance is bit-reproducible") {
    const auto d = beta_dist(2, 5);
    const Sampler s = [&d](RandomStream& r) { return d.sample(r); };
    const auto a = mc_variance([](double x) { return std::sin(x); }, s, 50000, 9);
    const auto b = mc_variance([](double x) { return std::sin(x); }, s, 50000, 9);
    CHECK(a.estimate == b.estimate);
    CHECK(a.ci_halfwidth == b.ci_halfwidth);
}

TEST_CASE("kernel coupling residuals vanish") {
    const auto d = beta_dist(4, 8);
    const auto c = kernel_coupling(pearson_kernel(d));
    const auto rows = coupling_residual(c, phi_battery(d.support()), 200000, 3);
    for (const auto& r : rows) {
        INFO(r.phi);
        CHECK(r.sign_ok);
    }
    CHECK(rows[0].phi == "x");
}

TEST_CASE("zero-bias coupling residuals on the gaussian") {
    const auto c = zero_bias_coupling(zero_bias(gaussian(0, 1)));
    for (const auto& r : coupling_residual(c, phi_battery({-6, 6}), 200000, 4)) {
        INFO(r.phi);
        CHECK(r.sign_ok);
    }
}

TEST_CASE("convex-order residuals are nonpositive") {
    const auto d = two_point(1, 2);
    std::vector<TestPhi> battery = {{"x^3/3", [](double x) { return x * x * x / 3; }, [](double x) { return x * x; }},
                                    {"exp", [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }}};
    for (const auto& r : coupling_residual(convex_order_coupling(d), battery, 100000, 5)) {
        CHECK(r.sign_ok);
        CHECK(r.residual < 0.0);
    }
}

TEST_CASE("quadrature residuals") {
    const auto d = gamma_dist(2, 1);
    for (const auto& r : kernel_residual(pearson_kernel(d), phi_battery(d.effective_range()))) {
        INFO(r.phi);
        CHECK(r.applicable);
        CHECK(std::abs(r.residual) <= 1e-6 * (1 + std::abs(r.lhs)));
    }
    const auto p = pareto(3, 1);
    const auto rows = kernel_residual(pearson_kernel(p), phi_battery(p.effective_range()));
    CHECK_FALSE(rows[1].applicable);  // x^2 needs a third moment
    for (const auto& r : zero_bias_residual(zero_bias(two_point(0.5, 3)), phi_battery({-0.5, 3}))) {
        INFO(r.phi);
        CHECK(std::abs(r.residual) <= 1e-6 * (1 + std::abs(r.lhs)));
    }
}

TEST_CASE("permutation enumeration") {
    SquareArray id{3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
    const auto e = enumerate_permutation_statistic(id, false);
    CHECK(e.mean() == doctest::Approx(1.0));
    CHECK(e.variance() == doctest::Approx(*permutation_statistic(id).constant("sigma2")).epsilon(1e-12));
    const auto z = enumerate_permutation_statistic(id, true);
    CHECK(z.variance() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(enumerate_permutation_statistic(SquareArray{11, std::vector<double>(121, 1.0)}, false), Error);
}

TEST_CASE("scenario catalog") {
    const auto& ids = scenario_catalog();
    CHECK(ids.size() == 6);
    CHECK_THROWS_AS(run_scenario("nope", {}, 1), Error);
    CHECK_THROWS_AS(run_scenario("bernoulli-sum", {{"bogus", "1"}}, 1), Error);
    CHECK_THROWS_AS(run_scenario("bernoulli-sum", {{"p", "1.5"}}, 1), Error);
}

TEST_CASE("permutation scenario on the 3x3 identity") {
    const auto r = run_scenario("permutation", {{"n", "3"}, {"array", "identity"}, {"g", "x"}, {"mc", "100000"}}, 1);
    CHECK(r.passed());
    REQUIRE(r.reports.size() == 1);
    CHECK(*r.reports[0].upper == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*r.reports[0].remainder == 0.0);
}

TEST_CASE("every scenario passes with reduced sample sizes") {
    for (const auto& id : scenario_catalog()) {
        const auto r = run_scenario(id, {{"mc", "100000"}}, 42);
        INFO(id);
        for (const auto& a : r.assertions)
            if (!a.pass) MESSAGE(a.name << ": observed " << a.observed << " expected " << a.expected);
        CHECK(r.passed());
    }
}

}
