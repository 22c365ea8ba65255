#include "stein/bounds.hpp"
#include "stein/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

namespace {

BoundOptions quick() {
    BoundOptions o;
    o.n_mc = 200'000;
    return o;
}

TestFunction tf(const char* text, const DistributionSpec& d) { return make_test_function(text, d.effective_range()); }

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("generic kernel coupling on the gaussian") {
    const auto d = gaussian(0, 1);
    const auto c = kernel_coupling(pearson_kernel(d));
    const auto lin = bound_generic(c, tf("x", d), quick());
    REQUIRE(lin.lower);
    REQUIRE(lin.upper);
    // Var[gamma(W)] is itself a Monte-Carlo estimate on this route
    CHECK(lin.lower_se > 0.0);
    CHECK(std::abs(*lin.lower - 1.0) <= 4 * lin.lower_se);
    CHECK(*lin.upper == doctest::Approx(1.0).epsilon(1e-12));
    const auto sq = bound_generic(c, tf("x^2", d), quick());
    CHECK(std::abs(*sq.upper - 4.0) <= 4 * sq.upper_se);
    CHECK(std::abs(*sq.lower) <= 4 * sq.lower_se + 1e-3);
    REQUIRE(sq.mc);
    CHECK(std::abs(sq.mc->estimate - 2.0) <= 4 * sq.mc->se);
}

TEST_CASE("generic zero-bias coupling matches bound_zero_bias") {
    const auto d = two_point(1, 2);
    const auto zb = zero_bias(d);
    const auto g = tf("x^3", d);
    const auto gen = bound_generic(zero_bias_coupling(zb), g, quick());
    const auto exact = bound_zero_bias(zb, g, quick());
    CHECK(std::abs(*gen.upper - *exact.upper) <= 4 * gen.upper_se);
    CHECK(std::abs(*gen.lower - *exact.lower) <= 4 * gen.lower_se);
}

TEST_CASE("upper-only coupling rejects a lower bound") {
    const auto d = two_point(1, 1);
    CHECK_THROWS_AS(bound_generic(convex_order_coupling(d), tf("x", d), quick(), BoundSide::lower), Error);
}

TEST_CASE("cacoullos") {
    const auto g2 = gaussian(0, 2.5);
    const auto r = bound_cacoullos(g2, pearson_kernel(g2), tf("x", g2), quick());
    CHECK(*r.lower == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(*r.upper == doctest::Approx(2.5).epsilon(1e-9));

    const auto b = beta_dist(4, 8);
    const auto rb = bound_cacoullos(b, pearson_kernel(b), tf("x", b), quick());
    CHECK(*rb.upper == doctest::Approx(32.0 / (144.0 * 13.0)).epsilon(1e-9));

    const auto ga = gamma_dist(2, 1);
    const auto rl = bound_cacoullos(ga, pearson_kernel(ga), tf("log(x)", ga), quick());
    CHECK(*rl.upper == doctest::Approx(1.0).epsilon(1e-8));  // E[1/theta]
    REQUIRE(rl.exact_variance);
    CHECK(*rl.exact_variance == doctest::Approx(M_PI * M_PI / 6 - 1).epsilon(1e-7));  // trigamma(2)
    CHECK(*rl.lower <= *rl.exact_variance);
    CHECK(rl.mc->estimate <= *rl.upper);
}

TEST_CASE("zero-bias bounds on two-point laws") {
    const auto d = two_point(1, 1);
    const auto sq = bound_zero_bias(zero_bias(d), tf("x^2", d), quick());
    CHECK(*sq.upper == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
    CHECK(sq.degenerate);
    const auto cu = bound_zero_bias(zero_bias(d), tf("x^3", d), quick());
    CHECK(*cu.lower == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*cu.exact_variance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-bias on the gaussian reduces to the constant kernel") {
    const auto d = gaussian(0, 1);
    const auto r = bound_zero_bias(zero_bias(d), tf("sin(x)", d), quick());
    const double up = expect(d, [](double x) { return std::cos(x) * std::cos(x); });
    CHECK(*r.upper == doctest::Approx(up).epsilon(1e-6));
}

TEST_CASE("remainder bound") {
    const auto d = gaussian(0, 1);
    const auto r = bound_zero_bias_remainder(d, tf("sin(x)", d), 0.0, quick());
    CHECK(*r.remainder == 0.0);
    CHECK_THROWS_AS(bound_zero_bias_remainder(d, tf("sin(x)", d), std::nullopt, quick()), Error);

    std::vector<DistributionSpec> parts(30, standardized_bernoulli(0.3, 30));
    const auto w = sum_of_independents(parts);
    const auto g = tf("sin(x)", w);
    const double gap = (0.09 + 0.49) / (2 * std::sqrt(6.3));
    const auto rb = bound_zero_bias_remainder(w, g, gap, quick());
    const double e = expect(w, [](double x) { return std::cos(x) * std::cos(x); });
    CHECK(*rb.upper == doctest::Approx(e + g.sup_g1g2 * 0.58 / std::sqrt(6.3)).epsilon(1e-9));
    const auto c = zero_bias_sum(parts);
    const auto rc = bound_zero_bias_remainder(w, g, std::nullopt, quick(), &c);
    CHECK(*rc.gap == doctest::Approx(gap).epsilon(1e-9));
}

TEST_CASE("convex order bound gating") {
    // mirrored parts cancel E[W^3], so W* keeps mean zero; with enough parts the order holds
    const DistributionSpec parts[] = {two_point(1, 2), two_point(2, 1), two_point(0.5, 1.5), two_point(1.5, 0.5),
                                      two_point(1, 1)};
    const auto w = sum_of_independents(parts);
    const auto lin = bound_convex_order(w, tf("x", w), quick());
    REQUIRE(lin.upper);
    CHECK(*lin.upper == doctest::Approx(w.variance()).epsilon(1e-12));

    // one mirrored pair: W on {-3, 0, 3}, W* uniform on [-3, 3]; stop-loss at 0 is 3/4 > 2/3
    const DistributionSpec pair[] = {two_point(1, 2), two_point(2, 1)};
    const auto wp = sum_of_independents(pair);
    CHECK(wp.stop_loss(0.0) == doctest::Approx(2.0 / 3.0));
    CHECK(zero_bias(wp).law().stop_loss(0.0) == doctest::Approx(0.75));
    CHECK_FALSE(bound_convex_order(wp, tf("x", wp), quick()).upper);

    // skewed parts: E[W*] = E[W^3] / (2 sigma^2) != 0, so W* <=cx W cannot hold
    const DistributionSpec skew[] = {two_point(1, 2), two_point(0.5, 1)};
    const auto ws = sum_of_independents(skew);
    const auto off_mean = bound_convex_order(ws, tf("x", ws), quick());
    CHECK_FALSE(off_mean.upper);
    CHECK(off_mean.withheld());

    const auto d = two_point(1, 1);
    const auto half = bound_convex_order(d, tf("x^2/2", d), quick());
    CHECK(*half.upper == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*half.exact_variance == doctest::Approx(0.0).epsilon(1e-15));

    // g'^2 = cos(x)^2 is concave near zero
    const auto conc = bound_convex_order(d, tf("sin(x)", d), quick());
    CHECK_FALSE(conc.upper);
    CHECK(conc.withheld());

    const auto e = exponential(1);
    const auto off = bound_convex_order(e, tf("x", e), quick());
    CHECK_FALSE(off.upper);
}

TEST_CASE("equilibrium bounds") {
    const auto e = exponential(1);
    const auto a = bound_equilibrium(e, tf("x", e), EquilibriumBranch::a, quick());
    const auto b = bound_equilibrium(e, tf("x", e), EquilibriumBranch::b, quick());
    CHECK(*a.upper == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*b.lower == doctest::Approx(1.0).epsilon(1e-9));

    const auto w = random_sum(geometric_count(0.5), exponential(1));
    const auto rb = bound_equilibrium(w, tf("x", w), EquilibriumBranch::b, quick());
    REQUIRE(rb.lower);
    CHECK(*rb.lower == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    const auto ra = bound_equilibrium(w, tf("x", w), EquilibriumBranch::a, quick());
    CHECK_FALSE(ra.upper);

    CHECK_FALSE(bound_equilibrium(gaussian(0, 1), tf("x", gaussian(0, 1)), EquilibriumBranch::a, quick()).upper);
}

TEST_CASE("equilibrium phi_g equals lambda (g(x) - g(1/lambda))") {
    const auto e = exponential(2);
    const auto g = tf("sin(x) + x^2", e);
    for (double x : {0.0, 0.3, 1.0, 2.5})
        CHECK(equilibrium_phi(g, 2.0, x) == doctest::Approx(2.0 * (g.value(x) - g.value(0.5))).epsilon(1e-12));
}

TEST_CASE("smoothed bounds") {
    const auto s = make_smoothed(rademacher(), 0.5);
    const auto g = make_test_function("x", s.convolved.effective_range());
    const auto i = bound_smoothed(s, g, SmoothedClaim::i, quick());
    CHECK(*i.upper == doctest::Approx(1.25).epsilon(1e-6));
    const auto ii = bound_smoothed(s, g, SmoothedClaim::ii, quick());
    CHECK_FALSE(ii.lower);

    const auto sg = make_smoothed(gaussian(0, 1), 0.1);
    const auto gi = bound_smoothed(sg, make_test_function("x", sg.convolved.effective_range()), SmoothedClaim::i, quick());
    CHECK(*gi.upper == doctest::Approx(1.01).epsilon(1e-6));
}

TEST_CASE("infinite moments withhold bounds") {
    const auto p = pareto(3, 1);
    const auto r = bound_cacoullos(p, pearson_kernel(p), tf("x^2", p), quick());
    CHECK_FALSE(r.upper);
    CHECK_FALSE(r.hypotheses_hold());
}

TEST_CASE("grid checks") {
    CHECK(convexity_check("x^2", [](double x) { return x * x; }, {-1, 1}, 64, 1e-9).holds);
    CHECK_FALSE(convexity_check("cos", [](double x) { return std::cos(x); }, {-1, 1}, 64, 1e-9).holds);
    CHECK(convexity_check("cos", [](double x) { return std::cos(x); }, {-1, 1}, 64, 1e-9, true).holds);
    const auto grid = linspace(0, 1, 32);
    CHECK(monotonicity_check("x", [](double x) { return x; }, grid, true, 1e-12).holds);
    CHECK_FALSE(monotonicity_check("x", [](double x) { return x; }, grid, false, 1e-12).holds);
}

TEST_CASE("oscillating heavy tails fall back to Monte Carlo") {
    // E[tau(W) cos(W)^2] on Pareto(3, 1): the integrand tail is ~ cos(x)^2 / x^2
    const auto d = pareto(3, 1);
    const auto r = bound_cacoullos(d, pearson_kernel(d), tf("sin(x)", d), quick());
    REQUIRE(r.upper);
    CHECK(r.route.find("monte-carlo (quadrature budget exceeded)") != std::string::npos);
    CHECK(r.route.find(" + quadrature") != std::string::npos);
    CHECK(r.upper_se > 0.0);
    REQUIRE(r.mc);
    CHECK(r.mc->estimate <= *r.upper + 4 * (r.upper_se + r.mc->se));
}

TEST_CASE("exact variance") {
    CHECK(*exact_variance(gaussian(0, 1), [](double x) { return x * x; }) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(*exact_variance(two_point(1, 1), [](double x) { return x; }) == doctest::Approx(1.0));
    CHECK_FALSE(exact_variance(pareto(3, 1), [](double x) { return x * x; }));
}

}
