#include "stein/bayes.hpp"
#include "stein/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

namespace {

BoundOptions quick() {
    BoundOptions o;
    o.n_mc = 100'000;
    return o;
}

PairParams ab(double a, double b) {
    PairParams p;
    p.alpha = a;
    p.beta = b;
    return p;
}

}  // namespace

TEST_SUITE("bayes") {

TEST_CASE("pair names round trip") {
    for (Pair p : kAllPairs) CHECK(parse_pair(pair_name(p)) == p);
    CHECK_THROWS_AS(parse_pair("nope"), Error);
}

TEST_CASE("conjugate updates") {
    const auto bb = update(Pair::binomial_beta, ab(1, 1), {10, 3});
    CHECK(bb.posterior.describe() == "beta:4,8");

    const auto pg = update(Pair::poisson_gamma, ab(2, 1), {0, 0});
    CHECK(pg.posterior.describe() == "gamma:2,1");

    PairParams gm;
    gm.sigma = 1;
    gm.mu = 0;
    gm.delta = 1;
    const auto g = update(Pair::gaussian_mean, gm, {4, 1});
    CHECK(g.posterior.mean() == doctest::Approx(0.8));
    CHECK(g.posterior.variance() == doctest::Approx(0.2));

    const auto up = update(Pair::uniform_pareto, ab(3, 1), {5, 2});
    CHECK(up.posterior.describe() == "pareto:8,2");
    CHECK_FALSE(up.notes.empty());
}

TEST_CASE("impossible summaries are rejected") {
    CHECK_THROWS_AS(update(Pair::binomial_beta, ab(1, 1), {3, 5}), Error);
    CHECK_THROWS_AS(update(Pair::poisson_gamma, ab(1, 1), {2, -1}), Error);
    CHECK_THROWS_AS(update(Pair::binomial_beta, ab(-1, 1), {3, 1}), Error);
    CHECK_THROWS_AS(update(Pair::poisson_gamma, ab(1, 1), {2, 1.5}), Error);
}

TEST_CASE("summaries from raw data") {
    const double obs[] = {1, 0, 1, 1};
    const auto s = summarize(Pair::binomial_beta, {}, obs);
    CHECK(s.n == 4);
    CHECK(s.stat == 3);
    const double xs[] = {0.5, 2.0, 1.25};
    const auto m = summarize(Pair::uniform_pareto, {}, xs);
    CHECK(m.stat == 2.0);
    const auto ss = summarize(Pair::gaussian_mean, {}, xs);
    CHECK(ss.stat == doctest::Approx(3.75 / 3));
}

TEST_CASE("sequential updates equal pooled updates") {
    for (Pair p : kAllPairs) {
        PairParams q = ab(3, 2);
        q.k = 1.5;
        q.r = 2;
        DataSummary a{2, 1}, b{3, 2};
        if (p == Pair::gaussian_mean) a = {2, 0.3}, b = {3, -1.0};
        if (p == Pair::uniform_pareto) a = {2, 2.5}, b = {3, 1.5};
        const auto seq = update(p, as_prior(update(p, q, a)), b);
        const auto all = update(p, q, pool(p, a, b));
        INFO(pair_name(p));
        REQUIRE(seq.posterior.params().size() == all.posterior.params().size());
        for (std::size_t i = 0; i < all.posterior.params().size(); ++i)
            CHECK(seq.posterior.params()[i] == doctest::Approx(all.posterior.params()[i]).epsilon(1e-12));
    }
}

TEST_CASE("posterior bounds") {
    const auto bb = update(Pair::binomial_beta, ab(1, 1), {10, 3});
    const auto g = make_test_function("x", bb.posterior.effective_range());
    const auto r = posterior_bounds(bb, g, quick());
    CHECK(*r.upper == doctest::Approx(0.017094017094).epsilon(1e-9));
    CHECK(*r.lower == doctest::Approx(*r.upper).epsilon(1e-9));

    PairParams gm;
    gm.sigma = 2;
    gm.delta = 0.5;
    const auto gp = update(Pair::gaussian_mean, gm, {3, 0.4});
    const auto rg = posterior_bounds(gp, make_test_function("x", gp.posterior.effective_range()), quick());
    const double v = 1.0 / (3.0 / 4.0 + 1.0 / 0.25);
    CHECK(*rg.lower == doctest::Approx(v).epsilon(1e-9));
    CHECK(*rg.upper == doctest::Approx(v).epsilon(1e-9));

    // IG(5, 3): E[theta^2] = 9 / 12
    PairParams ig = ab(5, 3);
    const auto im = update(Pair::gaussian_var, ig, {0, 0});
    const auto ri = posterior_bounds(im, make_test_function("x", im.posterior.effective_range()), quick());
    CHECK(*ri.upper == doctest::Approx(0.1875).epsilon(1e-9));
    CHECK(*ri.lower == doctest::Approx(0.1875).epsilon(1e-9));
}

TEST_CASE("closed-form bounds agree with cacoullos for nonlinear g") {
    for (Pair p : kAllPairs) {
        PairParams q = ab(6, 3);
        q.k = 1.5;
        DataSummary s{4, 2};
        if (p == Pair::uniform_pareto) s = {4, 3.5};
        const auto m = update(p, q, s);
        const auto g = make_test_function("sin(x)", m.posterior.effective_range());
        const auto r = posterior_bounds(m, g, quick());
        const auto c = bound_cacoullos(m.posterior, *m.kernel, g, quick());
        INFO(pair_name(p));
        REQUIRE(r.upper);
        CHECK(*r.upper == doctest::Approx(*c.upper_diagnostic).epsilon(1e-9));
        CHECK(*r.lower == doctest::Approx(*c.lower_diagnostic).epsilon(1e-9));
    }
}

TEST_CASE("flat priors") {
    const auto f = flat_prior_posterior(Pair::binomial_beta, {}, {10, 3});
    CHECK(f.posterior.describe() == "beta:4,8");
    CHECK(f.flat_prior);
    CHECK_THROWS_AS(flat_prior_posterior(Pair::uniform_pareto, {}, {0, 0}), Error);
}

TEST_CASE("infinite posterior variance has no kernel") {
    const auto m = update(Pair::gaussian_var, ab(0.5, 1), {1, 1});
    CHECK_FALSE(m.kernel);
}

}
