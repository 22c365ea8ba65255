#include "stein/distributions.hpp"
#include "stein/error.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/pareto.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace stein;

TEST_SUITE("distributions") {

TEST_CASE("catalog moments") {
    const auto g = gaussian(0, 1);
    CHECK(g.mean() == 0.0);
    CHECK(g.variance() == 1.0);
    CHECK(g.support().lo_infinite());

    const auto tp = two_point(1, 1);
    REQUIRE(tp.atoms());
    CHECK(tp.atoms()->size() == 2);
    CHECK((*tp.atoms())[0].prob == doctest::Approx(0.5));
    CHECK(tp.mean() == 0.0);
    CHECK(tp.variance() == doctest::Approx(1.0));

    const auto p = pareto(3, 1);
    CHECK(p.mean() == doctest::Approx(1.5));
    CHECK(p.variance() == doctest::Approx(0.75));
    CHECK(p.moment_limit() == 3.0);

    const auto t2 = two_point(0.5, 3);
    CHECK(t2.mean() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(t2.variance() == doctest::Approx(1.5));  // a b
}

TEST_CASE("cdf and quantile agree with boost") {
    const boost::math::beta_distribution<> bb(4, 8);
    const boost::math::gamma_distribution<> gb(2, 1);
    const boost::math::pareto_distribution<> pb(1, 3);
    const auto b = beta_dist(4, 8), g = gamma_dist(2, 1), p = pareto(3, 1);
    for (double u : {0.01, 0.2, 0.5, 0.9, 0.999}) {
        CHECK(b.quantile(u) == doctest::Approx(quantile(bb, u)).epsilon(1e-9));
        CHECK(g.quantile(u) == doctest::Approx(quantile(gb, u)).epsilon(1e-9));
        CHECK(p.quantile(u) == doctest::Approx(quantile(pb, u)).epsilon(1e-9));
    }
    CHECK(b.density(0.3) == doctest::Approx(pdf(bb, 0.3)).epsilon(1e-12));
    CHECK(g.cdf(1.7) == doctest::Approx(cdf(gb, 1.7)).epsilon(1e-12));
}

TEST_CASE("gamma uses the rate parameterisation") {
    const auto g = gamma_dist(2, 4);
    CHECK(g.mean() == doctest::Approx(0.5));
    CHECK(g.variance() == doctest::Approx(0.125));
}

TEST_CASE("bad parameters are rejected") {
    CHECK_THROWS_AS(gaussian(0, -1), Error);
    CHECK_THROWS_AS(beta_dist(0, 1), Error);
    CHECK_THROWS_AS(uniform(1, 1), Error);
    CHECK_THROWS_AS(parse_distribution("nosuch:1"), Error);
    CHECK_THROWS_AS(parse_distribution("gaussian:0"), Error);
}

TEST_CASE("sums of independent parts") {
    const DistributionSpec two[] = {gaussian(0, 1), gaussian(0, 1)};
    CHECK(sum_of_independents(two).variance() == doctest::Approx(2.0));

    std::vector<DistributionSpec> bern(30, standardized_bernoulli(0.3, 30));
    const auto w = sum_of_independents(bern);
    CHECK(std::abs(w.mean()) < 1e-14);
    CHECK(w.variance() == doctest::Approx(1.0).epsilon(1e-12));
    // exact atoms: 31 support points, probabilities sum to one
    REQUIRE(w.atoms());
    double total = 0.0;
    for (const auto& a : *w.atoms()) total += a.prob;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));

    const DistributionSpec uu[] = {uniform(0, 1), uniform(0, 1)};
    const auto tri = sum_of_independents(uu);
    CHECK(tri.density(1.0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(tri.density(0.5) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("random sums") {
    const auto w = random_sum(geometric_count(0.5), exponential(1));
    CHECK(w.mean() == doctest::Approx(1.0));
    CHECK(w.variance() == doctest::Approx(3.0));
    // P(W = 0) = P(N = 0) = 1/2, so P(W > t) = exp(-t/2)/2
    CHECK(w.survival(1.3) == doctest::Approx(0.5 * std::exp(-0.65)).epsilon(1e-9));

    const auto zero = random_sum(point_mass(0), exponential(1));
    CHECK(zero.mean() == 0.0);
    CHECK(zero.variance() == 0.0);
}

TEST_CASE("permutation statistic") {
    SquareArray id{3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
    const auto w = permutation_statistic(id);
    CHECK(w.mean() == doctest::Approx(1.0));
    // brute force over the 6 permutations
    std::vector<int> perm{0, 1, 2};
    double s = 0, s2 = 0;
    int count = 0;
    do {
        double v = 0;
        for (int i = 0; i < 3; ++i) v += id(i, perm[i]);
        s += v;
        s2 += v * v;
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double var = s2 / count - (s / count) * (s / count);
    CHECK(*w.constant("sigma2") == doctest::Approx(var).epsilon(1e-12));
    CHECK(w.variance() == doctest::Approx(var).epsilon(1e-12));

    SquareArray flat{3, std::vector<double>(9, 2.0)};
    const auto d = permutation_statistic(flat);
    CHECK(*d.constant("sigma2") == 0.0);
    CHECK(d.constant("degenerate").value_or(0.0) == 1.0);
    CHECK_THROWS_AS(permutation_statistic(flat, true), Error);
}

TEST_CASE("describe round trips through the parser") {
    for (const char* text : {"gaussian:0,1", "beta:4,8", "pareto:3,1", "exponential:1", "two-point:0.5,3",
                             "random-sum:[geometric-count:0.5];[exponential:1]",
                             "convolution:30*standardized-bernoulli:0.3,30"}) {
        const auto d = parse_distribution(text);
        const auto back = parse_distribution(d.describe());
        CHECK(back.describe() == d.describe());
        CHECK(back.mean() == doctest::Approx(d.mean()));
        CHECK(back.variance() == doctest::Approx(d.variance()));
    }
}

TEST_CASE("expectation routes") {
    const auto g = gaussian(1, 4);
    CHECK(expect(g, [](double x) { return x * x; }) == doctest::Approx(5.0).epsilon(1e-10));
    const auto tp = two_point(1, 2);
    CHECK(expect(tp, [](double x) { return x * x; }) == doctest::Approx(2.0).epsilon(1e-14));
    const auto e = expect_mc(gaussian(0, 1), [](double x) { return x; }, 200000, 3);
    CHECK(std::abs(e.value) < 4 * e.se);
}

TEST_CASE("sampling matches moments") {
    for (const char* text : {"beta:4,8", "inverse-gamma:5,3", "uniform:0,1", "two-point:1,2"}) {
        const auto d = parse_distribution(text);
        const auto e = expect_mc(d, [](double x) { return x; }, 400000, 11);
        CHECK(std::abs(e.value - d.mean()) < 4 * e.se);
    }
}

}
