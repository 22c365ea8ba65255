#include "stein/error.hpp"
#include "stein/orderings.hpp"
#include "stein/transforms.hpp"

#include <doctest.h>

#include <cmath>

using namespace stein;

TEST_SUITE("orderings") {

TEST_CASE("usual stochastic order") {
    const auto self = check_st(gamma_dist(2, 1), gamma_dist(2, 1));
    CHECK(self.holds);
    CHECK(self.max_violation == 0.0);
    CHECK(check_st(exponential(2), exponential(1)).holds);
    const auto v = check_st(exponential(1), exponential(2));
    CHECK_FALSE(v.holds);
    // largest gap of exp(-t) - exp(-2t) sits at t = log 2
    CHECK(v.witness == doctest::Approx(std::log(2.0)).epsilon(0.1));
}

TEST_CASE("convex order") {
    CHECK(check_cx(uniform(-1, 1), two_point(1, 1)).holds);
    CHECK(check_cx(zero_bias(two_point(1.5, 1.5)).law(), two_point(1.5, 1.5)).holds);
    // an asymmetric two-point law and its zero-bias uniform have different means
    CHECK_THROWS_AS(check_cx(zero_bias(two_point(0.5, 1.5)).law(), two_point(0.5, 1.5)), Error);
    CHECK(check_cx(two_point(1, 1), two_point(1, 1)).holds);
    const auto rev = check_cx(two_point(1, 1), uniform(-1, 1));
    CHECK_FALSE(rev.holds);
    CHECK(two_point(1, 1).stop_loss(0.9) == doctest::Approx(0.05));
    CHECK(uniform(-1, 1).stop_loss(0.9) == doctest::Approx(0.0025));
    CHECK_THROWS_AS(check_cx(exponential(1), exponential(2)), Error);
}

TEST_CASE("NBUE / NWUE") {
    const auto [be, we] = check_nbue_nwue(exponential(1.5));
    CHECK(be.holds);
    CHECK(we.holds);
    CHECK(be.max_violation == 0.0);
    CHECK(we.max_violation == 0.0);

    const auto [bu, wu] = check_nbue_nwue(uniform(0, 1));
    CHECK(bu.holds);
    CHECK_FALSE(wu.holds);

    OrderOptions o;
    o.grid_size = 256;
    const auto [bg, wg] = check_nbue_nwue(random_sum(geometric_count(0.5), exponential(1)), o);
    CHECK(wg.holds);
    CHECK(wg.grid.size() >= 256);
}

TEST_CASE("counting condition") {
    CHECK(check_counting_condition(geometric_count(0.5), 40).holds);
    CHECK(check_counting_condition(geometric_count(0.8), 40).holds);
    const auto three = check_counting_condition(point_mass(3), 10);
    CHECK_FALSE(three.holds);
    const double half[] = {0.0, 1.0};
    CHECK_FALSE(check_counting_condition(discrete_empirical(half), 5).holds);
}

}
