#pragma once

#include "stein/distributions.hpp"
#include "stein/transforms.hpp"

#include <string>
#include <utility>
#include <vector>

namespace stein {

enum class Relation { st, cx, nbue, nwue };

std::string_view relation_name(Relation r) noexcept;

/// Grid verdicts are necessary-condition checks: "holds-on-grid", never a proof.
struct OrderVerdict {
    Relation relation = Relation::st;
    std::vector<double> grid;
    double max_violation = 0.0;  // max(0, largest signed violation)
    bool holds = true;
    double witness = 0.0;    // grid point of the largest violation (meaningful when !holds)
    double magnitude = 0.0;  // violation at the witness
    double tolerance = 1e-9;
    std::string route;  // closed | quadrature | monte-carlo

    std::string verdict() const { return holds ? "holds-on-grid" : "fails"; }
};

struct OrderOptions {
    std::size_t grid_size = 256;
    double tolerance = 1e-9;
    std::size_t mc_samples = 1'000'000;
    std::uint64_t seed = 20240607;
    /// When nonempty, replaces the generated grid.
    std::vector<double> grid;
};

/// Quantile-spaced points of both laws, evenly spaced fill, and finite support ends.
std::vector<double> comparison_grid(const DistributionSpec& a, const DistributionSpec& b, std::size_t size);

/// X <=_st Y: P(X > t) <= P(Y > t) + tol on the grid.
OrderVerdict check_st(const DistributionSpec& x, const DistributionSpec& y, const OrderOptions& opts = {});

/// X <=_cx Y: equal means and E[(X - t)_+] <= E[(Y - t)_+] + tol on the grid.
/// Throws Errc::mean_mismatch when the means differ by more than 1e-7.
OrderVerdict check_cx(const DistributionSpec& x, const DistributionSpec& y, const OrderOptions& opts = {});

/// NBUE: lambda int_x^inf P(W > s) ds <= P(W > x); NWUE the reverse.
std::pair<OrderVerdict, OrderVerdict> check_nbue_nwue(const DistributionSpec& w, const OrderOptions& opts = {});

struct CountingVerdict {
    bool holds = true;
    std::size_t n_max = 0;
    std::vector<double> lhs;  // sum_k P(N > n + k + 1)
    std::vector<double> rhs;  // P(N > n) sum_k P(N > k)
    double max_violation = 0.0;
    std::size_t witness = 0;  // n with the largest rhs - lhs
    double tolerance = 1e-9;
};

/// Checks the counting condition on N for n = 0..n_max; tail sums stop once
/// P(N > j) drops below `tail_mass`.
CountingVerdict check_counting_condition(const DistributionSpec& count, std::size_t n_max, double tail_mass = 1e-12,
                                         double tolerance = 1e-9);

}  // namespace stein
