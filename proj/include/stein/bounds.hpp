#pragma once

#include "stein/distributions.hpp"
#include "stein/expr.hpp"
#include "stein/kernels.hpp"
#include "stein/montecarlo.hpp"
#include "stein/orderings.hpp"
#include "stein/transforms.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stein {

/// One draw of (W, T1, T2).
struct CouplingTriple {
    double w = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
};

/// (gamma, T1, T2) with E[gamma(W) phi(W)] = E[T1 phi'(T2)], or the matching
/// one-sided inequality.
struct SteinCoupling {
    enum class Direction { equality, upper_only, lower_only };

    std::string name;
    RealFn gamma;
    RealFn gamma_prime;
    RealFn gamma_inverse;
    std::function<CouplingTriple(RandomStream&)> joint_sampler;
    Direction direction = Direction::equality;
    /// Sampler of W alone; defaults to the first coordinate of joint_sampler.
    Sampler w_sampler;
};

std::string_view direction_name(SteinCoupling::Direction d) noexcept;

/// gamma(x) = x - E[W], T1 = tau(W), T2 = W.
SteinCoupling kernel_coupling(const SteinKernel& k);
/// gamma = id, T1 = sigma^2, T2 = W* drawn independently (the law is all that matters).
SteinCoupling zero_bias_coupling(const ZeroBiasSpec& zb);
/// gamma = id, T1 = sigma^2, T2 = W; an upper-only coupling when W* <=_cx W.
SteinCoupling convex_order_coupling(const DistributionSpec& d);

struct HypothesisCheck {
    std::string name;
    bool holds = true;
    /// false for analytic premises the code cannot test; these never gate.
    bool checked = true;
    /// false for component verdicts that feed a combined premise.
    bool gating = true;
    /// Which bound a failure withholds: both | upper | lower.
    std::string scope = "both";
    std::string detail;
    double max_violation = 0.0;
};

struct BoundReport {
    std::string method;
    std::string distribution;
    std::string g;

    /// Valid bounds only: absent when not computed or withheld by a failed check.
    std::optional<double> lower;
    std::optional<double> upper;
    /// Values computed regardless of the gate.
    std::optional<double> lower_diagnostic;
    std::optional<double> upper_diagnostic;
    double lower_se = 0.0;
    double upper_se = 0.0;
    std::string route;

    std::optional<McVariance> mc;
    /// Var[g(W)] by exact summation or quadrature, when available.
    std::optional<double> exact_variance;
    std::vector<HypothesisCheck> hypotheses;

    std::optional<double> remainder;
    std::optional<double> sup_g1g2;
    std::optional<double> gap;
    bool degenerate = false;
    std::vector<std::string> notes;

    std::uint64_t seed = 0;
    std::size_t n_mc = 0;
    double rel_tol = 0.0;
    double order_tol = 0.0;
    std::size_t grid = 0;

    bool hypotheses_hold() const;
    /// True when a bound was computed but a failed check withheld it.
    bool withheld() const;
};

struct BoundOptions {
    std::size_t n_mc = 1'000'000;
    std::uint64_t seed = 42;
    double rel_tol = kBoundRelTol;
    bool with_mc_variance = true;
    std::size_t grid_size = 256;
    double slack = 1e-9;
    OrderOptions order;
    /// Added to every stream id, so callers can own disjoint stream ranges.
    std::uint64_t stream_offset = 0;
};

enum class BoundSide { both, upper, lower };

/// Eq. (2)/(3) style bounds by Monte Carlo over the coupling.
BoundReport bound_generic(const SteinCoupling& c, const TestFunction& g, const BoundOptions& opts = {},
                          BoundSide side = BoundSide::both);

/// E[tau g']^2 / Var[W] <= Var[g(W)] <= E[tau g'^2].
BoundReport bound_cacoullos(const DistributionSpec& d, const SteinKernel& k, const TestFunction& g,
                            const BoundOptions& opts = {});

/// sigma^2 E[g'(W*)]^2 <= Var[g(W)] <= sigma^2 E[g'(W*)^2].
BoundReport bound_zero_bias(const ZeroBiasSpec& zb, const TestFunction& g, const BoundOptions& opts = {});

/// Non-centered laws go through centered(d) with g shifted by the mean.
BoundReport bound_zero_bias(const DistributionSpec& d, const TestFunction& g, const BoundOptions& opts = {});

/// sigma^2 E[g'(W)^2] + 2 sigma^2 sup|g'g''| E|W* - W|. Without `e_abs_gap`
/// the exact gap of `coupling` is used; with neither, throws
/// Errc::missing_gap.
BoundReport bound_zero_bias_remainder(const DistributionSpec& d, const TestFunction& g,
                                      std::optional<double> e_abs_gap, const BoundOptions& opts = {},
                                      const SumZeroBiasCoupling* coupling = nullptr);

/// sigma^2 E[g'(W)^2] when W* <=_cx W and g'^2 is convex; withheld otherwise.
BoundReport bound_convex_order(const DistributionSpec& d, const TestFunction& g, const BoundOptions& opts = {});

enum class EquilibriumBranch { a, b };

/// (a) upper lambda^{-1} E[W g'^2]; (b) lower (E[W g'])^2 / (lambda^2 Var W).
BoundReport bound_equilibrium(const DistributionSpec& d, const TestFunction& g, EquilibriumBranch branch,
                              const BoundOptions& opts = {});

/// phi_g(x) = int_0^{lambda x - 1} g'((u + 1) / lambda) du by quadrature.
double equilibrium_phi(const TestFunction& g, double lambda, double x);

enum class SmoothedClaim { i, ii };

/// Bounds on Var[g(Y)] computed through the law of Y + Z, Z ~ N(0, eps^2).
BoundReport bound_smoothed(const SmoothedSpec& s, const TestFunction& g, SmoothedClaim claim,
                           const BoundOptions& opts = {});

/// Grid convexity: f(x0) - 2 f(x1) + f(x2) >= -slack max(1, |f|) on an even grid.
HypothesisCheck convexity_check(const std::string& name, const RealFn& f, Interval iv, std::size_t points,
                                double slack, bool concave = false);

/// Grid monotonicity of f; `increasing` selects the direction.
HypothesisCheck monotonicity_check(const std::string& name, const RealFn& f, std::span<const double> grid,
                                   bool increasing, double slack);

/// Var[g(W)] by exact summation or quadrature; nullopt for sampler-only laws
/// or when E[g^2] is infinite.
std::optional<double> exact_variance(const DistributionSpec& d, const RealFn& g, double rel_tol = kBoundRelTol);

}  // namespace stein
