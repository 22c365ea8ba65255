#pragma once

#include "stein/numerics.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stein {

enum class Family {
    gaussian,
    beta,
    gamma,
    inverse_gamma,
    pareto,
    exponential,
    uniform,
    two_point,
    standardized_bernoulli,
    geometric_count,
    discrete_empirical,
    random_sum,
    permutation_statistic,
    convolution,
    transformed,
};

std::string_view family_name(Family f) noexcept;

struct Capabilities {
    bool density = false;
    bool cdf = false;
    bool sampler = false;
    bool closed_moments = false;
};

/// Point mass of a finitely supported law.
struct Atom {
    double value = 0.0;
    double prob = 0.0;
};

namespace detail {
class Law;
}

/// Immutable univariate law. Copies share the underlying implementation.
///
/// Parameterisations:
///   gaussian(mean, variance)          beta(alpha, beta)
///   gamma(shape, rate)                inverse-gamma(shape a, scale b)
///   pareto(shape a, scale m)          density a m^a x^(-a-1) on x >= m
///   exponential(rate)                 uniform(c, d)
///   two-point(a, b)                   values -a and b with mean zero
///   standardized-bernoulli(p, n)      (xi - p) / sqrt(n p q)
///   geometric-count(rho)              P(N = k) = (1 - rho) rho^k, k >= 0
///   discrete-empirical(v1, ..., vk)   equal weights
class DistributionSpec {
public:
    DistributionSpec() = default;
    explicit DistributionSpec(std::shared_ptr<const detail::Law> law);

    Family family() const;
    const std::vector<double>& params() const;
    Interval support() const;
    Capabilities capabilities() const;

    double mean() const;
    double variance() const;
    double sd() const;
    /// Supremum of the orders p with E|W|^p finite (infinity for light tails).
    double moment_limit() const;

    double density(double x) const;
    double cdf(double x) const;
    double survival(double x) const;
    double quantile(double p) const;
    double sample(RandomStream& rng) const;
    /// E[(W - t)_+], closed form or quadrature.
    double stop_loss(double t) const;

    /// Finite support points, when the law is finitely supported.
    const std::vector<Atom>* atoms() const;
    /// P(N = k) for integer-valued count laws.
    std::optional<double> count_pmf(long long k) const;

    /// Family-specific derived constants (e.g. "C", "sigma2" for permutation
    /// statistics, "degenerate" flag).
    std::optional<double> constant(const std::string& name) const;

    /// Quantile range [q(tail), q(1 - tail)] clipped to the support.
    Interval effective_range(double tail = 1e-9) const;

    /// Canonical "family:p1,p2,..." form accepted by parse_distribution.
    std::string describe() const;

    bool valid() const { return static_cast<bool>(law_); }

private:
    std::shared_ptr<const detail::Law> law_;
};

DistributionSpec make_distribution(Family family, std::span<const double> params);
DistributionSpec make_distribution(Family family, std::initializer_list<double> params);

DistributionSpec gaussian(double mean, double variance);
DistributionSpec beta_dist(double alpha, double beta);
DistributionSpec gamma_dist(double shape, double rate);
DistributionSpec inverse_gamma(double shape, double scale);
DistributionSpec pareto(double shape, double scale);
DistributionSpec exponential(double rate);
DistributionSpec uniform(double c, double d);
DistributionSpec two_point(double a, double b);
DistributionSpec standardized_bernoulli(double p, double n);
DistributionSpec geometric_count(double rho);
DistributionSpec discrete_empirical(std::span<const double> values);
DistributionSpec discrete_weighted(std::vector<Atom> atoms);
DistributionSpec point_mass(double c);
DistributionSpec rademacher();

/// Law of the sum of independent parts.
DistributionSpec sum_of_independents(std::span<const DistributionSpec> parts);
/// W - E[W], expressed as a convolution with a point mass.
DistributionSpec centered(const DistributionSpec& d);

/// W = X_1 + ... + X_N with N independent of the i.i.d. summands.
DistributionSpec random_sum(const DistributionSpec& count, const DistributionSpec& summand);

/// Square array stored row-major.
struct SquareArray {
    std::size_t n = 0;
    std::vector<double> values;
    double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// W = sum_i a[i][pi(i)] for a uniform permutation pi; with `standardized`
/// the law of Z = (W - n a..) / sigma.
DistributionSpec permutation_statistic(const SquareArray& a, bool standardized = false);

/// Law assembled from callbacks, used for derived laws such as W* and W^e.
/// Empty callbacks clear the matching capability.
struct LawCallbacks {
    std::string description;
    Interval support;
    double mean = 0.0;
    double variance = 0.0;
    double moment_limit = kInf;
    std::function<double(double)> density;
    std::function<double(double)> cdf;
    std::function<double(double)> survival;
    std::function<double(double)> quantile;
    std::function<double(double)> stop_loss;
    std::function<double(RandomStream&)> sampler;
};

DistributionSpec custom_distribution(LawCallbacks cb);

/// Parses "family:p1,p2,..."; composites use ';' between bracketed or plain
/// parts, e.g. "convolution:30*standardized-bernoulli:0.3,30" or
/// "random-sum:[geometric-count:0.5];[exponential:1]".
DistributionSpec parse_distribution(std::string_view text);

/// Expectation engine: exact sums for finite atoms, quadrature for densities.
/// Throws Errc::unavailable for sampler-only laws.
struct Expectation {
    double value = 0.0;
    double se = 0.0;  // zero for exact and quadrature routes
    std::string route;
};

double expect(const DistributionSpec& d, const RealFn& f, double rel_tol = kBoundRelTol,
              std::span<const double> extra_breaks = {});

/// Break points (support ends, mean +- k sd) used for density quadrature.
std::vector<double> quadrature_breaks(const DistributionSpec& d, std::span<const double> extra = {});

/// Monte-Carlo mean of f(W) over kMonteCarloBatches disjoint streams.
Expectation expect_mc(const DistributionSpec& d, const RealFn& f, std::size_t n, std::uint64_t seed,
                      std::uint64_t stream_base = 0);

/// Route preference: exact, then quadrature, then Monte Carlo.
Expectation expect_auto(const DistributionSpec& d, const RealFn& f, std::size_t n_mc, std::uint64_t seed,
                        double rel_tol = kBoundRelTol, std::span<const double> extra_breaks = {});

bool exact_or_quadrature(const DistributionSpec& d);

}  // namespace stein
