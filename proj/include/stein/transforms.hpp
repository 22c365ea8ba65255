#pragma once

#include "stein/distributions.hpp"

#include <memory>
#include <vector>

namespace stein {

/// Inverse-cdf sampler over a cached grid: piecewise cubic Hermite when the
/// density is continuous, piecewise linear otherwise.
class GridSampler {
public:
    GridSampler() = default;
    GridSampler(std::vector<double> x, std::vector<double> cdf, std::vector<double> density, bool hermite);

    double quantile(double u) const;
    double sample(RandomStream& rng) const { return quantile(rng.uniform()); }
    std::size_t size() const noexcept { return x_.size(); }

private:
    std::vector<double> x_;
    std::vector<double> f_;
    std::vector<double> p_;
    bool hermite_ = false;
};

inline constexpr std::size_t kZeroBiasGridPoints = 2048;

/// W* with E[W phi(W)] = sigma^2 E[phi'(W*)] for a mean-zero W.
class ZeroBiasSpec {
public:
    explicit ZeroBiasSpec(DistributionSpec base);

    const DistributionSpec& base() const noexcept { return base_; }
    double sigma2() const noexcept { return sigma2_; }
    /// Closed convex hull of the base support.
    Interval support() const noexcept { return support_; }

    /// sigma^-2 E[W 1(W > w)]
    double density(double w) const;
    double cdf(double w) const;
    double survival(double w) const;
    /// E[(W* - t)_+] = E[W (W - t)_+^2] / (2 sigma^2)
    double stop_loss(double t) const;
    double quantile(double u) const;
    double sample(RandomStream& rng) const;

    /// W* as a law usable by the orderings and bounds modules.
    DistributionSpec law() const;

private:
    const GridSampler& sampler() const;

    DistributionSpec base_;
    double sigma2_ = 0.0;
    Interval support_;
    struct Lazy;
    std::shared_ptr<Lazy> lazy_;
};

/// Rejects laws whose mean is farther than 1e-9 from zero.
ZeroBiasSpec zero_bias(const DistributionSpec& d);

enum class CouplingMode {
    monotone,     // X_I* = F*_I^{-1}(U) with U the randomised rank of X_I
    independent,  // X_I* drawn independently of X_I
};

struct CouplingDraw {
    double w = 0.0;
    double w_star = 0.0;
    double gap = 0.0;  // |W* - W|
    std::size_t index = 0;
};

/// W* = W - X_I + X_I*, P(I = i) = sigma_i^2 / sigma^2.
class SumZeroBiasCoupling {
public:
    SumZeroBiasCoupling(std::vector<DistributionSpec> parts, CouplingMode mode);

    const std::vector<DistributionSpec>& parts() const noexcept { return parts_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const ZeroBiasSpec& part_transform(std::size_t i) const { return transforms_.at(i); }
    CouplingMode mode() const noexcept { return mode_; }
    double sigma2() const noexcept { return sigma2_; }

    CouplingDraw sample(RandomStream& rng) const;

    /// E|W* - W| from the one-dimensional part laws: Wasserstein-1 distance
    /// for the monotone mode, the independent double integral otherwise.
    double exact_gap() const;
    /// E|X_i* - X_i| for one part under the chosen mode.
    double part_gap(std::size_t i) const;

    /// Monte-Carlo E|W* - W| over kMonteCarloBatches streams.
    Expectation mc_gap(std::size_t n, std::uint64_t seed, std::uint64_t stream_base = 0) const;

private:
    std::vector<DistributionSpec> parts_;
    std::vector<ZeroBiasSpec> transforms_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    CouplingMode mode_;
    double sigma2_ = 0.0;
};

SumZeroBiasCoupling zero_bias_sum(std::vector<DistributionSpec> parts, CouplingMode mode = CouplingMode::monotone);

/// W^e with E[phi(W)] - phi(0) = lambda^{-1} E[phi'(W^e)] for W >= 0.
class EquilibriumSpec {
public:
    explicit EquilibriumSpec(DistributionSpec base);

    const DistributionSpec& base() const noexcept { return base_; }
    double lambda() const noexcept { return lambda_; }
    Interval support() const noexcept { return support_; }

    /// lambda * int_x^inf P(W > y) dy
    double survival(double x) const;
    double cdf(double x) const { return 1.0 - survival(x); }
    double density(double x) const;
    double quantile(double u) const;
    double sample(RandomStream& rng) const;

    DistributionSpec law() const;

private:
    const GridSampler& sampler() const;

    DistributionSpec base_;
    double lambda_ = 0.0;
    Interval support_;
    struct Lazy;
    std::shared_ptr<Lazy> lazy_;
};

EquilibriumSpec equilibrium(const DistributionSpec& d);

struct TestPhi {
    std::string name;
    RealFn f;
    RealFn df;
};

struct IdentityResidual {
    std::string phi;
    double lhs = 0.0;  // E[phi(W)] - phi(0)
    double rhs = 0.0;  // lambda^{-1} E[phi'(W^e)]
    double residual = 0.0;
};

std::vector<IdentityResidual> equilibrium_identity_check(const EquilibriumSpec& e, const std::vector<TestPhi>& battery);

}  // namespace stein
