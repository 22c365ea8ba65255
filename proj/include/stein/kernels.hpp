#pragma once

#include "stein/distributions.hpp"

#include <memory>
#include <optional>
#include <string_view>

namespace stein {

enum class KernelRoute { pearson, integral, smoothed };

std::string_view route_name(KernelRoute r) noexcept;

/// tau(x) = d1 (x - mu)^2 + d2 (x - mu) + d3
struct PearsonCoeffs {
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    double mu = 0.0;

    double operator()(double x) const noexcept {
        const double u = x - mu;
        return (d1 * u + d2) * u + d3;
    }
};

/// Evaluation of tau together with a flag for values that were not computed
/// directly (density underflow far in a tail).
struct KernelValue {
    double value = 0.0;
    bool flagged = false;
};

namespace detail {
class KernelImpl {
public:
    virtual ~KernelImpl() = default;
    virtual KernelValue eval(double x) const = 0;
};
}  // namespace detail

/// Stein kernel: Cov[W, phi(W)] = E[tau(W) phi'(W)].
class SteinKernel {
public:
    SteinKernel(KernelRoute route, DistributionSpec law, std::shared_ptr<const detail::KernelImpl> impl,
                std::optional<PearsonCoeffs> coeffs = std::nullopt);

    double operator()(double x) const { return impl_->eval(x).value; }
    KernelValue evaluate(double x) const { return impl_->eval(x); }

    KernelRoute provenance() const noexcept { return route_; }
    /// Law of W the kernel belongs to (for smoothed kernels, the law of Y + Z).
    const DistributionSpec& law() const noexcept { return law_; }
    const std::optional<PearsonCoeffs>& pearson_coeffs() const noexcept { return coeffs_; }

private:
    KernelRoute route_;
    DistributionSpec law_;
    std::shared_ptr<const detail::KernelImpl> impl_;
    std::optional<PearsonCoeffs> coeffs_;
};

/// Closed-form kernel for gaussian, beta, gamma, inverse-gamma (a > 1),
/// pareto (a > 1), exponential and uniform laws.
SteinKernel pearson_kernel(const DistributionSpec& d);

/// Pearson coefficients without building a kernel; nullopt for other families.
std::optional<PearsonCoeffs> pearson_coefficients(const DistributionSpec& d);

struct IntegralKernelOptions {
    std::size_t grid_points = 512;
    double tail = 1e-9;  // cache spans the [tail, 1 - tail] quantile range
    double density_floor = 1e-300;
    double rel_tol = 1e-11;
};

/// tau(x) = p(x)^{-1} * int_x^inf (y - mu) p(y) dy, cached on Chebyshev nodes.
SteinKernel integral_kernel(const DistributionSpec& d, const IntegralKernelOptions& opts = {});

/// Uncached evaluation of the tail-integral formula at one point.
KernelValue integral_kernel_direct(const DistributionSpec& d, double x, const IntegralKernelOptions& opts = {});

/// Y smoothed by independent N(0, eps^2) noise.
struct SmoothedSpec {
    DistributionSpec base;
    double epsilon = 0.0;
    DistributionSpec convolved;
};

SmoothedSpec make_smoothed(const DistributionSpec& base, double epsilon);

/// tau_eps(x) = eps^2 + E[(Y' - mu) Phibar_eps(x - Y')] / E[phi_eps(x - Y')]
SteinKernel smoothed_kernel(const SmoothedSpec& s);

}  // namespace stein
