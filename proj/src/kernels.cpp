#include "stein/kernels.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stein {

std::string_view route_name(KernelRoute r) noexcept {
    switch (r) {
        case KernelRoute::pearson: return "pearson";
        case KernelRoute::integral: return "integral";
        case KernelRoute::smoothed: return "smoothed";
    }
    return "unknown";
}

SteinKernel::SteinKernel(KernelRoute route, DistributionSpec law, std::shared_ptr<const detail::KernelImpl> impl,
                         std::optional<PearsonCoeffs> coeffs)
    : route_(route), law_(std::move(law)), impl_(std::move(impl)), coeffs_(coeffs) {
    if (!impl_) fail(Errc::invalid_argument, "kernel without implementation");
}

namespace {

class ClosedKernel final : public detail::KernelImpl {
public:
    explicit ClosedKernel(std::function<double(double)> f) : f_(std::move(f)) {}
    KernelValue eval(double x) const override { return {f_(x), false}; }

private:
    std::function<double(double)> f_;
};

}  // namespace

std::optional<PearsonCoeffs> pearson_coefficients(const DistributionSpec& d) {
    const auto& p = d.params();
    const double mu = d.mean();
    switch (d.family()) {
        case Family::gaussian: return PearsonCoeffs{0.0, 0.0, p[1], mu};
        case Family::beta: {
            const double s = p[0] + p[1];
            return PearsonCoeffs{-1.0 / s, (1.0 - 2.0 * mu) / s, mu * (1.0 - mu) / s, mu};
        }
        case Family::gamma: return PearsonCoeffs{0.0, 1.0 / p[1], mu / p[1], mu};
        case Family::exponential: return PearsonCoeffs{0.0, 1.0 / p[0], 1.0 / (p[0] * p[0]), mu};
        case Family::inverse_gamma: {
            if (!(p[0] > 1.0)) return std::nullopt;
            const double k = 1.0 / (p[0] - 1.0);
            return PearsonCoeffs{k, 2.0 * mu * k, mu * mu * k, mu};
        }
        case Family::pareto: {
            if (!(p[0] > 1.0)) return std::nullopt;
            const double k = 1.0 / (p[0] - 1.0);
            const double m = p[1];
            return PearsonCoeffs{k, (2.0 * mu - m) * k, mu * (mu - m) * k, mu};
        }
        case Family::uniform: {
            const double h = 0.5 * (p[1] - p[0]);
            return PearsonCoeffs{-0.5, 0.0, 0.5 * h * h, mu};
        }
        default: return std::nullopt;
    }
}

SteinKernel pearson_kernel(const DistributionSpec& d) {
    const auto coeffs = pearson_coefficients(d);
    if (!coeffs) {
        const Family f = d.family();
        if (f == Family::inverse_gamma || f == Family::pareto)
            fail(Errc::invalid_argument, std::string(family_name(f)) + " kernel needs shape > 1");
        fail(Errc::unsupported_family, "no Pearson kernel for family " + std::string(family_name(f)));
    }
    const auto& p = d.params();
    std::function<double(double)> f;
    // Product forms avoid cancellation in the expanded quadratic.
    switch (d.family()) {
        case Family::gaussian: {
            const double v = p[1];
            f = [v](double) { return v; };
            break;
        }
        case Family::beta: {
            const double s = p[0] + p[1];
            f = [s](double x) { return x * (1.0 - x) / s; };
            break;
        }
        case Family::gamma: {
            const double b = p[1];
            f = [b](double x) { return x / b; };
            break;
        }
        case Family::exponential: {
            const double l = p[0];
            f = [l](double x) { return x / l; };
            break;
        }
        case Family::inverse_gamma: {
            const double k = p[0] - 1.0;
            f = [k](double x) { return x * x / k; };
            break;
        }
        case Family::pareto: {
            const double k = p[0] - 1.0;
            const double m = p[1];
            f = [k, m](double x) { return x * (x - m) / k; };
            break;
        }
        case Family::uniform: {
            const double c = p[0], e = p[1];
            f = [c, e](double x) { return 0.5 * (x - c) * (e - x); };
            break;
        }
        default: fail(Errc::unsupported_family, "no Pearson kernel");
    }
    return SteinKernel(KernelRoute::pearson, d, std::make_shared<ClosedKernel>(std::move(f)), coeffs);
}

// ------------------------------------------------------------------ integral

KernelValue integral_kernel_direct(const DistributionSpec& d, double x, const IntegralKernelOptions& opts) {
    if (!d.capabilities().density) fail(Errc::unavailable, d.describe() + " has no density");
    const double mu = d.mean();
    if (!std::isfinite(mu)) fail(Errc::invalid_argument, "integral kernel needs a finite mean");
    const Interval s = d.support();
    const double p = d.density(x);
    if (!(p > opts.density_floor)) return {0.0, true};

    QuadOptions q;
    q.rel_tol = opts.rel_tol;
    q.abs_tol = 1e-300;
    const double extra[] = {x};
    std::vector<double> br;
    const bool left = x <= mu;
    for (double b : quadrature_breaks(d, extra)) {
        if (left ? b <= x : b >= x) br.push_back(b);
    }
    if (left) {
        if (br.empty() || br.front() > s.lo) br.insert(br.begin(), s.lo);
        if (br.back() < x) br.push_back(x);
    } else {
        if (br.empty() || br.front() > x) br.insert(br.begin(), x);
        if (br.back() < s.hi) br.push_back(s.hi);
    }
    const double tail =
        integrate_pieces([&](double y) { return (y - mu) * d.density(y); }, br, q, d.sd()).value;
    return {(left ? -tail : tail) / p, false};
}

namespace {

class CachedIntegralKernel final : public detail::KernelImpl {
public:
    CachedIntegralKernel(DistributionSpec d, IntegralKernelOptions opts) : d_(std::move(d)), opts_(opts) {
        const Interval s = d_.support();
        double lo = std::max(s.lo, d_.quantile(opts_.tail));
        double hi = std::min(s.hi, d_.quantile(1.0 - opts_.tail));
        if (!(lo < hi)) fail(Errc::invalid_argument, "degenerate quantile range for integral kernel");
        nodes_ = chebyshev_grid(lo, hi, std::max<std::size_t>(opts_.grid_points, 8));
        values_.resize(nodes_.size());
        flags_.resize(nodes_.size());
        parallel_batches(nodes_.size(), [&](std::size_t i) {
            const KernelValue v = integral_kernel_direct(d_, nodes_[i], opts_);
            values_[i] = v.value;
            flags_[i] = v.flagged ? 1 : 0;
        });
    }

    KernelValue eval(double x) const override {
        if (x < nodes_.front() || x > nodes_.back()) {
            KernelValue v = integral_kernel_direct(d_, x, opts_);
            if (v.flagged) v.value = x < nodes_.front() ? values_.front() : values_.back();
            return v;
        }
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
        i = i == 0 ? 0 : i - 1;
        if (i + 1 >= nodes_.size()) i = nodes_.size() - 2;
        if (x == nodes_[i]) return {values_[i], flags_[i] != 0};

        // Six-point stencil around [x_i, x_{i+1}].
        const std::size_t n = nodes_.size();
        std::size_t a = i >= 2 ? i - 2 : 0;
        if (a + 6 > n) a = n - 6;
        double y = 0.0;
        for (std::size_t j = a; j < a + 6; ++j) {
            double w = 1.0;
            for (std::size_t k = a; k < a + 6; ++k)
                if (k != j) w *= (x - nodes_[k]) / (nodes_[j] - nodes_[k]);
            y += w * values_[j];
        }
        // Where the data is monotone across the bracket and its neighbours, keep
        // the interpolant inside the bracket values.
        if (i >= 1 && i + 2 < n) {
            const double v0 = values_[i - 1], v1 = values_[i], v2 = values_[i + 1], v3 = values_[i + 2];
            const bool up = v0 <= v1 && v1 <= v2 && v2 <= v3;
            const bool down = v0 >= v1 && v1 >= v2 && v2 >= v3;
            if (up || down) y = std::clamp(y, std::min(v1, v2), std::max(v1, v2));
        }
        return {y, flags_[i] != 0 || flags_[i + 1] != 0};
    }

private:
    DistributionSpec d_;
    IntegralKernelOptions opts_;
    std::vector<double> nodes_;
    std::vector<double> values_;
    std::vector<char> flags_;
};

}  // namespace

SteinKernel integral_kernel(const DistributionSpec& d, const IntegralKernelOptions& opts) {
    if (!d.capabilities().density || !d.capabilities().cdf)
        fail(Errc::unavailable, "integral kernel needs a density and cdf: " + d.describe());
    if (!std::isfinite(d.mean())) fail(Errc::invalid_argument, "integral kernel needs a finite mean");
    return SteinKernel(KernelRoute::integral, d, std::make_shared<CachedIntegralKernel>(d, opts),
                       pearson_coefficients(d));
}

// ------------------------------------------------------------------ smoothed

SmoothedSpec make_smoothed(const DistributionSpec& base, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(Errc::invalid_argument, "epsilon must be positive");
    if (!base.atoms() && !base.capabilities().density)
        fail(Errc::unavailable, "smoothing needs a finitely supported or density-capable base law");
    const DistributionSpec parts[] = {base, gaussian(0.0, epsilon * epsilon)};
    return {base, epsilon, sum_of_independents(parts)};
}

namespace {

class AtomSmoothedKernel final : public detail::KernelImpl {
public:
    AtomSmoothedKernel(std::vector<Atom> atoms, double mu, double eps)
        : atoms_(std::move(atoms)), mu_(mu), eps_(eps) {}

    KernelValue eval(double x) const override {
        // Log-domain weights; left of the mean the numerator is rewritten with
        // sum p (y - mu) = 0 so neither side cancels.
        const bool right = x >= mu_;
        double m = -kInf;
        for (const Atom& a : atoms_) {
            const double z = (x - a.value) / eps_;
            m = std::max(m, std::log(a.prob) - 0.5 * z * z);
        }
        double num = 0.0, den = 0.0;
        for (const Atom& a : atoms_) {
            const double z = (x - a.value) / eps_;
            const double lp = std::log(a.prob);
            den += std::exp(lp - 0.5 * z * z - m);
            const double ls = right ? normal_log_sf(z) : normal_log_sf(-z);
            num += (a.value - mu_) * std::exp(lp + ls - m);
        }
        if (!right) num = -num;
        const double ratio = num / den * std::sqrt(2.0 * std::numbers::pi) * eps_;
        return {eps_ * eps_ + ratio, false};
    }

private:
    std::vector<Atom> atoms_;
    double mu_;
    double eps_;
};

class DensitySmoothedKernel final : public detail::KernelImpl {
public:
    DensitySmoothedKernel(DistributionSpec base, double eps) : base_(std::move(base)), eps_(eps) {}

    KernelValue eval(double x) const override {
        const double mu = base_.mean();
        const bool right = x >= mu;
        std::vector<double> extra;
        for (double k : {-8.0, -3.0, 0.0, 3.0, 8.0}) extra.push_back(x + k * eps_);
        const auto br = quadrature_breaks(base_, extra);
        QuadOptions q;
        q.rel_tol = 1e-11;
        q.abs_tol = 1e-300;
        const double scale = base_.sd();
        const double den = integrate_pieces(
                               [&](double y) {
                                   const double p = base_.density(y);
                                   return p == 0.0 ? 0.0 : p * normal_pdf((x - y) / eps_) / eps_;
                               },
                               br, q, scale)
                               .value;
        if (!(den > 1e-300)) return {eps_ * eps_, true};
        double num = integrate_pieces(
                         [&](double y) {
                             const double p = base_.density(y);
                             if (p == 0.0) return 0.0;
                             const double z = (x - y) / eps_;
                             return (y - mu) * p * (right ? normal_sf(z) : normal_cdf(z));
                         },
                         br, q, scale)
                         .value;
        if (!right) num = -num;
        return {eps_ * eps_ + num / den, false};
    }

private:
    DistributionSpec base_;
    double eps_;
};

}  // namespace

SteinKernel smoothed_kernel(const SmoothedSpec& s) {
    if (!(s.epsilon > 0.0)) fail(Errc::invalid_argument, "epsilon must be positive");
    std::shared_ptr<const detail::KernelImpl> impl;
    if (const auto* atoms = s.base.atoms()) {
        impl = std::make_shared<AtomSmoothedKernel>(*atoms, s.base.mean(), s.epsilon);
    } else if (s.base.capabilities().density) {
        impl = std::make_shared<DensitySmoothedKernel>(s.base, s.epsilon);
    } else {
        fail(Errc::unavailable, "smoothed kernel needs a finitely supported or density-capable base law");
    }
    return SteinKernel(KernelRoute::smoothed, s.convolved, impl);
}

}  // namespace stein
