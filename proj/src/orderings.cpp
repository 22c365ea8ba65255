#include "stein/orderings.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stein {

std::string_view relation_name(Relation r) noexcept {
    switch (r) {
        case Relation::st: return "st";
        case Relation::cx: return "cx";
        case Relation::nbue: return "nbue";
        case Relation::nwue: return "nwue";
    }
    return "unknown";
}

namespace {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Survival and stop-loss access with a Monte-Carlo fallback for laws that
// only have a sampler.
class TailView {
public:
    TailView(const DistributionSpec& d, const OrderOptions& opts, std::uint64_t stream_base) : d_(d) {
        deterministic_ = d.atoms() != nullptr || d.capabilities().cdf || d.capabilities().density;
        if (deterministic_) return;
        if (!d.capabilities().sampler) fail(Errc::unavailable, "no way to evaluate tails of " + d.describe());
        const std::size_t n = opts.mc_samples;
        std::vector<std::vector<double>> chunks(kMonteCarloBatches);
        parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
            const std::size_t count = n / kMonteCarloBatches + (b < n % kMonteCarloBatches ? 1 : 0);
            RandomStream rng(opts.seed, stream_base + b);
            auto& c = chunks[b];
            c.reserve(count);
            for (std::size_t i = 0; i < count; ++i) c.push_back(d.sample(rng));
        });
        for (auto& c : chunks) xs_.insert(xs_.end(), c.begin(), c.end());
        std::sort(xs_.begin(), xs_.end());
        // Suffix sums of x and x^2 give stop-loss values in O(log n).
        s1_.assign(xs_.size() + 1, 0.0);
        s2_.assign(xs_.size() + 1, 0.0);
        for (std::size_t i = xs_.size(); i-- > 0;) {
            s1_[i] = s1_[i + 1] + xs_[i];
            s2_[i] = s2_[i + 1] + xs_[i] * xs_[i];
        }
    }

    bool deterministic() const noexcept { return deterministic_; }

    std::string route() const {
        if (!deterministic_) return "monte-carlo";
        if (d_.atoms()) return "closed";
        switch (d_.family()) {
            case Family::gaussian:
            case Family::gamma:
            case Family::pareto:
            case Family::exponential:
            case Family::uniform:
            case Family::geometric_count: return "closed";
            default: return "quadrature";
        }
    }

    Estimate survival(double t) const {
        if (deterministic_) return {d_.survival(t), 0.0};
        const double n = static_cast<double>(xs_.size());
        const std::size_t k = upper(t);
        const double p = static_cast<double>(xs_.size() - k) / n;
        return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / n) / n)};
    }

    Estimate stop_loss(double t) const {
        if (deterministic_) return {d_.stop_loss(t), 0.0};
        const double n = static_cast<double>(xs_.size());
        const std::size_t k = upper(t);
        const double c = static_cast<double>(xs_.size() - k);
        const double m1 = (s1_[k] - t * c) / n;
        const double m2 = (s2_[k] - 2.0 * t * s1_[k] + t * t * c) / n;
        return {m1, std::sqrt(std::max(m2 - m1 * m1, 0.0) / n)};
    }

    std::vector<double> quantiles(const std::vector<double>& levels) const {
        std::vector<double> out;
        for (double p : levels) {
            if (deterministic_) {
                if (d_.atoms() || d_.capabilities().cdf) out.push_back(d_.quantile(p));
            } else {
                const auto idx = static_cast<std::size_t>(p * static_cast<double>(xs_.size() - 1));
                out.push_back(xs_[idx]);
            }
        }
        return out;
    }

private:
    std::size_t upper(double t) const {
        return static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), t) - xs_.begin());
    }

    const DistributionSpec& d_;
    bool deterministic_ = true;
    std::vector<double> xs_;
    std::vector<double> s1_;
    std::vector<double> s2_;
};

std::vector<double> logit_probabilities(std::size_t n, double tail) {
    const double lim = std::log((1.0 - tail) / tail);
    std::vector<double> out;
    for (double t : linspace(-lim, lim, n)) out.push_back(1.0 / (1.0 + std::exp(-t)));
    return out;
}

std::vector<double> build_grid(const TailView& va, const DistributionSpec& a, const TailView& vb,
                               const DistributionSpec& b, std::size_t size) {
    const std::size_t nq = std::max<std::size_t>(2, size * 3 / 8);
    const std::size_t ne = size > 2 * nq ? size - 2 * nq : 2;
    const auto levels = logit_probabilities(nq, 1e-9);
    std::vector<double> g = va.quantiles(levels);
    for (double x : vb.quantiles(levels)) g.push_back(x);

    double lo = kInf, hi = -kInf;
    for (double x : g) {
        if (std::isfinite(x)) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (!(lo < hi)) {
        const Interval ra = a.effective_range(), rb = b.effective_range();
        lo = std::min(ra.lo, rb.lo);
        hi = std::max(ra.hi, rb.hi);
    }
    for (double x : linspace(lo, hi, ne)) g.push_back(x);
    for (const DistributionSpec* d : {&a, &b}) {
        const Interval s = d->support();
        if (std::isfinite(s.lo)) g.push_back(s.lo);
        if (std::isfinite(s.hi)) g.push_back(s.hi);
        if (const auto* atoms = d->atoms(); atoms && atoms->size() <= 4096)
            for (const Atom& at : *atoms) g.push_back(at.value);
    }
    g.erase(std::remove_if(g.begin(), g.end(), [](double x) { return !std::isfinite(x); }), g.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    // Repeated quantiles (atoms) shrink the grid; refill by splitting the widest gaps.
    while (g.size() >= 2 && g.size() < size) {
        std::size_t widest = 0;
        for (std::size_t i = 1; i + 1 < g.size(); ++i)
            if (g[i + 1] - g[i] > g[widest + 1] - g[widest]) widest = i;
        const double mid = 0.5 * (g[widest] + g[widest + 1]);
        if (!(mid > g[widest] && mid < g[widest + 1])) break;
        g.insert(g.begin() + static_cast<long>(widest) + 1, mid);
    }
    return g;
}

std::string combined_route(const TailView& a, const TailView& b) {
    const std::string ra = a.route(), rb = b.route();
    if (ra == "monte-carlo" || rb == "monte-carlo") return "monte-carlo";
    if (ra == "quadrature" || rb == "quadrature") return "quadrature";
    return "closed";
}

// a - b, with differences inside a few ulps of the operands counted as ties.
double gap(double a, double b) {
    const double d = a - b;
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    return std::abs(d) <= 4.0 * kEps * std::max(std::abs(a), std::abs(b)) ? 0.0 : d;
}

// Scans signed violations v(t) against tol + widen(t).
template <class F>
void scan(OrderVerdict& out, F violation_at) {
    double best_excess = -kInf;
    double best_raw = 0.0;
    double raw_max = -kInf;
    out.holds = true;
    for (double t : out.grid) {
        const auto [v, widen] = violation_at(t);
        raw_max = std::max(raw_max, v);
        const double excess = v - widen;
        if (v > out.tolerance + widen) out.holds = false;
        if (excess > best_excess) {
            best_excess = excess;
            best_raw = v;
            out.witness = t;
        }
    }
    out.magnitude = best_raw;
    out.max_violation = std::max(0.0, raw_max);
}

}  // namespace

std::vector<double> comparison_grid(const DistributionSpec& a, const DistributionSpec& b, std::size_t size) {
    OrderOptions opts;
    const TailView va(a, opts, 0), vb(b, opts, kMonteCarloBatches);
    return build_grid(va, a, vb, b, size);
}

OrderVerdict check_st(const DistributionSpec& x, const DistributionSpec& y, const OrderOptions& opts) {
    const TailView vx(x, opts, 0), vy(y, opts, kMonteCarloBatches);
    OrderVerdict out;
    out.relation = Relation::st;
    out.tolerance = opts.tolerance;
    out.grid = opts.grid.empty() ? build_grid(vx, x, vy, y, opts.grid_size) : opts.grid;
    out.route = combined_route(vx, vy);
    scan(out, [&](double t) {
        const Estimate a = vx.survival(t), b = vy.survival(t);
        return std::pair{gap(a.value, b.value), 4.0 * std::hypot(a.se, b.se)};
    });
    return out;
}

OrderVerdict check_cx(const DistributionSpec& x, const DistributionSpec& y, const OrderOptions& opts) {
    const double mx = x.mean(), my = y.mean();
    if (!std::isfinite(mx) || !std::isfinite(my))
        fail(Errc::invalid_argument, "convex order needs finite means");
    if (std::abs(mx - my) > 1e-7) {
        std::ostringstream os;
        os.precision(17);
        os << "convex order impossible: means differ (" << mx << " vs " << my << ")";
        fail(Errc::mean_mismatch, os.str());
    }
    const TailView vx(x, opts, 0), vy(y, opts, kMonteCarloBatches);
    OrderVerdict out;
    out.relation = Relation::cx;
    out.tolerance = opts.tolerance;
    out.grid = opts.grid.empty() ? build_grid(vx, x, vy, y, opts.grid_size) : opts.grid;
    out.route = combined_route(vx, vy);
    scan(out, [&](double t) {
        const Estimate a = vx.stop_loss(t), b = vy.stop_loss(t);
        return std::pair{gap(a.value, b.value), 4.0 * std::hypot(a.se, b.se)};
    });
    return out;
}

std::pair<OrderVerdict, OrderVerdict> check_nbue_nwue(const DistributionSpec& w, const OrderOptions& opts) {
    if (w.support().lo < 0.0) fail(Errc::negative_support, "NBUE/NWUE need a nonnegative law");
    const double mean = w.mean();
    if (!(mean > 0.0) || !std::isfinite(mean)) fail(Errc::invalid_argument, "NBUE/NWUE need 0 < E[W] < inf");
    const double lambda = 1.0 / mean;
    const TailView vw(w, opts, 0);

    std::vector<double> grid = opts.grid;
    if (grid.empty()) {
        grid = build_grid(vw, w, vw, w, opts.grid_size);
        grid.push_back(0.0);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    }
    grid.erase(std::remove_if(grid.begin(), grid.end(), [](double x) { return x < 0.0; }), grid.end());

    // The equilibrium survival is lambda times the stop-loss transform of W.
    std::vector<Estimate> s(grid.size()), se(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s[i] = vw.survival(grid[i]);
        const Estimate sl = vw.stop_loss(grid[i]);
        se[i] = {std::clamp(lambda * sl.value, 0.0, 1.0), lambda * sl.se};
        if (grid[i] <= 0.0) se[i] = {1.0, 0.0};
    }
    auto make = [&](Relation r, double sign) {
        OrderVerdict out;
        out.relation = r;
        out.tolerance = opts.tolerance;
        out.grid = grid;
        out.route = vw.route();
        std::size_t i = 0;
        scan(out, [&](double) {
            const Estimate a = se[i], b = s[i];
            ++i;
            return std::pair{sign * gap(a.value, b.value), 4.0 * std::hypot(a.se, b.se)};
        });
        return out;
    };
    return {make(Relation::nbue, 1.0), make(Relation::nwue, -1.0)};
}

CountingVerdict check_counting_condition(const DistributionSpec& count, std::size_t n_max, double tail_mass,
                                         double tolerance) {
    if (!count.count_pmf(0).has_value() || count.support().lo < 0.0)
        fail(Errc::invalid_argument, "counting condition needs a law on the nonnegative integers");
    constexpr std::size_t kMaxTerms = 10'000'000;
    std::vector<double> surv;
    for (std::size_t j = 0;; ++j) {
        const double s = count.survival(static_cast<double>(j));
        surv.push_back(s);
        if (s < tail_mass && j >= n_max + 1) break;
        if (j >= kMaxTerms) fail(Errc::non_summable, "survival of N is not summable within the term budget");
    }
    // Suffix sums, accumulated from the smallest terms up.
    std::vector<double> suffix(surv.size() + 1, 0.0);
    for (std::size_t j = surv.size(); j-- > 0;) suffix[j] = suffix[j + 1] + surv[j];
    const double mean = suffix[0];

    CountingVerdict out;
    out.n_max = n_max;
    out.tolerance = tolerance;
    double worst = -kInf;
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double lhs = n + 1 < suffix.size() ? suffix[n + 1] : 0.0;
        const double rhs = (n < surv.size() ? surv[n] : 0.0) * mean;
        out.lhs.push_back(lhs);
        out.rhs.push_back(rhs);
        const double v = rhs - lhs;
        if (v > worst) {
            worst = v;
            out.witness = n;
        }
        if (v > tolerance) out.holds = false;
    }
    out.max_violation = std::max(0.0, worst);
    return out;
}

}  // namespace stein
