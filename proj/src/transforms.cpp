#include "stein/transforms.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace stein {

// ---------------------------------------------------------------- GridSampler

GridSampler::GridSampler(std::vector<double> x, std::vector<double> cdf, std::vector<double> density, bool hermite)
    : x_(std::move(x)), f_(std::move(cdf)), p_(std::move(density)), hermite_(hermite) {
    if (x_.size() < 2 || f_.size() != x_.size() || (hermite_ && p_.size() != x_.size()))
        fail(Errc::invalid_argument, "grid sampler needs matching grids of at least two points");
    // Enforce a nondecreasing table; rounding can leave tiny inversions.
    for (std::size_t i = 1; i < f_.size(); ++i) f_[i] = std::max(f_[i], f_[i - 1]);
}

double GridSampler::quantile(double u) const {
    if (u <= f_.front()) return x_.front();
    if (u >= f_.back()) return x_.back();
    auto it = std::upper_bound(f_.begin(), f_.end(), u);
    const std::size_t i = static_cast<std::size_t>(it - f_.begin()) - 1;
    const double f0 = f_[i], f1 = f_[i + 1];
    const double h = x_[i + 1] - x_[i];
    if (!(f1 > f0)) return x_[i];
    if (!hermite_) return x_[i] + (u - f0) / (f1 - f0) * h;
    const double m0 = h * p_[i], m1 = h * p_[i + 1];
    auto H = [&](double t) {
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * m1;
    };
    double a = 0.0, b = 1.0;
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (a + b);
        if (H(mid) < u) a = mid;
        else b = mid;
    }
    return x_[i] + 0.5 * (a + b) * h;
}

namespace {

constexpr double kGridTail = 1e-12;

// Logit-spaced probabilities in [tail, 1 - tail].
std::vector<double> logit_levels(std::size_t n) {
    const double lim = std::log((1.0 - kGridTail) / kGridTail);
    std::vector<double> out;
    for (double t : linspace(-lim, lim, n)) out.push_back(1.0 / (1.0 + std::exp(-t)));
    return out;
}

void sort_unique(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Grid nodes for a derived law whose tails may be heavier than the base law's.
std::vector<double> derived_grid(const DistributionSpec& base, Interval hull, std::size_t n,
                                 const std::function<double(double)>& upper_tail,
                                 const std::function<double(double)>& lower_tail) {
    std::vector<double> x;
    if (const auto* atoms = base.atoms()) {
        x = linspace(hull.lo, hull.hi, n);
        for (const Atom& a : *atoms) x.push_back(a.value);
        sort_unique(x);
        return x;
    }
    for (double p : logit_levels(n)) x.push_back(hull.clamp(base.quantile(p)));
    sort_unique(x);
    for (int k = 0; k < 400 && hull.hi_infinite() && upper_tail(x.back()) > kGridTail; ++k) {
        const double step = std::max({x.back() - x[x.size() - 2], std::abs(x.back()), 1.0});
        x.push_back(x.back() + step);
    }
    for (int k = 0; k < 400 && hull.lo_infinite() && lower_tail(x.front()) > kGridTail; ++k) {
        const double step = std::max({x[1] - x.front(), std::abs(x.front()), 1.0});
        x.insert(x.begin(), x.front() - step);
    }
    return x;
}

QuadOptions tight() {
    QuadOptions q;
    q.rel_tol = 1e-11;
    q.abs_tol = 1e-300;
    return q;
}

// int over [from, to] of f against the density of d, with d's breakpoints.
double density_integral(const DistributionSpec& d, const RealFn& f, double from, double to,
                        std::span<const double> extra = {}) {
    if (!(from < to)) return 0.0;
    std::vector<double> br{from, to};
    for (double b : quadrature_breaks(d, extra))
        if (b > from && b < to) br.push_back(b);
    sort_unique(br);
    // a tail anchored far out (heavy-tailed laws) needs a map scaled to the anchor
    double scale = d.sd();
    if (!std::isfinite(to)) scale = std::max(scale, std::abs(br[br.size() - 2]));
    if (!std::isfinite(from)) scale = std::max(scale, std::abs(br[1]));
    return integrate_pieces(
               [&](double y) {
                   const double p = d.density(y);
                   return p == 0.0 ? 0.0 : f(y) * p;
               },
               br, tight(), scale)
        .value;
}

// Raw moment E[W^k] for the law's moment bookkeeping.
double raw_moment(const DistributionSpec& d, int k) {
    if (const auto* atoms = d.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms) s += a.prob * std::pow(a.value, k);
        return s;
    }
    if (static_cast<double>(k) >= d.moment_limit()) return kInf;
    if (d.capabilities().density) return expect(d, [k](double x) { return std::pow(x, k); }, 1e-11);
    if (d.capabilities().cdf && d.support().lo >= 0.0) {
        const auto br = quadrature_breaks(d);
        std::vector<double> pos;
        for (double b : br)
            if (b >= 0.0) pos.push_back(b);
        if (pos.empty() || pos.front() > 0.0) pos.insert(pos.begin(), 0.0);
        return integrate_pieces([&](double x) { return k * std::pow(x, k - 1) * d.survival(x); }, pos, tight(),
                                d.sd())
            .value;
    }
    fail(Errc::unavailable, "moment of " + d.describe() + " needs atoms, a density, or a nonnegative cdf");
}

}  // namespace

// ---------------------------------------------------------------- zero bias

struct ZeroBiasSpec::Lazy {
    std::once_flag once;
    GridSampler grid;
};

ZeroBiasSpec::ZeroBiasSpec(DistributionSpec base) : base_(std::move(base)), lazy_(std::make_shared<Lazy>()) {
    sigma2_ = base_.variance();
    if (!(sigma2_ > 0.0)) fail(Errc::zero_variance, "zero-bias transform needs positive variance: " + base_.describe());
    if (!std::isfinite(sigma2_)) fail(Errc::invalid_argument, "zero-bias transform needs finite variance");
    if (std::abs(base_.mean()) > 1e-9)
        fail(Errc::invalid_argument, "zero-bias transform needs a mean-zero law (|mean| <= 1e-9); center it first");
    if (!base_.atoms() && !(base_.capabilities().density && base_.capabilities().cdf))
        fail(Errc::unavailable, "zero-bias transform needs finite support or a density: " + base_.describe());
    support_ = base_.support();
}

double ZeroBiasSpec::density(double w) const {
    if (w < support_.lo || w > support_.hi) return 0.0;
    if (const auto* atoms = base_.atoms()) {
        // right-continuous inside the hull, left limit at its top end (closed-interval convention)
        const bool top = w >= support_.hi;
        double s = 0.0;
        for (const Atom& a : *atoms)
            if (a.value > w || (top && a.value >= w)) s += a.prob * a.value;
        return std::max(0.0, s) / sigma2_;
    }
    const double t = base_.stop_loss(w) + w * base_.survival(w);
    return std::max(0.0, t) / sigma2_;
}

// F*(w) = sigma^-2 E[W (W - w) 1(W <= w)] for w <= 0, and
// 1 - F*(w) = sigma^-2 E[W (W - w) 1(W > w)]; both sides are sign-definite.
double ZeroBiasSpec::cdf(double w) const {
    if (w <= support_.lo) return 0.0;
    if (w >= support_.hi) return 1.0;
    if (w > 0.0) return 1.0 - survival(w);
    if (const auto* atoms = base_.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms)
            if (a.value <= w) s += a.prob * a.value * (a.value - w);
        return std::clamp(s / sigma2_, 0.0, 1.0);
    }
    const double s = density_integral(base_, [w](double y) { return y * (y - w); }, support_.lo, w);
    return std::clamp(s / sigma2_, 0.0, 1.0);
}

double ZeroBiasSpec::survival(double w) const {
    if (w <= support_.lo) return 1.0;
    if (w >= support_.hi) return 0.0;
    if (w <= 0.0) return 1.0 - cdf(w);
    if (const auto* atoms = base_.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms)
            if (a.value > w) s += a.prob * a.value * (a.value - w);
        return std::clamp(s / sigma2_, 0.0, 1.0);
    }
    const double s = density_integral(base_, [w](double y) { return y * (y - w); }, w, support_.hi);
    return std::clamp(s / sigma2_, 0.0, 1.0);
}

double ZeroBiasSpec::stop_loss(double t) const {
    if (const auto* atoms = base_.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms)
            if (a.value > t) s += a.prob * a.value * (a.value - t) * (a.value - t);
        return s / (2.0 * sigma2_);
    }
    if (base_.moment_limit() <= 3.0) return kInf;
    const double from = std::max(t, support_.lo);
    const double extra[] = {0.0, t};
    const double s =
        density_integral(base_, [t](double y) { return y * (y - t) * (y - t); }, from, support_.hi, extra);
    return s / (2.0 * sigma2_);
}

const GridSampler& ZeroBiasSpec::sampler() const {
    std::call_once(lazy_->once, [this] {
        const bool discrete = base_.atoms() != nullptr;
        const auto x = derived_grid(
            base_, support_, kZeroBiasGridPoints, [this](double v) { return survival(v); },
            [this](double v) { return cdf(v); });
        std::vector<double> f(x.size()), p(x.size());
        parallel_batches(x.size(), [&](std::size_t i) {
            f[i] = cdf(x[i]);
            p[i] = density(x[i]);
        });
        lazy_->grid = GridSampler(x, std::move(f), std::move(p), !discrete);
    });
    return lazy_->grid;
}

double ZeroBiasSpec::quantile(double u) const { return sampler().quantile(u); }
double ZeroBiasSpec::sample(RandomStream& rng) const { return sampler().sample(rng); }

DistributionSpec ZeroBiasSpec::law() const {
    LawCallbacks cb;
    cb.description = "zero-bias:[" + base_.describe() + "]";
    cb.support = support_;
    const double m3 = raw_moment(base_, 3);
    const double m4 = raw_moment(base_, 4);
    cb.mean = m3 / (2.0 * sigma2_);
    cb.variance = std::isfinite(m4) && std::isfinite(cb.mean) ? m4 / (3.0 * sigma2_) - cb.mean * cb.mean : kInf;
    cb.moment_limit = base_.moment_limit() - 2.0;
    const ZeroBiasSpec self = *this;
    cb.density = [self](double w) { return self.density(w); };
    cb.cdf = [self](double w) { return self.cdf(w); };
    cb.survival = [self](double w) { return self.survival(w); };
    cb.quantile = [self](double u) { return self.quantile(u); };
    cb.stop_loss = [self](double t) { return self.stop_loss(t); };
    cb.sampler = [self](RandomStream& rng) { return self.sample(rng); };
    return custom_distribution(std::move(cb));
}

ZeroBiasSpec zero_bias(const DistributionSpec& d) { return ZeroBiasSpec(d); }

// ------------------------------------------------------------ sum coupling

SumZeroBiasCoupling::SumZeroBiasCoupling(std::vector<DistributionSpec> parts, CouplingMode mode)
    : parts_(std::move(parts)), mode_(mode) {
    if (parts_.empty()) fail(Errc::invalid_argument, "zero-bias coupling needs at least one part");
    std::map<std::string, std::size_t> seen;
    for (const auto& p : parts_) {
        if (!p.capabilities().sampler) fail(Errc::invalid_argument, "every coupling part needs a sampler");
        const std::string key = p.describe();
        auto it = seen.find(key);
        if (it != seen.end()) {
            transforms_.push_back(transforms_[it->second]);
        } else {
            seen.emplace(key, transforms_.size());
            transforms_.push_back(zero_bias(p));
        }
        sigma2_ += p.variance();
    }
    double acc = 0.0;
    for (const auto& p : parts_) {
        weights_.push_back(p.variance() / sigma2_);
        acc += weights_.back();
        cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
}

namespace {

// Randomised probability-integral transform of x under d.
double randomized_rank(const DistributionSpec& d, double x, RandomStream& rng) {
    if (const auto* atoms = d.atoms()) {
        double below = 0.0, at = 0.0;
        for (const Atom& a : *atoms) {
            if (a.value < x) below += a.prob;
            else if (a.value == x) at += a.prob;
        }
        return below + rng.uniform() * at;
    }
    return d.cdf(x);
}

}  // namespace

CouplingDraw SumZeroBiasCoupling::sample(RandomStream& rng) const {
    thread_local std::vector<double> xs;
    xs.resize(parts_.size());
    double w = 0.0;
    for (std::size_t j = 0; j < parts_.size(); ++j) {
        xs[j] = parts_[j].sample(rng);
        w += xs[j];
    }
    const double u = rng.uniform();
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::size_t i = it == cumulative_.end() ? parts_.size() - 1 : static_cast<std::size_t>(it - cumulative_.begin());
    double star;
    if (mode_ == CouplingMode::monotone) {
        star = transforms_[i].quantile(randomized_rank(parts_[i], xs[i], rng));
    } else {
        star = transforms_[i].sample(rng);
    }
    CouplingDraw d;
    d.w = w;
    d.w_star = w - xs[i] + star;
    d.gap = std::abs(star - xs[i]);
    d.index = i;
    return d;
}

double SumZeroBiasCoupling::part_gap(std::size_t i) const {
    const DistributionSpec& x = parts_.at(i);
    const ZeroBiasSpec& zb = transforms_.at(i);
    const Interval hull = zb.support();
    if (mode_ == CouplingMode::monotone) {
        // W1 = int |F - F*| dx
        std::vector<double> br{hull.lo, hull.hi};
        if (const auto* atoms = x.atoms()) {
            for (const Atom& a : *atoms) br.push_back(a.value);
        } else {
            for (double b : quadrature_breaks(x)) br.push_back(b);
        }
        sort_unique(br);
        return integrate_pieces([&](double t) { return std::abs(x.cdf(t) - zb.cdf(t)); }, br, tight(), x.sd())
            .value;
    }
    // E|X* - X| with independent draws: E|Y - c| = 2 E[(Y - c)_+] - (E[Y] - c).
    const DistributionSpec star = zb.law();
    const double mean_star = star.mean();
    if (!std::isfinite(mean_star)) return kInf;
    auto abs_dev = [&](double c) { return 2.0 * zb.stop_loss(c) - (mean_star - c); };
    if (const auto* atoms = x.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms) s += a.prob * abs_dev(a.value);
        return s;
    }
    return expect(x, abs_dev, 1e-10);
}

double SumZeroBiasCoupling::exact_gap() const {
    double s = 0.0;
    std::map<std::string, double> memo;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        const std::string key = parts_[i].describe();
        auto it = memo.find(key);
        if (it == memo.end()) it = memo.emplace(key, part_gap(i)).first;
        s += weights_[i] * it->second;
    }
    return s;
}

Expectation SumZeroBiasCoupling::mc_gap(std::size_t n, std::uint64_t seed, std::uint64_t stream_base) const {
    if (n < 2) fail(Errc::invalid_argument, "Monte-Carlo gap needs at least 2 draws");
    std::vector<Moments> parts(kMonteCarloBatches);
    parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
        const std::size_t count = n / kMonteCarloBatches + (b < n % kMonteCarloBatches ? 1 : 0);
        RandomStream rng(seed, stream_base + b);
        Moments m;
        for (std::size_t k = 0; k < count; ++k) m.add(sample(rng).gap);
        parts[b] = m;
    });
    Moments all;
    for (const auto& m : parts) all.merge(m);
    return {all.mean, all.se_mean(), "monte-carlo"};
}

SumZeroBiasCoupling zero_bias_sum(std::vector<DistributionSpec> parts, CouplingMode mode) {
    return SumZeroBiasCoupling(std::move(parts), mode);
}

// -------------------------------------------------------------- equilibrium

struct EquilibriumSpec::Lazy {
    std::once_flag once;
    GridSampler grid;
};

EquilibriumSpec::EquilibriumSpec(DistributionSpec base) : base_(std::move(base)), lazy_(std::make_shared<Lazy>()) {
    if (base_.support().lo < 0.0)
        fail(Errc::negative_support, "equilibrium transform needs a nonnegative law: " + base_.describe());
    const double m = base_.mean();
    if (!(m > 0.0) || !std::isfinite(m)) fail(Errc::invalid_argument, "equilibrium transform needs 0 < E[W] < inf");
    if (!base_.atoms() && !base_.capabilities().cdf)
        fail(Errc::unavailable, "equilibrium transform needs a survival function: " + base_.describe());
    lambda_ = 1.0 / m;
    const double hi = base_.support().hi;
    support_ = Interval(0.0, hi > 0.0 ? hi : std::nextafter(0.0, 1.0));
}

double EquilibriumSpec::survival(double x) const {
    if (x <= 0.0) return 1.0;
    if (x >= support_.hi) return 0.0;
    return std::clamp(lambda_ * base_.stop_loss(x), 0.0, 1.0);
}

double EquilibriumSpec::density(double x) const {
    if (x < 0.0 || x > support_.hi) return 0.0;
    return lambda_ * base_.survival(x);
}

const GridSampler& EquilibriumSpec::sampler() const {
    std::call_once(lazy_->once, [this] {
        const bool discrete = base_.atoms() != nullptr;
        const auto x = derived_grid(
            base_, support_, kZeroBiasGridPoints, [this](double v) { return survival(v); },
            [](double) { return 0.0; });
        std::vector<double> f(x.size()), p(x.size());
        parallel_batches(x.size(), [&](std::size_t i) {
            f[i] = cdf(x[i]);
            p[i] = density(x[i]);
        });
        // The density jumps wherever W has an atom, so only continuous laws
        // with no mass at zero get the cubic table.
        const bool smooth = !discrete && base_.capabilities().density;
        lazy_->grid = GridSampler(x, std::move(f), std::move(p), smooth);
    });
    return lazy_->grid;
}

double EquilibriumSpec::quantile(double u) const { return sampler().quantile(u); }
double EquilibriumSpec::sample(RandomStream& rng) const { return sampler().sample(rng); }

DistributionSpec EquilibriumSpec::law() const {
    LawCallbacks cb;
    cb.description = "equilibrium:[" + base_.describe() + "]";
    cb.support = support_;
    const double m2 = raw_moment(base_, 2);
    const double m3 = raw_moment(base_, 3);
    cb.mean = lambda_ * m2 / 2.0;
    cb.variance = std::isfinite(m3) && std::isfinite(cb.mean) ? lambda_ * m3 / 3.0 - cb.mean * cb.mean : kInf;
    cb.moment_limit = base_.moment_limit() - 1.0;
    const EquilibriumSpec self = *this;
    cb.density = [self](double x) { return self.density(x); };
    cb.survival = [self](double x) { return self.survival(x); };
    cb.quantile = [self](double u) { return self.quantile(u); };
    cb.sampler = [self](RandomStream& rng) { return self.sample(rng); };
    return custom_distribution(std::move(cb));
}

EquilibriumSpec equilibrium(const DistributionSpec& d) { return EquilibriumSpec(d); }

std::vector<IdentityResidual> equilibrium_identity_check(const EquilibriumSpec& e, const std::vector<TestPhi>& battery) {
    const DistributionSpec& w = e.base();
    std::vector<double> br{0.0, e.support().hi};
    if (const auto* atoms = w.atoms()) {
        for (const Atom& a : *atoms) br.push_back(a.value);
    } else {
        for (double b : quadrature_breaks(w))
            if (b >= 0.0) br.push_back(b);
    }
    sort_unique(br);
    std::vector<IdentityResidual> out;
    for (const TestPhi& phi : battery) {
        IdentityResidual r;
        r.phi = phi.name;
        if (exact_or_quadrature(w)) {
            r.lhs = expect(w, phi.f, 1e-11) - phi.f(0.0);
        } else {
            fail(Errc::unavailable, "identity check needs atoms or a density for " + w.describe());
        }
        r.rhs = integrate_pieces([&](double x) { return phi.df(x) * e.density(x); }, br, tight(), w.sd()).value /
                e.lambda();
        r.residual = std::abs(r.lhs - r.rhs);
        out.push_back(r);
    }
    return out;
}

}  // namespace stein
