#include "stein/distributions.hpp"

#include "stein/error.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stein {

namespace bm = boost::math;
using BoostPolicy = bm::policies::policy<bm::policies::domain_error<bm::policies::errno_on_error>,
                                         bm::policies::pole_error<bm::policies::errno_on_error>,
                                         bm::policies::overflow_error<bm::policies::errno_on_error>,
                                         bm::policies::evaluation_error<bm::policies::errno_on_error>>;

std::string_view family_name(Family f) noexcept {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::beta: return "beta";
        case Family::gamma: return "gamma";
        case Family::inverse_gamma: return "inverse-gamma";
        case Family::pareto: return "pareto";
        case Family::exponential: return "exponential";
        case Family::uniform: return "uniform";
        case Family::two_point: return "two-point";
        case Family::standardized_bernoulli: return "standardized-bernoulli";
        case Family::geometric_count: return "geometric-count";
        case Family::discrete_empirical: return "discrete-empirical";
        case Family::random_sum: return "random-sum";
        case Family::permutation_statistic: return "permutation-statistic";
        case Family::convolution: return "convolution";
        case Family::transformed: return "transformed";
    }
    return "unknown";
}

namespace detail {

class Law {
public:
    virtual ~Law() = default;

    Family family = Family::gaussian;
    std::vector<double> params;
    Interval support;
    Capabilities caps;
    double mean = 0.0;
    double variance = 0.0;
    double moment_limit = kInf;
    std::map<std::string, double> constants;
    std::vector<Atom> atoms;  // nonempty iff finitely supported
    std::string description;

    virtual double density(double) const { fail(Errc::unavailable, description + " has no density"); }
    virtual double cdf(double) const { fail(Errc::unavailable, description + " has no cdf"); }
    virtual double survival(double x) const { return 1.0 - cdf(x); }
    virtual double quantile(double p) const {
        if (!caps.cdf) fail(Errc::unavailable, description + " has no quantile function");
        return inverse_cdf([this](double x) { return cdf(x); }, p, support);
    }
    virtual double sample(RandomStream& rng) const = 0;
    virtual std::optional<double> stop_loss(double) const { return std::nullopt; }
    virtual std::optional<double> count_pmf(long long) const { return std::nullopt; }
};

}  // namespace detail

namespace {

using detail::Law;

// Shortest text that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_params(std::span<const double> ps) {
    std::string out;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (i) out += ',';
        out += shortest(ps[i]);
    }
    return out;
}

void require(bool ok, Family f, const std::string& what) {
    if (!ok) fail(Errc::invalid_argument, std::string(family_name(f)) + ": " + what);
}

double sample_gamma(RandomStream& rng, double shape) {
    if (shape < 1.0) {
        const double g = sample_gamma(rng, shape + 1.0);
        return g * std::pow(rng.uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// ---------------------------------------------------------------- continuous

class GaussianLaw final : public Law {
public:
    GaussianLaw(double mu, double var) : mu_(mu), sd_(std::sqrt(var)) {
        family = Family::gaussian;
        params = {mu, var};
        require(std::isfinite(mu) && var > 0.0 && std::isfinite(var), family, "requires finite mean and variance > 0");
        support = Interval::real_line();
        caps = {true, true, true, true};
        mean = mu;
        variance = var;
    }
    double density(double x) const override { return normal_pdf((x - mu_) / sd_) / sd_; }
    double cdf(double x) const override { return normal_cdf((x - mu_) / sd_); }
    double survival(double x) const override { return normal_sf((x - mu_) / sd_); }
    double quantile(double p) const override { return mu_ + sd_ * normal_quantile(p); }
    double sample(RandomStream& rng) const override { return mu_ + sd_ * rng.normal(); }
    std::optional<double> stop_loss(double t) const override {
        const double z = (t - mu_) / sd_;
        return sd_ * (normal_pdf(z) - z * normal_sf(z));
    }

private:
    double mu_;
    double sd_;
};

class BetaLaw final : public Law {
public:
    BetaLaw(double a, double b) : dist_(a, b) {
        family = Family::beta;
        params = {a, b};
        require(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b), family, "requires alpha, beta > 0");
        support = Interval(0.0, 1.0);
        caps = {true, true, true, true};
        mean = a / (a + b);
        variance = a * b / ((a + b) * (a + b) * (a + b + 1.0));
        a_ = a;
        b_ = b;
    }
    double density(double x) const override {
        if (x < 0.0 || x > 1.0) return 0.0;
        return bm::pdf(dist_, x);
    }
    double cdf(double x) const override {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return bm::cdf(dist_, x);
    }
    double survival(double x) const override {
        if (x <= 0.0) return 1.0;
        if (x >= 1.0) return 0.0;
        return bm::cdf(bm::complement(dist_, x));
    }
    double quantile(double p) const override { return bm::quantile(dist_, p); }
    double sample(RandomStream& rng) const override {
        const double x = sample_gamma(rng, a_);
        const double y = sample_gamma(rng, b_);
        return x / (x + y);
    }

private:
    bm::beta_distribution<double, BoostPolicy> dist_;
    double a_;
    double b_;
};

class GammaLaw final : public Law {
public:
    GammaLaw(double shape, double rate) : dist_(shape, 1.0 / rate), shape_(shape), rate_(rate) {
        family = Family::gamma;
        params = {shape, rate};
        require(shape > 0.0 && rate > 0.0 && std::isfinite(shape) && std::isfinite(rate), family,
                "requires shape, rate > 0");
        support = Interval(0.0, kInf);
        caps = {true, true, true, true};
        mean = shape / rate;
        variance = shape / (rate * rate);
    }
    double density(double x) const override { return x < 0.0 ? 0.0 : bm::pdf(dist_, x); }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : bm::cdf(dist_, x); }
    double survival(double x) const override { return x <= 0.0 ? 1.0 : bm::cdf(bm::complement(dist_, x)); }
    double quantile(double p) const override { return bm::quantile(dist_, p); }
    double sample(RandomStream& rng) const override { return sample_gamma(rng, shape_) / rate_; }
    std::optional<double> stop_loss(double t) const override {
        if (t <= 0.0) return mean - t;
        // E[(X - t)_+] = (k/b) Q(k+1, bt) - t Q(k, bt)
        return shape_ / rate_ * bm::gamma_q(shape_ + 1.0, rate_ * t, BoostPolicy()) -
               t * bm::gamma_q(shape_, rate_ * t, BoostPolicy());
    }

private:
    bm::gamma_distribution<double, BoostPolicy> dist_;
    double shape_;
    double rate_;
};

class InverseGammaLaw final : public Law {
public:
    InverseGammaLaw(double a, double b) : dist_(a, b), a_(a), b_(b) {
        family = Family::inverse_gamma;
        params = {a, b};
        require(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b), family, "requires shape, scale > 0");
        support = Interval(0.0, kInf);
        caps = {true, true, true, true};
        mean = a > 1.0 ? b / (a - 1.0) : kInf;
        variance = a > 2.0 ? b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0)) : kInf;
        moment_limit = a;
    }
    double density(double x) const override { return x <= 0.0 ? 0.0 : bm::pdf(dist_, x); }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : bm::cdf(dist_, x); }
    double survival(double x) const override { return x <= 0.0 ? 1.0 : bm::cdf(bm::complement(dist_, x)); }
    double quantile(double p) const override { return bm::quantile(dist_, p); }
    double sample(RandomStream& rng) const override { return b_ / sample_gamma(rng, a_); }

private:
    bm::inverse_gamma_distribution<double, BoostPolicy> dist_;
    double a_;
    double b_;
};

class ParetoLaw final : public Law {
public:
    ParetoLaw(double a, double m) : a_(a), m_(m) {
        family = Family::pareto;
        params = {a, m};
        require(a > 0.0 && m > 0.0 && std::isfinite(a) && std::isfinite(m), family, "requires shape, scale > 0");
        support = Interval(m, kInf);
        caps = {true, true, true, true};
        mean = a > 1.0 ? a * m / (a - 1.0) : kInf;
        variance = a > 2.0 ? m * m * a / ((a - 1.0) * (a - 1.0) * (a - 2.0)) : kInf;
        moment_limit = a;
    }
    double density(double x) const override { return x < m_ ? 0.0 : a_ * std::pow(m_, a_) * std::pow(x, -a_ - 1.0); }
    double cdf(double x) const override { return x <= m_ ? 0.0 : 1.0 - std::pow(m_ / x, a_); }
    double survival(double x) const override { return x <= m_ ? 1.0 : std::pow(m_ / x, a_); }
    double quantile(double p) const override { return m_ * std::pow(1.0 - p, -1.0 / a_); }
    double sample(RandomStream& rng) const override { return m_ * std::pow(rng.uniform(), -1.0 / a_); }
    std::optional<double> stop_loss(double t) const override {
        if (a_ <= 1.0) return kInf;
        if (t <= m_) return mean - t;
        return m_ * std::pow(m_ / t, a_ - 1.0) / (a_ - 1.0);
    }

private:
    double a_;
    double m_;
};

class ExponentialLaw final : public Law {
public:
    explicit ExponentialLaw(double rate) : rate_(rate) {
        family = Family::exponential;
        params = {rate};
        require(rate > 0.0 && std::isfinite(rate), family, "requires rate > 0");
        support = Interval(0.0, kInf);
        caps = {true, true, true, true};
        mean = 1.0 / rate;
        variance = 1.0 / (rate * rate);
    }
    double density(double x) const override { return x < 0.0 ? 0.0 : rate_ * std::exp(-rate_ * x); }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : -std::expm1(-rate_ * x); }
    double survival(double x) const override { return x <= 0.0 ? 1.0 : std::exp(-rate_ * x); }
    double quantile(double p) const override { return -std::log1p(-p) / rate_; }
    double sample(RandomStream& rng) const override { return rng.exponential() / rate_; }
    std::optional<double> stop_loss(double t) const override {
        if (t <= 0.0) return mean - t;
        return std::exp(-rate_ * t) / rate_;
    }

private:
    double rate_;
};

class UniformLaw final : public Law {
public:
    UniformLaw(double c, double d) : c_(c), d_(d) {
        family = Family::uniform;
        params = {c, d};
        require(std::isfinite(c) && std::isfinite(d) && c < d, family, "requires c < d");
        support = Interval(c, d);
        caps = {true, true, true, true};
        mean = 0.5 * (c + d);
        variance = (d - c) * (d - c) / 12.0;
    }
    double density(double x) const override { return (x < c_ || x > d_) ? 0.0 : 1.0 / (d_ - c_); }
    double cdf(double x) const override { return x <= c_ ? 0.0 : (x >= d_ ? 1.0 : (x - c_) / (d_ - c_)); }
    double survival(double x) const override { return x <= c_ ? 1.0 : (x >= d_ ? 0.0 : (d_ - x) / (d_ - c_)); }
    double quantile(double p) const override { return c_ + p * (d_ - c_); }
    double sample(RandomStream& rng) const override { return c_ + (d_ - c_) * rng.uniform(); }
    std::optional<double> stop_loss(double t) const override {
        if (t <= c_) return mean - t;
        if (t >= d_) return 0.0;
        return (d_ - t) * (d_ - t) / (2.0 * (d_ - c_));
    }

private:
    double c_;
    double d_;
};

// ------------------------------------------------------------------ discrete

std::vector<Atom> normalize_atoms(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    std::vector<Atom> out;
    for (const Atom& a : atoms) {
        if (!(a.prob > 0.0)) continue;
        if (!out.empty()) {
            const double scale = std::max({1.0, std::abs(a.value), std::abs(out.back().value)});
            if (std::abs(a.value - out.back().value) <= 1e-12 * scale) {
                out.back().prob += a.prob;
                continue;
            }
        }
        out.push_back(a);
    }
    return out;
}

std::vector<Atom> convolve_atoms(const std::vector<Atom>& a, const std::vector<Atom>& b) {
    std::vector<Atom> out;
    out.reserve(a.size() * b.size());
    for (const Atom& x : a)
        for (const Atom& y : b) out.push_back({x.value + y.value, x.prob * y.prob});
    return normalize_atoms(std::move(out));
}

class DiscreteLaw final : public Law {
public:
    DiscreteLaw(Family fam, std::vector<double> ps, std::vector<Atom> input) {
        family = fam;
        params = std::move(ps);
        for (const Atom& a : input)
            require(std::isfinite(a.value) && std::isfinite(a.prob) && a.prob >= 0.0, family,
                    "atoms must be finite with nonnegative mass");
        atoms = normalize_atoms(std::move(input));
        require(!atoms.empty(), family, "requires at least one atom with positive mass");
        double total = 0.0;
        for (const Atom& a : atoms) total += a.prob;
        for (Atom& a : atoms) a.prob /= total;
        cumulative_.reserve(atoms.size());
        double acc = 0.0;
        double m = 0.0;
        for (const Atom& a : atoms) {
            acc += a.prob;
            cumulative_.push_back(acc);
            m += a.prob * a.value;
        }
        cumulative_.back() = 1.0;
        double v = 0.0;
        for (const Atom& a : atoms) v += a.prob * (a.value - m) * (a.value - m);
        mean = m;
        variance = v;
        if (atoms.size() == 1) {
            support = Interval(atoms.front().value - 0.0, std::nextafter(atoms.front().value, kInf));
            support.lo = atoms.front().value;
        } else {
            support = Interval(atoms.front().value, atoms.back().value);
        }
        caps = {false, true, true, true};
    }

    double cdf(double x) const override {
        auto it = std::upper_bound(atoms.begin(), atoms.end(), x,
                                   [](double v, const Atom& a) { return v < a.value; });
        if (it == atoms.begin()) return 0.0;
        return cumulative_[static_cast<std::size_t>(it - atoms.begin()) - 1];
    }
    double survival(double x) const override {
        double s = 0.0;
        for (auto it = atoms.rbegin(); it != atoms.rend() && it->value > x; ++it) s += it->prob;
        return s;
    }
    double quantile(double p) const override {
        auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), p - 1e-15);
        if (it == cumulative_.end()) --it;
        return atoms[static_cast<std::size_t>(it - cumulative_.begin())].value;
    }
    double sample(RandomStream& rng) const override {
        if (atoms.size() == 1) return atoms.front().value;
        const double u = rng.uniform();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return atoms[static_cast<std::size_t>(it - cumulative_.begin())].value;
    }
    std::optional<double> stop_loss(double t) const override {
        double s = 0.0;
        for (const Atom& a : atoms)
            if (a.value > t) s += a.prob * (a.value - t);
        return s;
    }
    std::optional<double> count_pmf(long long k) const override {
        double p = 0.0;
        for (const Atom& a : atoms)
            if (a.value == static_cast<double>(k)) p += a.prob;
        for (const Atom& a : atoms)
            if (a.value != std::round(a.value) || a.value < 0.0) return std::nullopt;
        return p;
    }

private:
    std::vector<double> cumulative_;
};

class GeometricCountLaw final : public Law {
public:
    explicit GeometricCountLaw(double rho) : rho_(rho) {
        family = Family::geometric_count;
        params = {rho};
        require(rho >= 0.0 && rho < 1.0, family, "requires 0 <= rho < 1");
        support = Interval(0.0, rho > 0.0 ? kInf : std::nextafter(0.0, 1.0));
        support.lo = 0.0;
        caps = {false, true, true, true};
        mean = rho / (1.0 - rho);
        variance = rho / ((1.0 - rho) * (1.0 - rho));
    }
    double cdf(double x) const override {
        if (x < 0.0) return 0.0;
        return 1.0 - std::pow(rho_, std::floor(x) + 1.0);
    }
    double survival(double x) const override { return x < 0.0 ? 1.0 : std::pow(rho_, std::floor(x) + 1.0); }
    double quantile(double p) const override {
        if (rho_ == 0.0) return 0.0;
        // smallest k with 1 - rho^(k+1) >= p
        const double k = std::ceil(std::log1p(-p) / std::log(rho_) - 1.0 - 1e-12);
        return std::max(0.0, k);
    }
    double sample(RandomStream& rng) const override {
        if (rho_ == 0.0) return 0.0;
        return std::floor(std::log(rng.uniform()) / std::log(rho_));
    }
    std::optional<double> stop_loss(double t) const override {
        if (t < 0.0) return mean - t;
        // sum_{j >= ceil(t)} P(N > j) plus the partial step below ceil(t)
        const double c = std::ceil(t);
        const double tail = std::pow(rho_, c + 1.0) / (1.0 - rho_);
        return tail + (c - t) * std::pow(rho_, c);
    }
    std::optional<double> count_pmf(long long k) const override {
        if (k < 0) return 0.0;
        return (1.0 - rho_) * std::pow(rho_, static_cast<double>(k));
    }

private:
    double rho_;
};

// -------------------------------------------------------------- composites

std::string join_parts(std::string_view head, std::span<const DistributionSpec> parts) {
    std::string out(head);
    out += ':';
    // Runs of identical parts print as "k*[part]".
    for (std::size_t i = 0; i < parts.size();) {
        const std::string d = parts[i].describe();
        std::size_t j = i + 1;
        while (j < parts.size() && parts[j].describe() == d) ++j;
        if (i) out += ';';
        if (j - i > 1) out += std::to_string(j - i) + '*';
        out += '[' + d + ']';
        i = j;
    }
    return out;
}

std::vector<double> part_params(std::span<const DistributionSpec> parts) {
    // Composite laws carry the part means as their parameter list.
    std::vector<double> out;
    for (const auto& p : parts) out.push_back(p.mean());
    return out;
}

/// One density part shifted by an independent finitely supported offset.
class ShiftMixtureLaw final : public Law {
public:
    ShiftMixtureLaw(DistributionSpec base, std::vector<Atom> offsets, std::span<const DistributionSpec> parts)
        : base_(std::move(base)), offsets_(std::move(offsets)) {
        family = Family::convolution;
        params = part_params(parts);
        description = join_parts("convolution", parts);
        const Interval s = base_.support();
        support.lo = s.lo + offsets_.front().value;
        support.hi = s.hi + offsets_.back().value;
        caps = {true, true, true, true};
        double m = 0.0, second = 0.0;
        for (const Atom& a : offsets_) {
            m += a.prob * a.value;
            second += a.prob * a.value * a.value;
        }
        mean = base_.mean() + m;
        variance = base_.variance() + (second - m * m);
        moment_limit = base_.moment_limit();
    }
    double density(double x) const override {
        double s = 0.0;
        for (const Atom& a : offsets_) s += a.prob * base_.density(x - a.value);
        return s;
    }
    double cdf(double x) const override {
        double s = 0.0;
        for (const Atom& a : offsets_) s += a.prob * base_.cdf(x - a.value);
        return s;
    }
    double survival(double x) const override {
        double s = 0.0;
        for (const Atom& a : offsets_) s += a.prob * base_.survival(x - a.value);
        return s;
    }
    double quantile(double p) const override {
        if (offsets_.size() == 1) return base_.quantile(p) + offsets_.front().value;
        return Law::quantile(p);
    }
    double sample(RandomStream& rng) const override {
        double x = base_.sample(rng);
        if (offsets_.size() == 1) return x + offsets_.front().value;
        const double u = rng.uniform();
        double acc = 0.0;
        for (const Atom& a : offsets_) {
            acc += a.prob;
            if (u <= acc) return x + a.value;
        }
        return x + offsets_.back().value;
    }
    std::optional<double> stop_loss(double t) const override {
        double s = 0.0;
        for (const Atom& a : offsets_) s += a.prob * base_.stop_loss(t - a.value);
        return s;
    }

    const DistributionSpec& base() const { return base_; }

private:
    DistributionSpec base_;
    std::vector<Atom> offsets_;
};

/// Sum of two independent density parts, by quadrature of the convolution.
class NumericConvolutionLaw final : public Law {
public:
    NumericConvolutionLaw(DistributionSpec a, DistributionSpec b, std::span<const DistributionSpec> parts)
        : a_(std::move(a)), b_(std::move(b)) {
        family = Family::convolution;
        params = part_params(parts);
        description = join_parts("convolution", parts);
        support.lo = a_.support().lo + b_.support().lo;
        support.hi = a_.support().hi + b_.support().hi;
        caps = {true, true, true, true};
        mean = a_.mean() + b_.mean();
        variance = a_.variance() + b_.variance();
        moment_limit = std::min(a_.moment_limit(), b_.moment_limit());
    }
    double density(double x) const override {
        return convolve(x, [this](double y) { return b_.density(y); });
    }
    double cdf(double x) const override {
        if (x <= support.lo) return 0.0;
        if (x >= support.hi) return 1.0;
        return std::clamp(convolve(x, [this](double y) { return b_.cdf(y); }), 0.0, 1.0);
    }
    double sample(RandomStream& rng) const override { return a_.sample(rng) + b_.sample(rng); }

private:
    template <class G>
    double convolve(double x, G g) const {
        const Interval sa = a_.support();
        const Interval sb = b_.support();
        const double lo = std::max(sa.lo, x - sb.hi);
        const double hi = std::min(sa.hi, x - sb.lo);
        if (!(lo < hi)) return 0.0;
        std::vector<double> br = quadrature_breaks(a_);
        std::vector<double> cut;
        cut.push_back(lo);
        for (double v : br)
            if (v > lo && v < hi) cut.push_back(v);
        for (double v : quadrature_breaks(b_)) {
            const double y = x - v;
            if (y > lo && y < hi) cut.push_back(y);
        }
        cut.push_back(hi);
        std::sort(cut.begin(), cut.end());
        QuadOptions opts;
        opts.rel_tol = 1e-11;
        opts.abs_tol = 1e-300;
        return integrate_pieces([&](double y) { return a_.density(y) * g(x - y); }, cut, opts, a_.sd()).value;
    }

    DistributionSpec a_;
    DistributionSpec b_;
};

class SamplerSumLaw final : public Law {
public:
    explicit SamplerSumLaw(std::vector<DistributionSpec> parts) : parts_(std::move(parts)) {
        family = Family::convolution;
        params = part_params(parts_);
        description = join_parts("convolution", parts_);
        support.lo = 0.0;
        support.hi = 0.0;
        mean = 0.0;
        variance = 0.0;
        for (const auto& p : parts_) {
            support.lo += p.support().lo;
            support.hi += p.support().hi;
            mean += p.mean();
            variance += p.variance();
            moment_limit = std::min(moment_limit, p.moment_limit());
        }
        caps = {false, false, true, true};
    }
    double sample(RandomStream& rng) const override {
        double s = 0.0;
        for (const auto& p : parts_) s += p.sample(rng);
        return s;
    }

private:
    std::vector<DistributionSpec> parts_;
};

class RandomSumLaw final : public Law {
public:
    RandomSumLaw(DistributionSpec count, DistributionSpec summand)
        : count_(std::move(count)), summand_(std::move(summand)) {
        family = Family::random_sum;
        params = {count_.mean(), summand_.mean()};
        const DistributionSpec both[] = {count_, summand_};
        description = join_parts("random-sum", both);
        mean = count_.mean() * summand_.mean();
        variance = summand_.mean() * summand_.mean() * count_.variance() + count_.mean() * summand_.variance();
        const Interval s = summand_.support();
        support.lo = std::min(0.0, s.lo < 0.0 ? -kInf : 0.0);
        support.hi = s.hi > 0.0 ? kInf : 0.0;
        if (const auto* ca = count_.atoms()) {
            const double nmax = ca->back().value;
            support.lo = std::min(0.0, nmax * s.lo);
            support.hi = std::max(0.0, nmax * s.hi);
        }
        caps = {false, false, true, true};
        const Family sf = summand_.family();
        gamma_closed_ = (sf == Family::exponential || sf == Family::gamma) && count_.count_pmf(0).has_value();
        if (gamma_closed_) {
            caps.cdf = true;
            shape_ = sf == Family::exponential ? 1.0 : summand_.params()[0];
            rate_ = sf == Family::exponential ? summand_.params()[0] : summand_.params()[1];
        }
    }
    double cdf(double x) const override {
        if (!gamma_closed_) return Law::cdf(x);
        return 1.0 - survival(x);
    }
    double survival(double x) const override {
        if (!gamma_closed_) return Law::survival(x);
        if (x < 0.0) return 1.0;
        double s = 0.0;
        double mass = *count_.count_pmf(0);
        for (long long k = 1; k < 1'000'000 && mass < 1.0 - 1e-17; ++k) {
            const double pk = *count_.count_pmf(k);
            mass += pk;
            if (pk > 0.0) s += pk * bm::gamma_q(shape_ * static_cast<double>(k), rate_ * x, BoostPolicy());
        }
        return s;
    }
    std::optional<double> stop_loss(double t) const override {
        if (!gamma_closed_) return std::nullopt;
        if (t <= 0.0) return mean - t;
        double s = 0.0;
        double mass = *count_.count_pmf(0);
        for (long long k = 1; k < 1'000'000 && mass < 1.0 - 1e-17; ++k) {
            const double pk = *count_.count_pmf(k);
            mass += pk;
            if (pk <= 0.0) continue;
            const double a = shape_ * static_cast<double>(k);
            s += pk * (a / rate_ * bm::gamma_q(a + 1.0, rate_ * t, BoostPolicy()) -
                       t * bm::gamma_q(a, rate_ * t, BoostPolicy()));
        }
        return std::max(0.0, s);
    }
    double sample(RandomStream& rng) const override {
        const auto n = static_cast<long long>(std::llround(count_.sample(rng)));
        double s = 0.0;
        for (long long i = 0; i < n; ++i) s += summand_.sample(rng);
        return s;
    }

private:
    DistributionSpec count_;
    DistributionSpec summand_;
    bool gamma_closed_ = false;
    double shape_ = 1.0;
    double rate_ = 1.0;
};

class PermutationLaw final : public Law {
public:
    PermutationLaw(const SquareArray& a, bool standardized) : a_(a), standardized_(standardized) {
        family = Family::permutation_statistic;
        const std::size_t n = a.n;
        require(n >= 2 && a.values.size() == n * n, family, "requires an n x n array with n >= 2");
        for (double v : a.values) require(std::isfinite(v), family, "array entries must be finite");
        params.push_back(static_cast<double>(n));
        params.push_back(standardized ? 1.0 : 0.0);
        params.insert(params.end(), a.values.begin(), a.values.end());

        std::vector<double> row(n, 0.0), col(n, 0.0);
        double all = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                row[i] += a(i, j);
                col[j] += a(i, j);
                all += a(i, j);
            }
        const double dn = static_cast<double>(n);
        for (auto& r : row) r /= dn;
        for (auto& c : col) c /= dn;
        all /= dn * dn;
        double ss = 0.0;
        double cmax = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double r = a(i, j) - row[i] - col[j] + all;
                ss += r * r;
                cmax = std::max(cmax, std::abs(r));
            }
        sigma2_ = ss / (dn - 1.0);
        center_ = dn * all;
        constants["sigma2"] = sigma2_;
        constants["C"] = cmax;
        constants["mean_W"] = center_;
        constants["degenerate"] = sigma2_ <= 1e-300 ? 1.0 : 0.0;

        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lo += *std::min_element(a.values.begin() + static_cast<long>(i * n), a.values.begin() + static_cast<long>((i + 1) * n));
            hi += *std::max_element(a.values.begin() + static_cast<long>(i * n), a.values.begin() + static_cast<long>((i + 1) * n));
        }
        if (standardized) {
            if (sigma2_ <= 1e-300) fail(Errc::zero_variance, "permutation statistic is degenerate (sigma^2 = 0)");
            scale_ = 1.0 / std::sqrt(sigma2_);
            mean = 0.0;
            variance = 1.0;
            lo = (lo - center_) * scale_;
            hi = (hi - center_) * scale_;
        } else {
            mean = center_;
            variance = sigma2_;
        }
        support.lo = lo;
        support.hi = hi > lo ? hi : std::nextafter(lo, kInf);
        caps = {false, false, true, true};
        std::ostringstream os;
        os << "permutation-statistic:" << n << (standardized ? ",z" : "") << ';' << format_params(a.values);
        description = os.str();
    }

    double sample(RandomStream& rng) const override {
        const std::size_t n = a_.n;
        thread_local std::vector<std::size_t> perm;
        perm.resize(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) w += a_(i, perm[i]);
        return standardized_ ? (w - center_) * scale_ : w;
    }

private:
    SquareArray a_;
    bool standardized_;
    double sigma2_ = 0.0;
    double center_ = 0.0;
    double scale_ = 1.0;
};

class CallbackLaw final : public Law {
public:
    explicit CallbackLaw(LawCallbacks cb) : cb_(std::move(cb)) {
        family = Family::transformed;
        description = cb_.description.empty() ? "transformed" : cb_.description;
        support = cb_.support;
        mean = cb_.mean;
        variance = cb_.variance;
        moment_limit = cb_.moment_limit;
        caps = {static_cast<bool>(cb_.density), static_cast<bool>(cb_.cdf || cb_.survival),
                static_cast<bool>(cb_.sampler), true};
    }
    double density(double x) const override { return cb_.density ? cb_.density(x) : Law::density(x); }
    double cdf(double x) const override {
        if (cb_.cdf) return cb_.cdf(x);
        if (cb_.survival) return 1.0 - cb_.survival(x);
        return Law::cdf(x);
    }
    double survival(double x) const override {
        if (cb_.survival) return cb_.survival(x);
        return 1.0 - cdf(x);
    }
    double quantile(double p) const override { return cb_.quantile ? cb_.quantile(p) : Law::quantile(p); }
    double sample(RandomStream& rng) const override {
        if (!cb_.sampler) fail(Errc::unavailable, description + " has no sampler");
        return cb_.sampler(rng);
    }
    std::optional<double> stop_loss(double t) const override {
        if (cb_.stop_loss) return cb_.stop_loss(t);
        return std::nullopt;
    }

private:
    LawCallbacks cb_;
};

std::shared_ptr<const Law> finish(std::shared_ptr<Law> law) {
    if (law->description.empty()) law->description = std::string(family_name(law->family)) + ":" + format_params(law->params);
    return law;
}

}  // namespace

// ------------------------------------------------------------ DistributionSpec

DistributionSpec::DistributionSpec(std::shared_ptr<const detail::Law> law) : law_(std::move(law)) {}

namespace {
const Law& checked_law(const std::shared_ptr<const Law>& law) {
    if (!law) fail(Errc::invalid_argument, "empty distribution");
    return *law;
}
}  // namespace

Family DistributionSpec::family() const { return checked_law(law_).family; }
const std::vector<double>& DistributionSpec::params() const { return checked_law(law_).params; }
Interval DistributionSpec::support() const { return checked_law(law_).support; }
Capabilities DistributionSpec::capabilities() const { return checked_law(law_).caps; }
double DistributionSpec::mean() const { return checked_law(law_).mean; }
double DistributionSpec::variance() const { return checked_law(law_).variance; }
double DistributionSpec::sd() const { return std::sqrt(variance()); }
double DistributionSpec::moment_limit() const { return checked_law(law_).moment_limit; }
double DistributionSpec::density(double x) const { return checked_law(law_).density(x); }
double DistributionSpec::cdf(double x) const { return checked_law(law_).cdf(x); }
double DistributionSpec::survival(double x) const { return checked_law(law_).survival(x); }
double DistributionSpec::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) fail(Errc::invalid_argument, "quantile requires p in (0, 1)");
    return checked_law(law_).quantile(p);
}
double DistributionSpec::sample(RandomStream& rng) const { return checked_law(law_).sample(rng); }

double DistributionSpec::stop_loss(double t) const {
    const Law& law = checked_law(law_);
    if (auto closed = law.stop_loss(t)) return *closed;
    if (t <= law.support.lo) return law.mean - t;
    if (t >= law.support.hi) return 0.0;
    QuadOptions opts;
    opts.rel_tol = 1e-11;
    opts.abs_tol = 1e-300;
    if (law.caps.density) {
        std::vector<double> br{t};
        for (double b : quadrature_breaks(*this))
            if (b > t) br.push_back(b);
        return integrate_pieces([&](double y) { return (y - t) * law.density(y); }, br, opts, sd()).value;
    }
    if (law.caps.cdf) {
        std::vector<double> br{t};
        for (double b : quadrature_breaks(*this))
            if (b > t) br.push_back(b);
        return integrate_pieces([&](double y) { return law.survival(y); }, br, opts, sd()).value;
    }
    fail(Errc::unavailable, law.description + ": stop-loss transform needs a density or cdf");
}

const std::vector<Atom>* DistributionSpec::atoms() const {
    const Law& law = checked_law(law_);
    return law.atoms.empty() ? nullptr : &law.atoms;
}

std::optional<double> DistributionSpec::count_pmf(long long k) const { return checked_law(law_).count_pmf(k); }

std::optional<double> DistributionSpec::constant(const std::string& name) const {
    const Law& law = checked_law(law_);
    auto it = law.constants.find(name);
    if (it == law.constants.end()) return std::nullopt;
    return it->second;
}

Interval DistributionSpec::effective_range(double tail) const {
    const Law& law = checked_law(law_);
    if (const auto* a = atoms()) {
        if (a->size() == 1) return Interval(a->front().value - 1.0, a->front().value + 1.0);
        return Interval(a->front().value, a->back().value);
    }
    double lo = law.support.lo;
    double hi = law.support.hi;
    if (law.caps.cdf) {
        const double qlo = law.quantile(tail);
        const double qhi = law.quantile(1.0 - tail);
        lo = std::max(lo, qlo);
        hi = std::min(hi, qhi);
    } else {
        const double s = std::sqrt(law.variance);
        lo = std::max(lo, law.mean - 12.0 * s);
        hi = std::min(hi, law.mean + 12.0 * s);
    }
    if (!(lo < hi)) {
        const double w = std::max(1e-12, 1e-9 * std::abs(lo));
        return Interval(lo - w, lo + w);
    }
    return Interval(lo, hi);
}

std::string DistributionSpec::describe() const { return checked_law(law_).description; }

// ------------------------------------------------------------- constructors

DistributionSpec make_distribution(Family family, std::span<const double> p) {
    auto need = [&](std::size_t k) {
        if (p.size() != k) {
            std::ostringstream os;
            os << family_name(family) << " takes " << k << " parameter(s), got " << p.size();
            fail(Errc::invalid_argument, os.str());
        }
    };
    std::shared_ptr<Law> law;
    switch (family) {
        case Family::gaussian: need(2); law = std::make_shared<GaussianLaw>(p[0], p[1]); break;
        case Family::beta: need(2); law = std::make_shared<BetaLaw>(p[0], p[1]); break;
        case Family::gamma: need(2); law = std::make_shared<GammaLaw>(p[0], p[1]); break;
        case Family::inverse_gamma: need(2); law = std::make_shared<InverseGammaLaw>(p[0], p[1]); break;
        case Family::pareto: need(2); law = std::make_shared<ParetoLaw>(p[0], p[1]); break;
        case Family::exponential: need(1); law = std::make_shared<ExponentialLaw>(p[0]); break;
        case Family::uniform: need(2); law = std::make_shared<UniformLaw>(p[0], p[1]); break;
        case Family::two_point: {
            need(2);
            const double a = p[0], b = p[1];
            require(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b), family, "requires a, b > 0");
            law = std::make_shared<DiscreteLaw>(family, std::vector<double>{a, b},
                                                std::vector<Atom>{{-a, b / (a + b)}, {b, a / (a + b)}});
            break;
        }
        case Family::standardized_bernoulli: {
            need(2);
            const double pr = p[0], n = p[1];
            require(pr > 0.0 && pr < 1.0 && n >= 1.0, family, "requires 0 < p < 1 and n >= 1");
            const double q = 1.0 - pr;
            const double s = std::sqrt(n * pr * q);
            law = std::make_shared<DiscreteLaw>(family, std::vector<double>{pr, n},
                                                std::vector<Atom>{{-pr / s, q}, {q / s, pr}});
            break;
        }
        case Family::geometric_count: need(1); law = std::make_shared<GeometricCountLaw>(p[0]); break;
        case Family::discrete_empirical: {
            require(!p.empty(), family, "requires at least one value");
            std::vector<Atom> atoms;
            for (double v : p) atoms.push_back({v, 1.0 / static_cast<double>(p.size())});
            law = std::make_shared<DiscreteLaw>(family, std::vector<double>(p.begin(), p.end()), std::move(atoms));
            break;
        }
        default:
            fail(Errc::invalid_argument, std::string(family_name(family)) +
                                             " is a composite family; use its dedicated constructor");
    }
    return DistributionSpec(finish(law));
}

DistributionSpec make_distribution(Family family, std::initializer_list<double> params) {
    return make_distribution(family, std::span<const double>(params.begin(), params.size()));
}

DistributionSpec gaussian(double mean, double variance) { return make_distribution(Family::gaussian, {mean, variance}); }
DistributionSpec beta_dist(double a, double b) { return make_distribution(Family::beta, {a, b}); }
DistributionSpec gamma_dist(double shape, double rate) { return make_distribution(Family::gamma, {shape, rate}); }
DistributionSpec inverse_gamma(double a, double b) { return make_distribution(Family::inverse_gamma, {a, b}); }
DistributionSpec pareto(double a, double m) { return make_distribution(Family::pareto, {a, m}); }
DistributionSpec exponential(double rate) { return make_distribution(Family::exponential, {rate}); }
DistributionSpec uniform(double c, double d) { return make_distribution(Family::uniform, {c, d}); }
DistributionSpec two_point(double a, double b) { return make_distribution(Family::two_point, {a, b}); }
DistributionSpec standardized_bernoulli(double p, double n) {
    return make_distribution(Family::standardized_bernoulli, {p, n});
}
DistributionSpec geometric_count(double rho) { return make_distribution(Family::geometric_count, {rho}); }
DistributionSpec discrete_empirical(std::span<const double> values) {
    return make_distribution(Family::discrete_empirical, values);
}
DistributionSpec discrete_weighted(std::vector<Atom> atoms) {
    std::vector<double> values;
    for (const Atom& a : atoms) values.push_back(a.value);
    auto law = std::make_shared<DiscreteLaw>(Family::discrete_empirical, values, std::move(atoms));
    std::string desc = "discrete-weighted:";
    for (std::size_t i = 0; i < law->atoms.size(); ++i)
        desc += (i ? "," : "") + shortest(law->atoms[i].value) + '@' + shortest(law->atoms[i].prob);
    law->description = desc;
    return DistributionSpec(finish(law));
}
DistributionSpec point_mass(double c) {
    const double v[] = {c};
    return discrete_empirical(v);
}
DistributionSpec rademacher() {
    const double v[] = {-1.0, 1.0};
    return discrete_empirical(v);
}

DistributionSpec sum_of_independents(std::span<const DistributionSpec> parts) {
    if (parts.empty()) fail(Errc::invalid_argument, "convolution requires at least one part");
    for (const auto& p : parts)
        if (!p.capabilities().sampler) fail(Errc::invalid_argument, "every convolution part needs a sampler");
    constexpr std::size_t kMaxAtoms = 200'000;

    std::vector<Atom> offsets{{0.0, 1.0}};
    std::vector<DistributionSpec> dense;
    bool sampler_only = false;
    for (const auto& p : parts) {
        if (const auto* a = p.atoms()) {
            if (offsets.size() * a->size() > kMaxAtoms * 8) {
                sampler_only = true;
                continue;
            }
            offsets = convolve_atoms(offsets, *a);
            if (offsets.size() > kMaxAtoms) sampler_only = true;
        } else if (p.capabilities().density) {
            dense.push_back(p);
        } else {
            sampler_only = true;
        }
    }
    std::shared_ptr<Law> law;
    if (sampler_only || dense.size() > 2) {
        law = std::make_shared<SamplerSumLaw>(std::vector<DistributionSpec>(parts.begin(), parts.end()));
    } else if (dense.empty()) {
        law = std::make_shared<DiscreteLaw>(Family::convolution, part_params(parts), std::move(offsets));
        law->description = join_parts("convolution", parts);
    } else if (dense.size() == 1) {
        law = std::make_shared<ShiftMixtureLaw>(dense.front(), std::move(offsets), parts);
    } else {
        auto inner = std::make_shared<NumericConvolutionLaw>(dense[0], dense[1], parts);
        if (offsets.size() == 1 && offsets.front().value == 0.0) {
            law = inner;
        } else {
            DistributionSpec base(finish(inner));
            law = std::make_shared<ShiftMixtureLaw>(base, std::move(offsets), parts);
        }
    }
    return DistributionSpec(finish(law));
}

DistributionSpec centered(const DistributionSpec& d) {
    if (d.mean() == 0.0) return d;
    const DistributionSpec parts[] = {d, point_mass(-d.mean())};
    return sum_of_independents(parts);
}

DistributionSpec random_sum(const DistributionSpec& count, const DistributionSpec& summand) {
    if (!count.count_pmf(0).has_value() || count.support().lo < 0.0)
        fail(Errc::invalid_argument, "random-sum count must be supported on the nonnegative integers");
    if (!summand.capabilities().sampler || !summand.capabilities().closed_moments)
        fail(Errc::invalid_argument, "random-sum summand needs a sampler and closed moments");
    const auto* ca = count.atoms();
    const auto* sa = summand.atoms();
    if (ca && (sa || (ca->size() == 1 && ca->front().value == 0.0))) {
        // Finite count with finite summand: exact mixture of convolution powers.
        std::vector<Atom> total;
        std::vector<Atom> power{{0.0, 1.0}};
        long long k = 0;
        for (const Atom& c : *ca) {
            const auto target = static_cast<long long>(c.value);
            for (; k < target; ++k) power = convolve_atoms(power, *sa);
            for (const Atom& a : power) total.push_back({a.value, a.prob * c.prob});
        }
        auto law = std::make_shared<DiscreteLaw>(Family::random_sum, std::vector<double>{count.mean(), summand.mean()},
                                                 std::move(total));
        const DistributionSpec both[] = {count, summand};
        law->description = join_parts("random-sum", both);
        return DistributionSpec(finish(law));
    }
    return DistributionSpec(finish(std::make_shared<RandomSumLaw>(count, summand)));
}

DistributionSpec permutation_statistic(const SquareArray& a, bool standardized) {
    return DistributionSpec(finish(std::make_shared<PermutationLaw>(a, standardized)));
}

DistributionSpec custom_distribution(LawCallbacks cb) {
    if (!(cb.variance >= 0.0)) fail(Errc::invalid_argument, "custom law needs a nonnegative variance");
    return DistributionSpec(finish(std::make_shared<CallbackLaw>(std::move(cb))));
}

// ------------------------------------------------------------------ parsing

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_top(std::string_view s, char sep) {
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '[') ++depth;
        else if (s[i] == ']') --depth;
        else if (s[i] == sep && depth == 0) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    if (depth != 0) fail(Errc::parse_error, "unbalanced brackets in distribution '" + std::string(s) + "'");
    out.push_back(trim(s.substr(start)));
    return out;
}

std::string unbracket(const std::string& s) {
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') return s.substr(1, s.size() - 2);
    return s;
}

double parse_number(const std::string& tok, std::string_view context) {
    if (tok.empty()) fail(Errc::parse_error, "missing parameter in '" + std::string(context) + "'");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
        fail(Errc::parse_error, "malformed number '" + tok + "' in '" + std::string(context) + "'");
    return v;
}

std::vector<double> parse_numbers(std::string_view list, std::string_view context) {
    std::vector<double> out;
    if (trim(list).empty()) return out;
    for (const auto& tok : split_top(list, ',')) out.push_back(parse_number(tok, context));
    return out;
}

std::optional<Family> simple_family(const std::string& name) {
    static const std::map<std::string, Family> table = {
        {"gaussian", Family::gaussian},
        {"normal", Family::gaussian},
        {"beta", Family::beta},
        {"gamma", Family::gamma},
        {"inverse-gamma", Family::inverse_gamma},
        {"invgamma", Family::inverse_gamma},
        {"ig", Family::inverse_gamma},
        {"pareto", Family::pareto},
        {"exponential", Family::exponential},
        {"exp", Family::exponential},
        {"uniform", Family::uniform},
        {"two-point", Family::two_point},
        {"standardized-bernoulli", Family::standardized_bernoulli},
        {"geometric-count", Family::geometric_count},
        {"geometric", Family::geometric_count},
        {"discrete-empirical", Family::discrete_empirical},
        {"discrete", Family::discrete_empirical},
    };
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

}  // namespace

DistributionSpec parse_distribution(std::string_view raw) {
    const std::string text = unbracket(trim(raw));
    if (text.empty()) fail(Errc::parse_error, "empty distribution string");
    const auto colon = text.find(':');
    const std::string name = trim(text.substr(0, colon));
    const std::string rest = colon == std::string::npos ? std::string() : text.substr(colon + 1);

    if (name == "rademacher") return rademacher();
    if (name == "point") return point_mass(parse_number(trim(rest), text));
    if (auto fam = simple_family(name)) return make_distribution(*fam, parse_numbers(rest, text));
    if (name == "discrete-weighted") {
        std::vector<Atom> atoms;
        for (const auto& tok : split_top(rest, ',')) {
            const auto at = tok.find('@');
            if (at == std::string::npos) fail(Errc::parse_error, "discrete-weighted atoms are value@prob");
            atoms.push_back({parse_number(trim(tok.substr(0, at)), text), parse_number(trim(tok.substr(at + 1)), text)});
        }
        return discrete_weighted(std::move(atoms));
    }
    if (name == "convolution") {
        std::vector<DistributionSpec> parts;
        for (const auto& item : split_top(rest, ';')) {
            std::string body = item;
            std::size_t repeat = 1;
            const auto star = item.find('*');
            if (star != std::string::npos && item.front() != '[') {
                const double r = parse_number(trim(item.substr(0, star)), text);
                if (r < 1.0 || r != std::floor(r) || r > 1e6) fail(Errc::parse_error, "bad repetition count in '" + item + "'");
                repeat = static_cast<std::size_t>(r);
                body = trim(item.substr(star + 1));
            }
            const DistributionSpec part = parse_distribution(unbracket(body));
            for (std::size_t k = 0; k < repeat; ++k) parts.push_back(part);
        }
        return sum_of_independents(parts);
    }
    if (name == "random-sum") {
        const auto items = split_top(rest, ';');
        if (items.size() != 2) fail(Errc::parse_error, "random-sum takes a count law and a summand law");
        return random_sum(parse_distribution(unbracket(items[0])), parse_distribution(unbracket(items[1])));
    }
    if (name == "permutation-statistic") {
        const auto items = split_top(rest, ';');
        if (items.size() != 2) fail(Errc::parse_error, "permutation-statistic takes 'n[,z];a11,...,ann'");
        const auto head = split_top(items[0], ',');
        const double n = parse_number(head[0], text);
        const bool z = head.size() > 1 && (head[1] == "z" || head[1] == "1");
        if (n < 2 || n != std::floor(n)) fail(Errc::invalid_argument, "permutation-statistic needs integer n >= 2");
        SquareArray a;
        a.n = static_cast<std::size_t>(n);
        a.values = parse_numbers(items[1], text);
        if (a.values.size() != a.n * a.n) fail(Errc::invalid_argument, "permutation-statistic array must have n*n entries");
        return permutation_statistic(a, z);
    }
    fail(Errc::unsupported_family, "unknown distribution family '" + name + "'");
}

// ------------------------------------------------------------- expectations

std::vector<double> quadrature_breaks(const DistributionSpec& d, std::span<const double> extra) {
    const Interval s = d.support();
    std::vector<double> br{s.lo, s.hi};
    const double m = d.mean();
    const double sd = d.sd();
    if (std::isfinite(m) && std::isfinite(sd) && sd > 0.0) {
        for (double k : {-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0}) {
            const double x = m + k * sd;
            if (x > s.lo && x < s.hi) br.push_back(x);
        }
    }
    for (double x : extra)
        if (x > s.lo && x < s.hi) br.push_back(x);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    return br;
}

double expect(const DistributionSpec& d, const RealFn& f, double rel_tol, std::span<const double> extra_breaks) {
    if (const auto* atoms = d.atoms()) {
        double s = 0.0;
        for (const Atom& a : *atoms) s += a.prob * f(a.value);
        if (!std::isfinite(s)) fail(Errc::non_finite, "expectation over atoms is not finite");
        return s;
    }
    if (!d.capabilities().density)
        fail(Errc::unavailable, d.describe() + " has neither atoms nor a density; use Monte Carlo");
    const auto br = quadrature_breaks(d, extra_breaks);
    QuadOptions opts;
    opts.rel_tol = rel_tol;
    opts.abs_tol = 1e-300;
    double scale = d.sd();
    if (!std::isfinite(scale) || scale <= 0.0) scale = 1.0;
    return integrate_pieces(
               [&](double x) {
                   const double p = d.density(x);
                   if (p == 0.0) return 0.0;
                   return f(x) * p;
               },
               br, opts, scale)
        .value;
}

Expectation expect_mc(const DistributionSpec& d, const RealFn& f, std::size_t n, std::uint64_t seed,
                      std::uint64_t stream_base) {
    if (n < 2) fail(Errc::invalid_argument, "Monte-Carlo expectation needs at least 2 draws");
    std::vector<Moments> parts(kMonteCarloBatches);
    parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
        const std::size_t count = n / kMonteCarloBatches + (b < n % kMonteCarloBatches ? 1 : 0);
        RandomStream rng(seed, stream_base + b);
        Moments m;
        for (std::size_t i = 0; i < count; ++i) {
            const double v = f(d.sample(rng));
            if (!std::isfinite(v)) fail(Errc::non_finite, "non-finite Monte-Carlo sample");
            m.add(v);
        }
        parts[b] = m;
    });
    Moments all;
    for (const auto& m : parts) all.merge(m);
    return {all.mean, all.se_mean(), "monte-carlo"};
}

bool exact_or_quadrature(const DistributionSpec& d) { return d.atoms() != nullptr || d.capabilities().density; }

Expectation expect_auto(const DistributionSpec& d, const RealFn& f, std::size_t n_mc, std::uint64_t seed,
                        double rel_tol, std::span<const double> extra_breaks) {
    if (d.atoms()) return {expect(d, f, rel_tol, extra_breaks), 0.0, "exact"};
    if (d.capabilities().density) return {expect(d, f, rel_tol, extra_breaks), 0.0, "quadrature"};
    return expect_mc(d, f, n_mc, seed);
}

}  // namespace stein
