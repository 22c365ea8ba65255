#include "stein/bayes.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stein {

namespace {

struct PairInfo {
    Pair pair;
    std::string_view name;
    std::string_view stat;
};

constexpr PairInfo kPairs[] = {
    {Pair::gaussian_mean, "gaussian-mean", "xbar"},
    {Pair::gaussian_var, "gaussian-var", "sum-sq"},
    {Pair::binomial_beta, "binomial-beta", "successes"},
    {Pair::negbinomial_beta, "negbinomial-beta", "sum"},
    {Pair::weibull_ig, "weibull-ig", "sum-pow"},
    {Pair::gamma_gamma, "gamma-gamma", "sum"},
    {Pair::laplace_ig, "laplace-ig", "sum-abs"},
    {Pair::poisson_gamma, "poisson-gamma", "sum"},
    {Pair::uniform_pareto, "uniform-pareto", "max"},
};

bool is_count(double v) { return v >= 0.0 && std::isfinite(v) && v == std::floor(v); }

void bad_summary(Pair p, const std::string& what) {
    fail(Errc::invalid_summary, std::string(pair_name(p)) + ": " + what);
}

void check_prior(Pair p, const PairParams& q) {
    auto need = [&](bool ok, const char* what) {
        if (!ok) fail(Errc::invalid_argument, std::string(pair_name(p)) + ": " + what);
    };
    if (p == Pair::gaussian_mean) {
        need(q.delta > 0.0 && std::isfinite(q.delta), "prior sd delta must be positive");
        need(q.sigma > 0.0 && std::isfinite(q.sigma), "data sd sigma must be positive");
        need(std::isfinite(q.mu), "prior mean mu must be finite");
        return;
    }
    need(q.alpha > 0.0 && std::isfinite(q.alpha), "alpha must be positive");
    need(q.beta > 0.0 && std::isfinite(q.beta), "beta must be positive");
    if (p == Pair::negbinomial_beta) need(q.r >= 1.0 && q.r == std::floor(q.r), "r must be a positive integer");
    if (p == Pair::weibull_ig || p == Pair::gamma_gamma) need(q.k > 0.0 && std::isfinite(q.k), "k must be positive");
}

void check_summary(Pair p, const DataSummary& s) {
    if (!is_count(s.n)) bad_summary(p, "n must be a nonnegative integer");
    if (!std::isfinite(s.stat)) bad_summary(p, "statistic must be finite");
    const bool empty = s.n == 0.0;
    switch (p) {
        case Pair::gaussian_mean: break;
        case Pair::binomial_beta:
            if (!is_count(s.stat) || s.stat > s.n) bad_summary(p, "successes must be an integer in [0, n]");
            break;
        case Pair::negbinomial_beta:
        case Pair::poisson_gamma:
            if (!is_count(s.stat)) bad_summary(p, "sum of counts must be a nonnegative integer");
            if (empty && s.stat != 0.0) bad_summary(p, "nonzero sum without observations");
            break;
        case Pair::gaussian_var:
        case Pair::weibull_ig:
        case Pair::gamma_gamma:
        case Pair::laplace_ig:
            if (s.stat < 0.0) bad_summary(p, "statistic must be nonnegative");
            if (empty && s.stat != 0.0) bad_summary(p, "nonzero statistic without observations");
            break;
        case Pair::uniform_pareto:
            if (!empty && !(s.stat > 0.0)) bad_summary(p, "max must be positive");
            break;
    }
}

std::optional<SteinKernel> try_kernel(const DistributionSpec& d) {
    if (!std::isfinite(d.variance())) return std::nullopt;
    try {
        return pearson_kernel(d);
    } catch (const Error&) {
        return std::nullopt;
    }
}

void finish_model(PosteriorModel& m) {
    m.kernel = try_kernel(m.posterior);
    if (!m.kernel) m.notes.push_back("posterior variance is infinite; no Stein kernel");
    if (m.pair == Pair::uniform_pareto)
        m.notes.push_back("sign convention: Pareto kernel is theta (theta - m) / (a - 1), nonnegative on the "
                          "support; the form (m - theta) theta / (a - 1) has the opposite sign");
}

}  // namespace

std::string_view pair_name(Pair p) noexcept {
    for (const auto& i : kPairs)
        if (i.pair == p) return i.name;
    return "unknown";
}

std::string_view statistic_name(Pair p) noexcept {
    for (const auto& i : kPairs)
        if (i.pair == p) return i.stat;
    return "unknown";
}

Pair parse_pair(std::string_view name) {
    for (const auto& i : kPairs)
        if (i.name == name) return i.pair;
    fail(Errc::unknown_identifier, "unknown pair '" + std::string(name) + "'");
}

DataSummary summarize(Pair pair, const PairParams& q, std::span<const double> x) {
    DataSummary s;
    s.n = static_cast<double>(x.size());
    for (double v : x)
        if (!std::isfinite(v)) bad_summary(pair, "non-finite observation");
    switch (pair) {
        case Pair::gaussian_mean:
            for (double v : x) s.stat += v;
            if (!x.empty()) s.stat /= s.n;
            break;
        case Pair::gaussian_var:
            for (double v : x) s.stat += (v - q.mu) * (v - q.mu);
            break;
        case Pair::binomial_beta:
            for (double v : x) {
                if (v != 0.0 && v != 1.0) bad_summary(pair, "binomial trials must be 0 or 1");
                s.stat += v;
            }
            break;
        case Pair::negbinomial_beta:
        case Pair::poisson_gamma:
            for (double v : x) {
                if (!is_count(v)) bad_summary(pair, "counts must be nonnegative integers");
                s.stat += v;
            }
            break;
        case Pair::weibull_ig:
            for (double v : x) {
                if (v < 0.0) bad_summary(pair, "observations must be nonnegative");
                s.stat += std::pow(v, q.k);
            }
            break;
        case Pair::gamma_gamma:
            for (double v : x) {
                if (v < 0.0) bad_summary(pair, "observations must be nonnegative");
                s.stat += v;
            }
            break;
        case Pair::laplace_ig:
            for (double v : x) s.stat += std::abs(v - q.mu);
            break;
        case Pair::uniform_pareto:
            for (double v : x) {
                if (v < 0.0) bad_summary(pair, "observations must be nonnegative");
                s.stat = std::max(s.stat, v);
            }
            break;
    }
    return s;
}

DataSummary pool(Pair pair, const DataSummary& a, const DataSummary& b) {
    DataSummary s;
    s.n = a.n + b.n;
    if (pair == Pair::gaussian_mean) s.stat = s.n > 0.0 ? (a.n * a.stat + b.n * b.stat) / s.n : 0.0;
    else if (pair == Pair::uniform_pareto)
        s.stat = a.n == 0.0 ? b.stat : (b.n == 0.0 ? a.stat : std::max(a.stat, b.stat));
    else s.stat = a.stat + b.stat;
    return s;
}

PosteriorModel update(Pair pair, const PairParams& q, const DataSummary& s) {
    check_prior(pair, q);
    check_summary(pair, s);
    PosteriorModel m;
    m.pair = pair;
    m.prior = q;
    m.data = s;
    const double n = s.n;
    const double x = s.stat;
    switch (pair) {
        case Pair::gaussian_mean: {
            const double s2 = q.sigma * q.sigma;
            const double d2 = q.delta * q.delta;
            const double den = n * d2 + s2;
            m.posterior = gaussian((s2 * q.mu + n * d2 * (n > 0.0 ? x : 0.0)) / den, s2 * d2 / den);
            break;
        }
        case Pair::gaussian_var: m.posterior = inverse_gamma(n / 2.0 + q.alpha, 0.5 * x + q.beta); break;
        case Pair::binomial_beta: m.posterior = beta_dist(x + q.alpha, n - x + q.beta); break;
        case Pair::negbinomial_beta: m.posterior = beta_dist(x + q.alpha, n * q.r + q.beta); break;
        case Pair::weibull_ig: m.posterior = inverse_gamma(n + q.alpha, x + q.beta); break;
        case Pair::gamma_gamma: m.posterior = gamma_dist(n * q.k + q.alpha, x + q.beta); break;
        case Pair::laplace_ig: m.posterior = inverse_gamma(n + q.alpha, x + q.beta); break;
        case Pair::poisson_gamma: m.posterior = gamma_dist(x + q.alpha, n + q.beta); break;
        case Pair::uniform_pareto: m.posterior = pareto(n + q.alpha, n > 0.0 ? std::max(x, q.beta) : q.beta); break;
    }
    finish_model(m);
    return m;
}

PosteriorModel flat_prior_posterior(Pair pair, const PairParams& q, const DataSummary& s) {
    check_summary(pair, s);
    PosteriorModel m;
    m.pair = pair;
    m.prior = q;
    m.data = s;
    m.flat_prior = true;
    const double n = s.n;
    const double x = s.stat;
    auto improper = [&](const char* why) {
        fail(Errc::unavailable, std::string(pair_name(pair)) + ": flat prior gives an improper posterior (" + why + ")");
    };
    switch (pair) {
        case Pair::gaussian_mean:
            if (!(q.sigma > 0.0)) fail(Errc::invalid_argument, "sigma must be positive");
            if (n < 1.0) improper("needs n >= 1");
            m.posterior = gaussian(x, q.sigma * q.sigma / n);
            break;
        case Pair::gaussian_var:
            if (n <= 2.0 || x <= 0.0) improper("needs n > 2 and a positive sum of squares");
            m.posterior = inverse_gamma(n / 2.0 - 1.0, 0.5 * x);
            break;
        case Pair::binomial_beta: m.posterior = beta_dist(x + 1.0, n - x + 1.0); break;
        case Pair::negbinomial_beta:
            if (!(q.r >= 1.0)) fail(Errc::invalid_argument, "r must be a positive integer");
            m.posterior = beta_dist(x + 1.0, n * q.r + 1.0);
            break;
        case Pair::weibull_ig:
        case Pair::laplace_ig:
            if (n <= 1.0 || x <= 0.0) improper("needs n > 1 and a positive statistic");
            m.posterior = inverse_gamma(n - 1.0, x);
            break;
        case Pair::gamma_gamma:
            if (!(q.k > 0.0)) fail(Errc::invalid_argument, "k must be positive");
            if (x <= 0.0) improper("needs a positive sum");
            m.posterior = gamma_dist(n * q.k + 1.0, x);
            break;
        case Pair::poisson_gamma:
            if (n < 1.0) improper("needs n >= 1");
            m.posterior = gamma_dist(x + 1.0, n);
            break;
        case Pair::uniform_pareto:
            if (n <= 1.0) improper("needs n > 1");
            m.posterior = pareto(n - 1.0, x);
            break;
    }
    finish_model(m);
    return m;
}

PairParams as_prior(const PosteriorModel& m) {
    PairParams q = m.prior;
    const auto& p = m.posterior.params();
    if (m.pair == Pair::gaussian_mean) {
        q.mu = p[0];
        q.delta = std::sqrt(p[1]);
    } else {
        q.alpha = p[0];
        q.beta = p[1];
    }
    return q;
}

BoundReport posterior_bounds(const PosteriorModel& m, const TestFunction& g, const BoundOptions& opts) {
    if (!m.kernel) fail(Errc::unavailable, std::string(pair_name(m.pair)) + ": posterior variance is infinite");
    BoundReport r = bound_cacoullos(m.posterior, *m.kernel, g, opts);
    const std::optional<double> c_lo = r.lower_diagnostic;
    const std::optional<double> c_up = r.upper_diagnostic;
    r.method = "posterior:" + std::string(pair_name(m.pair));
    for (const auto& n : m.notes) r.notes.push_back(n);

    const DistributionSpec& d = m.posterior;
    const auto& p = d.params();
    auto E = [&](const RealFn& f) { return expect(d, f, opts.rel_tol); };
    const auto g1 = [&g](double t) { return g.deriv(t); };
    auto sq = [](double v) { return v * v; };

    std::optional<double> lo, up;
    switch (m.pair) {
        case Pair::gaussian_mean: {
            const double n = m.data.n;
            const double prec = n / sq(m.prior.sigma) + 1.0 / sq(m.prior.delta);
            lo = sq(E(g1)) / prec;
            up = E([&](double t) { return sq(g1(t)); }) / prec;
            break;
        }
        case Pair::gaussian_var:
        case Pair::weibull_ig:
        case Pair::laplace_ig: {
            const double a = p[0], b = p[1];
            if (c_up) up = E([&](double t) { return t * t * sq(g1(t)); }) / (a - 1.0);
            if (c_lo && a > 2.0) lo = (a - 2.0) / sq(b) * sq(E([&](double t) { return t * t * g1(t); }));
            break;
        }
        case Pair::binomial_beta:
        case Pair::negbinomial_beta: {
            const double a = p[0], b = p[1], s = a + b;
            up = E([&](double t) { return t * (1.0 - t) * sq(g1(t)); }) / s;
            lo = (s + 1.0) / (a * b) * sq(E([&](double t) { return t * (1.0 - t) * g1(t); }));
            break;
        }
        case Pair::gamma_gamma:
        case Pair::poisson_gamma: {
            const double a = p[0], b = p[1];
            if (c_up) up = E([&](double t) { return t * sq(g1(t)); }) / b;
            if (c_lo) lo = sq(E([&](double t) { return t * g1(t); })) / a;
            break;
        }
        case Pair::uniform_pareto: {
            const double a = p[0], mm = p[1];
            if (c_up) up = E([&](double t) { return (t - mm) * t * sq(g1(t)); }) / (a - 1.0);
            if (c_lo && a > 2.0)
                lo = (a - 2.0) / (a * mm * mm) * sq(E([&](double t) { return (mm - t) * t * g1(t); }));
            break;
        }
    }

    auto agree = [&](const char* side, std::optional<double> shown, std::optional<double> cac) {
        HypothesisCheck h;
        h.name = std::string("closed-form ") + side + " bound equals the Cacoullos " + side + " bound";
        h.gating = false;
        if (!shown || !cac) {
            h.checked = false;
            h.detail = "not computed";
            return h;
        }
        const double rel = std::abs(*shown - *cac) / std::max(std::abs(*cac), 1e-300);
        h.holds = rel <= 1e-9 || *shown == *cac;
        h.max_violation = rel;
        char buf[40];
        std::snprintf(buf, sizeof buf, "relative difference %.3g", rel);
        h.detail = buf;
        return h;
    };
    r.hypotheses.push_back(agree("lower", lo, c_lo));
    r.hypotheses.push_back(agree("upper", up, c_up));

    const bool lo_valid = r.lower.has_value();
    const bool up_valid = r.upper.has_value();
    r.lower_diagnostic = lo;
    r.upper_diagnostic = up;
    r.lower = lo_valid && lo ? lo : std::nullopt;
    r.upper = up_valid && up ? up : std::nullopt;
    return r;
}

}  // namespace stein
