#include "stein/bounds.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stein {

std::string_view direction_name(SteinCoupling::Direction d) noexcept {
    switch (d) {
        case SteinCoupling::Direction::equality: return "equality";
        case SteinCoupling::Direction::upper_only: return "upper-only";
        case SteinCoupling::Direction::lower_only: return "lower-only";
    }
    return "unknown";
}

bool BoundReport::hypotheses_hold() const {
    return std::all_of(hypotheses.begin(), hypotheses.end(),
                       [](const HypothesisCheck& h) { return !h.checked || !h.gating || h.holds; });
}

bool BoundReport::withheld() const {
    return (lower_diagnostic && !lower) || (upper_diagnostic && !upper);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

RealFn fn(const Expr& e) {
    return [e](double x) { return e(x); };
}

/// Moment-existence premise: a function growing like |x|^order has a finite
/// mean under d when order < moment_limit. Growth orders are grid estimates,
/// so a small margin keeps borderline cases on the failing side.
HypothesisCheck moment_check(const std::string& name, double order, double limit, const std::string& scope) {
    HypothesisCheck h;
    h.name = name;
    h.scope = scope;
    h.holds = !std::isfinite(limit) || order + 1e-2 < limit;
    h.detail = "growth order " + fmt(order) + " vs moment limit " + (std::isfinite(limit) ? fmt(limit) : "inf");
    h.max_violation = h.holds ? 0.0 : order - limit;
    return h;
}

HypothesisCheck square_integrable(const TestFunction& g, const DistributionSpec& d) {
    return moment_check("g(W) square-integrable", 2.0 * growth_order(g.g, true), d.moment_limit(), "both");
}

bool scope_holds(const std::vector<HypothesisCheck>& hs, const std::string& side) {
    for (const auto& h : hs)
        if (h.checked && h.gating && !h.holds && (h.scope == "both" || h.scope == side)) return false;
    return true;
}

/// E[f(W)]: exact over atoms, quadrature against a density, the survival
/// representation f(lo) + int f'(x) P(W > x) dx for cdf-only laws bounded
/// below, and Monte Carlo otherwise.
Expectation expectation(const DistributionSpec& d, const RealFn& f, const RealFn& fprime, const BoundOptions& opts,
                        std::uint64_t stream, std::span<const double> breaks = {}) {
    if (d.atoms()) return {expect(d, f, opts.rel_tol, breaks), 0.0, "exact"};
    if (d.capabilities().density) {
        try {
            return {expect(d, f, opts.rel_tol, breaks), 0.0, "quadrature"};
        } catch (const Error& e) {
            // heavy oscillating tails can exhaust the quadrature budget
            if (e.code() != Errc::budget_exceeded || !d.capabilities().sampler) throw;
            Expectation m = expect_mc(d, f, opts.n_mc, opts.seed, stream);
            m.route = "monte-carlo (quadrature budget exceeded)";
            return m;
        }
    }
    const Interval s = d.support();
    if (fprime && d.capabilities().cdf && !s.lo_infinite()) {
        QuadOptions q;
        q.rel_tol = opts.rel_tol;
        q.abs_tol = 1e-300;
        double scale = d.sd();
        if (!std::isfinite(scale) || scale <= 0.0) scale = 1.0;
        const auto br = quadrature_breaks(d, breaks);
        const double tail = integrate_pieces(
                                [&](double x) {
                                    const double sv = d.survival(x);
                                    return sv == 0.0 ? 0.0 : fprime(x) * sv;
                                },
                                br, q, scale)
                                .value;
        const double v = f(s.lo) + tail;
        if (!std::isfinite(v)) fail(Errc::non_finite, "survival-route expectation is not finite");
        return {v, 0.0, "survival-quadrature"};
    }
    return expect_mc(d, f, opts.n_mc, opts.seed, stream);
}

// Upper and lower sides may be evaluated by different routes.
void add_route(BoundReport& r, const std::string& route) {
    if (r.route.empty()) {
        r.route = route;
        return;
    }
    const std::string sep = " + ";
    for (std::size_t a = 0;;) {
        const std::size_t b = r.route.find(sep, a);
        if (r.route.compare(a, b == std::string::npos ? std::string::npos : b - a, route) == 0) return;
        if (b == std::string::npos) break;
        a = b + sep.size();
    }
    r.route += sep + route;
}

std::vector<double> atom_values(const DistributionSpec& d) {
    std::vector<double> v;
    if (const auto* a = d.atoms())
        for (const Atom& at : *a) v.push_back(at.value);
    return v;
}

void attach_oracle(BoundReport& r, const DistributionSpec& d, const TestFunction& g, const BoundOptions& opts) {
    r.seed = opts.seed;
    r.n_mc = opts.n_mc;
    r.rel_tol = opts.rel_tol;
    r.order_tol = opts.order.tolerance;
    r.grid = opts.grid_size;
    r.sup_g1g2 = g.sup_g1g2;
    const HypothesisCheck l2 = square_integrable(g, d);
    if (!l2.holds) {
        r.notes.push_back("Var[g(W)] is infinite; no oracle attached");
        return;
    }
    const RealFn gv = fn(g.g);
    r.exact_variance = exact_variance(d, gv, opts.rel_tol);
    if (opts.with_mc_variance) {
        r.mc = mc_variance(gv, [&](RandomStream& rng) { return d.sample(rng); }, opts.n_mc, opts.seed, opts.stream_offset + kStreamOracle);
        if (4.0 * growth_order(g.g, true) + 1e-2 >= d.moment_limit())
            r.notes.push_back("E[g(W)^4] is infinite; the Monte-Carlo interval is not reliable");
    }
    const double scale = std::max(1.0, r.mc ? std::abs(r.mc->estimate) : 0.0);
    if (r.exact_variance) r.degenerate = std::abs(*r.exact_variance) <= 1e-14 * scale;
    else if (r.mc) r.degenerate = r.mc->estimate == 0.0;
    if (r.degenerate) r.notes.push_back("Var[g(W)] = 0: lower bounds are trivially satisfied");
}

/// Valid fields follow the diagnostics when the gating checks for that side hold.
void settle(BoundReport& r) {
    if (r.upper_diagnostic && scope_holds(r.hypotheses, "upper")) r.upper = r.upper_diagnostic;
    if (r.lower_diagnostic && scope_holds(r.hypotheses, "lower")) r.lower = r.lower_diagnostic;
}

double tau_degree(const DistributionSpec& d, const SteinKernel& k) {
    auto c = k.pearson_coeffs();
    if (!c) c = pearson_coefficients(d);
    if (!c) return 2.0;
    if (c->d1 != 0.0) return 2.0;
    if (c->d2 != 0.0) return 1.0;
    return 0.0;
}

}  // namespace

std::optional<double> exact_variance(const DistributionSpec& d, const RealFn& g, double rel_tol) {
    if (!exact_or_quadrature(d)) return std::nullopt;
    if (const double ml = d.moment_limit(); std::isfinite(ml)) {
        // E[g(W)^2] diverges once 2 * growth reaches the moment limit
        const Interval s = d.support();
        double gr = 0.0;
        if (!std::isfinite(s.hi)) gr = std::max(gr, growth_order(g, true));
        if (!std::isfinite(s.lo)) gr = std::max(gr, growth_order(g, false));
        if (2.0 * gr + 1e-2 >= ml) return std::nullopt;
    }
    try {
        const double m = expect(d, g, rel_tol);
        const double v = expect(
            d,
            [&](double x) {
                const double u = g(x) - m;
                return u * u;
            },
            rel_tol);
        if (!std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const Error&) {
        return std::nullopt;
    }
}

HypothesisCheck convexity_check(const std::string& name, const RealFn& f, Interval iv, std::size_t points,
                                double slack, bool concave) {
    HypothesisCheck h;
    h.name = name;
    if (!iv.finite()) fail(Errc::invalid_argument, "convexity check needs a finite interval");
    const auto x = linspace(iv.lo, iv.hi, std::max<std::size_t>(points, 3));
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    double worst = 0.0;
    double where = x.front();
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        double d2 = y[i - 1] - 2.0 * y[i] + y[i + 1];
        if (concave) d2 = -d2;
        const double tol = slack * std::max({1.0, std::abs(y[i - 1]), std::abs(y[i]), std::abs(y[i + 1])});
        if (!std::isfinite(d2)) {
            worst = kInf;
            where = x[i];
            break;
        }
        if (-d2 - tol > worst) {
            worst = -d2 - tol;
            where = x[i];
        }
    }
    h.holds = worst <= 0.0;
    h.max_violation = worst;
    h.detail = std::string(concave ? "concave" : "convex") + " on " + std::to_string(x.size()) + " points over [" +
               fmt(iv.lo) + ", " + fmt(iv.hi) + "]";
    if (!h.holds) h.detail += ", fails near x = " + fmt(where);
    return h;
}

HypothesisCheck monotonicity_check(const std::string& name, const RealFn& f, std::span<const double> grid,
                                   bool increasing, double slack) {
    HypothesisCheck h;
    h.name = name;
    double worst = 0.0;
    double where = grid.empty() ? 0.0 : grid.front();
    double prev = grid.empty() ? 0.0 : f(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double cur = f(grid[i]);
        double step = cur - prev;
        if (!increasing) step = -step;
        const double tol = slack * std::max({1.0, std::abs(prev), std::abs(cur)});
        if (!std::isfinite(step)) {
            worst = kInf;
            where = grid[i];
            break;
        }
        if (-step - tol > worst) {
            worst = -step - tol;
            where = grid[i];
        }
        prev = cur;
    }
    h.holds = worst <= 0.0;
    h.max_violation = worst;
    h.detail = std::string(increasing ? "increasing" : "decreasing") + " on " + std::to_string(grid.size()) +
               " grid points";
    if (!h.holds) h.detail += ", fails near x = " + fmt(where);
    return h;
}

// ------------------------------------------------------------------ couplings

SteinCoupling kernel_coupling(const SteinKernel& k) {
    SteinCoupling c;
    c.name = "stein-kernel:" + std::string(route_name(k.provenance()));
    const DistributionSpec law = k.law();
    const double mu = law.mean();
    c.gamma = [mu](double x) { return x - mu; };
    c.gamma_prime = [](double) { return 1.0; };
    c.gamma_inverse = [mu](double x) { return x + mu; };
    c.joint_sampler = [k, law](RandomStream& rng) {
        const double w = law.sample(rng);
        return CouplingTriple{w, k(w), w};
    };
    c.w_sampler = [law](RandomStream& rng) { return law.sample(rng); };
    c.direction = SteinCoupling::Direction::equality;
    return c;
}

SteinCoupling zero_bias_coupling(const ZeroBiasSpec& zb) {
    SteinCoupling c;
    c.name = "zero-bias";
    c.gamma = [](double x) { return x; };
    c.gamma_prime = [](double) { return 1.0; };
    c.gamma_inverse = [](double x) { return x; };
    const double s2 = zb.sigma2();
    c.joint_sampler = [zb, s2](RandomStream& rng) {
        const double w = zb.base().sample(rng);
        return CouplingTriple{w, s2, zb.sample(rng)};
    };
    c.w_sampler = [zb](RandomStream& rng) { return zb.base().sample(rng); };
    c.direction = SteinCoupling::Direction::equality;
    return c;
}

SteinCoupling convex_order_coupling(const DistributionSpec& d) {
    SteinCoupling c;
    c.name = "convex-order";
    c.gamma = [](double x) { return x; };
    c.gamma_prime = [](double) { return 1.0; };
    c.gamma_inverse = [](double x) { return x; };
    const double s2 = d.variance();
    c.joint_sampler = [d, s2](RandomStream& rng) {
        const double w = d.sample(rng);
        return CouplingTriple{w, s2, w};
    };
    c.w_sampler = [d](RandomStream& rng) { return d.sample(rng); };
    c.direction = SteinCoupling::Direction::upper_only;
    return c;
}

// -------------------------------------------------------------------- generic

BoundReport bound_generic(const SteinCoupling& c, const TestFunction& g, const BoundOptions& opts, BoundSide side) {
    using D = SteinCoupling::Direction;
    const bool up_ok = c.direction != D::lower_only;
    const bool lo_ok = c.direction != D::upper_only;
    if ((side == BoundSide::upper && !up_ok) || (side == BoundSide::lower && !lo_ok))
        fail(Errc::incompatible_direction, "coupling '" + c.name + "' is " + std::string(direction_name(c.direction)));
    if (!c.joint_sampler || !c.gamma || !c.gamma_prime) fail(Errc::invalid_argument, "incomplete Stein coupling");
    if (opts.n_mc < 10'000) fail(Errc::invalid_argument, "generic bounds need n >= 10000");
    const bool want_up = up_ok && side != BoundSide::lower;
    const bool want_lo = lo_ok && side != BoundSide::upper;

    struct Acc {
        Moments up, lo, gam, gw;
    };
    std::vector<Acc> parts(kMonteCarloBatches);
    parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
        const std::size_t count = opts.n_mc / kMonteCarloBatches + (b < opts.n_mc % kMonteCarloBatches ? 1 : 0);
        RandomStream rng(opts.seed, opts.stream_offset + kStreamBound + b);
        Acc a;
        for (std::size_t i = 0; i < count; ++i) {
            const CouplingTriple t = c.joint_sampler(rng);
            const double d1 = g.deriv(t.t2);
            const double u = t.t1 / c.gamma_prime(t.t2) * d1 * d1;
            const double l = t.t1 * d1;
            const double gw = g.value(t.w);
            const double gm = c.gamma(t.w);
            if (!std::isfinite(u) || !std::isfinite(l) || !std::isfinite(gw) || !std::isfinite(gm))
                fail(Errc::non_finite, "non-finite coupling sample");
            a.up.add(u);
            a.lo.add(l);
            a.gam.add(gm);
            a.gw.add(gw);
        }
        parts[b] = a;
    });
    Acc all;
    for (const auto& a : parts) {
        all.up.merge(a.up);
        all.lo.merge(a.lo);
        all.gam.merge(a.gam);
        all.gw.merge(a.gw);
    }

    BoundReport r;
    r.method = "generic";
    r.distribution = c.name;
    r.g = g.text;
    r.route = "monte-carlo";
    r.seed = opts.seed;
    r.n_mc = opts.n_mc;
    r.rel_tol = opts.rel_tol;
    r.order_tol = opts.order.tolerance;
    r.grid = opts.grid_size;
    r.sup_g1g2 = g.sup_g1g2;

    HypothesisCheck cls;
    cls.name = "phi_g in the coupling's function class";
    cls.checked = false;
    cls.detail = "analytic premise on gamma and g; not verifiable numerically";
    r.hypotheses.push_back(cls);
    HypothesisCheck dir;
    dir.name = "coupling direction";
    dir.detail = std::string(direction_name(c.direction));
    r.hypotheses.push_back(dir);

    if (want_up) {
        r.upper_diagnostic = all.up.mean;
        r.upper_se = all.up.se_mean();
    }
    if (want_lo) {
        const double v = all.gam.variance();
        if (v <= 0.0) fail(Errc::zero_variance, "Var[gamma(W)] is zero");
        r.lower_diagnostic = all.lo.mean * all.lo.mean / v;
        // delta method on L^2 / V; both factors are estimated, errors added linearly
        const double nn = static_cast<double>(all.gam.n);
        const double v_se = std::sqrt(std::max(0.0, (all.gam.m4 / nn - v * v * (nn - 3.0) / (nn - 1.0)) / nn));
        r.lower_se = 2.0 * std::abs(all.lo.mean) * all.lo.se_mean() / v + r.lower_diagnostic.value() * v_se / v;
    }
    if (opts.with_mc_variance) {
        McVariance m;
        const double nn = static_cast<double>(all.gw.n);
        m.estimate = all.gw.variance();
        const double s2 = m.estimate;
        m.se = std::sqrt(std::max(0.0, (all.gw.m4 / nn - s2 * s2 * (nn - 3.0) / (nn - 1.0)) / nn));
        m.ci_halfwidth = 2.5758293035489004 * m.se;
        m.n = all.gw.n;
        m.seed = opts.seed;
        r.mc = m;
        r.degenerate = m.estimate == 0.0;
    }
    settle(r);
    return r;
}

// ------------------------------------------------------------------- cacoullos

BoundReport bound_cacoullos(const DistributionSpec& d, const SteinKernel& k, const TestFunction& g,
                            const BoundOptions& opts) {
    BoundReport r;
    r.method = "cacoullos";
    r.distribution = d.describe();
    r.g = g.text;
    r.notes.push_back("kernel route: " + std::string(route_name(k.provenance())));

    const double ml = d.moment_limit();
    const double gr1 = growth_order(g.d1, true);
    const double deg = tau_degree(d, k);
    r.hypotheses.push_back(square_integrable(g, d));
    r.hypotheses.push_back(moment_check("E[tau g'^2] finite", deg + 2.0 * gr1, ml, "upper"));
    r.hypotheses.push_back(moment_check("E[tau g'] finite", deg + gr1, ml, "lower"));

    const RealFn tau = [&k](double x) { return k(x); };
    const RealFn g1 = fn(g.d1);
    const auto br = atom_values(d);
    if (scope_holds(r.hypotheses, "upper")) {
        const auto e = expectation(
            d,
            [&](double x) {
                const double v = g1(x);
                return v == 0.0 ? 0.0 : tau(x) * v * v;
            },
            nullptr, opts, opts.stream_offset + kStreamBound, br);
        r.upper_diagnostic = e.value;
        r.upper_se = e.se;
        add_route(r, e.route);
    }
    if (scope_holds(r.hypotheses, "lower")) {
        const auto e = expectation(
            d,
            [&](double x) {
                const double v = g1(x);
                return v == 0.0 ? 0.0 : tau(x) * v;
            },
            nullptr, opts, opts.stream_offset + kStreamBound + kMonteCarloBatches, br);
        const double var = d.variance();
        r.lower_diagnostic = e.value * e.value / var;
        r.lower_se = 2.0 * std::abs(e.value) * e.se / var;
        add_route(r, e.route);
    }
    attach_oracle(r, d, g, opts);
    settle(r);
    return r;
}

// ------------------------------------------------------------------ zero bias

BoundReport bound_zero_bias(const ZeroBiasSpec& zb, const TestFunction& g, const BoundOptions& opts) {
    const DistributionSpec& d = zb.base();
    BoundReport r;
    r.method = "zero-bias";
    r.distribution = d.describe();
    r.g = g.text;

    const double ml = d.moment_limit();
    const double gr1 = growth_order(g.d1, true);
    r.hypotheses.push_back(square_integrable(g, d));
    r.hypotheses.push_back(moment_check("E[g'(W*)^2] finite", 2.0 * gr1, ml - 2.0, "upper"));
    r.hypotheses.push_back(moment_check("E[g'(W*)] finite", gr1, ml - 2.0, "lower"));

    const DistributionSpec star = zb.law();
    const RealFn g1 = fn(g.d1);
    const double s2 = zb.sigma2();
    const auto br = atom_values(d);
    if (scope_holds(r.hypotheses, "upper")) {
        const auto e = expectation(
            star,
            [&](double x) {
                const double v = g1(x);
                return v * v;
            },
            nullptr, opts, opts.stream_offset + kStreamBound, br);
        r.upper_diagnostic = s2 * e.value;
        r.upper_se = s2 * e.se;
        add_route(r, e.route);
    }
    if (scope_holds(r.hypotheses, "lower")) {
        const auto e = expectation(star, g1, nullptr, opts, opts.stream_offset + kStreamBound + kMonteCarloBatches, br);
        r.lower_diagnostic = s2 * e.value * e.value;
        r.lower_se = 2.0 * s2 * std::abs(e.value) * e.se;
        add_route(r, e.route);
    }
    attach_oracle(r, d, g, opts);
    settle(r);
    return r;
}

BoundReport bound_zero_bias(const DistributionSpec& d, const TestFunction& g, const BoundOptions& opts) {
    const double mu = d.mean();
    if (std::abs(mu) <= 1e-9) return bound_zero_bias(zero_bias(d), g, opts);
    BoundReport r = bound_zero_bias(zero_bias(centered(d)), g.shifted(mu), opts);
    r.distribution = d.describe();
    r.g = g.text;
    r.notes.push_back("applied to W - " + fmt(mu) + " with g shifted by the mean");
    return r;
}

BoundReport bound_zero_bias_remainder(const DistributionSpec& d, const TestFunction& g,
                                      std::optional<double> e_abs_gap, const BoundOptions& opts,
                                      const SumZeroBiasCoupling* coupling) {
    std::string gap_source = "user";
    if (!e_abs_gap) {
        if (!coupling) fail(Errc::missing_gap, "E|W* - W| needs a coupling or a supplied value");
        e_abs_gap = coupling->exact_gap();
        gap_source = "coupling";
    }
    if (!(*e_abs_gap >= 0.0) || !std::isfinite(*e_abs_gap))
        fail(Errc::invalid_argument, "E|W* - W| must be finite and nonnegative");

    BoundReport r;
    r.method = "zero-bias-remainder";
    r.distribution = d.describe();
    r.g = g.text;
    r.gap = *e_abs_gap;
    r.notes.push_back("E|W* - W| from " + gap_source);

    const double ml = d.moment_limit();
    r.hypotheses.push_back(square_integrable(g, d));
    r.hypotheses.push_back(moment_check("E[g'(W)^2] finite", 2.0 * growth_order(g.d1, true), ml, "upper"));
    HypothesisCheck sup;
    sup.name = "sup|g'g''| finite";
    sup.scope = "upper";
    sup.holds = std::isfinite(g.sup_g1g2);
    sup.detail = "grid estimate " + fmt(g.sup_g1g2) + " over [" + fmt(g.effective.lo) + ", " + fmt(g.effective.hi) +
                 "]";
    r.hypotheses.push_back(sup);
    HypothesisCheck smooth;
    smooth.name = "g twice differentiable";
    smooth.checked = false;
    smooth.detail = "taken from the symbolic derivatives";
    r.hypotheses.push_back(smooth);

    const double s2 = d.variance();
    if (scope_holds(r.hypotheses, "upper")) {
        const RealFn g1 = fn(g.d1);
        const auto e = expectation(
            d,
            [&](double x) {
                const double v = g1(x);
                return v * v;
            },
            nullptr, opts, opts.stream_offset + kStreamBound, atom_values(d));
        const double rem = 2.0 * s2 * g.sup_g1g2 * *e_abs_gap;
        r.remainder = rem;
        r.upper_diagnostic = s2 * e.value + rem;
        r.upper_se = s2 * e.se;
        add_route(r, e.route);
    }
    attach_oracle(r, d, g, opts);
    settle(r);
    return r;
}

// ---------------------------------------------------------------- convex order

BoundReport bound_convex_order(const DistributionSpec& d, const TestFunction& g, const BoundOptions& opts) {
    BoundReport r;
    r.method = "convex";
    r.distribution = d.describe();
    r.g = g.text;

    const double mu = d.mean();
    HypothesisCheck mean0;
    mean0.name = "E[W] = 0";
    mean0.holds = std::abs(mu) <= 1e-9 * std::max(1.0, d.sd());
    mean0.max_violation = std::abs(mu);
    mean0.detail = "mean " + fmt(mu);
    r.hypotheses.push_back(mean0);

    HypothesisCheck cx;
    cx.name = "W* <=cx W";
    if (mean0.holds) {
        try {
            const ZeroBiasSpec zb = zero_bias(d);
            OrderOptions oo = opts.order;
            oo.grid_size = opts.grid_size;
            const OrderVerdict v = check_cx(zb.law(), d, oo);
            cx.holds = v.holds;
            cx.max_violation = v.max_violation;
            cx.detail = v.verdict() + " on " + std::to_string(v.grid.size()) + " points (" + v.route + ")";
            if (!v.holds) cx.detail += ", witness t = " + fmt(v.witness);
        } catch (const Error& e) {
            cx.holds = false;
            cx.detail = std::string("not checkable: ") + e.what();
        }
    } else {
        cx.holds = false;
        cx.detail = "not checked: mean is not zero";
    }
    r.hypotheses.push_back(cx);

    const RealFn g1 = fn(g.d1);
    const RealFn sq = [&](double x) {
        const double v = g1(x);
        return v * v;
    };
    r.hypotheses.push_back(convexity_check("g'^2 convex", sq, d.effective_range(), opts.grid_size, opts.slack));
    const HypothesisCheck l2 = square_integrable(g, d);
    const HypothesisCheck fin =
        moment_check("E[g'(W)^2] finite", 2.0 * growth_order(g.d1, true), d.moment_limit(), "upper");
    r.hypotheses.push_back(l2);
    r.hypotheses.push_back(fin);

    if (l2.holds && fin.holds) {
        const auto e = expectation(d, sq, nullptr, opts, opts.stream_offset + kStreamBound, atom_values(d));
        r.upper_diagnostic = d.variance() * e.value;
        r.upper_se = d.variance() * e.se;
        add_route(r, e.route);
    }
    attach_oracle(r, d, g, opts);
    settle(r);
    return r;
}

// ---------------------------------------------------------------- equilibrium

double equilibrium_phi(const TestFunction& g, double lambda, double x) {
    const double top = lambda * x - 1.0;
    if (top == 0.0) return 0.0;
    const RealFn f = [&](double u) { return g.deriv((u + 1.0) / lambda); };
    QuadOptions q;
    q.rel_tol = 1e-12;
    q.abs_tol = 1e-300;
    if (top > 0.0) return integrate(f, Interval(0.0, top), q).value;
    return -integrate(f, Interval(top, 0.0), q).value;
}

BoundReport bound_equilibrium(const DistributionSpec& d, const TestFunction& g, EquilibriumBranch branch,
                              const BoundOptions& opts) {
    BoundReport r;
    r.method = branch == EquilibriumBranch::a ? "equilibrium-a" : "equilibrium-b";
    r.distribution = d.describe();
    r.g = g.text;
    const std::string side = branch == EquilibriumBranch::a ? "upper" : "lower";

    HypothesisCheck nonneg;
    nonneg.name = "W >= 0";
    nonneg.scope = side;
    nonneg.holds = d.support().lo >= 0.0 && d.mean() > 0.0;
    nonneg.detail = "support [" + fmt(d.support().lo) + ", " + fmt(d.support().hi) + "]";
    r.hypotheses.push_back(nonneg);
    if (!nonneg.holds) {
        attach_oracle(r, d, g, opts);
        return r;
    }
    const double lambda = 1.0 / d.mean();

    OrderOptions oo = opts.order;
    oo.grid_size = opts.grid_size;
    const auto [nbue, nwue] = check_nbue_nwue(d, oo);
    const std::vector<double>& grid = nbue.grid;

    RealFn h;
    std::string hname;
    if (branch == EquilibriumBranch::a) {
        h = [&](double x) { return equilibrium_phi(g, lambda, x) + lambda * x * g.deriv(x); };
        hname = "phi_g(x) + x phi_g'(x)";
    } else {
        h = [&](double x) { return g.value(x) + x * g.deriv(x); };
        hname = "g(x) + x g'(x)";
    }
    // (a) pairs NBUE with increasing h; (b) pairs NBUE with decreasing h.
    const bool nbue_dir = branch == EquilibriumBranch::a;
    HypothesisCheck inc = monotonicity_check(hname + " increasing", h, grid, true, opts.slack);
    HypothesisCheck dec = monotonicity_check(hname + " decreasing", h, grid, false, opts.slack);
    const HypothesisCheck& with_nbue = nbue_dir ? inc : dec;
    const HypothesisCheck& with_nwue = nbue_dir ? dec : inc;

    auto verdict_check = [&](const char* name, const OrderVerdict& v) {
        HypothesisCheck c;
        c.name = name;
        c.gating = false;
        c.holds = v.holds;
        c.max_violation = v.max_violation;
        c.detail = v.verdict() + " on " + std::to_string(v.grid.size()) + " points (" + v.route + ")";
        return c;
    };
    r.hypotheses.push_back(verdict_check("NBUE", nbue));
    r.hypotheses.push_back(verdict_check("NWUE", nwue));
    inc.gating = false;
    dec.gating = false;
    r.hypotheses.push_back(inc);
    r.hypotheses.push_back(dec);

    HypothesisCheck premise;
    premise.name = "premise (i) or (ii)";
    premise.scope = side;
    const bool i = nbue.holds && with_nbue.holds;
    const bool ii = nwue.holds && with_nwue.holds;
    premise.holds = i || ii;
    premise.detail = i && ii ? "(i) NBUE and (ii) NWUE both hold"
                     : i     ? "(i) NBUE with " + with_nbue.detail
                     : ii    ? "(ii) NWUE with " + with_nwue.detail
                     : !nbue.holds && !nwue.holds ? "neither NBUE nor NWUE holds"
                                                  : "monotonicity does not match the ageing verdict";
    r.hypotheses.push_back(premise);

    const double ml = d.moment_limit();
    const double gr1 = growth_order(g.d1, true);
    r.hypotheses.push_back(square_integrable(g, d));
    if (branch == EquilibriumBranch::a)
        r.hypotheses.push_back(moment_check("E[W g'^2] finite", 1.0 + 2.0 * gr1, ml, "upper"));
    else
        r.hypotheses.push_back(moment_check("E[W g'] finite", 1.0 + gr1, ml, "lower"));

    if (r.hypotheses.back().holds) {
        const RealFn g1 = fn(g.d1);
        const RealFn g2 = fn(g.d2);
        if (branch == EquilibriumBranch::a) {
            const auto e = expectation(
                d,
                [&](double x) {
                    const double v = g1(x);
                    return x * v * v;
                },
                [&](double x) {
                    const double v = g1(x);
                    return v * v + 2.0 * x * v * g2(x);
                },
                opts, opts.stream_offset + kStreamBound, atom_values(d));
            r.upper_diagnostic = e.value / lambda;
            r.upper_se = e.se / lambda;
            add_route(r, e.route);
        } else {
            const auto e = expectation(
                d, [&](double x) { return x * g1(x); }, [&](double x) { return g1(x) + x * g2(x); }, opts,
                opts.stream_offset + kStreamBound, atom_values(d));
            const double den = lambda * lambda * d.variance();
            r.lower_diagnostic = e.value * e.value / den;
            r.lower_se = 2.0 * std::abs(e.value) * e.se / den;
            add_route(r, e.route);
        }
    }
    attach_oracle(r, d, g, opts);
    settle(r);
    return r;
}

// ------------------------------------------------------------------- smoothed

BoundReport bound_smoothed(const SmoothedSpec& s, const TestFunction& g, SmoothedClaim claim,
                           const BoundOptions& opts) {
    BoundReport r;
    r.method = claim == SmoothedClaim::i ? "smoothed-i" : "smoothed-ii";
    r.distribution = s.base.describe();
    r.g = g.text;
    r.notes.push_back("bound on Var[g(Y)] through Y + Z, Z ~ N(0, " + fmt(s.epsilon * s.epsilon) + ")");
    const std::string side = claim == SmoothedClaim::i ? "upper" : "lower";

    const DistributionSpec& v = s.convolved;
    r.hypotheses.push_back(square_integrable(g, s.base));
    r.hypotheses.back().scope = "both";
    HypothesisCheck tails;
    tails.name = "E[tau_eps g'^k](Y + Z) finite";
    tails.checked = false;
    tails.detail = "kernel growth of the smoothed law is not bounded analytically";
    r.hypotheses.push_back(tails);
    if (!r.hypotheses.front().holds) {
        attach_oracle(r, s.base, g, opts);
        return r;
    }

    const RealFn gv = fn(g.g);
    const double c = claim == SmoothedClaim::i ? expect(v, gv, opts.rel_tol) : expect(s.base, gv, opts.rel_tol);
    const RealFn sq = [&](double x) {
        const double u = gv(x) - c;
        return u * u;
    };
    HypothesisCheck shape = convexity_check(
        claim == SmoothedClaim::i ? "(g - E[g(Y+Z)])^2 convex" : "(g - E[g(Y)])^2 concave", sq, v.effective_range(),
        opts.grid_size, opts.slack, claim == SmoothedClaim::ii);
    shape.scope = side;
    r.hypotheses.push_back(shape);

    const SteinKernel k = smoothed_kernel(s);
    const RealFn g1 = fn(g.d1);
    if (claim == SmoothedClaim::i) {
        const auto e = expectation(
            v,
            [&](double x) {
                const double d1 = g1(x);
                return d1 == 0.0 ? 0.0 : k(x) * d1 * d1;
            },
            nullptr, opts, opts.stream_offset + kStreamBound);
        r.upper_diagnostic = e.value;
        r.upper_se = e.se;
        add_route(r, e.route);
    } else {
        const auto e = expectation(
            v,
            [&](double x) {
                const double d1 = g1(x);
                return d1 == 0.0 ? 0.0 : k(x) * d1;
            },
            nullptr, opts, opts.stream_offset + kStreamBound);
        const double den = s.epsilon * s.epsilon + s.base.variance();
        r.lower_diagnostic = e.value * e.value / den;
        r.lower_se = 2.0 * std::abs(e.value) * e.se / den;
        add_route(r, e.route);
    }
    attach_oracle(r, s.base, g, opts);
    settle(r);
    return r;
}

}  // namespace stein
