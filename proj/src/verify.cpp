#include "stein/verify.hpp"

#include "stein/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace stein {

// ------------------------------------------------------------------ battery

std::vector<TestPhi> phi_battery(Interval clip) {
    const double lo = clip.lo, hi = clip.hi;
    std::vector<TestPhi> b;
    b.push_back({"x", [](double x) { return x; }, [](double) { return 1.0; }});
    b.push_back({"x^2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }});
    b.push_back({"x^3 clipped",
                 [lo, hi](double x) {
                     const double c = std::clamp(x, lo, hi);
                     return c * c * c;
                 },
                 [lo, hi](double x) { return x < lo || x > hi ? 0.0 : 3.0 * x * x; }});
    b.push_back({"sin(x)", [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); }});
    b.push_back({"exp(-x^2)", [](double x) { return std::exp(-x * x); },
                 [](double x) { return -2.0 * x * std::exp(-x * x); }});
    b.push_back({"log(1+x^2)", [](double x) { return std::log1p(x * x); },
                 [](double x) { return 2.0 * x / (1.0 + x * x); }});
    return b;
}

namespace {

TestPhi phi_from_text(const std::string& text) {
    const Expr e = parse_expression(text);
    const Expr d = differentiate(e);
    return {text, [e](double x) { return e(x); }, [d](double x) { return d(x); }};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

bool moment_ok(double order, double limit) { return !std::isfinite(limit) || order + 1e-2 < limit; }

double tau_growth(const SteinKernel& k) {
    auto c = k.pearson_coeffs();
    if (!c) c = pearson_coefficients(k.law());
    if (!c) return 2.0;
    return c->d1 != 0.0 ? 2.0 : (c->d2 != 0.0 ? 1.0 : 0.0);
}

std::vector<double> atom_values(const DistributionSpec& d) {
    std::vector<double> v;
    if (const auto* a = d.atoms())
        for (const Atom& at : *a) v.push_back(at.value);
    return v;
}

}  // namespace

std::vector<ResidualRow> kernel_residual(const SteinKernel& k, const std::vector<TestPhi>& battery, double rel_tol) {
    const DistributionSpec& d = k.law();
    const double mu = d.mean();
    const double ml = d.moment_limit();
    std::vector<ResidualRow> out;
    for (const auto& phi : battery) {
        ResidualRow row;
        row.phi = phi.name;
        const double gf = growth_order(phi.f, true);
        const double gd = growth_order(phi.df, true);
        if (!moment_ok(1.0 + gf, ml) || !moment_ok(tau_growth(k) + gd, ml)) {
            row.applicable = false;
            row.detail = "Cov[W, phi(W)] needs a moment of order " + fmt(1.0 + gf) + " >= moment limit " + fmt(ml);
            out.push_back(row);
            continue;
        }
        row.lhs = expect(d, [&](double x) { return (x - mu) * phi.f(x); }, rel_tol);
        row.rhs = expect(
            d,
            [&](double x) {
                const double v = phi.df(x);
                return v == 0.0 ? 0.0 : k(x) * v;
            },
            rel_tol);
        row.residual = row.lhs - row.rhs;
        row.sign_ok = std::abs(row.residual) <= 1e-6 * (1.0 + std::abs(row.lhs));
        out.push_back(row);
    }
    return out;
}

std::vector<ResidualRow> zero_bias_residual(const ZeroBiasSpec& zb, const std::vector<TestPhi>& battery,
                                            double rel_tol) {
    const DistributionSpec& d = zb.base();
    const DistributionSpec star = zb.law();
    const double ml = d.moment_limit();
    const auto br = atom_values(d);
    std::vector<ResidualRow> out;
    for (const auto& phi : battery) {
        ResidualRow row;
        row.phi = phi.name;
        const double gf = growth_order(phi.f, true);
        const double gd = growth_order(phi.df, true);
        if (!moment_ok(1.0 + gf, ml) || !moment_ok(gd, ml - 2.0)) {
            row.applicable = false;
            row.detail = "E[W phi(W)] or E[phi'(W*)] is infinite";
            out.push_back(row);
            continue;
        }
        row.lhs = expect(d, [&](double x) { return x * phi.f(x); }, rel_tol, br);
        row.rhs = zb.sigma2() * expect(star, phi.df, rel_tol, br);
        row.residual = row.lhs - row.rhs;
        row.sign_ok = std::abs(row.residual) <= 1e-6 * (1.0 + std::abs(row.lhs));
        out.push_back(row);
    }
    return out;
}

std::vector<ResidualRow> coupling_residual(const SteinCoupling& c, const std::vector<TestPhi>& battery, std::size_t n,
                                           std::uint64_t seed, std::uint64_t stream_base) {
    if (n < 2) fail(Errc::invalid_argument, "coupling residual needs at least 2 draws");
    const std::size_t m = battery.size();
    struct Acc {
        std::vector<Moments> lhs, rhs, diff;
    };
    std::vector<Acc> parts(kMonteCarloBatches);
    parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
        const std::size_t count = n / kMonteCarloBatches + (b < n % kMonteCarloBatches ? 1 : 0);
        RandomStream rng(seed, stream_base + b);
        Acc a{std::vector<Moments>(m), std::vector<Moments>(m), std::vector<Moments>(m)};
        for (std::size_t i = 0; i < count; ++i) {
            const CouplingTriple t = c.joint_sampler(rng);
            const double gw = c.gamma(t.w);
            for (std::size_t j = 0; j < m; ++j) {
                const double l = gw * battery[j].f(t.w);
                const double r = t.t1 * battery[j].df(t.t2);
                if (!std::isfinite(l) || !std::isfinite(r)) fail(Errc::non_finite, "non-finite coupling sample");
                a.lhs[j].add(l);
                a.rhs[j].add(r);
                a.diff[j].add(l - r);
            }
        }
        parts[b] = std::move(a);
    });
    std::vector<ResidualRow> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        Moments l, r, d;
        for (const auto& a : parts) {
            l.merge(a.lhs[j]);
            r.merge(a.rhs[j]);
            d.merge(a.diff[j]);
        }
        ResidualRow& row = out[j];
        row.phi = battery[j].name;
        row.lhs = l.mean;
        row.rhs = r.mean;
        row.residual = d.mean;
        row.se = d.se_mean();
        const double tol = 4.0 * row.se + 1e-12 * (1.0 + std::abs(row.lhs));
        switch (c.direction) {
            case SteinCoupling::Direction::equality: row.sign_ok = std::abs(row.residual) <= tol; break;
            case SteinCoupling::Direction::upper_only: row.sign_ok = row.residual <= tol; break;
            case SteinCoupling::Direction::lower_only: row.sign_ok = row.residual >= -tol; break;
        }
        row.detail = std::string(direction_name(c.direction)) + ", 4 SE = " + fmt(4.0 * row.se);
    }
    return out;
}

DistributionSpec enumerate_permutation_statistic(const SquareArray& a, bool standardized) {
    const std::size_t n = a.n;
    if (n == 0 || n > 10) fail(Errc::invalid_argument, "exact enumeration supports 1 <= n <= 10");
    double center = 0.0;
    double scale = 1.0;
    if (standardized) {
        const DistributionSpec w = permutation_statistic(a, false);
        const double s2 = *w.constant("sigma2");
        if (!(s2 > 0.0)) fail(Errc::zero_variance, "permutation statistic is degenerate (sigma^2 = 0)");
        center = w.mean();
        scale = 1.0 / std::sqrt(s2);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t total = 1;
    for (std::size_t k = 2; k <= n; ++k) total *= k;
    const double p = 1.0 / static_cast<double>(total);
    std::vector<Atom> atoms;
    atoms.reserve(total);
    do {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) w += a(i, perm[i]);
        atoms.push_back({(w - center) * scale, p});
    } while (std::next_permutation(perm.begin(), perm.end()));
    return discrete_weighted(std::move(atoms));
}

// ---------------------------------------------------------------- scenarios

bool ScenarioResult::passed() const {
    return !assertions.empty() && std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.pass; });
}

namespace {

class Context {
public:
    Context(ScenarioResult& r, std::uint64_t offset) : r_(r) {
        opts.seed = r.seed;
        opts.stream_offset = offset;
        opts.order.seed = r.seed;
        offset_ = offset;
    }

    double num(const std::string& key) const {
        const std::string& s = r_.inputs.at(key);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            fail(Errc::invalid_argument, "scenario parameter " + key + " = '" + s + "' is not a number");
        return v;
    }
    const std::string& str(const std::string& key) const { return r_.inputs.at(key); }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        const std::string& s = str(key);
        std::size_t start = 0;
        while (start <= s.size()) {
            const std::size_t end = s.find(';', start);
            const std::string item = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
            if (!item.empty()) out.push_back(item);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        return out;
    }

    void close(const std::string& name, double observed, double expected, double rel, double abs_floor = 1e-14) {
        Assertion a{name, false, observed, expected, rel * std::abs(expected) + abs_floor, "relative tolerance " + fmt(rel)};
        a.pass = std::abs(observed - expected) <= a.tolerance;
        r_.assertions.push_back(a);
    }
    void within_se(const std::string& name, double observed, double expected, double se) {
        Assertion a{name, false, observed, expected, 4.0 * se, "4 standard errors"};
        a.pass = std::abs(observed - expected) <= a.tolerance;
        r_.assertions.push_back(a);
    }
    /// observed <= bound + slack
    void at_most(const std::string& name, double observed, double bound, double slack, const std::string& detail) {
        Assertion a{name, false, observed, bound, slack, detail};
        a.pass = observed <= bound + slack;
        r_.assertions.push_back(a);
    }
    void at_least(const std::string& name, double observed, double bound, double slack, const std::string& detail) {
        Assertion a{name, false, observed, bound, slack, detail};
        a.pass = observed >= bound - slack;
        r_.assertions.push_back(a);
    }
    void truth(const std::string& name, bool ok, const std::string& detail) {
        r_.assertions.push_back({name, ok, ok ? 1.0 : 0.0, 1.0, 0.0, detail});
    }

    /// Sandwich of the report's valid bounds around its Monte-Carlo variance.
    void sandwich(const std::string& label, const BoundReport& rep) {
        if (!rep.mc) {
            truth(label + ": oracle attached", false, "no Monte-Carlo variance");
            return;
        }
        const double v = rep.mc->estimate;
        if (rep.lower)
            at_least(label + ": MC Var >= lower - 4 SE", v, *rep.lower, 4.0 * (rep.mc->se + rep.lower_se),
                     "lower " + fmt(*rep.lower));
        if (rep.upper)
            at_most(label + ": MC Var <= upper + 4 SE", v, *rep.upper, 4.0 * (rep.mc->se + rep.upper_se),
                    "upper " + fmt(*rep.upper));
    }

    /// Hypothesis gating is monotone: a bound is present only when its checks hold.
    void gate(const std::string& label, const BoundReport& rep) {
        bool ok = true;
        for (const auto& h : rep.hypotheses) {
            if (!h.checked || !h.gating || h.holds) continue;
            if (h.scope != "lower" && rep.upper) ok = false;
            if (h.scope != "upper" && rep.lower) ok = false;
        }
        truth(label + ": failed hypotheses withhold their bounds", ok, rep.method);
    }

    void oracle(const std::string& name, double v) { r_.oracles[name] = v; }
    void report(BoundReport rep) { r_.reports.push_back(std::move(rep)); }

    std::uint64_t stream(std::uint64_t block) const { return offset_ + block; }

    BoundOptions opts;

private:
    ScenarioResult& r_;
    std::uint64_t offset_ = 0;
};

struct Scenario {
    std::string id;
    ScenarioParams defaults;
    void (*run)(Context&);
};

// §3 Bernoulli sum: W = sum of n standardized Bernoulli(p) variables.
void run_bernoulli_sum(Context& c) {
    const double nd = c.num("n");
    const double p = c.num("p");
    if (nd < 1.0 || nd != std::floor(nd) || nd > 10000.0) fail(Errc::invalid_argument, "n must be an integer in [1, 10000]");
    if (!(p > 0.0 && p < 1.0)) fail(Errc::invalid_argument, "p must lie in (0, 1)");
    const auto n = static_cast<std::size_t>(nd);
    const double q = 1.0 - p;
    std::vector<DistributionSpec> parts(n, standardized_bernoulli(p, nd));
    const DistributionSpec w = sum_of_independents(parts);
    const TestFunction g = make_test_function(c.str("g"), w.effective_range());

    const double formula_gap = (p * p + q * q) / (2.0 * std::sqrt(nd * p * q));
    const SumZeroBiasCoupling coupling = zero_bias_sum(parts, CouplingMode::monotone);
    const double exact_gap = coupling.exact_gap();
    const Expectation mc_gap = coupling.mc_gap(c.opts.n_mc, c.opts.seed, c.stream(kStreamCoupling));
    c.oracle("gap_formula", formula_gap);
    c.oracle("gap_exact", exact_gap);
    c.oracle("gap_mc", mc_gap.value);
    c.oracle("gap_mc_se", mc_gap.se);
    c.close("E|W* - W| from the part laws equals (p^2+q^2)/(2 sqrt(npq))", exact_gap, formula_gap, 1e-9);
    c.within_se("Monte-Carlo E|W* - W| matches (p^2+q^2)/(2 sqrt(npq))", mc_gap.value, formula_gap, mc_gap.se);

    BoundReport rem = bound_zero_bias_remainder(w, g, formula_gap, c.opts);
    c.gate("remainder", rem);
    c.truth("remainder bound emitted", rem.upper.has_value(), "hypotheses hold");
    if (rem.upper && rem.mc) {
        c.at_most("MC Var[g(W)] below the remainder bound with margin > 4 SE", rem.mc->estimate + 4.0 * rem.mc->se,
                  *rem.upper, 0.0, "E[g'(W)^2] + sup|g'g''| (p^2+q^2)/sqrt(npq)");
        if (rem.exact_variance)
            c.at_most("exact Var[g(W)] below the remainder bound", *rem.exact_variance, *rem.upper, 1e-12,
                      "exact summation over the atoms");
        c.close("remainder equals sup|g'g''| (p^2+q^2)/sqrt(npq)", *rem.remainder,
                g.sup_g1g2 * (p * p + q * q) / std::sqrt(nd * p * q), 1e-12);
    }
    c.report(rem);

    BoundReport zb = bound_zero_bias(w, g, c.opts);
    c.gate("zero-bias", zb);
    c.sandwich("zero-bias", zb);
    c.report(zb);
}

SquareArray make_array(Context& c, std::size_t n) {
    SquareArray a;
    a.n = n;
    a.values.resize(n * n);
    const std::string& kind = c.str("array");
    if (kind == "random") {
        const double top = c.num("max_entry");
        if (top < 1.0 || top != std::floor(top)) fail(Errc::invalid_argument, "max_entry must be a positive integer");
        RandomStream rng(c.opts.seed, c.stream(kStreamScenario));
        for (double& v : a.values) v = static_cast<double>(rng.index(static_cast<std::uint64_t>(top) + 1));
    } else if (kind == "identity") {
        for (std::size_t i = 0; i < n; ++i) a.values[i * n + i] = 1.0;
    } else {
        fail(Errc::invalid_argument, "array must be 'random' or 'identity'");
    }
    return a;
}

// §3 permutation statistic Z = (W - n a..) / sigma with E|Z* - Z| <= 8 C / sigma.
void run_permutation(Context& c) {
    const double nd = c.num("n");
    if (nd < 2.0 || nd != std::floor(nd) || nd > 64.0) fail(Errc::invalid_argument, "n must be an integer in [2, 64]");
    const auto n = static_cast<std::size_t>(nd);
    const SquareArray a = make_array(c, n);
    const DistributionSpec w = permutation_statistic(a, false);
    const double sigma2 = *w.constant("sigma2");
    const double C = *w.constant("C");
    c.oracle("sigma2", sigma2);
    c.oracle("C", C);
    const DistributionSpec z = permutation_statistic(a, true);
    const double sigma = std::sqrt(sigma2);
    const double gap = 8.0 * C / sigma;
    c.oracle("gap_bound", gap);

    std::optional<DistributionSpec> exact;
    if (n <= 8) {
        const DistributionSpec we = enumerate_permutation_statistic(a, false);
        c.close("enumerated E[W] equals n a..", we.mean(), w.mean(), 1e-12);
        c.close("enumerated Var[W] equals the sigma^2 formula", we.variance(), sigma2, 1e-12);
        c.oracle("var_enumerated", we.variance());
        exact = enumerate_permutation_statistic(a, true);
    }
    const DistributionSpec& zlaw = exact ? *exact : z;
    const Interval range = exact ? exact->support() : z.support();
    for (const auto& text : c.list("g")) {
        const TestFunction g = make_test_function(text, range);
        BoundOptions o = c.opts;
        o.with_mc_variance = false;
        BoundReport rep = bound_zero_bias_remainder(zlaw, g, gap, o);
        rep.distribution = z.describe();
        rep.mc = mc_variance([&g](double x) { return g.value(x); }, [&z](RandomStream& rng) { return z.sample(rng); },
                             c.opts.n_mc, c.opts.seed, c.stream(kStreamOracle));
        rep.notes.push_back("E|Z* - Z| replaced by its bound 8C/sigma");
        c.gate(text, rep);
        c.truth(text + ": remainder bound emitted", rep.upper.has_value(), "hypotheses hold");
        if (rep.upper)
            c.at_most(text + ": MC Var[g(Z)] <= E[g'(Z)^2] + 16C/sigma sup|g'g''| + 4 SE", rep.mc->estimate, *rep.upper,
                      4.0 * rep.mc->se, "permutation sampler");
        if (rep.remainder) c.close(text + ": remainder equals 16C/sigma sup|g'g''|", *rep.remainder, 16.0 * C / sigma * g.sup_g1g2, 1e-12);
        if (exact) {
            const auto ev = exact_variance(*exact, [&g](double x) { return g.value(x); });
            if (ev) {
                rep.exact_variance = ev;
                c.within_se(text + ": MC Var[g(Z)] matches enumeration", rep.mc->estimate, *ev, rep.mc->se);
                if (rep.upper) c.at_most(text + ": enumerated Var[g(Z)] <= bound", *ev, *rep.upper, 1e-12, "exact");
            }
        }
        c.report(std::move(rep));
    }
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& s) {
    std::vector<std::pair<double, double>> out;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t end = s.find(';', start);
        if (end == std::string::npos) end = s.size();
        const std::string item = s.substr(start, end - start);
        const auto colon = item.find(':');
        if (colon == std::string::npos) fail(Errc::invalid_argument, "pairs are written a:b separated by ';'");
        double a = 0.0, b = 0.0;
        const auto r1 = std::from_chars(item.data(), item.data() + colon, a);
        const auto r2 = std::from_chars(item.data() + colon + 1, item.data() + item.size(), b);
        if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != item.data() + colon ||
            r2.ptr != item.data() + item.size())
            fail(Errc::invalid_argument, "bad pair '" + item + "'");
        out.emplace_back(a, b);
        start = end + 1;
    }
    if (out.empty()) fail(Errc::invalid_argument, "no pairs given");
    return out;
}

// §4.1 sums of mean-zero two-point variables; pairs mirrored so that W* <=cx W.
void run_two_point_cx(Context& c) {
    std::vector<DistributionSpec> parts;
    for (const auto& [a, b] : parse_pairs(c.str("pairs"))) parts.push_back(two_point(a, b));
    const DistributionSpec w = sum_of_independents(parts);
    const TestFunction g = make_test_function(c.str("g"), w.effective_range());

    BoundReport rep = bound_convex_order(w, g, c.opts);
    c.gate("convex", rep);
    c.truth("W* <=cx W and g'^2 convex hold on the grid", rep.hypotheses_hold(), "grid verdicts");
    c.truth("convex-order bound emitted", rep.upper.has_value(), "hypotheses hold");
    c.sandwich("convex", rep);
    if (rep.upper && rep.exact_variance)
        c.at_most("exact Var[g(W)] <= sigma^2 E[g'(W)^2]", *rep.exact_variance, *rep.upper, 1e-12, "exact");
    c.report(rep);

    // E[W phi(W)] <= sigma^2 E[phi'(W)] for convex phi'.
    std::vector<TestPhi> convex_battery;
    for (const char* t : {"x", "x^3/3", "exp(x)", "x*abs(x)/2"}) convex_battery.push_back(phi_from_text(t));
    const double s2 = w.variance();
    for (const auto& phi : convex_battery) {
        const double lhs = expect(w, [&](double x) { return x * phi.f(x); });
        const double rhs = s2 * expect(w, phi.df);
        c.at_most("E[W phi(W)] <= sigma^2 E[phi'(W)] for phi = " + phi.name, lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)),
                  "exact summation");
    }
    const auto rows = coupling_residual(convex_order_coupling(w), convex_battery, c.opts.n_mc, c.opts.seed,
                                        c.stream(kStreamCoupling));
    for (const auto& row : rows) {
        c.oracle("residual_mc[" + row.phi + "]", row.residual);
        c.truth("Monte-Carlo residual sign for phi = " + row.phi, row.sign_ok,
                "residual " + fmt(row.residual) + ", " + row.detail);
    }
}

// §4.2 geometric random sums are NWUE; branch (b) lower bound.
void run_geometric_random_sum(Context& c) {
    const double rho = c.num("rho");
    if (!(rho > 0.0 && rho < 1.0)) fail(Errc::invalid_argument, "rho must lie in (0, 1)");
    const DistributionSpec count = geometric_count(rho);
    const DistributionSpec x = parse_distribution(c.str("summand"));
    const DistributionSpec w = random_sum(count, x);
    const TestFunction g = make_test_function(c.str("g"), w.effective_range());

    const double en = rho / (1.0 - rho);
    const double vn = rho / ((1.0 - rho) * (1.0 - rho));
    const double ew = en * x.mean();
    const double vw = en * x.variance() + vn * x.mean() * x.mean();
    c.oracle("mean_formula", ew);
    c.oracle("variance_formula", vw);
    c.close("E[W] equals E[N] E[X]", w.mean(), ew, 1e-9);
    c.close("Var[W] equals E[N] Var[X] + Var[N] E[X]^2", w.variance(), vw, 1e-9);

    const double n_max = c.num("counting_n");
    const CountingVerdict cv = check_counting_condition(count, static_cast<std::size_t>(n_max));
    c.truth("counting condition holds for the geometric count", cv.holds,
            "max violation " + fmt(cv.max_violation) + " over n <= " + fmt(n_max));

    OrderOptions oo = c.opts.order;
    const auto [nbue, nwue] = check_nbue_nwue(w, oo);
    c.truth("W is NWUE on the grid", nwue.holds,
            nwue.verdict() + " on " + std::to_string(nwue.grid.size()) + " points, max violation " + fmt(nwue.max_violation));

    BoundReport rep = bound_equilibrium(w, g, EquilibriumBranch::b, c.opts);
    c.gate("equilibrium-b", rep);
    c.truth("branch (b) lower bound emitted", rep.lower.has_value(), "premise (ii)");
    c.sandwich("equilibrium-b", rep);
    if (rep.lower_diagnostic) {
        // Independent route: Monte Carlo for E[W g'(W)].
        const Expectation e = expect_mc(
            w, [&g](double t) { return t * g.deriv(t); }, c.opts.n_mc, c.opts.seed, c.stream(kStreamScenario));
        const double lambda = 1.0 / ew;
        const double den = lambda * lambda * vw;
        const double mc_lower = e.value * e.value / den;
        c.oracle("lower_mc", mc_lower);
        c.within_se("branch (b) lower bound matches its Monte-Carlo evaluation", *rep.lower_diagnostic, mc_lower,
                    2.0 * std::abs(e.value) * e.se / den);
    }
    c.report(rep);

    BoundReport ra = bound_equilibrium(w, g, EquilibriumBranch::a, c.opts);
    c.gate("equilibrium-a", ra);
    c.sandwich("equilibrium-a", ra);
    c.report(ra);
}

// §2 Example 2: smoothing Y by N(0, eps^2) noise.
void run_smoothing(Context& c) {
    const DistributionSpec y = parse_distribution(c.str("y"));
    const auto* atoms = y.atoms();
    const bool rademacher_law = atoms && atoms->size() == 2 && (*atoms)[0].value == -1.0 && (*atoms)[1].value == 1.0 &&
                                std::abs((*atoms)[0].prob - 0.5) < 1e-15;
    for (const auto& es : c.list("eps")) {
        double eps = 0.0;
        const auto res = std::from_chars(es.data(), es.data() + es.size(), eps);
        if (res.ec != std::errc() || res.ptr != es.data() + es.size() || !(eps > 0.0))
            fail(Errc::invalid_argument, "eps values must be positive numbers");
        const SmoothedSpec s = make_smoothed(y, eps);
        const SteinKernel k = smoothed_kernel(s);
        const std::string tag = "eps=" + es;
        const double et = expect(s.convolved, [&k](double v) { return k(v); });
        c.close(tag + ": E[tau_eps(Y+Z)] = Var[Y] + eps^2", et, y.variance() + eps * eps, 1e-6);
        if (rademacher_law) {
            const double z = 1.0 / eps;
            const double closed = eps * eps + eps * (2.0 * normal_cdf(z) - 1.0) / (2.0 * normal_pdf(z));
            c.oracle("tau0[" + es + "]", closed);
            c.close(tag + ": tau_eps(0) closed form", k(0.0), closed, 1e-6);
        }
        const TestFunction g = make_test_function(c.str("g"), s.convolved.effective_range());
        BoundOptions o = c.opts;
        BoundReport ri = bound_smoothed(s, g, SmoothedClaim::i, o);
        c.gate(tag + " claim (i)", ri);
        c.sandwich(tag + " claim (i)", ri);
        c.report(ri);
        BoundReport rii = bound_smoothed(s, g, SmoothedClaim::ii, o);
        c.gate(tag + " claim (ii)", rii);
        c.sandwich(tag + " claim (ii)", rii);
        c.report(rii);
    }
}

struct SweepCase {
    Pair pair;
    PairParams prior;
    DataSummary first;
    DataSummary second;
};

PairParams pp(double alpha, double beta) {
    PairParams q;
    q.alpha = alpha;
    q.beta = beta;
    return q;
}
PairParams pp_gauss(double mu, double delta, double sigma) {
    PairParams q;
    q.mu = mu;
    q.delta = delta;
    q.sigma = sigma;
    return q;
}
PairParams with_r(PairParams q, double r) {
    q.r = r;
    return q;
}
PairParams with_k(PairParams q, double k) {
    q.k = k;
    return q;
}

std::vector<SweepCase> sweep_cases() {
    return {
        {Pair::gaussian_mean, pp_gauss(0, 1, 1), {2, 0.5}, {2, 1.5}},
        {Pair::gaussian_mean, pp_gauss(1, 2, 0.5), {3, 0.2}, {1, -0.4}},
        {Pair::gaussian_mean, pp_gauss(-2, 0.5, 3), {0, 0}, {5, 1.1}},
        {Pair::gaussian_var, pp(3, 2), {2, 1.5}, {4, 2.5}},
        {Pair::gaussian_var, pp(1.5, 0.5), {10, 8}, {0, 0}},
        {Pair::gaussian_var, pp(4, 4), {3, 0.7}, {3, 1.9}},
        {Pair::binomial_beta, pp(1, 1), {6, 2}, {4, 1}},
        {Pair::binomial_beta, pp(2, 5), {20, 11}, {5, 5}},
        {Pair::binomial_beta, pp(0.5, 0.5), {0, 0}, {3, 0}},
        {Pair::negbinomial_beta, with_r(pp(1, 1), 3), {2, 4}, {3, 3}},
        {Pair::negbinomial_beta, with_r(pp(2, 3), 1), {1, 0}, {1, 7}},
        {Pair::negbinomial_beta, with_r(pp(5, 1), 2), {4, 10}, {0, 0}},
        {Pair::weibull_ig, with_k(pp(3, 2), 2), {2, 1.3}, {2, 0.9}},
        {Pair::weibull_ig, with_k(pp(2.5, 1), 0.5), {5, 6.2}, {1, 0.4}},
        {Pair::weibull_ig, with_k(pp(6, 3), 1), {0, 0}, {0, 0}},
        {Pair::gamma_gamma, with_k(pp(2, 1), 1.5), {3, 4.5}, {2, 1.5}},
        {Pair::gamma_gamma, with_k(pp(1, 2), 3), {1, 0.3}, {4, 7.7}},
        {Pair::gamma_gamma, with_k(pp(3, 0.5), 0.5), {0, 0}, {6, 9}},
        {Pair::laplace_ig, pp(3, 2), {2, 1.1}, {3, 2.2}},
        {Pair::laplace_ig, pp(5, 1), {4, 3}, {0, 0}},
        {Pair::laplace_ig, pp(2.5, 4), {1, 0.2}, {1, 0.5}},
        {Pair::poisson_gamma, pp(2, 1), {0, 0}, {0, 0}},
        {Pair::poisson_gamma, pp(1, 1), {3, 5}, {2, 4}},
        {Pair::poisson_gamma, pp(0.5, 2), {10, 31}, {5, 12}},
        {Pair::uniform_pareto, pp(3, 1), {3, 2}, {2, 1.5}},
        {Pair::uniform_pareto, pp(2, 5), {2, 3}, {4, 4.5}},
        {Pair::uniform_pareto, pp(1.5, 0.2), {1, 0.9}, {2, 1.7}},
    };
}

/// Posterior parameters written out independently of the bayes module.
std::vector<double> closed_form_update(const SweepCase& s, const DataSummary& d) {
    const PairParams& q = s.prior;
    const double n = d.n, x = d.stat;
    switch (s.pair) {
        case Pair::gaussian_mean: {
            const double s2 = q.sigma * q.sigma, d2 = q.delta * q.delta;
            return {(s2 * q.mu + n * d2 * x) / (n * d2 + s2), s2 * d2 / (n * d2 + s2)};
        }
        case Pair::gaussian_var: return {n / 2 + q.alpha, x / 2 + q.beta};
        case Pair::binomial_beta: return {x + q.alpha, n - x + q.beta};
        case Pair::negbinomial_beta: return {x + q.alpha, n * q.r + q.beta};
        case Pair::weibull_ig: return {n + q.alpha, x + q.beta};
        case Pair::gamma_gamma: return {n * q.k + q.alpha, x + q.beta};
        case Pair::laplace_ig: return {n + q.alpha, x + q.beta};
        case Pair::poisson_gamma: return {x + q.alpha, n + q.beta};
        case Pair::uniform_pareto: return {n + q.alpha, n > 0 ? std::max(x, q.beta) : q.beta};
    }
    return {};
}

void run_conjugate_sweep(Context& c) {
    const auto gs = c.list("g");
    const auto cases = sweep_cases();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const SweepCase& s = cases[i];
        const std::string tag = std::string(pair_name(s.pair)) + "#" + std::to_string(i % 3 + 1);
        const DataSummary pooled = pool(s.pair, s.first, s.second);
        const PosteriorModel m = update(s.pair, s.prior, pooled);
        const auto expected = closed_form_update(s, pooled);
        const auto& got = m.posterior.params();
        c.truth(tag + ": posterior parameters equal the closed-form update", got == expected,
                m.posterior.describe());

        const PosteriorModel seq = update(s.pair, as_prior(update(s.pair, s.prior, s.first)), s.second);
        const auto& sp = seq.posterior.params();
        bool same = sp.size() == got.size();
        for (std::size_t j = 0; same && j < sp.size(); ++j)
            same = std::abs(sp[j] - got[j]) <= 1e-12 * std::max(1.0, std::abs(got[j]));
        c.truth(tag + ": sequential update equals the pooled update", same, seq.posterior.describe());

        if (!m.kernel) {
            c.truth(tag + ": posterior kernel available", false, "infinite variance");
            continue;
        }
        const double et = expect(m.posterior, [&m](double t) { return (*m.kernel)(t); });
        c.close(tag + ": E[tau] = Var", et, m.posterior.variance(), 1e-8);

        for (const auto& text : gs) {
            const TestFunction g = make_test_function(text, m.posterior.effective_range());
            BoundOptions o = c.opts;
            o.stream_offset = c.opts.stream_offset + (static_cast<std::uint64_t>(i) << 24);
            BoundReport rep = posterior_bounds(m, g, o);
            for (const auto& h : rep.hypotheses)
                if (!h.gating && h.checked)
                    c.truth(tag + " g=" + text + ": " + h.name, h.holds, h.detail);
            c.gate(tag + " g=" + text, rep);
            c.sandwich(tag + " g=" + text, rep);
            c.report(std::move(rep));
        }
    }
}

const std::vector<Scenario>& catalog() {
    static const std::vector<Scenario> cat = {
        {"bernoulli-sum", {{"n", "30"}, {"p", "0.3"}, {"g", "sin(x)"}, {"mc", "1000000"}}, run_bernoulli_sum},
        {"permutation",
         {{"n", "8"}, {"array", "random"}, {"max_entry", "9"}, {"g", "x;sin(x)"}, {"mc", "1000000"}},
         run_permutation},
        {"two-point-cx", {{"pairs", "1:2;2:1;0.5:1.5;1.5:0.5;1:1"}, {"g", "x^3/3"}, {"mc", "1000000"}}, run_two_point_cx},
        {"geometric-random-sum",
         {{"rho", "0.5"}, {"summand", "exponential:1"}, {"g", "x"}, {"counting_n", "50"}, {"mc", "1000000"}},
         run_geometric_random_sum},
        {"smoothing", {{"y", "rademacher"}, {"eps", "0.25;0.5;1"}, {"g", "x"}, {"mc", "1000000"}}, run_smoothing},
        {"conjugate-sweep", {{"g", "x"}, {"mc", "200000"}}, run_conjugate_sweep},
    };
    return cat;
}

}  // namespace

const std::vector<std::string>& scenario_catalog() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& s : catalog()) v.push_back(s.id);
        return v;
    }();
    return ids;
}

ScenarioParams scenario_defaults(const std::string& id) {
    for (const auto& s : catalog())
        if (s.id == id) return s.defaults;
    fail(Errc::unknown_scenario, "unknown scenario '" + id + "'");
}

ScenarioResult run_scenario(const std::string& id, const ScenarioParams& params, std::uint64_t seed) {
    const auto& cat = catalog();
    const auto it = std::find_if(cat.begin(), cat.end(), [&](const Scenario& s) { return s.id == id; });
    if (it == cat.end()) fail(Errc::unknown_scenario, "unknown scenario '" + id + "'");

    ScenarioResult r;
    r.id = id;
    r.seed = seed;
    r.inputs = it->defaults;
    for (const auto& [k, v] : params) {
        if (!r.inputs.count(k)) fail(Errc::invalid_argument, "scenario " + id + " has no parameter '" + k + "'");
        r.inputs[k] = v;
    }
    const auto index = static_cast<std::uint64_t>(it - cat.begin());
    Context c(r, (index + 1) << 32);
    const double mc = c.num("mc");
    if (mc < 10000.0 || mc != std::floor(mc)) fail(Errc::invalid_argument, "mc must be an integer >= 10000");
    c.opts.n_mc = static_cast<std::size_t>(mc);
    c.opts.order.mc_samples = c.opts.n_mc;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        it->run(c);
    } catch (const Error& e) {
        if (e.is_input_error() && e.code() != Errc::zero_variance) throw;
        r.assertions.push_back({"pipeline completed", false, 0.0, 1.0, 0.0, e.what()});
    }
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace stein
