// steinvb: Stein-kernel variance bounds from the command line.
//
// Exit codes: 0 ok, 2 bad input, 3 requested bound withheld by a failed
// hypothesis, 4 numerical failure, 5 scenario assertion failure.

#include "stein/bayes.hpp"
#include "stein/bounds.hpp"
#include "stein/error.hpp"
#include "stein/report.hpp"
#include "stein/verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace stein;
using nlohmann::json;

constexpr int kExitInput = 2;
constexpr int kExitWithheld = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitAssertion = 5;

struct Common {
    std::uint64_t seed = 42;
    std::size_t mc = 1'000'000;
    std::string format = "json";
    std::string out;
    double rel_tol = kBoundRelTol;
    std::size_t grid = 256;
    bool quiet = false;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("STEIN_BOUNDS_SEED")) {
        try {
            std::size_t pos = 0;
            const std::string s(env);
            const unsigned long long v = std::stoull(s, &pos);
            if (pos == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw Error(Errc::invalid_argument, std::string("STEIN_BOUNDS_SEED='") + env + "' is not an unsigned integer");
    }
    return 42;
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "RNG seed (default: $STEIN_BOUNDS_SEED or 42)");
    app->add_option("--mc", c.mc, "Monte-Carlo sample size")->check(CLI::Range(std::size_t{10000}, std::size_t{1} << 34));
    app->add_option("--format", c.format, "report format written by --out")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out", c.out, "report path; '-' writes the report to stdout instead of the summary");
    app->add_option("--rel-tol", c.rel_tol, "relative tolerance of quadrature")->check(CLI::PositiveNumber);
    app->add_option("--grid", c.grid, "grid size of hypothesis checks")->check(CLI::Range(8, 1 << 20));
    app->add_flag("--quiet", c.quiet, "suppress the stdout summary");
}

BoundOptions bound_options(const Common& c) {
    BoundOptions o;
    o.seed = c.seed;
    o.n_mc = c.mc;
    o.rel_tol = c.rel_tol;
    o.grid_size = c.grid;
    o.order.grid_size = c.grid;
    o.order.seed = c.seed;
    o.order.mc_samples = c.mc;
    return o;
}

/// Report payload to --out; summary to stdout unless quiet or --out is '-'.
void emit(const Common& c, const json& report, const std::vector<BoundReport>& bounds, const std::string& summary) {
    std::string payload;
    if (c.format == "csv") {
        if (bounds.empty()) throw Error(Errc::invalid_argument, "this command has no CSV form; use --format json");
        payload = to_csv(bounds);
    } else {
        payload = report.dump(2) + "\n";
    }
    if (c.out == "-") {
        std::cout << payload;
        return;
    }
    if (!c.out.empty()) {
        std::ofstream f(c.out, std::ios::binary);
        if (!f) throw Error(Errc::invalid_argument, "cannot open '" + c.out + "' for writing");
        f << payload;
    }
    if (!c.quiet) std::cout << summary;
}

TestFunction resolve_g(const std::string& text, const std::string& named, Interval effective) {
    if (!text.empty() && !named.empty()) throw Error(Errc::invalid_argument, "give --g or --g-named, not both");
    if (!named.empty()) return make_test_function(builtin_expression(named), effective);
    if (text.empty()) throw Error(Errc::invalid_argument, "a test function is required (--g or --g-named)");
    return make_test_function(text, effective);
}

SteinKernel make_kernel(const DistributionSpec& d, const std::string& route) {
    if (route == "pearson") return pearson_kernel(d);
    if (route == "integral") return integral_kernel(d);
    if (route == "auto") return pearson_coefficients(d) ? pearson_kernel(d) : integral_kernel(d);
    throw Error(Errc::invalid_argument, "route must be pearson, integral or auto here");
}

// ------------------------------------------------------------------- kernel

struct KernelArgs {
    Common common;
    std::string dist;
    std::string route = "auto";
    std::vector<double> xs;
    std::size_t points = 0;
    double eps = 0.0;
};

int cmd_kernel(const KernelArgs& a) {
    const DistributionSpec d = parse_distribution(a.dist);
    std::optional<SteinKernel> k;
    double tol = 1e-8;
    if (a.route == "smoothed") {
        if (!(a.eps > 0.0)) throw Error(Errc::invalid_argument, "--route smoothed needs --eps > 0");
        k = smoothed_kernel(make_smoothed(d, a.eps));
        tol = 1e-6;
    } else {
        k = make_kernel(d, a.route);
        if (k->provenance() != KernelRoute::pearson) tol = 1e-6;
    }
    const DistributionSpec& law = k->law();
    std::vector<double> xs = a.xs;
    if (a.points > 0) {
        const Interval r = law.effective_range();
        for (std::size_t i = 0; i < a.points; ++i)
            xs.push_back(r.lo + (r.hi - r.lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(a.points));
    }
    if (xs.empty()) throw Error(Errc::invalid_argument, "give evaluation points with --x or --points");

    json table = json::array();
    std::ostringstream sum;
    sum << "Stein kernel of " << law.describe() << " (" << route_name(k->provenance()) << ")\n";
    for (double x : xs) {
        const KernelValue v = k->evaluate(x);
        table.push_back({{"x", json_number(x)}, {"tau", json_number(v.value)}, {"flagged", v.flagged}});
        sum << "  tau(" << x << ") = " << v.value << (v.flagged ? "  (flagged)" : "") << '\n';
    }
    const double et = expect(law, [&k](double x) { return (*k)(x); }, a.common.rel_tol);
    const double var = law.variance();
    const bool holds = std::abs(et - var) <= tol * std::max(1.0, std::abs(var));
    sum << "  E[tau(W)] = " << et << ", Var[W] = " << var << (holds ? "  ok" : "  MISMATCH") << '\n';
    json body = {{"distribution", law.describe()},
                 {"route", std::string(route_name(k->provenance()))},
                 {"kernel", table},
                 {"variance_check",
                  {{"expected_tau", json_number(et)}, {"variance", json_number(var)}, {"tolerance", tol}, {"holds", holds}}}};
    if (const auto& c = k->pearson_coeffs())
        body["pearson"] = {{"d1", c->d1}, {"d2", c->d2}, {"d3", c->d3}, {"mu", c->mu}};
    emit(a.common, report_envelope("kernel", a.common.seed, body), {}, sum.str());
    return holds ? 0 : kExitNumeric;
}

// -------------------------------------------------------------------- bound

struct BoundArgs {
    Common common;
    std::string dist;
    std::string g;
    std::string g_named;
    std::string method;
    std::string route = "auto";
    std::string coupling = "kernel";
    std::optional<double> gap;
    double eps = 0.0;
    bool no_mc = false;
};

/// Which sides a method promises: 1 lower, 2 upper, 3 both.
int promised_sides(const std::string& method, const SteinCoupling* c) {
    if (method == "cacoullos" || method == "zero-bias") return 3;
    if (method == "equilibrium-b" || method == "smoothed-ii") return 1;
    if (method == "generic" && c) {
        if (c->direction == SteinCoupling::Direction::upper_only) return 2;
        if (c->direction == SteinCoupling::Direction::lower_only) return 1;
        return 3;
    }
    return 2;
}

int cmd_bound(const BoundArgs& a) {
    BoundOptions o = bound_options(a.common);
    o.with_mc_variance = !a.no_mc;
    const DistributionSpec d = parse_distribution(a.dist);
    std::optional<SteinCoupling> coupling;
    BoundReport rep;
    const std::string& m = a.method;

    if (m == "smoothed-i" || m == "smoothed-ii") {
        if (!(a.eps > 0.0)) throw Error(Errc::invalid_argument, "smoothed bounds need --eps > 0");
        const SmoothedSpec s = make_smoothed(d, a.eps);
        const TestFunction g = resolve_g(a.g, a.g_named, s.convolved.effective_range());
        rep = bound_smoothed(s, g, m == "smoothed-i" ? SmoothedClaim::i : SmoothedClaim::ii, o);
    } else {
        const TestFunction g = resolve_g(a.g, a.g_named, d.effective_range());
        if (m == "cacoullos") {
            rep = bound_cacoullos(d, make_kernel(d, a.route), g, o);
        } else if (m == "zero-bias") {
            rep = bound_zero_bias(d, g, o);
        } else if (m == "zero-bias-remainder") {
            rep = bound_zero_bias_remainder(d, g, a.gap, o);
        } else if (m == "convex") {
            rep = bound_convex_order(d, g, o);
        } else if (m == "equilibrium-a" || m == "equilibrium-b") {
            rep = bound_equilibrium(d, g, m == "equilibrium-a" ? EquilibriumBranch::a : EquilibriumBranch::b, o);
        } else if (m == "generic") {
            if (a.coupling == "kernel")
                coupling = kernel_coupling(make_kernel(d, a.route));
            else if (a.coupling == "zero-bias")
                coupling = zero_bias_coupling(zero_bias(d));
            else
                coupling = convex_order_coupling(d);
            rep = bound_generic(*coupling, g, o);
            rep.distribution = d.describe();
        } else {
            throw Error(Errc::invalid_argument, "unknown method '" + m + "'");
        }
    }

    const int sides = promised_sides(m, coupling ? &*coupling : nullptr);
    const bool missing = ((sides & 1) && !rep.lower) || ((sides & 2) && !rep.upper);
    json body = {{"reports", json::array({to_json(rep)})}};
    emit(a.common, report_envelope("bound", a.common.seed, body), {rep}, text_summary(rep));
    return missing ? kExitWithheld : 0;
}

// ---------------------------------------------------------------- posterior

struct PosteriorArgs {
    Common common;
    std::string pair;
    PairParams params;
    std::optional<double> n;
    std::map<std::string, std::optional<double>> stats;
    std::vector<double> data;
    std::string g;
    std::string g_named;
    bool flat = false;
};

int cmd_posterior(PosteriorArgs& a) {
    const Pair pair = parse_pair(a.pair);
    const std::string want(statistic_name(pair));
    DataSummary s;
    std::optional<double> stat;
    for (const auto& [name, v] : a.stats) {
        if (!v) continue;
        const bool matches = name == want || name == "stat" || (name == "x" && want == "successes");
        if (!matches)
            throw Error(Errc::invalid_argument, "--" + name + " does not apply to " + a.pair + " (its statistic is --" + want + ")");
        if (stat) throw Error(Errc::invalid_argument, "the statistic was given twice");
        stat = v;
    }
    if (!a.data.empty()) {
        if (stat || a.n) throw Error(Errc::invalid_argument, "give --data or a summary (--n and --" + want + "), not both");
        s = summarize(pair, a.params, a.data);
    } else {
        if (!a.n) throw Error(Errc::invalid_argument, "--n is required with a data summary");
        if (!stat && *a.n != 0.0) throw Error(Errc::invalid_argument, "--" + want + " is required when n > 0");
        s.n = *a.n;
        s.stat = stat.value_or(0.0);
    }
    const PosteriorModel model = a.flat ? flat_prior_posterior(pair, a.params, s) : update(pair, a.params, s);
    json body = {{"posterior", to_json(model)}};
    std::ostringstream sum;
    sum << "posterior " << model.posterior.describe() << "  (mean " << model.posterior.mean() << ", variance "
        << model.posterior.variance() << ")\n";
    std::vector<BoundReport> reps;
    int code = 0;
    if (!a.g.empty() || !a.g_named.empty()) {
        const TestFunction g = resolve_g(a.g, a.g_named, model.posterior.effective_range());
        const BoundReport rep = posterior_bounds(model, g, bound_options(a.common));
        reps.push_back(rep);
        body["reports"] = json::array({to_json(rep)});
        sum << text_summary(rep);
        if (!rep.lower || !rep.upper) code = kExitWithheld;
    } else {
        for (const auto& n : model.notes) sum << "  note: " << n << '\n';
    }
    emit(a.common, report_envelope("posterior", a.common.seed, body), reps, sum.str());
    return code;
}

// ------------------------------------------------------------------- verify

struct VerifyArgs {
    Common common;
    std::string id;
    bool mc_given = false;
};

ScenarioParams scenario_params(const std::vector<std::string>& extras) {
    ScenarioParams p;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string key = extras[i];
        if (key.rfind("--", 0) != 0 || key.size() < 3)
            throw Error(Errc::invalid_argument, "unexpected argument '" + key + "'");
        key = key.substr(2);
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw Error(Errc::invalid_argument, "--" + key + " needs a value");
            value = extras[++i];
        }
        p[key] = value;
    }
    return p;
}

int cmd_verify(const VerifyArgs& a, const std::vector<std::string>& extras) {
    ScenarioParams params = scenario_params(extras);
    std::vector<std::string> ids;
    if (a.id == "all") {
        if (!params.empty()) throw Error(Errc::invalid_argument, "scenario parameters need a single scenario id");
        ids = scenario_catalog();
    } else {
        scenario_defaults(a.id);  // unknown ids fail here
        ids = {a.id};
    }
    // --mc given explicitly feeds the scenario's own sample size.
    if (a.mc_given && !params.count("mc")) params["mc"] = std::to_string(a.common.mc);

    std::vector<std::future<ScenarioResult>> jobs;
    for (const auto& id : ids) {
        ScenarioParams p = params;
        if (p.count("mc") && !scenario_defaults(id).count("mc")) p.erase("mc");
        jobs.push_back(std::async(std::launch::async, [id, p, seed = a.common.seed] { return run_scenario(id, p, seed); }));
    }
    std::vector<ScenarioResult> results;
    for (auto& j : jobs) results.push_back(j.get());

    json scen = json::array();
    std::vector<BoundReport> reps;
    std::ostringstream sum;
    bool all_pass = true;
    for (const auto& r : results) {
        scen.push_back(to_json(r));
        reps.insert(reps.end(), r.reports.begin(), r.reports.end());
        all_pass = all_pass && r.passed();
        std::size_t ok = 0;
        for (const auto& as : r.assertions) ok += as.pass ? 1 : 0;
        sum << (r.passed() ? "PASS " : "FAIL ") << r.id << "  " << ok << "/" << r.assertions.size() << " assertions  "
            << r.runtime_seconds << " s\n";
        for (const auto& as : r.assertions)
            if (!as.pass)
                sum << "  failed: " << as.name << "  observed " << as.observed << ", expected " << as.expected
                    << ", tolerance " << as.tolerance << "  (" << as.detail << ")\n";
    }
    json body = {{"scenarios", scen}, {"passed", all_pass}};
    emit(a.common, report_envelope("verify", a.common.seed, body), reps, sum.str());
    return all_pass ? 0 : kExitAssertion;
}

int exit_code(const Error& e) { return e.is_input_error() ? kExitInput : kExitNumeric; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variance bounds from Stein kernels, zero-bias and equilibrium couplings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("steinvb, report schema ") + kReportSchemaVersion);

    std::uint64_t seed0 = 42;
    try {
        seed0 = default_seed();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }

    KernelArgs ka;
    BoundArgs ba;
    PosteriorArgs pa;
    VerifyArgs va;
    ka.common.seed = ba.common.seed = pa.common.seed = va.common.seed = seed0;

    auto* kc = app.add_subcommand("kernel", "tabulate a Stein kernel");
    add_common(kc, ka.common);
    kc->add_option("--dist", ka.dist, "distribution, e.g. beta:4,8")->required();
    kc->add_option("--route", ka.route)->check(CLI::IsMember({"auto", "pearson", "integral", "smoothed"}));
    kc->add_option("--x", ka.xs, "evaluation points, comma separated")->delimiter(',');
    kc->add_option("--points", ka.points, "evenly spaced points over the effective range");
    kc->add_option("--eps", ka.eps, "noise scale for --route smoothed");

    auto* bc = app.add_subcommand("bound", "variance bounds for Var[g(W)]");
    add_common(bc, ba.common);
    bc->add_option("--dist", ba.dist, "distribution of W (of Y for smoothed methods)")->required();
    bc->add_option("--g", ba.g, "test function expression in x");
    bc->add_option("--g-named", ba.g_named, "builtin test function")->check(CLI::IsMember({"identity", "square", "sin", "cosh"}));
    bc->add_option("--method", ba.method)
        ->required()
        ->check(CLI::IsMember({"cacoullos", "zero-bias", "zero-bias-remainder", "convex", "equilibrium-a",
                               "equilibrium-b", "smoothed-i", "smoothed-ii", "generic"}));
    bc->add_option("--route", ba.route, "kernel route for cacoullos/generic")
        ->check(CLI::IsMember({"auto", "pearson", "integral"}));
    bc->add_option("--coupling", ba.coupling, "coupling for --method generic")
        ->check(CLI::IsMember({"kernel", "zero-bias", "convex"}));
    bc->add_option("--gap", ba.gap, "E|W* - W| for zero-bias-remainder")->check(CLI::NonNegativeNumber);
    bc->add_option("--eps", ba.eps, "noise scale for smoothed methods");
    bc->add_flag("--no-mc", ba.no_mc, "skip the Monte-Carlo variance oracle");

    auto* pc = app.add_subcommand("posterior", "conjugate update with posterior variance bounds");
    add_common(pc, pa.common);
    pc->add_option("--pair", pa.pair, "likelihood-prior pair, e.g. binomial-beta")->required()->check([](const std::string& s) {
        try {
            parse_pair(s);
            return std::string();
        } catch (const Error& e) {
            return std::string(e.what());
        }
    });
    pc->add_option("--alpha", pa.params.alpha, "prior shape");
    pc->add_option("--beta", pa.params.beta, "prior second parameter");
    pc->add_option("--mu", pa.params.mu, "prior mean (gaussian-mean); known location (gaussian-var, laplace-ig)");
    pc->add_option("--delta", pa.params.delta, "prior sd for gaussian-mean");
    pc->add_option("--sigma", pa.params.sigma, "known data sd for gaussian-mean");
    pc->add_option("--r", pa.params.r, "negative-binomial successes");
    pc->add_option("--k", pa.params.k, "known shape for weibull-ig and gamma-gamma");
    pc->add_option("--n", pa.n, "number of observations (trials for binomial-beta)");
    for (const char* name : {"xbar", "sum-sq", "successes", "x", "sum", "sum-pow", "sum-abs", "max", "stat"})
        pc->add_option(std::string("--") + name, pa.stats[name], "sufficient statistic (must match the pair)");
    pc->add_option("--data", pa.data, "raw observations, comma separated")->delimiter(',');
    pc->add_option("--g", pa.g, "test function expression in theta (written x)");
    pc->add_option("--g-named", pa.g_named, "builtin test function")
        ->check(CLI::IsMember({"identity", "square", "sin", "cosh"}));
    pc->add_flag("--flat", pa.flat, "flat prior on theta");

    auto* vc = app.add_subcommand("verify", "run scenario suites; extra --key value pairs set scenario parameters");
    add_common(vc, va.common);
    vc->add_option("id", va.id, "scenario id or 'all'")->required();
    vc->allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (*kc) return cmd_kernel(ka);
        if (*bc) return cmd_bound(ba);
        if (*pc) return cmd_posterior(pa);
        if (*vc) {
            va.mc_given = vc->get_option("--mc")->count() > 0;
            return cmd_verify(va, vc->remaining());
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitInput;
}
