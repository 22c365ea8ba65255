#include "stein/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace stein {

using nlohmann::json;

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace {

json opt(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

std::string num(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

json to_json(const HypothesisCheck& h) {
    return {{"name", h.name},       {"holds", h.holds}, {"checked", h.checked},
            {"gating", h.gating},   {"scope", h.scope}, {"detail", h.detail},
            {"max_violation", json_number(h.max_violation)}};
}

json to_json(const McVariance& m) {
    return {{"estimate", json_number(m.estimate)},
            {"ci_halfwidth_99", json_number(m.ci_halfwidth)},
            {"se", json_number(m.se)},
            {"n", m.n},
            {"seed", m.seed}};
}

json to_json(const BoundReport& r) {
    json hyp = json::array();
    for (const auto& h : r.hypotheses) hyp.push_back(to_json(h));
    return {{"method", r.method},
            {"distribution", r.distribution},
            {"g", r.g},
            {"lower", opt(r.lower)},
            {"upper", opt(r.upper)},
            {"lower_diagnostic", opt(r.lower_diagnostic)},
            {"upper_diagnostic", opt(r.upper_diagnostic)},
            {"lower_se", json_number(r.lower_se)},
            {"upper_se", json_number(r.upper_se)},
            {"route", r.route},
            {"mc", r.mc ? to_json(*r.mc) : json(nullptr)},
            {"exact_variance", opt(r.exact_variance)},
            {"hypotheses", hyp},
            {"hypotheses_hold", r.hypotheses_hold()},
            {"withheld", r.withheld()},
            {"remainder", opt(r.remainder)},
            {"sup_g1g2", opt(r.sup_g1g2)},
            {"gap", opt(r.gap)},
            {"degenerate", r.degenerate},
            {"notes", r.notes},
            {"seed", r.seed},
            {"n_mc", r.n_mc},
            {"rel_tol", json_number(r.rel_tol)},
            {"order_tol", json_number(r.order_tol)},
            {"grid", r.grid}};
}

json to_json(const Assertion& a) {
    return {{"name", a.name},
            {"pass", a.pass},
            {"observed", json_number(a.observed)},
            {"expected", json_number(a.expected)},
            {"tolerance", json_number(a.tolerance)},
            {"detail", a.detail}};
}

json to_json(const ScenarioResult& s) {
    json as = json::array();
    for (const auto& a : s.assertions) as.push_back(to_json(a));
    json reps = json::array();
    for (const auto& r : s.reports) reps.push_back(to_json(r));
    json oracles = json::object();
    for (const auto& [k, v] : s.oracles) oracles[k] = json_number(v);
    return {{"id", s.id},   {"inputs", s.inputs},   {"seed", s.seed}, {"passed", s.passed()},
            {"assertions", as}, {"oracles", oracles}, {"reports", reps}};
}

json to_json(const PosteriorModel& m) {
    const PairParams& p = m.prior;
    json prior = {{"alpha", p.alpha}, {"beta", p.beta}, {"mu", p.mu}, {"delta", p.delta},
                  {"sigma", p.sigma}, {"r", p.r},       {"k", p.k}};
    json params = json::array();
    for (double v : m.posterior.params()) params.push_back(json_number(v));
    return {{"pair", std::string(pair_name(m.pair))},
            {"prior", prior},
            {"flat_prior", m.flat_prior},
            {"data", {{"n", m.data.n}, {"statistic", std::string(statistic_name(m.pair))}, {"value", m.data.stat}}},
            {"posterior", m.posterior.describe()},
            {"posterior_params", params},
            {"posterior_mean", json_number(m.posterior.mean())},
            {"posterior_variance", json_number(m.posterior.variance())},
            {"kernel", m.kernel ? std::string(route_name(m.kernel->provenance())) : std::string("none")},
            {"notes", m.notes}};
}

json report_envelope(const std::string& command, std::uint64_t seed, const json& body) {
    json out = {{"schema_version", kReportSchemaVersion}, {"tool", "steinvb"}, {"command", command}, {"seed", seed}};
    for (const auto& [k, v] : body.items()) out[k] = v;
    return out;
}

std::string csv_header() { return "method,lower,upper,mc_var,ci,hypotheses,remainder,seed\n"; }

std::string csv_row(const BoundReport& r) {
    std::string hyp;
    for (const auto& h : r.hypotheses) {
        if (!hyp.empty()) hyp += ';';
        hyp += h.name + "=" + (!h.checked ? "unchecked" : (h.holds ? "holds" : "fails"));
    }
    std::ostringstream os;
    os << csv_quote(r.method) << ',' << opt_num(r.lower) << ',' << opt_num(r.upper) << ','
       << (r.mc ? num(r.mc->estimate) : "") << ',' << (r.mc ? num(r.mc->ci_halfwidth) : "") << ',' << csv_quote(hyp)
       << ',' << opt_num(r.remainder) << ',' << r.seed << '\n';
    return os.str();
}

std::string to_csv(const std::vector<BoundReport>& reports) {
    std::string out = csv_header();
    for (const auto& r : reports) out += csv_row(r);
    return out;
}

std::string text_summary(const BoundReport& r) {
    std::ostringstream os;
    os << r.method << "  " << r.distribution << "  g(x) = " << r.g << '\n';
    auto side = [&](const char* name, const std::optional<double>& v, const std::optional<double>& diag) {
        os << "  " << name << ": ";
        if (v)
            os << num(*v);
        else if (diag)
            os << "withheld (computed " << num(*diag) << ")";
        else
            os << "-";
        os << '\n';
    };
    side("lower", r.lower, r.lower_diagnostic);
    side("upper", r.upper, r.upper_diagnostic);
    if (r.exact_variance) os << "  Var[g(W)] = " << num(*r.exact_variance) << '\n';
    if (r.mc) os << "  MC Var[g(W)] = " << num(r.mc->estimate) << " +/- " << num(r.mc->ci_halfwidth) << " (99%, n = " << r.mc->n << ")\n";
    if (r.remainder) os << "  remainder = " << num(*r.remainder) << '\n';
    for (const auto& h : r.hypotheses)
        os << "  [" << (!h.checked ? "?" : (h.holds ? "ok" : "FAIL")) << "] " << h.name
           << (h.detail.empty() ? "" : "  (" + h.detail + ")") << '\n';
    for (const auto& n : r.notes) os << "  note: " << n << '\n';
    return os.str();
}

}  // namespace stein
