#pragma once

#include "stein/bayes.hpp"
#include "stein/bounds.hpp"
#include "stein/montecarlo.hpp"

#include <map>
#include <string>
#include <vector>

namespace stein {

/// {x, x^2, x^3 clipped to `clip`, sin, exp(-x^2), log(1 + x^2)}.
std::vector<TestPhi> phi_battery(Interval clip);

struct ResidualRow {
    std::string phi;
    double lhs = 0.0;       // E[gamma(W) phi(W)]
    double rhs = 0.0;       // E[T1 phi'(T2)]
    double residual = 0.0;  // lhs - rhs
    double se = 0.0;        // zero on deterministic routes
    bool applicable = true; // false when a moment needed by the identity is infinite
    bool sign_ok = true;
    std::string detail;
};

/// Monte-Carlo residual of E[gamma(W) phi(W)] = E[T1 phi'(T2)] from paired
/// draws; sign_ok follows the coupling direction within 4 SE.
std::vector<ResidualRow> coupling_residual(const SteinCoupling& c, const std::vector<TestPhi>& battery, std::size_t n,
                                           std::uint64_t seed, std::uint64_t stream_base = kStreamCoupling);

/// Cov[W, phi(W)] against E[tau(W) phi'(W)] by quadrature or exact sums.
/// Pairs whose moments are infinite under the law are marked not applicable.
std::vector<ResidualRow> kernel_residual(const SteinKernel& k, const std::vector<TestPhi>& battery,
                                         double rel_tol = kBoundRelTol);

/// E[W phi(W)] against sigma^2 E[phi'(W*)] by quadrature or exact sums.
std::vector<ResidualRow> zero_bias_residual(const ZeroBiasSpec& zb, const std::vector<TestPhi>& battery,
                                            double rel_tol = kBoundRelTol);

struct Assertion {
    std::string name;
    bool pass = false;
    double observed = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

using ScenarioParams = std::map<std::string, std::string>;

struct ScenarioResult {
    std::string id;
    ScenarioParams inputs;  // effective parameters, defaults filled in
    std::uint64_t seed = 0;
    std::vector<BoundReport> reports;
    std::map<std::string, double> oracles;
    std::vector<Assertion> assertions;
    double runtime_seconds = 0.0;

    bool passed() const;
};

/// Catalog ids in run order.
const std::vector<std::string>& scenario_catalog();

/// Parameter names and defaults of one scenario; throws Errc::unknown_scenario.
ScenarioParams scenario_defaults(const std::string& id);

/// construct -> check hypotheses -> bound -> oracle -> assert. Unknown ids
/// throw Errc::unknown_scenario; unknown parameter names Errc::invalid_argument.
ScenarioResult run_scenario(const std::string& id, const ScenarioParams& params, std::uint64_t seed);

/// Exact law of the permutation statistic by enumerating all n! permutations
/// (n <= 10), standardized when requested.
DistributionSpec enumerate_permutation_statistic(const SquareArray& a, bool standardized);

}  // namespace stein
