#pragma once

#include "stein/bounds.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stein {

enum class Pair {
    gaussian_mean,     // N(theta, sigma^2) data, N(mu, delta^2) prior
    gaussian_var,      // N(mu, theta) data, IG(alpha, beta) prior
    binomial_beta,     // Bin(n, theta) data, Beta(alpha, beta) prior
    negbinomial_beta,  // NB(r, theta) data, Beta(alpha, beta) prior
    weibull_ig,        // density k x^{k-1} / theta exp(-x^k / theta), IG prior
    gamma_gamma,       // Gam(k, theta) data with rate theta, Gam(alpha, beta) prior
    laplace_ig,        // Lap(mu, theta) data, IG prior
    poisson_gamma,     // Poi(theta) data, Gam(alpha, beta) prior
    uniform_pareto,    // U(0, theta) data, Par(alpha, beta) prior
};

inline constexpr Pair kAllPairs[] = {Pair::gaussian_mean, Pair::gaussian_var,  Pair::binomial_beta,
                                     Pair::negbinomial_beta, Pair::weibull_ig,  Pair::gamma_gamma,
                                     Pair::laplace_ig,    Pair::poisson_gamma, Pair::uniform_pareto};

std::string_view pair_name(Pair p) noexcept;
/// Accepts the names printed by pair_name; throws Errc::unknown_identifier.
Pair parse_pair(std::string_view name);
/// Name of the pair-specific statistic carried in DataSummary::stat.
std::string_view statistic_name(Pair p) noexcept;

/// Prior parameters plus the fixed likelihood parameters. Fields a pair does
/// not use are ignored.
struct PairParams {
    double alpha = 1.0;
    double beta = 1.0;
    double mu = 0.0;     // gaussian-mean prior mean; known mean for gaussian-var and laplace
    double delta = 1.0;  // gaussian-mean prior sd
    double sigma = 1.0;  // gaussian-mean known data sd
    double r = 1.0;      // negative-binomial number of successes
    double k = 1.0;      // weibull and gamma shape
};

/// n and the sufficient statistic: xbar, sum (x - mu)^2, successes, sum x,
/// sum x^k, sum x, sum |x - mu|, sum x, or max x, by pair. For the binomial
/// pair n is the number of trials.
struct DataSummary {
    double n = 0.0;
    double stat = 0.0;
};

/// Sufficient summary of raw observations (Bernoulli outcomes for the
/// binomial pair).
DataSummary summarize(Pair pair, const PairParams& params, std::span<const double> data);

/// Summary of the pooled data behind two summaries.
DataSummary pool(Pair pair, const DataSummary& a, const DataSummary& b);

struct PosteriorModel {
    Pair pair = Pair::binomial_beta;
    PairParams prior;
    DataSummary data;
    DistributionSpec posterior;
    /// Absent when the posterior has no finite variance (shape <= 1 for IG and Pareto).
    std::optional<SteinKernel> kernel;
    bool flat_prior = false;
    std::vector<std::string> notes;
};

/// Conjugate update. Throws Errc::invalid_summary for impossible data and
/// Errc::invalid_argument for bad prior parameters.
PosteriorModel update(Pair pair, const PairParams& prior, const DataSummary& data);

/// The posterior with a flat prior on theta, for pairs where it is proper
/// given the data; throws Errc::unavailable otherwise.
PosteriorModel flat_prior_posterior(Pair pair, const PairParams& params, const DataSummary& data);

/// Prior parameters equal to the posterior of `m`, for sequential updates.
PairParams as_prior(const PosteriorModel& m);

/// The closed-form lower/upper pair for the model, by quadrature against the
/// posterior, with the Cacoullos bounds attached as a cross-check.
BoundReport posterior_bounds(const PosteriorModel& m, const TestFunction& g, const BoundOptions& opts = {});

}  // namespace stein
