#pragma once

#include "stein/numerics.hpp"

#include <cstdint>
#include <functional>

namespace stein {

/// Stream-id blocks so that independent estimators never share draws.
inline constexpr std::uint64_t kStreamOracle = 0;
inline constexpr std::uint64_t kStreamBound = 1u << 20;
inline constexpr std::uint64_t kStreamOrder = 2u << 20;
inline constexpr std::uint64_t kStreamCoupling = 3u << 20;
inline constexpr std::uint64_t kStreamScenario = 4u << 20;

struct McVariance {
    double estimate = 0.0;
    double ci_halfwidth = 0.0;  // 99% normal-theory halfwidth
    double se = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

using Sampler = std::function<double(RandomStream&)>;

/// Unbiased sample variance of g(X) with X drawn by `sampler` over
/// kMonteCarloBatches streams; the CI uses the fourth central moment.
McVariance mc_variance(const RealFn& g, const Sampler& sampler, std::size_t n, std::uint64_t seed,
                       std::uint64_t stream_base = kStreamOracle);

/// Mean of f over the same batch layout, with its standard error.
struct McMean {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

McMean mc_mean(const std::function<double(RandomStream&)>& draw, std::size_t n, std::uint64_t seed,
               std::uint64_t stream_base);

}  // namespace stein
