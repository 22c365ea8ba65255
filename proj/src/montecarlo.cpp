#include "stein/montecarlo.hpp"

#include "stein/error.hpp"

#include <cmath>
#include <vector>

namespace stein {

namespace {

constexpr double kZ99 = 2.5758293035489004;

Moments batched(const std::function<double(RandomStream&)>& draw, std::size_t n, std::uint64_t seed,
                std::uint64_t stream_base) {
    std::vector<Moments> parts(kMonteCarloBatches);
    parallel_batches(kMonteCarloBatches, [&](std::size_t b) {
        const std::size_t count = n / kMonteCarloBatches + (b < n % kMonteCarloBatches ? 1 : 0);
        RandomStream rng(seed, stream_base + b);
        Moments m;
        for (std::size_t i = 0; i < count; ++i) {
            const double v = draw(rng);
            if (!std::isfinite(v)) fail(Errc::non_finite, "non-finite Monte-Carlo sample");
            m.add(v);
        }
        parts[b] = m;
    });
    Moments all;
    for (const auto& m : parts) all.merge(m);
    return all;
}

}  // namespace

McVariance mc_variance(const RealFn& g, const Sampler& sampler, std::size_t n, std::uint64_t seed,
                       std::uint64_t stream_base) {
    if (n < 10'000) fail(Errc::invalid_argument, "mc_variance needs n >= 10000");
    const Moments m = batched([&](RandomStream& rng) { return g(sampler(rng)); }, n, seed, stream_base);
    const double nn = static_cast<double>(m.n);
    const double s2 = m.variance();
    const double mu4 = m.m4 / nn;
    // asymptotic variance of s^2: (mu4 - sigma^4 (n - 3) / (n - 1)) / n
    const double v = std::max(0.0, (mu4 - s2 * s2 * (nn - 3.0) / (nn - 1.0)) / nn);
    McVariance out;
    out.estimate = s2;
    out.se = std::sqrt(v);
    out.ci_halfwidth = kZ99 * out.se;
    out.n = m.n;
    out.seed = seed;
    return out;
}

McMean mc_mean(const std::function<double(RandomStream&)>& draw, std::size_t n, std::uint64_t seed,
               std::uint64_t stream_base) {
    if (n < 2) fail(Errc::invalid_argument, "Monte-Carlo mean needs at least 2 draws");
    const Moments m = batched(draw, n, seed, stream_base);
    return {m.mean, m.se_mean(), m.n};
}

}  // namespace stein
