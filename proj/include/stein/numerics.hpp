#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace stein {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed real interval with possibly infinite endpoints.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    Interval() = default;
    Interval(double lo_, double hi_);  // throws invalid_argument unless lo < hi

    bool lo_infinite() const noexcept { return lo == -kInf; }
    bool hi_infinite() const noexcept { return hi == kInf; }
    bool finite() const noexcept { return !lo_infinite() && !hi_infinite(); }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    double clamp(double x) const noexcept { return x < lo ? lo : (x > hi ? hi : x); }
    double width() const noexcept { return hi - lo; }

    static Interval real_line() { return {}; }
};

struct QuadResult {
    double value = 0.0;
    double abs_error_estimate = 0.0;
    std::size_t evaluations = 0;
};

struct QuadOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-15;
    std::size_t max_evaluations = 1'000'000;
};

/// Default relative tolerances: kernel identities feed exact checks, bound
/// evaluation only has to beat its Monte-Carlo comparison.
inline constexpr double kKernelRelTol = 1e-9;
inline constexpr double kBoundRelTol = 1e-10;

using RealFn = std::function<double(double)>;

/// Adaptive Gauss-Kronrod (10/21) integration with global error control.
/// Infinite endpoints are mapped by a rational change of variables anchored at
/// the nearest finite breakpoint and scaled by `tail_scale`.
QuadResult integrate(const RealFn& f, Interval iv, double rel_tol = kKernelRelTol);
QuadResult integrate(const RealFn& f, Interval iv, const QuadOptions& opts, double tail_scale = 1.0);

/// Integrate over [breaks.front(), breaks.back()], splitting at every interior
/// breakpoint. Breakpoints must be nondecreasing; duplicates are dropped.
QuadResult integrate_pieces(const RealFn& f, std::span<const double> breaks, const QuadOptions& opts,
                            double tail_scale = 1.0);

/// Smallest x in `iv` with F(x) >= p, found by bracketing bisection. Infinite
/// endpoints are bracketed by geometric expansion.
double inverse_cdf(const RealFn& cdf, double p, Interval iv, double tol = 1e-13);

/// First-bracket root finder on a monotone function (used for quantiles of
/// piecewise cached tables).
double bisect(const RealFn& f, double a, double b, double tol, int max_iter = 200);

// Standard Gaussian helpers.
double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;
double normal_sf(double z) noexcept;
/// log P(N(0,1) > z), accurate far into the upper tail.
double normal_log_sf(double z) noexcept;
double normal_quantile(double p);

/// `count` Chebyshev-Lobatto points mapped onto [a, b], ascending.
std::vector<double> chebyshev_grid(double a, double b, std::size_t count);
std::vector<double> linspace(double a, double b, std::size_t count);

/// Deterministic random stream keyed by (seed, stream_id).
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform();
    double normal();
    double exponential();
    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

RandomStream rng_stream(std::uint64_t seed, std::uint64_t stream_id);

/// Runs fn(batch) for batch in [0, batches) on a pool of worker threads.
/// Each batch owns its own output slot, so results do not depend on the
/// number of workers.
void parallel_batches(std::size_t batches, const std::function<void(std::size_t)>& fn);

/// Fixed partition used by all Monte-Carlo estimators.
inline constexpr std::size_t kMonteCarloBatches = 64;

/// Streaming mean/variance accumulator (Welford), mergeable in a fixed order.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;

    void add(double x) noexcept;
    void merge(const Moments& other) noexcept;
    double variance() const noexcept { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    /// Standard error of the mean.
    double se_mean() const noexcept;
};

}  // namespace stein
