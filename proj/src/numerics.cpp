#include "stein/numerics.hpp"

#include "stein/error.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <mutex>
#include <queue>
#include <sstream>
#include <thread>

namespace stein {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::parse_error: return "syntax-error";
        case Errc::unknown_identifier: return "unknown-identifier";
        case Errc::unsupported_family: return "unsupported-family";
        case Errc::budget_exceeded: return "budget-exceeded";
        case Errc::non_finite: return "non-finite-evaluation";
        case Errc::bracket_not_found: return "bracket-not-found";
        case Errc::zero_variance: return "zero-variance";
        case Errc::mean_mismatch: return "mean-mismatch";
        case Errc::negative_support: return "negative-support";
        case Errc::incompatible_direction: return "incompatible-direction";
        case Errc::missing_gap: return "missing-gap";
        case Errc::unknown_scenario: return "unknown-scenario";
        case Errc::derivative_mismatch: return "derivative-mismatch";
        case Errc::non_summable: return "non-summable";
        case Errc::unavailable: return "unavailable";
        case Errc::invalid_summary: return "invalid-summary";
    }
    return "unknown";
}

bool Error::is_input_error() const noexcept {
    switch (code_) {
        case Errc::budget_exceeded:
        case Errc::non_finite:
        case Errc::bracket_not_found:
        case Errc::derivative_mismatch:
        case Errc::non_summable:
            return false;
        default:
            return true;
    }
}

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (std::isnan(lo_) || std::isnan(hi_) || !(lo_ < hi_)) {
        std::ostringstream os;
        os << "interval requires lo < hi, got [" << lo_ << ", " << hi_ << "]";
        fail(Errc::invalid_argument, os.str());
    }
}

namespace {

// Kronrod 21-point abscissae (positive half, descending) and weights; the
// 10-point Gauss rule uses the odd-indexed abscissae.
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208626368360, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Segment {
    double a = 0.0;
    double b = 0.0;
    double value = 0.0;
    double error = 0.0;
    double abs_value = 0.0;
};

double checked(const RealFn& f, double x) {
    const double y = f(x);
    if (!std::isfinite(y)) {
        std::ostringstream os;
        os.precision(17);
        os << "integrand is not finite at x = " << x;
        fail(Errc::non_finite, os.str());
    }
    return y;
}

Segment gauss_kronrod(const RealFn& g, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = checked(g, center);
    double kronrod = fc * kWgk[10];
    double gauss = 0.0;
    double abs_sum = std::abs(kronrod);
    std::array<double, 10> f1{};
    std::array<double, 10> f2{};
    for (std::size_t j = 0; j < 10; ++j) {
        const double dx = half * kXgk[j];
        f1[j] = checked(g, center - dx);
        f2[j] = checked(g, center + dx);
        const double pair = f1[j] + f2[j];
        kronrod += kWgk[j] * pair;
        abs_sum += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) gauss += kWg[j / 2] * pair;
    }
    const double mean = 0.5 * kronrod;
    double asc = kWgk[10] * std::abs(fc - mean);
    for (std::size_t j = 0; j < 10; ++j) asc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    Segment s;
    s.a = a;
    s.b = b;
    s.value = kronrod * half;
    s.abs_value = abs_sum * std::abs(half);
    asc *= std::abs(half);
    double err = std::abs((kronrod - gauss) * half);
    if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    if (s.abs_value > std::numeric_limits<double>::min() / (50.0 * kEps))
        err = std::max(err, 50.0 * kEps * s.abs_value);
    s.error = err;
    return s;
}

// Integrand on a finite t-range after mapping an infinite piece.
struct Piece {
    RealFn g;
    double a;
    double b;
};

Piece map_piece(const RealFn& f, double a, double b, double scale) {
    if (std::isfinite(a) && std::isfinite(b)) return {f, a, b};
    if (std::isfinite(a)) {
        // x = a + s t / (1 - t)
        return {[&f, a, scale](double t) {
                    const double u = 1.0 - t;
                    const double x = a + scale * t / u;
                    const double fx = f(x);
                    if (fx == 0.0) return 0.0;
                    return fx * scale / (u * u);
                },
                0.0, 1.0};
    }
    if (std::isfinite(b)) {
        return {[&f, b, scale](double t) {
                    const double u = 1.0 - t;
                    const double x = b - scale * t / u;
                    const double fx = f(x);
                    if (fx == 0.0) return 0.0;
                    return fx * scale / (u * u);
                },
                0.0, 1.0};
    }
    fail(Errc::invalid_argument, "doubly infinite piece must be split before mapping");
}

QuadResult adaptive(const RealFn& f, const std::vector<double>& pts, const QuadOptions& opts, double tail_scale) {
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) pieces.push_back(map_piece(f, pts[i], pts[i + 1], tail_scale));

    QuadResult out;
    struct Work {
        Segment seg;
        std::size_t piece;
        bool operator<(const Work& o) const { return seg.error < o.seg.error; }
    };
    std::priority_queue<Work> work;
    double total = 0.0;
    double total_err = 0.0;
    double total_abs = 0.0;
    double frozen_err = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        Segment s = gauss_kronrod(pieces[i].g, pieces[i].a, pieces[i].b);
        out.evaluations += 21;
        total += s.value;
        total_err += s.error;
        total_abs += s.abs_value;
        work.push({s, i});
    }

    auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
    while (total_err > target() && !work.empty()) {
        if (total_err <= 200.0 * kEps * total_abs) break;  // roundoff limited
        if (out.evaluations + 42 > opts.max_evaluations) {
            std::ostringstream os;
            os << "quadrature did not converge within " << opts.max_evaluations
               << " evaluations (estimate " << total << ", error " << total_err << ")";
            fail(Errc::budget_exceeded, os.str());
        }
        Work w = work.top();
        work.pop();
        const double mid = 0.5 * (w.seg.a + w.seg.b);
        if (!(mid > w.seg.a && mid < w.seg.b)) {
            frozen_err += w.seg.error;  // cannot subdivide further
            continue;
        }
        const RealFn& g = pieces[w.piece].g;
        Segment left = gauss_kronrod(g, w.seg.a, mid);
        Segment right = gauss_kronrod(g, mid, w.seg.b);
        out.evaluations += 42;
        total += left.value + right.value - w.seg.value;
        total_err += left.error + right.error - w.seg.error;
        total_abs += left.abs_value + right.abs_value - w.seg.abs_value;
        work.push({left, w.piece});
        work.push({right, w.piece});
    }
    // Recompute the sum from the leaves to shed accumulated update rounding.
    double sum = 0.0;
    double err = frozen_err;
    while (!work.empty()) {
        sum += work.top().seg.value;
        err += work.top().seg.error;
        work.pop();
    }
    out.value = sum;
    out.abs_error_estimate = std::abs(err);
    return out;
}

// Wynn's epsilon table over partial sums; returns the latest even-column entry.
double wynn_epsilon(const std::vector<double>& s) {
    std::vector<double> prev(s.size() + 1, 0.0);
    std::vector<double> cur(s);
    double best = s.back();
    for (std::size_t k = 1; cur.size() > 1; ++k) {
        std::vector<double> next(cur.size() - 1);
        for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
            const double d = cur[i + 1] - cur[i];
            if (d == 0.0) return k % 2 == 1 ? cur[i + 1] : best;
            next[i] = prev[i + 1] + 1.0 / d;
        }
        prev = std::move(cur);
        cur = std::move(next);
        if (k % 2 == 0 && std::isfinite(cur.back())) best = cur.back();
    }
    return best;
}

// Oscillating tails with slowly decaying envelopes defeat the rational map.
// Sum equal-width pieces outward from `a` (direction +1 or -1) and extrapolate.
QuadResult accelerated_tail(const RealFn& f, double a, double dir, double h, const QuadOptions& opts,
                            double scale_ref) {
    constexpr int kMaxPieces = 200;
    QuadOptions piece_opts = opts;
    piece_opts.rel_tol = std::min(opts.rel_tol, 1e-11);
    piece_opts.abs_tol = std::max(opts.abs_tol, 1e-3 * opts.rel_tol * std::abs(scale_ref));
    QuadResult out;
    std::vector<double> sums;
    double s = 0.0;
    double last = std::numeric_limits<double>::quiet_NaN();
    int stable = 0;
    for (int k = 0; k < kMaxPieces; ++k) {
        const double x0 = a + dir * h * k;
        const double x1 = a + dir * h * (k + 1);
        const QuadResult q = adaptive(f, {std::min(x0, x1), std::max(x0, x1)}, piece_opts, 1.0);
        out.evaluations += q.evaluations;
        s += q.value;
        sums.push_back(s);
        if (sums.size() < 8) continue;
        const double est = wynn_epsilon(sums);
        const double tol = std::max(opts.abs_tol, 0.1 * opts.rel_tol * std::max(std::abs(scale_ref), std::abs(est)));
        if (std::isfinite(last) && std::abs(est - last) <= tol) {
            if (++stable >= 3) {
                out.value = est;
                out.abs_error_estimate = std::abs(est - last);
                return out;
            }
        } else {
            stable = 0;
        }
        last = est;
    }
    fail(Errc::budget_exceeded, "accelerated tail quadrature did not settle within " + std::to_string(kMaxPieces) +
                                    " pieces");
}

}  // namespace

QuadResult integrate_pieces(const RealFn& f, std::span<const double> breaks, const QuadOptions& opts,
                            double tail_scale) {
    if (!(opts.rel_tol > 0.0)) fail(Errc::invalid_argument, "rel_tol must be positive");
    if (!(tail_scale > 0.0) || !std::isfinite(tail_scale)) tail_scale = 1.0;

    std::vector<double> pts;
    pts.reserve(breaks.size() + 1);
    for (double x : breaks) {
        if (std::isnan(x)) fail(Errc::invalid_argument, "NaN breakpoint");
        if (!pts.empty() && x < pts.back()) fail(Errc::invalid_argument, "breakpoints must be nondecreasing");
        if (pts.empty() || x != pts.back()) pts.push_back(x);
    }
    if (pts.size() < 2) return {};
    if (pts.front() == -kInf && pts.back() == kInf && pts.size() == 2) pts.insert(pts.begin() + 1, 0.0);

    try {
        return adaptive(f, pts, opts, tail_scale);
    } catch (const Error& e) {
        const bool lo_inf = !std::isfinite(pts.front());
        const bool hi_inf = !std::isfinite(pts.back());
        if (e.code() != Errc::budget_exceeded || (!lo_inf && !hi_inf)) throw;
    }
    // Retry with the infinite ends handled by series extrapolation.
    std::vector<double> mid(pts.begin() + (std::isfinite(pts.front()) ? 0 : 1),
                            pts.end() - (std::isfinite(pts.back()) ? 0 : 1));
    QuadResult out;
    if (mid.size() >= 2) out = adaptive(f, mid, opts, tail_scale);
    const double ref = std::max(std::abs(out.value), opts.abs_tol);
    auto add = [&out](const QuadResult& q) {
        out.value += q.value;
        out.abs_error_estimate += q.abs_error_estimate;
        out.evaluations += q.evaluations;
    };
    if (!std::isfinite(pts.front())) add(accelerated_tail(f, mid.front(), -1.0, tail_scale, opts, ref));
    if (!std::isfinite(pts.back())) add(accelerated_tail(f, mid.back(), 1.0, tail_scale, opts, ref));
    return out;
}

QuadResult integrate(const RealFn& f, Interval iv, const QuadOptions& opts, double tail_scale) {
    const std::array<double, 2> br{iv.lo, iv.hi};
    return integrate_pieces(f, br, opts, tail_scale);
}

QuadResult integrate(const RealFn& f, Interval iv, double rel_tol) {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) fail(Errc::invalid_argument, "rel_tol must lie in (0, 1e-2]");
    QuadOptions opts;
    opts.rel_tol = rel_tol;
    return integrate(f, iv, opts);
}

double bisect(const RealFn& f, double a, double b, double tol, int max_iter) {
    double fa = f(a);
    if (fa == 0.0) return a;
    for (int i = 0; i < max_iter && std::abs(b - a) > tol; ++i) {
        const double m = 0.5 * (a + b);
        if (m == a || m == b) break;
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

double inverse_cdf(const RealFn& cdf, double p, Interval iv, double tol) {
    if (!(p > 0.0 && p < 1.0)) fail(Errc::invalid_argument, "inverse_cdf requires p in (0, 1)");
    double lo = iv.lo;
    double hi = iv.hi;
    // Expand infinite ends until F straddles p.
    if (iv.lo_infinite() || iv.hi_infinite()) {
        double anchor = 0.0;
        if (!iv.lo_infinite()) anchor = iv.lo;
        if (!iv.hi_infinite()) anchor = iv.hi;
        double step = 1.0;
        if (iv.lo_infinite()) {
            lo = std::min(anchor, iv.hi_infinite() ? 0.0 : iv.hi) - step;
            while (cdf(lo) >= p) {
                step *= 2.0;
                lo = anchor - step;
                if (!std::isfinite(lo)) fail(Errc::bracket_not_found, "cdf does not fall below p");
            }
        }
        step = 1.0;
        if (iv.hi_infinite()) {
            hi = std::max(anchor, lo) + step;
            while (cdf(hi) < p) {
                step *= 2.0;
                hi = std::max(anchor, lo) + step;
                if (!std::isfinite(hi)) fail(Errc::bracket_not_found, "cdf does not reach p");
            }
        }
    }
    if (cdf(hi) < p || (cdf(lo) > p && !iv.lo_infinite())) {
        if (cdf(lo) >= p) return lo;  // atom at the lower end
        fail(Errc::bracket_not_found, "cdf does not straddle p on the interval");
    }
    for (int i = 0; i < 400; ++i) {
        const double m = 0.5 * (lo + hi);
        if (m <= lo || m >= hi) break;
        if (hi - lo <= tol * std::max(1.0, std::abs(m))) break;
        if (cdf(m) >= p)
            hi = m;
        else
            lo = m;
    }
    return hi;
}

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) noexcept { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_log_sf(double z) noexcept {
    if (z < 30.0) return std::log(normal_sf(z));
    // Mills-ratio asymptotic series.
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    return -0.5 * z2 - std::log(z * std::sqrt(2.0 * std::numbers::pi)) + std::log(series);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) fail(Errc::invalid_argument, "normal_quantile requires p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

std::vector<double> chebyshev_grid(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = 0.5 * (a + b);
        return out;
    }
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = c - h * std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1));
    out.front() = a;
    out.back() = b;
    return out;
}

std::vector<double> linspace(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t k = 0; k < count; ++k)
        out[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1);
    out.back() = b;
    return out;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x5eed5eedu};
    engine_.seed(seq);
}

double RandomStream::uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

double RandomStream::exponential() { return -std::log(uniform()); }

std::uint64_t RandomStream::index(std::uint64_t n) {
    if (n == 0) fail(Errc::invalid_argument, "index range must be nonempty");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

RandomStream rng_stream(std::uint64_t seed, std::uint64_t stream_id) { return RandomStream(seed, stream_id); }

void parallel_batches(std::size_t batches, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(batches, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t b = 0; b < batches; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t b = next++; b < batches; b = next++) {
                if (failed.load()) return;
                try {
                    fn(b);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed = true;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void Moments::add(double x) noexcept {
    const double n1 = static_cast<double>(n);
    ++n;
    const double nn = static_cast<double>(n);
    const double delta = x - mean;
    const double dn = delta / nn;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean += dn;
    m4 += term1 * dn2 * (nn * nn - 3.0 * nn + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += term1 * dn * (nn - 2.0) - 3.0 * dn * m2;
    m2 += term1;
}

void Moments::merge(const Moments& b) noexcept {
    if (b.n == 0) return;
    if (n == 0) {
        *this = b;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(b.n);
    const double nt = na + nb;
    const double d = b.mean - mean;
    const double d2 = d * d;
    const double d3 = d2 * d;
    const double d4 = d2 * d2;
    const double m2n = m2 + b.m2 + d2 * na * nb / nt;
    const double m3n = m3 + b.m3 + d3 * na * nb * (na - nb) / (nt * nt) + 3.0 * d * (na * b.m2 - nb * m2) / nt;
    const double m4n = m4 + b.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nt * nt * nt) +
                       6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nt * nt) + 4.0 * d * (na * b.m3 - nb * m3) / nt;
    mean += d * nb / nt;
    m2 = m2n;
    m3 = m3n;
    m4 = m4n;
    n += b.n;
}

double Moments::se_mean() const noexcept {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

}  // namespace stein
