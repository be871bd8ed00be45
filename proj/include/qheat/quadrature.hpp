// quadrature.hpp: adaptive Gauss-Kronrod integration and half-range Fourier
// transforms of kernels that are analytic in a sector around the real axis.

#pragma once

#include "qheat/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

namespace qheat::quad {

using cplx = std::complex<double>;

// Magnitude used for error control. Overloaded for the value types the
// integrators are instantiated with.
inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const cplx& v) { return std::abs(v); }
template <std::size_t N>
double magnitude(const std::array<cplx, N>& v) {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, std::abs(x));
    return m;
}

template <class V> V zero_value() { return V{}; }

template <std::size_t N>
std::array<cplx, N> operator+(std::array<cplx, N> a, const std::array<cplx, N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
    return a;
}
template <std::size_t N>
std::array<cplx, N> operator-(std::array<cplx, N> a, const std::array<cplx, N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
    return a;
}
template <std::size_t N, class S>
std::array<cplx, N> operator*(S s, std::array<cplx, N> a) {
    for (auto& x : a) x *= s;
    return a;
}

struct Options {
    double epsabs = 1e-14;
    double epsrel = 1e-11;
    std::size_t max_intervals = 4000;
};

template <class V>
struct Result {
    V value{};
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980164700, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights for the odd-indexed Kronrod nodes.
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

template <class V>
struct Segment {
    double a, b;
    V value;
    double error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class V, class F>
Segment<V> gk21(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const V fc = f(c);
    V kron = kWgk[10] * fc;
    V gauss = zero_value<V>();
    for (std::size_t j = 0; j < 10; ++j) {
        const double dx = h * kXgk[j];
        const V sum = f(c - dx) + f(c + dx);
        kron = kron + kWgk[j] * sum;
        if (j % 2 == 1) gauss = gauss + kWg[j / 2] * sum;
    }
    kron = h * kron;
    gauss = h * gauss;
    return {a, b, kron, magnitude(kron - gauss)};
}

} // namespace detail

/// Globally adaptive G10/K21 integration of f over the union of the
/// consecutive intervals given by `breaks` (at least two points).
template <class V, class F>
Result<V> integrate(F&& f, const std::vector<double>& breaks, const Options& opt = {}) {
    if (breaks.size() < 2) throw Error(ErrorKind::InvalidArgument, "integrate needs >= 2 breakpoints");
    std::priority_queue<detail::Segment<V>> heap;
    V total = zero_value<V>();
    double err = 0.0;
    std::size_t evals = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        auto s = detail::gk21<V>(f, breaks[i], breaks[i + 1]);
        evals += 21;
        total = total + s.value;
        err += s.error;
        heap.push(s);
    }
    while (err > std::max(opt.epsabs, opt.epsrel * magnitude(total))) {
        if (heap.size() >= opt.max_intervals) {
            throw Error(ErrorKind::QuadratureFailure,
                        "no convergence after " + std::to_string(heap.size()) +
                            " intervals (error estimate " + std::to_string(err) + ")");
        }
        auto s = heap.top();
        heap.pop();
        const double mid = 0.5 * (s.a + s.b);
        if (!(mid > s.a && mid < s.b)) {
            throw Error(ErrorKind::QuadratureFailure, "interval underflow during bisection");
        }
        auto left = detail::gk21<V>(f, s.a, mid);
        auto right = detail::gk21<V>(f, mid, s.b);
        evals += 42;
        total = total - s.value + left.value + right.value;
        err += left.error + right.error - s.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    V resum = zero_value<V>();
    double reerr = 0.0;
    while (!heap.empty()) {
        resum = resum + heap.top().value;
        reerr += heap.top().error;
        heap.pop();
    }
    return {resum, reerr, evals};
}

template <class V, class F>
Result<V> integrate(F&& f, double a, double b, const Options& opt = {}) {
    return integrate<V>(std::forward<F>(f), std::vector<double>{a, b}, opt);
}

/// Time scales of a kernel: features live near `inner` (pole distance from
/// the real axis) and extend to `outer` (thermal time).
struct KernelScales {
    double inner = 0.2;
    double outer = 1.0;
};

struct HalfFourierOptions {
    double angle = std::numbers::pi / 6.0;  // contour tilt
    Options quad{0.0, 1e-11, 4000};
    double abs_scale = 1e-14;  // epsabs = abs_scale * |f(0)| * outer
};

/// I(w) = int_0^inf f(t) e^{i w t} dt along the ray t = r e^{i sgn(w) angle}.
/// f must be analytic and decaying in the closed sector between the real
/// axis and the ray; `f` receives complex times.
template <class V, class F>
Result<V> half_fourier(F&& f, double omega, const KernelScales& sc, const HalfFourierOptions& opt = {}) {
    const double tilt = (omega > 0.0) ? opt.angle : (omega < 0.0 ? -opt.angle : 0.0);
    const cplx dir = std::polar(1.0, tilt);
    const double damping = std::abs(omega) * std::sin(std::abs(tilt));

    std::vector<double> rb{0.0, sc.inner, 4.0 * sc.inner, sc.outer, 4.0 * sc.outer};
    double horizon = std::max(10.0 * sc.inner, 2.0 * sc.outer);
    if (damping > 0.0) {
        const double decay = 1.0 / damping;
        rb.push_back(decay);
        rb.push_back(4.0 * decay);
        horizon = std::max(horizon, std::min(30.0 * decay, 1e4));
    }
    rb.push_back(horizon);
    std::sort(rb.begin(), rb.end());
    rb.erase(std::remove_if(rb.begin(), rb.end(), [&](double r) { return r > horizon; }), rb.end());
    rb.erase(std::unique(rb.begin(), rb.end()), rb.end());

    auto on_ray = [&](double r) -> V {
        const cplx t = r * dir;
        return (std::exp(cplx(0.0, omega) * t) * dir) * f(t);
    };
    Options qo = opt.quad;
    const double f0 = magnitude(f(cplx(0.0, 0.0)));
    qo.epsabs = std::max(qo.epsabs, opt.abs_scale * f0 * std::max(1.0, sc.outer));
    if (qo.epsabs == 0.0) qo.epsabs = std::numeric_limits<double>::min();

    // Tail [horizon, inf) through r = horizon / (1 - x).
    auto tail = [&](double x) -> V {
        if (x >= 1.0) return zero_value<V>();
        const double omx = 1.0 - x;
        const double r = horizon / omx;
        return (horizon / (omx * omx)) * on_ray(r);
    };
    Options head_opt = qo;
    Options tail_opt = qo;
    tail_opt.epsabs *= 0.1;
    auto head = integrate<V>(on_ray, rb, head_opt);
    auto rest = integrate<V>(tail, 0.0, 1.0, tail_opt);
    return {head.value + rest.value, head.error + rest.error, head.evaluations + rest.evaluations};
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// last diagonal estimate and an error proxy (difference of the last two).
inline std::pair<cplx, double> wynn_epsilon(const std::vector<cplx>& s) {
    const std::size_t n = s.size();
    if (n == 0) return {cplx{}, std::numeric_limits<double>::infinity()};
    std::vector<cplx> prev(n + 1, cplx{}), cur(s.begin(), s.end());
    cplx best = s.back();
    cplx last_best = n > 1 ? s[n - 2] : s.back();
    // Table columns: eps_{-1} = 0, eps_0 = s.
    for (std::size_t k = 1; cur.size() > 1; ++k) {
        std::vector<cplx> next(cur.size() - 1);
        for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
            const cplx d = cur[i + 1] - cur[i];
            const cplx p = (i + 1 < prev.size()) ? prev[i + 1] : cplx{};
            if (std::abs(d) == 0.0) {
                next[i] = p + cplx(1e300, 0.0);
            } else {
                next[i] = p + 1.0 / d;
            }
        }
        prev = std::move(cur);
        cur = std::move(next);
        if (k % 2 == 0 && !cur.empty()) {
            last_best = best;
            best = cur.back();
            if (!std::isfinite(best.real()) || !std::isfinite(best.imag()) || std::abs(best) > 1e200) {
                best = last_best;
                break;
            }
        }
    }
    return {best, std::abs(best - last_best)};
}

/// Real-axis route: I(w) = int_0^inf f(t) e^{i w t} dt summed over panels of
/// length `panel`, with half-period partial sums accelerated by Wynn's
/// epsilon algorithm. Requires w != 0; used to cross-check half_fourier.
template <class F>
Result<cplx> half_fourier_panels(F&& f, double omega, double panel, double tol = 1e-12,
                                 std::size_t max_half_periods = 400) {
    if (omega == 0.0) throw Error(ErrorKind::ZeroFrequency, "panel route needs a nonzero frequency");
    const double half_period = std::numbers::pi / std::abs(omega);
    const std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(half_period / panel - 1e-9)));
    const double h = half_period / static_cast<double>(sub);
    auto g = [&](double t) -> cplx { return f(cplx(t, 0.0)) * std::exp(cplx(0.0, omega * t)); };
    Options qo{0.0, 1e-13, 2000};
    qo.epsabs = 1e-16 * std::abs(f(cplx(0.0, 0.0))) * half_period;
    std::vector<cplx> partial;
    cplx acc{};
    std::size_t evals = 0;
    double prev_est = std::numeric_limits<double>::infinity();
    cplx est{};
    int stable = 0;
    for (std::size_t n = 0; n < max_half_periods; ++n) {
        for (std::size_t j = 0; j < sub; ++j) {
            const double a = static_cast<double>(n) * half_period + static_cast<double>(j) * h;
            auto r = integrate<cplx>(g, a, a + h, qo);
            acc += r.value;
            evals += r.evaluations;
        }
        partial.push_back(acc);
        if (partial.size() >= 8) {
            // Extrapolate from the most recent window to keep the table well-conditioned.
            const std::size_t w = std::min<std::size_t>(partial.size(), 24);
            std::vector<cplx> window(partial.end() - static_cast<std::ptrdiff_t>(w), partial.end());
            auto [e, d] = wynn_epsilon(window);
            const double change = std::abs(e - est);
            est = e;
            const double scale = std::max(std::abs(est), 1e-300);
            if (change < tol * scale && d < 1e3 * tol * scale) {
                if (++stable >= 3) return {est, change, evals};
            } else {
                stable = 0;
            }
            prev_est = change;
        }
    }
    (void)prev_est;
    throw Error(ErrorKind::NonDecayingKernel, "panel route did not converge within the truncation horizon");
}

} // namespace qheat::quad
