// rates.hpp: half-Fourier polaron rates, NIBA rates and weak-coupling
// sequential rates, with counting-field dressing.

#pragma once

#include "qheat/bath.hpp"
#include "qheat/error.hpp"
#include "qheat/model.hpp"
#include "qheat/quadrature.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace qheat::rates {

using cplx = std::complex<double>;
using bath::Axis;
using bath::BathKernel;
using Pair = std::array<cplx, 2>;  // (x, y) channels

enum class Sign { Plus, Minus };
enum class Direction { Absorb, Emit };

struct RateOptions {
    quad::HalfFourierOptions fourier{};
    double clamp_floor = 1e-12;  // tolerated negative rate noise, relative to rate scale
};

/// Count of rates clamped to zero; read by diagnostics.
inline std::atomic<std::uint64_t>& clamped_rate_count() {
    static std::atomic<std::uint64_t> n{0};
    return n;
}

inline double clamp_rate(double k, double scale, double floor) {
    if (k >= 0.0) return k;
    if (k >= -floor * std::max(scale, 1e-300)) {
        ++clamped_rate_count();
        return 0.0;
    }
    throw Error(ErrorKind::NegativeRate, "negative transition rate " + std::to_string(k));
}

/// Half-Fourier rates Gamma_{a,+/-}(w) of one device side (both axes at once).
///   Gamma_+(w) = int_0^inf C(t) e^{iwt} dt,  Gamma_-(w) = int_0^inf C(-t) e^{iwt} dt.
/// Uncounted values are memoized per frequency; the cache is mutex-guarded
/// and returns identical values whether hit or computed.
class PolaronRateEngine {
public:
    PolaronRateEngine(BathKernel kernel, double delta, RateOptions opt = {})
        : kernel_(std::move(kernel)), delta_(delta), opt_(opt) {
        if (!(delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 0");
    }

    PolaronRateEngine(const PolaronRateEngine& o) : kernel_(o.kernel_), delta_(o.delta_), opt_(o.opt_) {}

    const BathKernel& kernel() const { return kernel_; }
    double delta() const { return delta_; }

    Pair correlation(cplx tau) const { return correlation_at(kernel_.phase(tau)); }

    Pair gamma(Sign s, double omega) const {
        if (s == Sign::Plus) return gamma_plus(omega);
        Pair g = gamma_plus(-omega);
        return {std::conj(g[0]), std::conj(g[1])};
    }

    /// Rate with the whole kernel argument shifted, C(+/-t - chi).
    Pair gamma_shifted(Sign s, double omega, double chi) const {
        if (chi == 0.0) return gamma(s, omega);
        Pair base = gamma(s, omega);
        // Remainder over [-chi, 0]; orientation handled by the integrator bounds.
        const double sgn = s == Sign::Plus ? 1.0 : -1.0;
        auto f = [&](double t) -> Pair {
            const Pair c = correlation(cplx(t, 0.0));
            const cplx ph = std::exp(cplx(0.0, sgn * omega * t));
            return {c[0] * ph, c[1] * ph};
        };
        Pair seg = finite_segment(f, -chi);
        const cplx dress = std::exp(cplx(0.0, sgn * omega * chi));
        Pair out;
        for (int a = 0; a < 2; ++a) out[a] = dress * (base[a] + sgn * seg[a]);
        return out;
    }

    /// Rate with per-bath shifts C(Q_1(+/-t - s_1) + Q_2(+/-t - s_2)),
    /// integrated afresh (no shortcut when only some baths are shifted).
    Pair gamma_partial(Sign s, double omega, std::span<const double> shifts) const {
        bool uniform = true;
        for (std::size_t i = 0; i < kernel_.size(); ++i) {
            const double si = i < shifts.size() ? shifts[i] : 0.0;
            const double s0 = shifts.empty() ? 0.0 : shifts[0];
            if (si != s0) uniform = false;
        }
        if (uniform) return gamma_shifted(s, omega, shifts.empty() ? 0.0 : shifts[0]);
        std::vector<double> sh(shifts.begin(), shifts.end());
        const double sgn = s == Sign::Plus ? 1.0 : -1.0;
        auto f = [&](cplx t) -> Pair { return correlation_at(kernel_.phase_shifted(sgn * t, sh)); };
        return quad::half_fourier<Pair>(f, omega, kernel_.scales(), opt_.fourier).value;
    }

    std::size_t cache_size() const {
        std::lock_guard<std::mutex> g(mu_);
        return cache_.size();
    }

private:
    Pair correlation_at(cplx q) const {
        const double e2 = kernel_.eta_sq();
        return {bath::correlation_from_phase(e2, delta_, Axis::X, q), bath::correlation_from_phase(e2, delta_, Axis::Y, q)};
    }

    template <class F>
    Pair finite_segment(F&& f, double lower) const {
        if (lower == 0.0) return {};
        quad::Options o{1e-15 * delta_ * delta_, 1e-12, 200};
        if (lower < 0.0) return quad::integrate<Pair>(f, lower, 0.0, o).value;
        Pair r = quad::integrate<Pair>(f, 0.0, lower, o).value;
        return {-r[0], -r[1]};
    }

    Pair gamma_plus(double omega) const {
        if (delta_ == 0.0 || kernel_.eta_sq_log() == 0.0) return {};
        const auto key = std::bit_cast<std::uint64_t>(omega);
        {
            std::lock_guard<std::mutex> g(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        auto f = [&](cplx t) -> Pair { return correlation(t); };
        Pair v = quad::half_fourier<Pair>(f, omega, kernel_.scales(), opt_.fourier).value;
        std::lock_guard<std::mutex> g(mu_);
        cache_.emplace(key, v);
        return v;
    }

    BathKernel kernel_;
    double delta_;
    RateOptions opt_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, Pair> cache_;
};

/// Single-channel convenience wrapper.
inline cplx gamma_half_fourier(const PolaronRateEngine& eng, Axis a, Sign s, double omega, double chi = 0.0) {
    return eng.gamma_shifted(s, omega, chi)[a == Axis::X ? 0 : 1];
}

/// Fourier transform of the phase, int Q(t) e^{iwt} dt = 2 J(|w|)(n+1 or n)/w^2.
inline double phase_spectrum(const bath::BathSpec& b, double w) {
    if (w == 0.0) return 2.0 * std::numbers::pi * b.alpha * 2.0 * b.temperature / (b.omega_c * b.omega_c);
    const double aw = std::abs(w);
    const double n = bath::bose_occupation(b.temperature, aw);
    return 2.0 * bath::spectral_density(b, aw) * (w > 0.0 ? n + 1.0 : n) / (w * w);
}

/// Two-phonon estimate of Re Gamma_{x,+/-}(w) from the O(Q^2) expansion of
/// cosh Q - 1: (eta Delta/2)^2/(8 pi) int dw1 S(w1) S(w - w1), S the phase
/// spectrum. Single-bath kernels only.
inline double gamma_x_lowest_order(const BathKernel& k, double delta, double omega, Sign s) {
    if (k.size() != 1) throw Error(ErrorKind::InvalidArgument, "lowest-order oracle takes one bath");
    const auto& b = k.baths()[0];
    if (delta == 0.0 || b.alpha == 0.0) return 0.0;
    // Re Gamma_-(w) = Re Gamma_+(-w).
    const double w = s == Sign::Plus ? omega : -omega;
    auto f = [&](double w1) { return phase_spectrum(b, w1) * phase_spectrum(b, w - w1); };
    const double span = 60.0 * b.omega_c;
    std::vector<double> br{-span, -10.0 * b.omega_c, -b.omega_c, 0.0, w, b.omega_c, 10.0 * b.omega_c, span + std::abs(w)};
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    quad::Options o{0.0, 1e-11, 4000};
    o.epsabs = 1e-300;
    const double conv = quad::integrate<double>(f, br, o).value;
    return k.eta_sq() * delta * delta / 4.0 / (8.0 * std::numbers::pi) * conv;
}

/// Full-Fourier NIBA rate of one side,
///   kappa(E) = int dt [D(t) - D(inf)] e^{iEt} = 2 Re int_0^inf ...,
/// where D(inf) = (Delta/2)^2 eta^2 only feeds a delta(E) term.
class NibaRateEngine {
public:
    NibaRateEngine(BathKernel kernel, double delta, RateOptions opt = {})
        : kernel_(std::move(kernel)), delta_(delta), opt_(opt) {}
    NibaRateEngine(const NibaRateEngine& o) : kernel_(o.kernel_), delta_(o.delta_), opt_(o.opt_) {}

    const BathKernel& kernel() const { return kernel_; }
    double delta() const { return delta_; }

    double kappa(double e) const {
        if (delta_ == 0.0) return 0.0;
        const auto key = std::bit_cast<std::uint64_t>(e);
        {
            std::lock_guard<std::mutex> g(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        const double e2 = kernel_.eta_sq();
        auto f = [&](cplx t) -> cplx { return bath::niba_kernel_decaying(e2, delta_, kernel_.phase(t)); };
        const cplx h = quad::half_fourier<cplx>(f, e, kernel_.scales(), opt_.fourier).value;
        const double k = clamp_rate(2.0 * h.real(), delta_ * delta_ * e2, opt_.clamp_floor);
        std::lock_guard<std::mutex> g(mu_);
        cache_.emplace(key, k);
        return k;
    }

    /// kappa(E) e^{iE chi}: the counted rate is a pure phase dressing.
    cplx kappa_counted(double e, double chi) const { return std::exp(cplx(0.0, e * chi)) * kappa(e); }

    /// Rate with per-bath shifts Q_b(t - s_b), integrated over the full line.
    cplx kappa_partial(double e, std::span<const double> shifts) const {
        if (delta_ == 0.0) return {};
        std::vector<double> sh(shifts.begin(), shifts.end());
        const double e2 = kernel_.eta_sq();
        auto fp = [&](cplx t) -> cplx { return bath::niba_kernel_decaying(e2, delta_, kernel_.phase_shifted(t, sh)); };
        auto fm = [&](cplx t) -> cplx { return bath::niba_kernel_decaying(e2, delta_, kernel_.phase_shifted(-t, sh)); };
        const cplx a = quad::half_fourier<cplx>(fp, e, kernel_.scales(), opt_.fourier).value;
        const cplx b = quad::half_fourier<cplx>(fm, -e, kernel_.scales(), opt_.fourier).value;
        return a + b;
    }

private:
    BathKernel kernel_;
    double delta_;
    RateOptions opt_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, double> cache_;
};

inline cplx niba_rate(const NibaRateEngine& eng, double e_ij, double chi = 0.0) { return eng.kappa_counted(e_ij, chi); }

/// Weak-coupling sequential rate J(E) n(E)/2 (absorb) or J(E)(1+n(E))/2 (emit), E = |e_gap|.
inline double redfield_sequential_rate(const bath::BathSpec& b, double e_gap, Direction d) {
    if (e_gap == 0.0) throw Error(ErrorKind::ZeroGap, "sequential rate needs a nonzero gap");
    const double e = std::abs(e_gap);
    const double n = bath::bose_occupation(b.temperature, e);
    return 0.5 * bath::spectral_density(b, e) * (d == Direction::Emit ? 1.0 + n : n);
}

/// Single-flip pairs of the local basis (0-based): right flips change the
/// second spin, left flips the first.
inline constexpr std::array<std::array<int, 2>, 4> kRightFlips{{{0, 1}, {1, 0}, {2, 3}, {3, 2}}};
inline constexpr std::array<std::array<int, 2>, 4> kLeftFlips{{{0, 2}, {2, 0}, {1, 3}, {3, 1}}};

/// kappa^{ij}_v for all single-flip pairs (i -> j), with local energies.
struct NibaRateTable {
    std::array<double, 4> energies{};
    Eigen::Matrix4d left = Eigen::Matrix4d::Zero();   // left(i, j) = kappa_L^{ij}
    Eigen::Matrix4d right = Eigen::Matrix4d::Zero();  // right(i, j) = kappa_R^{ij}
    std::array<double, 2> temperature{};               // effective (L, R) for two-terminal checks

    double gap(int i, int j) const { return energies[static_cast<std::size_t>(i)] - energies[static_cast<std::size_t>(j)]; }
    const Eigen::Matrix4d& side(Side s) const { return s == Side::Left ? left : right; }
};

inline NibaRateTable make_niba_table(const SystemSpec& spec, const NibaRateEngine& left, const NibaRateEngine& right) {
    NibaRateTable t;
    t.energies = local_basis_energies(spec.u, spec.left.epsilon, spec.right.epsilon);
    for (auto [i, j] : kRightFlips) t.right(i, j) = right.kappa(t.gap(i, j));
    for (auto [i, j] : kLeftFlips) t.left(i, j) = left.kappa(t.gap(i, j));
    t.temperature = {left.kernel().baths()[0].temperature, right.kernel().baths()[0].temperature};
    return t;
}

} // namespace qheat::rates
