// bath.hpp: super-Ohmic bosonic baths: spectral density, occupations,
// polaron renormalization and the phonon propagating phase Q(t).
//
// Conventions: hbar = k_B = 1. J(w) = pi alpha w^3 exp(-w/wc) / wc^2.
// Q(t) = int_0^inf dw J(w)/(pi w^2) [coth(w/2T) cos(wt) - i sin(wt)],
// eta = exp(-Q(0)/2), so eta^2 e^{Q(0)} = 1.

#pragma once

#include "qheat/error.hpp"
#include "qheat/quadrature.hpp"
#include "qheat/special.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace qheat::bath {

using cplx = std::complex<double>;

struct BathSpec {
    double alpha = 0.0;
    double omega_c = 5.0;
    double temperature = 1.0;

    /// Smallest admissible temperature relative to the cutoff.
    static constexpr double kMinTemperatureRatio = 1e-3;

    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw Error(ErrorKind::InvalidArgument, "alpha must be >= 0");
        if (!(omega_c > 0.0) || !std::isfinite(omega_c))
            throw Error(ErrorKind::InvalidArgument, "omega_c must be > 0");
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
        if (temperature < kMinTemperatureRatio * omega_c)
            throw Error(ErrorKind::TemperatureTooLow,
                        "temperature " + std::to_string(temperature) + " below 1e-3 * omega_c");
    }

    bool operator==(const BathSpec&) const = default;
};

inline double spectral_density(const BathSpec& b, double omega) {
    if (omega < 0.0) throw Error(ErrorKind::NegativeFrequency, "spectral density needs omega >= 0");
    return std::numbers::pi * b.alpha * omega * omega * omega * std::exp(-omega / b.omega_c) /
           (b.omega_c * b.omega_c);
}

/// Odd extension J(-w) = -J(w), used by the lab-frame Redfield rates.
inline double spectral_density_odd(const BathSpec& b, double omega) {
    return omega >= 0.0 ? spectral_density(b, omega) : -spectral_density(b, -omega);
}

inline double bose_occupation(double temperature, double omega) {
    if (omega == 0.0) throw Error(ErrorKind::ZeroFrequency, "Bose occupation is singular at omega = 0");
    return 1.0 / std::expm1(omega / temperature);
}

/// J(w) (1 + n(w)) with the odd extension; finite at w = 0 (vanishes as w^2).
inline double emission_weight(const BathSpec& b, double omega) {
    if (omega == 0.0) return 0.0;
    return spectral_density_odd(b, omega) * (1.0 + bose_occupation(b.temperature, omega));
}

enum class PhaseMethod { ClosedForm, Quadrature };

namespace detail {

// J(w)/(pi w^2) coth(w/2T), with the w -> 0 limit.
inline double reorganization_density(const BathSpec& b, double w) {
    const double g = b.alpha / (b.omega_c * b.omega_c) * std::exp(-w / b.omega_c);
    const double x = w / (2.0 * b.temperature);
    const double xcoth = (x < 1e-8) ? 1.0 : x / std::tanh(x);
    return g * 2.0 * b.temperature * xcoth;
}

inline double frequency_cutoff(const BathSpec& b) {
    return b.omega_c * std::max(40.0, 10.0 * b.omega_c / b.temperature);
}

} // namespace detail

/// Q(t) for complex t from the trigamma representation of the thermal sum.
inline cplx phase_closed_form(const BathSpec& b, cplx tau) {
    if (b.alpha == 0.0) return {0.0, 0.0};
    const double a = 1.0 / b.omega_c;
    const double T = b.temperature;
    const cplx it = cplx(0.0, 1.0) * tau;
    const cplx vac = 1.0 / ((a + it) * (a + it));
    const cplx thermal = T * T * (special::trigamma(1.0 + (a + it) * T) + special::trigamma(1.0 + (a - it) * T));
    return b.alpha / (b.omega_c * b.omega_c) * (vac + thermal);
}

/// Q(t) for real t by adaptive quadrature over the bath frequencies.
inline cplx phase_quadrature(const BathSpec& b, double tau, double epsrel = 1e-12) {
    if (b.alpha == 0.0) return {0.0, 0.0};
    const double wmax = detail::frequency_cutoff(b);
    auto f = [&](double w) -> cplx {
        const double re = detail::reorganization_density(b, w) * std::cos(w * tau);
        const double im = -b.alpha / (b.omega_c * b.omega_c) * w * std::exp(-w / b.omega_c) * std::sin(w * tau);
        return {re, im};
    };
    std::vector<double> breaks{0.0, b.omega_c, 4.0 * b.omega_c, 10.0 * b.omega_c, wmax};
    if (std::abs(tau) > 0.0) {
        // One break per few oscillations keeps the initial partition balanced.
        const double period = 2.0 * std::numbers::pi / std::abs(tau);
        const std::size_t extra = std::min<std::size_t>(2000, static_cast<std::size_t>(wmax / (4.0 * period)));
        for (std::size_t k = 1; k <= extra; ++k) breaks.push_back(wmax * static_cast<double>(k) / static_cast<double>(extra + 1));
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    }
    quad::Options opt{1e-15 * b.alpha, epsrel, 20000};
    return quad::integrate<cplx>(f, breaks, opt).value;
}

inline cplx phase_function(const BathSpec& b, double tau, PhaseMethod m = PhaseMethod::ClosedForm) {
    return m == PhaseMethod::ClosedForm ? phase_closed_form(b, cplx(tau, 0.0)) : phase_quadrature(b, tau);
}

/// eta = <cos B> = exp(-1/2 int J/(pi w^2) coth(w/2T)).
inline double renorm_factor(const BathSpec& b, PhaseMethod m = PhaseMethod::Quadrature) {
    b.validate();
    if (b.alpha == 0.0) return 1.0;
    if (m == PhaseMethod::ClosedForm) {
        const double x = b.temperature / b.omega_c;  // 1/(beta wc)
        return std::exp(-0.5 * b.alpha * (1.0 + 2.0 * x * x * special::trigamma(1.0 + x)));
    }
    auto f = [&](double w) { return detail::reorganization_density(b, w); };
    const double wmax = detail::frequency_cutoff(b);
    quad::Options opt{1e-16 * b.alpha, 1e-13, 2000};
    const auto r = quad::integrate<double>(f, std::vector<double>{0.0, b.omega_c, 4.0 * b.omega_c, 10.0 * b.omega_c, wmax}, opt);
    return std::exp(-0.5 * r.value);
}

/// Phase kernel of one side of the device. A side couples to one bath, or,
/// for the hot/cold left pair of the three-terminal device, to two baths
/// whose phases add.
class BathKernel {
public:
    explicit BathKernel(BathSpec b) : BathKernel(std::vector<BathSpec>{b}) {}
    explicit BathKernel(std::vector<BathSpec> baths) : baths_(std::move(baths)) {
        if (baths_.empty() || baths_.size() > 2)
            throw Error(ErrorKind::InvalidArgument, "a bath kernel holds one or two baths");
        q0_ = 0.0;
        for (const auto& b : baths_) {
            b.validate();
            q0_ += phase_closed_form(b, cplx(0.0, 0.0)).real();
        }
    }

    std::span<const BathSpec> baths() const { return baths_; }
    std::size_t size() const { return baths_.size(); }

    /// Q(0) = -ln eta^2.
    double eta_sq_log() const { return q0_; }
    double eta() const { return std::exp(-0.5 * q0_); }
    double eta_sq() const { return std::exp(-q0_); }

    cplx phase(cplx tau) const {
        cplx q{0.0, 0.0};
        for (const auto& b : baths_) q += phase_closed_form(b, tau);
        return q;
    }

    /// sum_b Q_b(tau - shift_b); missing shifts count as zero.
    cplx phase_shifted(cplx tau, std::span<const double> shifts) const {
        cplx q{0.0, 0.0};
        for (std::size_t i = 0; i < baths_.size(); ++i) {
            const double s = i < shifts.size() ? shifts[i] : 0.0;
            q += phase_closed_form(baths_[i], tau - s);
        }
        return q;
    }

    /// Real-time phase by frequency quadrature (reference route).
    cplx phase_reference(double tau) const {
        cplx q{0.0, 0.0};
        for (const auto& b : baths_) q += phase_quadrature(b, tau);
        return q;
    }

    quad::KernelScales scales() const {
        quad::KernelScales s{};
        double inner = 1e300, outer = 0.0;
        for (const auto& b : baths_) {
            inner = std::min(inner, 1.0 / b.omega_c);
            outer = std::max(outer, 1.0 / b.temperature);
        }
        s.inner = inner;
        s.outer = std::max(outer, inner);
        return s;
    }

    bool operator==(const BathKernel& o) const { return baths_ == o.baths_; }

private:
    std::vector<BathSpec> baths_;
    double q0_ = 0.0;
};

/// Q_{Lh}(t) + Q_{Lc}(t) for the composite left side.
inline cplx composite_phase(const BathSpec& hot, const BathSpec& cold, double tau) {
    return phase_closed_form(hot, cplx(tau, 0.0)) + phase_closed_form(cold, cplx(tau, 0.0));
}

enum class Axis { X, Y };

/// Polaron correlation kernels as functions of the phase value.
inline cplx correlation_from_phase(double eta_sq, double delta, Axis a, cplx q) {
    const double pref = eta_sq * delta * delta / 4.0;
    return a == Axis::X ? pref * special::coshm1(q) : pref * std::sinh(q);
}

inline cplx correlation_xy(const BathKernel& k, double delta, Axis a, cplx tau) {
    return correlation_from_phase(k.eta_sq(), delta, a, k.phase(tau));
}

/// D(t) = (Delta/2)^2 eta^2 e^{Q(t)}; D(0) = (Delta/2)^2.
inline cplx niba_kernel(const BathKernel& k, double delta, cplx tau) {
    return delta * delta / 4.0 * std::exp(k.phase(tau) - k.eta_sq_log());
}

/// D(t) - D(inf): the part of the NIBA kernel that decays.
inline cplx niba_kernel_decaying(double eta_sq, double delta, cplx q) {
    return delta * delta / 4.0 * eta_sq * special::expm1(q);
}

} // namespace qheat::bath
