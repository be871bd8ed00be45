// special.hpp: trigamma on the complex plane (recurrence + asymptotic series)

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace qheat::special {

namespace detail {

// B_2k for k = 1..8
inline constexpr std::array<double, 8> kBernoulli = {
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0,
};

// Valid for Re z >= 1/2.
inline std::complex<double> trigamma_right(std::complex<double> z) {
    std::complex<double> acc{0.0, 0.0};
    while (std::abs(z) < 12.0) {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    const std::complex<double> w = 1.0 / z;
    const std::complex<double> w2 = w * w;
    // 1/z + 1/(2z^2) + sum B_2k / z^(2k+1)
    std::complex<double> series{0.0, 0.0};
    for (int k = static_cast<int>(kBernoulli.size()) - 1; k >= 0; --k) {
        series = series * w2 + kBernoulli[static_cast<std::size_t>(k)];
    }
    series *= w2 * w;
    return acc + w + 0.5 * w2 + series;
}

} // namespace detail

/// psi_1(z) = sum_{n>=0} 1/(n+z)^2. Poles at the non-positive integers.
inline std::complex<double> trigamma(std::complex<double> z) {
    if (z.real() >= 0.5) return detail::trigamma_right(z);
    // psi_1(z) + psi_1(1-z) = pi^2 / sin^2(pi z)
    constexpr double pi = std::numbers::pi;
    std::complex<double> refl{0.0, 0.0};
    if (std::abs(z.imag()) < 20.0) {
        const std::complex<double> s = std::sin(pi * z);
        refl = (pi * pi) / (s * s);
    }
    return refl - detail::trigamma_right(1.0 - z);
}

inline double trigamma(double x) {
    return trigamma(std::complex<double>(x, 0.0)).real();
}

/// e^z - 1 without cancellation for small |z|.
inline std::complex<double> expm1(std::complex<double> z) {
    const std::complex<double> h = 0.5 * z;
    return 2.0 * std::sinh(h) * std::exp(h);
}

/// cosh(z) - 1 without cancellation for small |z|.
inline std::complex<double> coshm1(std::complex<double> z) {
    const std::complex<double> s = std::sinh(0.5 * z);
    return 2.0 * s * s;
}

} // namespace qheat::special
