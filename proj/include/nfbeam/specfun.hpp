// Special functions backing the closed-form beam analytics and the Rician
// likelihood: error function of complex argument, modified Bessel functions
// I0/I1 with scaled and log variants, and complex-Gaussian sampling.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "nfbeam/common.hpp"

namespace nfbeam::specfun {

namespace detail {

using cldouble = std::complex<long double>;

// Maclaurin series erf(z) = 2/sqrt(pi) * sum (-1)^k z^(2k+1) / (k! (2k+1)),
// summed in extended precision. Cancellation grows like e^{|z|^2} on the
// real axis, which bounds the usable radius.
inline cdouble erf_series(cdouble z) {
    const cldouble zl(z.real(), z.imag());
    const cldouble zz = zl * zl;
    cldouble term = zl;
    cldouble sum = zl;
    for (int k = 1; k <= 600; ++k) {
        term *= -zz / static_cast<long double>(k);
        const cldouble contrib = term / static_cast<long double>(2 * k + 1);
        sum += contrib;
        if (std::abs(contrib) < 1e-25L * std::abs(sum)) break;
    }
    sum *= 2.0L / std::sqrt(3.14159265358979323846264338328L);
    return cdouble(static_cast<double>(sum.real()), static_cast<double>(sum.imag()));
}

// erfc(z) ~ e^{-z^2}/(z sqrt(pi)) * sum (-1)^m (2m-1)!!/(2z^2)^m, truncated
// at the smallest term. Requires Re z >= 0; relative accuracy ~e^{-|z|^2}.
inline cdouble erfc_asymptotic(cdouble z) {
    const cdouble inv2zz = 1.0 / (2.0 * z * z);
    cdouble sum = 1.0;
    cdouble term = 1.0;
    double prev = 1.0;
    for (int m = 1; m <= 300; ++m) {
        term *= -static_cast<double>(2 * m - 1) * inv2zz;
        const double mag = std::abs(term);
        if (mag >= prev) break;  // past the optimal truncation point
        sum += term;
        prev = mag;
        if (mag < 1e-18) break;
    }
    return std::exp(-z * z) / (z * kSqrtPi) * sum;
}

// 24-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double kGlx[24] = {
    -0.9951872199970213, -0.9747285559713095, -0.9382745520027328,
    -0.8864155270044011, -0.8200019859739029, -0.7401241915785544,
    -0.6480936519369755, -0.5454214713888396, -0.4337935076260451,
    -0.3150426796961634, -0.1911188674736163, -0.0640568928626056,
     0.0640568928626056,  0.1911188674736163,  0.3150426796961634,
     0.4337935076260451,  0.5454214713888396,  0.6480936519369755,
     0.7401241915785544,  0.8200019859739029,  0.8864155270044011,
     0.9382745520027328,  0.9747285559713095,  0.9951872199970213};
inline constexpr double kGlw[24] = {
    0.0123412297999872, 0.0285313886289337, 0.0442774388174198,
    0.0592985849154368, 0.0733464814110803, 0.0861901615319533,
    0.0976186521041139, 0.1074442701159656, 0.1155056680537256,
    0.1216704729278034, 0.1258374563468283, 0.1279381953467522,
    0.1279381953467522, 0.1258374563468283, 0.1216704729278034,
    0.1155056680537256, 0.1074442701159656, 0.0976186521041139,
    0.0861901615319533, 0.0733464814110803, 0.0592985849154368,
    0.0442774388174198, 0.0285313886289337, 0.0123412297999872};

// Bridges the annulus where neither the series nor the asymptotic branch
// meets the accuracy target: erf(z) = erf(z0) + 2/sqrt(pi) * int_{z0}^{z}
// e^{-t^2} dt along the straight segment, z0 on the same ray at |z0| = 4.4.
inline cdouble erf_ring(cdouble z) {
    const cdouble z0 = z * (4.4 / std::abs(z));
    const cdouble mid = 0.5 * (z0 + z);
    const cdouble half = 0.5 * (z - z0);
    cdouble acc = 0.0;
    for (int i = 0; i < 24; ++i) {
        const cdouble t = mid + half * kGlx[i];
        acc += kGlw[i] * std::exp(-t * t);
    }
    return erf_series(z0) + (2.0 / kSqrtPi) * half * acc;
}

inline cdouble erf_principal(cdouble z) {
    const double az = std::abs(z);
    if (az <= 4.4) return erf_series(z);
    if (az <= 5.8) return erf_ring(z);
    if (z.real() >= 0.0) return 1.0 - erfc_asymptotic(z);
    return erfc_asymptotic(-z) - 1.0;
}

}  // namespace detail

// Error function of a complex argument. Relative error <= 1e-10 for
// |z| <= 12 (validated against quadrature); along the e^{j3pi/4} rays the
// asymptotic branch stays accurate for arbitrarily large |z|. Odd and
// conjugate symmetry hold exactly by construction.
inline cdouble erf_complex(cdouble z) {
    require(std::isfinite(z.real()) && std::isfinite(z.imag()),
            "erf_complex: non-finite argument");
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    // Reduce to the first quadrant; transforms compose outermost-first.
    const bool reflect = z.imag() < 0.0;
    if (reflect) z = std::conj(z);
    const bool negate = z.real() < 0.0;
    if (negate) z = -std::conj(z);
    cdouble w = detail::erf_principal(z);
    if (negate) w = -std::conj(w);
    if (reflect) w = std::conj(w);
    return w;
}

namespace detail {

// I0/I1 power series; all terms positive, no cancellation.
inline double bessel_i0_series(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 80; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

inline double bessel_i1_series(double x) {
    const double q = 0.25 * x * x;
    double term = 0.5 * x, sum = term;
    for (int k = 1; k <= 80; ++k) {
        term *= q / (static_cast<double>(k) * (k + 1));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

// Scaled asymptotic tails e^{-x} I_nu(x) for x > 20, truncated at the
// smallest term (error ~e^{-2x}).
inline double bessel_scaled_asymptotic(double x, double mu) {
    const double inv8x = 1.0 / (8.0 * x);
    double term = 1.0, sum = 1.0, prev = 1.0;
    for (int k = 1; k <= 40; ++k) {
        const double num = mu - static_cast<double>(2 * k - 1) * (2 * k - 1);
        term *= -num * inv8x / static_cast<double>(k);
        const double mag = std::fabs(term);
        if (mag >= prev) break;
        sum += term;
        prev = mag;
        if (mag < 1e-18) break;
    }
    return sum / std::sqrt(2.0 * kPi * x);
}

inline void check_bessel_arg(double x) {
    require(std::isfinite(x) && x >= 0.0, "bessel: requires finite x >= 0");
}

}  // namespace detail

// e^{-x} I0(x); safe for any x >= 0.
inline double bessel_i0_scaled(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0) return detail::bessel_i0_series(x) * std::exp(-x);
    return detail::bessel_scaled_asymptotic(x, 0.0);
}

// e^{-x} I1(x).
inline double bessel_i1_scaled(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0) return detail::bessel_i1_series(x) * std::exp(-x);
    return detail::bessel_scaled_asymptotic(x, 4.0);
}

// I0(x); overflows (returns inf) past x ~ 713, use the scaled variant there.
inline double bessel_i0(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0) return detail::bessel_i0_series(x);
    return detail::bessel_scaled_asymptotic(x, 0.0) * std::exp(x);
}

inline double bessel_i1(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0) return detail::bessel_i1_series(x);
    return detail::bessel_scaled_asymptotic(x, 4.0) * std::exp(x);
}

// ln I0(x) without overflow for any x >= 0.
inline double log_i0(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0) return std::log(detail::bessel_i0_series(x));
    return x + std::log(detail::bessel_scaled_asymptotic(x, 0.0));
}

// I1(x)/I0(x); monotone increasing, in [0, 1).
inline double i1_over_i0(double x) {
    detail::check_bessel_arg(x);
    if (x <= 20.0)
        return detail::bessel_i1_series(x) / detail::bessel_i0_series(x);
    return detail::bessel_scaled_asymptotic(x, 4.0) /
           detail::bessel_scaled_asymptotic(x, 0.0);
}

// One CN(0, variance) draw via Box-Muller; real and imaginary parts are
// independent with variance/2 each. Bit-stable across platforms because it
// avoids std::normal_distribution.
inline cdouble sample_complex_gaussian(std::mt19937_64& rng, double variance) {
    require(std::isfinite(variance) && variance > 0.0,
            "sample_complex_gaussian: variance must be > 0");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u1 = unif(rng);
    while (u1 <= 0.0) u1 = unif(rng);
    const double u2 = unif(rng);
    const double mag = std::sqrt(-std::log(u1) * variance);
    return cdouble(mag * std::cos(2.0 * kPi * u2), mag * std::sin(2.0 * kPi * u2));
}

}  // namespace nfbeam::specfun
