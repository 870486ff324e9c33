// Beam-pattern analytics for far-field codewords on near-field users:
// focusing parameters, discrete and closed-form gains, threshold <-> s
// mapping, beamwidth, modified Rayleigh distance and the exact iteration
// threshold.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "nfbeam/geometry.hpp"
#include "nfbeam/specfun.hpp"

namespace nfbeam::pattern {

struct FocusingParams {
    double alpha = 0.0;  // N^2 d (1 - theta^2) / (8 r)
    double beta = 0.0;   // N (theta - phi) / 2
};

inline FocusingParams focusing_params(const geom::ArrayConfig& cfg, double theta,
                                      double r, double phi) {
    require(r > 0.0, "focusing_params: r > 0");
    require(std::fabs(theta) <= 1.0, "focusing_params: |theta| <= 1");
    const double n = cfg.n_elements;
    return {n * n * cfg.spacing_m * (1.0 - theta * theta) / (8.0 * r),
            0.5 * n * (theta - phi)};
}

// |b^H(theta, r) a(phi)| by direct N-term summation with the exact r^(n).
// This is the oracle every closed form is checked against.
inline double gain_discrete(const geom::ArrayConfig& cfg, double theta, double r,
                            double phi) {
    const geom::PolarPosition pos{theta, r};
    geom::check_position(pos);
    const double k = 2.0 * kPi / cfg.wavelength_m;
    const int n = cfg.n_elements;
    cdouble acc(0.0, 0.0);
    for (int m = 0; m < n; ++m) {
        const double delta = 0.5 * (2.0 * m - n + 1);
        const double rng = geom::element_range(cfg, pos, delta);
        acc += std::polar(1.0, k * (rng - r) + kPi * delta * phi);
    }
    return std::abs(acc) / n;
}

// Exact central gain |f~(theta, r, theta)| = |erf(e^{j3pi/4} sqrt(pi alpha))| / (2 sqrt(alpha)).
inline double central_gain_exact(double alpha) {
    require(alpha > 0.0, "central_gain_exact: alpha > 0");
    return std::abs(specfun::erf_complex(kRay34 * std::sqrt(kPi * alpha))) /
           (2.0 * std::sqrt(alpha));
}

// Large-alpha limit 1/(2 sqrt(alpha)).
inline double central_gain_asymptotic(double alpha) {
    require(alpha > 0.0, "central_gain_asymptotic: alpha > 0");
    return 0.5 / std::sqrt(alpha);
}

namespace detail {

// The pair erf(e^{j3pi/4} sqrt(pi)(beta -+ 2 alpha) / (2 sqrt(alpha))).
inline std::pair<cdouble, cdouble> edge_erfs(const FocusingParams& p) {
    const double scale = 0.5 * kSqrtPi / std::sqrt(p.alpha);
    return {specfun::erf_complex(kRay34 * scale * (p.beta - 2.0 * p.alpha)),
            specfun::erf_complex(kRay34 * scale * (p.beta + 2.0 * p.alpha))};
}

}  // namespace detail

// Closed-form |f~| = |erf(...) - erf(...)| / (4 sqrt(alpha)). Continuous in
// beta; at beta = 0 identical to central_gain_exact (the two erf terms merge).
inline double gain_closed_form(const FocusingParams& p) {
    if (p.alpha <= 0.0)
        throw std::domain_error(
            "gain_closed_form: alpha = 0 is degenerate (far-field sinc regime)");
    if (std::fabs(p.beta) < 1e-8) return central_gain_exact(p.alpha);
    const auto [e1, e2] = detail::edge_erfs(p);
    return std::abs(e1 - e2) / (4.0 * std::sqrt(p.alpha));
}

// Normalized gain, Eq.-(13) form: gain relative to the asymptotic central
// gain. Approaches 1 at beta = 0 for alpha >~ 4; small overshoot above 1 is
// genuine and not clipped.
inline double normalized_gain(const FocusingParams& p) {
    if (p.alpha <= 0.0)
        throw std::domain_error("normalized_gain: alpha = 0 is degenerate");
    const auto [e1, e2] = detail::edge_erfs(p);
    return 0.5 * std::abs(e1 - e2);
}

// Moderate-beta single-erf approximant as a function of the edge coordinate
// s = sqrt(pi) (beta - 2 alpha) / (2 sqrt(alpha)).
inline double normalized_gain_moderate(double s) {
    return 0.5 * std::abs(specfun::erf_complex(kRay34 * s) + 1.0);
}

inline double edge_coordinate(const FocusingParams& p) {
    return 0.5 * kSqrtPi * (p.beta - 2.0 * p.alpha) / std::sqrt(p.alpha);
}

inline double normalized_gain_moderate(const FocusingParams& p) {
    return normalized_gain_moderate(edge_coordinate(p));
}

// rho(s) = |erf(e^{j3pi/4} s) + 1| / 2, the threshold-to-edge mapping. It is
// strictly decreasing in s (Cornu-spiral distance from the -1 eye).
inline double rho_from_s(double s) { return normalized_gain_moderate(s); }

// Inverse of rho_from_s by bisection; rho in (0.05, 0.95). The nominal
// bracket [-4, 4] only reaches rho in ~(0.07, 0.93), so it is widened until
// the target is bracketed.
inline double s_from_rho(double rho) {
    if (!(rho > 0.05 && rho < 0.95))
        throw std::domain_error("s_from_rho: rho outside (0.05, 0.95)");
    if (rho == 0.5) return 0.0;
    double lo = -4.0, hi = 4.0;
    while (rho_from_s(lo) < rho) lo *= 1.5;
    while (rho_from_s(hi) > rho) hi *= 1.5;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = rho_from_s(mid);
        if (std::fabs(v - rho) <= 1e-12) return mid;
        (v > rho ? lo : hi) = mid;
        if (hi - lo < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

// Closed-form width B^rho(theta, r) = Nd(1-theta^2)/r + (4 s_rho/sqrt(pi)) sqrt(d(1-theta^2)/(2r)).
inline double beamwidth_closed(const geom::ArrayConfig& cfg, double theta, double r,
                               double rho) {
    require(r > 0.0, "beamwidth_closed: r > 0");
    require(std::fabs(theta) <= 1.0, "beamwidth_closed: |theta| <= 1");
    const double omt = 1.0 - theta * theta;
    const double s = s_from_rho(rho);
    return cfg.n_elements * cfg.spacing_m * omt / r +
           (4.0 * s / kSqrtPi) * std::sqrt(cfg.spacing_m * omt / (2.0 * r));
}

struct MainAngleSet {
    std::vector<double> angles;  // sorted grid angles above threshold
    double width = 0.0;          // Range(angles)
};

// Thresholds a sampled normalized pattern with strict ">" and returns the
// Main Angle Set; width is max - min so it is quantized to the sample step.
// Empty optional when nothing exceeds rho.
inline std::optional<MainAngleSet> beamwidth_measured(
    const std::vector<double>& grid_angles, const std::vector<double>& normalized,
    double rho) {
    require(grid_angles.size() == normalized.size(),
            "beamwidth_measured: size mismatch");
    MainAngleSet mas;
    for (std::size_t i = 0; i < grid_angles.size(); ++i)
        if (normalized[i] > rho) mas.angles.push_back(grid_angles[i]);
    if (mas.angles.empty()) return std::nullopt;
    std::sort(mas.angles.begin(), mas.angles.end());
    mas.width = mas.angles.back() - mas.angles.front();
    return mas;
}

// Modified Rayleigh distance, the r at which B^rho shrinks to p grid
// resolutions Delta_p = 2p/N. At (rho = 0.5, p = 3) this is N^2 d (1-theta^2)/6.
inline double modified_rayleigh(const geom::ArrayConfig& cfg, double theta, double rho,
                                double p) {
    require(std::fabs(theta) < 1.0, "modified_rayleigh: |theta| < 1");
    require(p > 0.0, "modified_rayleigh: p > 0");
    const double omt = 1.0 - theta * theta;
    const double s = s_from_rho(rho);
    const double d = cfg.spacing_m;
    const double n = cfg.n_elements;
    const double a = (4.0 * s / kSqrtPi) * std::sqrt(0.5 * d * omt);
    const double b = std::sqrt(8.0 * d * omt * (s * s / kPi + p));
    const double root = n / (4.0 * p) * (a + b);
    return root * root;
}

// Exact finite-alpha threshold, Eq. (26): the normalized value at the ideal
// s_rho edge once the central gain keeps its erf factor.
inline double exact_threshold(double alpha, double s_rho) {
    require(alpha > 0.0, "exact_threshold: alpha > 0");
    const cdouble num =
        specfun::erf_complex(kRay34 * s_rho) -
        specfun::erf_complex(kRay34 * (2.0 * std::sqrt(alpha * kPi) + s_rho));
    const cdouble den = specfun::erf_complex(kRay34 * std::sqrt(kPi * alpha));
    return 0.5 * std::abs(num / den);
}

}  // namespace nfbeam::pattern
