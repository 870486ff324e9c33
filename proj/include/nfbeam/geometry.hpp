// Array geometry, near-field channel and steering vectors, DFT codebooks and
// synthesis of noisy training sweeps.

#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "nfbeam/common.hpp"
#include "nfbeam/specfun.hpp"

namespace nfbeam::geom {

struct ArrayConfig {
    int n_elements = 512;
    double carrier_hz = 1e11;
    double wavelength_m = kSpeedOfLight / 1e11;
    double spacing_m = 0.5 * kSpeedOfLight / 1e11;

    static ArrayConfig paper_profile() { return ArrayConfig{}; }

    static ArrayConfig make(int n, double carrier_hz, double spacing_m = 0.0) {
        require(n >= 2, "ArrayConfig: N >= 2");
        require(carrier_hz > 0.0, "ArrayConfig: carrier must be > 0");
        ArrayConfig c;
        c.n_elements = n;
        c.carrier_hz = carrier_hz;
        c.wavelength_m = kSpeedOfLight / carrier_hz;
        c.spacing_m = spacing_m > 0.0 ? spacing_m : 0.5 * c.wavelength_m;
        return c;
    }

    // Aperture convention: N*d, matching the slope checks (Nd = 0.768 m for
    // the default profile).
    double aperture_m() const { return n_elements * spacing_m; }
};

struct PolarPosition {
    double theta = 0.0;  // spatial angle sin(AoD), in [-1, 1]
    double range_m = 1.0;
};

inline void check_position(const PolarPosition& p) {
    require(std::fabs(p.theta) <= 1.0 && p.range_m > 0.0,
            "PolarPosition: requires |theta| <= 1 and r > 0");
}

using WeightVector = std::vector<cdouble>;

// delta_n = (2n - N + 1) / 2, antisymmetric element offsets in units of d.
inline std::vector<double> element_offsets(const ArrayConfig& cfg) {
    std::vector<double> off(cfg.n_elements);
    for (int n = 0; n < cfg.n_elements; ++n)
        off[n] = 0.5 * (2.0 * n - cfg.n_elements + 1);
    return off;
}

// Exact element-to-user distance r^(n) = sqrt(r^2 + delta^2 d^2 - 2 r theta delta d).
inline double element_range(const ArrayConfig& cfg, const PolarPosition& pos,
                            double delta_n) {
    const double dd = delta_n * cfg.spacing_m;
    return std::sqrt(pos.range_m * pos.range_m + dd * dd -
                     2.0 * pos.range_m * pos.theta * dd);
}

// Far-field codeword a(phi): entry n is e^{+j pi delta_n phi} / sqrt(N).
// The sign makes b(theta, r) -> a(theta) as r -> infinity.
inline WeightVector far_field_codeword(const ArrayConfig& cfg, double phi) {
    const int n = cfg.n_elements;
    WeightVector a(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m) {
        const double delta = 0.5 * (2.0 * m - n + 1);
        a[m] = std::polar(norm, kPi * delta * phi);
    }
    return a;
}

// Near-field steering vector b(theta, r), Eq. (2) form with the exact r^(n)
// (no Taylor truncation); unit norm.
inline WeightVector steering_vector(const ArrayConfig& cfg, const PolarPosition& pos) {
    check_position(pos);
    const int n = cfg.n_elements;
    WeightVector b(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    const double k = 2.0 * kPi / cfg.wavelength_m;
    for (int m = 0; m < n; ++m) {
        const double delta = 0.5 * (2.0 * m - n + 1);
        b[m] = std::polar(norm, -k * (element_range(cfg, pos, delta) - pos.range_m));
    }
    return b;
}

// LoS channel h = sqrt(N) g e^{-j 2 pi r / lambda} b(theta, r), g = lambda/(4 pi r).
inline std::vector<cdouble> channel_vector(const ArrayConfig& cfg,
                                           const PolarPosition& pos) {
    check_position(pos);
    const double g = cfg.wavelength_m / (4.0 * kPi * pos.range_m);
    const cdouble scale =
        std::sqrt(static_cast<double>(cfg.n_elements)) * g *
        std::polar(1.0, -2.0 * kPi * pos.range_m / cfg.wavelength_m);
    auto h = steering_vector(cfg, pos);
    for (auto& v : h) v *= scale;
    return h;
}

inline double channel_gain(const ArrayConfig& cfg, double range_m) {
    return cfg.wavelength_m / (4.0 * kPi * range_m);
}

// h^H v (pilot x = 1) plus noise.
inline cdouble receive(const std::vector<cdouble>& h, const WeightVector& v,
                       cdouble noise = cdouble(0.0, 0.0)) {
    require(h.size() == v.size(), "receive: dimension mismatch");
    cdouble acc(0.0, 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) acc += std::conj(h[i]) * v[i];
    return acc + noise;
}

enum class CodebookKind { dft, polar };

struct Codebook {
    CodebookKind kind = CodebookKind::dft;
    std::vector<double> angles;       // strictly increasing
    std::vector<double> ranges_m;     // polar kind only; parallel to angles
    std::vector<WeightVector> entries;

    int size() const { return static_cast<int>(entries.size()); }
    double angle_step() const {
        return angles.size() > 1 ? angles[1] - angles[0] : 2.0;
    }
};

// DFT codebook with n_samples angles phi_n = (2n - Ns + 1)/Ns.
inline Codebook dft_codebook(const ArrayConfig& cfg, int n_samples) {
    require(n_samples >= 2, "dft_codebook: n_samples >= 2");
    Codebook cb;
    cb.kind = CodebookKind::dft;
    cb.angles.resize(n_samples);
    cb.entries.resize(n_samples);
    for (int n = 0; n < n_samples; ++n) {
        cb.angles[n] = (2.0 * n - n_samples + 1) / n_samples;
        cb.entries[n] = far_field_codeword(cfg, cb.angles[n]);
    }
    return cb;
}

// Polar codebook: the DFT angle grid times `rings` distances sampled
// uniformly in 1/r between 1/r_max and 1/r_min.
inline Codebook polar_codebook(const ArrayConfig& cfg, int n_samples, int rings,
                               double r_min, double r_max) {
    require(rings >= 2 && r_min > 0.0 && r_max > r_min,
            "polar_codebook: need rings >= 2 and 0 < r_min < r_max");
    Codebook cb;
    cb.kind = CodebookKind::polar;
    cb.angles.reserve(static_cast<std::size_t>(n_samples) * rings);
    cb.ranges_m.reserve(cb.angles.capacity());
    cb.entries.reserve(cb.angles.capacity());
    for (int n = 0; n < n_samples; ++n) {
        const double phi = (2.0 * n - n_samples + 1) / n_samples;
        for (int s = 0; s < rings; ++s) {
            const double inv = 1.0 / r_max + (1.0 / r_min - 1.0 / r_max) *
                                                 (static_cast<double>(s) / (rings - 1));
            const double r = 1.0 / inv;
            cb.angles.push_back(phi);
            cb.ranges_m.push_back(r);
            cb.entries.push_back(steering_vector(cfg, {phi, r}));
        }
    }
    return cb;
}

struct SweepMeasurement {
    std::vector<cdouble> complex_samples;  // y(v_n)
    std::vector<double> amplitudes;        // z_n = |y(v_n)|
    double noise_power = 0.0;
    std::shared_ptr<const Codebook> codebook;
    std::map<double, cdouble> reference_samples;  // angle -> y(a(angle))
};

inline cdouble maybe_noise(std::mt19937_64& rng, double noise_power) {
    return noise_power > 0.0 ? specfun::sample_complex_gaussian(rng, noise_power)
                             : cdouble(0.0, 0.0);
}

// One noisy sample per codeword; deterministic under a fixed seed.
inline SweepMeasurement run_sweep(const ArrayConfig& cfg, const PolarPosition& pos,
                                  std::shared_ptr<const Codebook> codebook,
                                  double noise_power, std::mt19937_64& rng) {
    require(noise_power >= 0.0, "run_sweep: noise_power >= 0");
    const auto h = channel_vector(cfg, pos);
    SweepMeasurement sweep;
    sweep.codebook = codebook;
    sweep.noise_power = noise_power;
    const int n = codebook->size();
    sweep.complex_samples.resize(n);
    sweep.amplitudes.resize(n);
    for (int i = 0; i < n; ++i) {
        sweep.complex_samples[i] =
            receive(h, codebook->entries[i], maybe_noise(rng, noise_power));
        sweep.amplitudes[i] = std::abs(sweep.complex_samples[i]);
    }
    return sweep;
}

// Appends one reference measurement y(a(angle)) with a freshly generated
// off-grid codeword. Overhead bookkeeping is the caller's concern.
inline SweepMeasurement measure_reference(const ArrayConfig& cfg,
                                          const PolarPosition& pos, double angle,
                                          double noise_power, std::mt19937_64& rng,
                                          SweepMeasurement sweep) {
    require(std::fabs(angle) <= 1.0, "measure_reference: |angle| <= 1");
    const auto h = channel_vector(cfg, pos);
    sweep.reference_samples[angle] =
        receive(h, far_field_codeword(cfg, angle), maybe_noise(rng, noise_power));
    return sweep;
}

// Classical near-field boundaries from the N*d aperture.
struct BoundaryDistances {
    double fresnel_m = 0.0;
    double rayleigh_m = 0.0;
};

inline BoundaryDistances boundary_distances(const ArrayConfig& cfg) {
    const double ap = cfg.aperture_m();
    return {0.5 * std::sqrt(ap * ap * ap / cfg.wavelength_m),
            2.0 * ap * ap / cfg.wavelength_m};
}

}  // namespace nfbeam::geom
