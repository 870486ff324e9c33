// Amplitude-only maximum-likelihood refinement: joint Rician likelihood over
// the sweep, analytic score, initial amplitude/noise estimates from
// protected index regions, hybrid simulated-annealing + Adam search, and
// Monte-Carlo Fisher information / CRB.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nfbeam/geometry.hpp"
#include "nfbeam/specfun.hpp"

namespace nfbeam::mle {

struct MleBounds {
    double theta_min = -1.0, theta_max = 1.0;
    double r_min = 3.0;  // see notes: the classical Fresnel bound would
                         // exclude the canonical 5 m reference user
    double r_max = 0.0;  // filled from the array's Rayleigh distance

    static MleBounds for_array(const geom::ArrayConfig& cfg) {
        MleBounds b;
        b.r_max = geom::boundary_distances(cfg).rayleigh_m;
        return b;
    }
};

struct MleParams {
    double theta = 0.0;
    double r = 1.0;
    double amp_factor = 1.0;   // D, volts * meter
    double noise_power = 1.0;  // sigma^2, volts^2
};

struct AmplitudeObservation {
    std::vector<double> z;  // sweep amplitudes Z_n >= 0
    std::shared_ptr<const geom::Codebook> codebook;  // carries the angle grid

    int size() const { return static_cast<int>(z.size()); }
};

// Mean amplitude model u_n = (D / r) |b^H(theta, r) a(phi_n)| and its exact
// partial derivatives, evaluated for every codebook angle in one pass.
struct AmplitudeModel {
    std::vector<double> u, du_theta, du_r, du_amp;

    AmplitudeModel(const geom::ArrayConfig& cfg, const geom::Codebook& cb,
                   const MleParams& p, bool with_derivatives = true) {
        const int ns = cb.size();
        const int n = cfg.n_elements;
        const double k = 2.0 * kPi / cfg.wavelength_m;
        std::vector<cdouble> w(n), wt(n), wr(n);
        for (int m = 0; m < n; ++m) {
            const double delta = 0.5 * (2.0 * m - n + 1);
            const double rm = geom::element_range(cfg, {p.theta, p.r}, delta);
            const cdouble bconj = std::polar(1.0 / std::sqrt(static_cast<double>(n)),
                                             k * (rm - p.r));
            w[m] = bconj;
            if (with_derivatives) {
                const double dd = delta * cfg.spacing_m;
                const double dP_dth = k * (-p.r * dd) / rm;
                const double dP_dr = k * ((p.r - p.theta * dd) / rm - 1.0);
                wt[m] = cdouble(0.0, dP_dth) * bconj;
                wr[m] = cdouble(0.0, dP_dr) * bconj;
            }
        }
        u.resize(ns);
        if (with_derivatives) {
            du_theta.resize(ns);
            du_r.resize(ns);
            du_amp.resize(ns);
        }
        const double scale = p.amp_factor / p.r;
        for (int i = 0; i < ns; ++i) {
            const auto& a = cb.entries[i];
            cdouble s(0, 0), st(0, 0), sr(0, 0);
            if (with_derivatives) {
                for (int m = 0; m < n; ++m) {
                    s += w[m] * a[m];
                    st += wt[m] * a[m];
                    sr += wr[m] * a[m];
                }
            } else {
                for (int m = 0; m < n; ++m) s += w[m] * a[m];
            }
            const double g = std::max(std::abs(s), 1e-300);
            u[i] = scale * g;
            if (with_derivatives) {
                const double dg_th = (std::conj(s) * st).real() / g;
                const double dg_r = (std::conj(s) * sr).real() / g;
                du_theta[i] = scale * dg_th;
                du_r[i] = scale * dg_r - p.amp_factor / (p.r * p.r) * g;
                du_amp[i] = g / p.r;
            }
        }
    }
};

inline double amplitude_model(const geom::ArrayConfig& cfg, const MleParams& p,
                              double phi) {
    geom::Codebook cb;
    cb.angles = {phi};
    cb.entries = {geom::far_field_codeword(cfg, phi)};
    return AmplitudeModel(cfg, cb, p, false).u[0];
}

// Rice log-density ln f(z; u, sigma^2), Eq.-(30) form with ln I0 for
// stability. u = 0 degenerates to the Rayleigh log-density.
inline double rician_logpdf(double z, double u, double sigma2) {
    require(z >= 0.0, "rician_logpdf: z >= 0");
    require(u >= 0.0 && sigma2 > 0.0, "rician_logpdf: u >= 0, sigma2 > 0");
    if (z == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(2.0 * z / sigma2) - (z * z + u * u) / sigma2 +
           specfun::log_i0(2.0 * z * u / sigma2);
}

inline double log_likelihood_from_model(const std::vector<double>& z,
                                        const std::vector<double>& u, double sigma2) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        acc += rician_logpdf(z[i], u[i], sigma2);
    return acc;
}

inline double log_likelihood(const AmplitudeObservation& obs,
                             const geom::ArrayConfig& cfg, const MleParams& p) {
    const AmplitudeModel model(cfg, *obs.codebook, p, false);
    return log_likelihood_from_model(obs.z, model.u, p.noise_power);
}

using Score = std::array<double, 4>;  // d ell / d (theta, r, D, sigma^2)

inline Score score_from_model(const std::vector<double>& z, const AmplitudeModel& m,
                              double sigma2) {
    Score s{0.0, 0.0, 0.0, 0.0};
    const double inv_s2 = 1.0 / sigma2;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double ratio = specfun::i1_over_i0(2.0 * z[i] * m.u[i] * inv_s2);
        const double dl_du = (-2.0 * m.u[i] + 2.0 * z[i] * ratio) * inv_s2;
        s[0] += dl_du * m.du_theta[i];
        s[1] += dl_du * m.du_r[i];
        s[2] += dl_du * m.du_amp[i];
        s[3] += (-1.0 + (z[i] * z[i] + m.u[i] * m.u[i]) * inv_s2 -
                 ratio * 2.0 * z[i] * m.u[i] * inv_s2) * inv_s2;
    }
    return s;
}

// Analytic gradient of the log-likelihood; matches central finite differences
// to ~1e-6 relative on scaled parameters.
inline Score score(const AmplitudeObservation& obs, const geom::ArrayConfig& cfg,
                   const MleParams& p) {
    const AmplitudeModel model(cfg, *obs.codebook, p, true);
    return score_from_model(obs.z, model, p.noise_power);
}

struct ProtectedRegions {
    std::vector<int> signal_set;  // H: cluster minus guard edges
    std::vector<int> noise_set;   // L: indices > guard away from the cluster
    int guard = 0;
};

// H = C* trimmed by `guard` per edge (at least the peak survives); L = all
// indices at distance > guard from C*.
inline ProtectedRegions protected_regions(const std::vector<int>& cluster,
                                          const std::vector<double>& amplitudes,
                                          int n_total, int guard) {
    require(guard >= 0, "protected_regions: guard >= 0");
    require(!cluster.empty(), "protected_regions: empty cluster");
    ProtectedRegions pr;
    pr.guard = guard;
    if (static_cast<int>(cluster.size()) > 2 * guard) {
        pr.signal_set.assign(cluster.begin() + guard, cluster.end() - guard);
    } else {
        int peak = cluster.front();
        for (int idx : cluster)
            if (amplitudes[idx] > amplitudes[peak]) peak = idx;
        pr.signal_set = {peak};
    }
    const int lo = cluster.front() - guard;
    const int hi = cluster.back() + guard;
    for (int n = 0; n < n_total; ++n)
        if (n < lo || n > hi) pr.noise_set.push_back(n);
    return pr;
}

enum class NoiseEstimatorMode {
    mean_square,     // mean of z^2 over L: unbiased for sigma^2 (default)
    literal_paper,   // mean of z over L, as printed; estimates sqrt(pi sigma^2)/2
};

inline double init_noise_power(const AmplitudeObservation& obs,
                               const std::vector<int>& noise_set,
                               NoiseEstimatorMode mode = NoiseEstimatorMode::mean_square) {
    if (noise_set.size() < 16)
        throw insufficient_noise_region_error(
            "init_noise_power: noise region smaller than 16 beams");
    double acc = 0.0;
    for (int idx : noise_set) {
        const double z = obs.z[idx];
        acc += mode == NoiseEstimatorMode::mean_square ? z * z : z;
    }
    return acc / static_cast<double>(noise_set.size());
}

struct AmpFactorInit {
    double value = 0.0;
    bool least_squares_fallback = false;  // discriminant < 0 (low SNR)
};

// Positive root of the quadratic stationarity condition for D, using
// A_n = u_n / D evaluated at the coarse estimate. Falls back to the
// least-squares solution when the discriminant goes negative.
inline AmpFactorInit init_amp_factor(const AmplitudeObservation& obs,
                                     const std::vector<double>& a_coeff,
                                     const std::vector<int>& signal_set,
                                     double sigma2) {
    double za = 0.0, a2 = 0.0;
    for (int idx : signal_set) {
        za += obs.z[idx] * a_coeff[idx];
        a2 += a_coeff[idx] * a_coeff[idx];
    }
    require(a2 > 0.0, "init_amp_factor: degenerate signal region");
    const double disc =
        za * za - static_cast<double>(signal_set.size()) * sigma2 * a2;
    if (disc >= 0.0) return {(za + std::sqrt(disc)) / (2.0 * a2), false};
    return {za / a2, true};
}

struct OptimizeSchedule {
    int cycles = 2;            // SA + Adam rounds (second round re-anneals with
                               // the updated D, sigma^2)
    int sa_iterations = 200;
    double sa_decay = 0.95;
    double sa_theta_scale = 0.0;   // 0: one codebook grid step
    double sa_range_fraction = 0.2;
    double sa_energy_t0 = 5.0;
    int adam_iterations = 500;
    double adam_lr = 1e-2;         // decays as lr / (1 + 3 t / iterations)
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double grad_tolerance = 1e-6;
    double r_unit = 10.0;          // scaled-coordinate units
    int sweep_restarts = 4;        // final theta-offset basin sweep
    int sweep_iterations = 200;
};

struct OptimizeResult {
    MleParams params;
    double log_lik = 0.0;
    int iterations = 0;  // total Adam iterations across cycles and restarts
};

namespace detail {

inline double standard_normal(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u1 = unif(rng);
    while (u1 <= 0.0) u1 = unif(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * unif(rng));
}

struct AdamState {
    std::array<double, 4> m{}, v{};
    int t = 0;
};

// Adam ascent on scaled coordinates from `start`; returns the best-ell point
// visited. `track` accumulates the iteration count.
inline std::pair<MleParams, double> adam_ascent(
    const AmplitudeObservation& obs, const geom::ArrayConfig& cfg,
    const MleBounds& bounds, MleParams start, double lr0, int iterations,
    const OptimizeSchedule& sched, double theta_unit, double d_unit, double s2_unit,
    int& track) {
    const std::array<double, 4> unit{theta_unit, sched.r_unit, d_unit, s2_unit};
    std::array<double, 4> x{start.theta / unit[0], start.r / unit[1],
                            start.amp_factor / unit[2], start.noise_power / unit[3]};
    AdamState st;
    auto params_at = [&](const std::array<double, 4>& q) {
        return MleParams{q[0] * unit[0], q[1] * unit[1], q[2] * unit[2],
                         q[3] * unit[3]};
    };
    MleParams best_p = start;
    double best_l = log_likelihood(obs, cfg, start);
    for (int t = 1; t <= iterations; ++t) {
        ++track;
        const MleParams p = params_at(x);
        const AmplitudeModel model(cfg, *obs.codebook, p, true);
        const Score g = score_from_model(obs.z, model, p.noise_power);
        const double ll = log_likelihood_from_model(obs.z, model.u, p.noise_power);
        if (ll > best_l) {
            best_l = ll;
            best_p = p;
        }
        std::array<double, 4> gs{g[0] * unit[0], g[1] * unit[1], g[2] * unit[2],
                                 g[3] * unit[3]};
        double gnorm = 0.0;
        for (double v : gs) gnorm += v * v;
        if (std::sqrt(gnorm) < sched.grad_tolerance) break;
        const double lr = lr0 / (1.0 + 3.0 * static_cast<double>(t) / iterations);
        st.t = t;
        for (int i = 0; i < 4; ++i) {
            st.m[i] = sched.adam_beta1 * st.m[i] + (1.0 - sched.adam_beta1) * gs[i];
            st.v[i] = sched.adam_beta2 * st.v[i] + (1.0 - sched.adam_beta2) * gs[i] * gs[i];
            const double mh = st.m[i] / (1.0 - std::pow(sched.adam_beta1, t));
            const double vh = st.v[i] / (1.0 - std::pow(sched.adam_beta2, t));
            x[i] += lr * mh / (std::sqrt(vh) + 1e-8);
        }
        x[0] = std::clamp(x[0], bounds.theta_min / unit[0], bounds.theta_max / unit[0]);
        x[1] = std::clamp(x[1], bounds.r_min / unit[1], bounds.r_max / unit[1]);
        x[2] = std::max(x[2], 1e-9);
        x[3] = std::max(x[3], 1e-9);
    }
    const MleParams p_end = params_at(x);
    const double l_end = log_likelihood(obs, cfg, p_end);
    if (l_end > best_l) return {p_end, l_end};
    return {best_p, best_l};
}

}  // namespace detail

// Hybrid search for min -ell: SA proposes (theta, r) moves with D and
// sigma^2 pinned at their current estimates, Adam then refines all four
// parameters on rescaled coordinates; two such cycles are run (the second
// re-anneals with corrected D and sigma^2), followed by a short multi-start
// sweep over sub-grid theta offsets. Returns the best-likelihood point
// visited anywhere.
inline OptimizeResult optimize(const AmplitudeObservation& obs,
                               const geom::ArrayConfig& cfg, const MleParams& init,
                               const OptimizeSchedule& sched, const MleBounds& bounds,
                               std::mt19937_64& rng) {
    const double theta_unit = sched.sa_theta_scale > 0.0
                                  ? sched.sa_theta_scale
                                  : obs.codebook->angle_step();
    OptimizeResult out;
    MleParams cur = init;
    double cur_ll = log_likelihood(obs, cfg, cur);

    for (int cycle = 0; cycle < sched.cycles; ++cycle) {
        // SA phase on (theta, r); Metropolis on -ell.
        double temp = 1.0;
        MleParams sa_best = cur;
        double sa_best_ll = cur_ll;
        MleParams walker = cur;
        double walker_ll = cur_ll;
        const double r_scale = sched.sa_range_fraction * cur.r;
        for (int it = 0; it < sched.sa_iterations; ++it) {
            MleParams prop = walker;
            prop.theta = std::clamp(
                walker.theta + temp * theta_unit * detail::standard_normal(rng),
                bounds.theta_min, bounds.theta_max);
            prop.r = std::clamp(walker.r + temp * r_scale * detail::standard_normal(rng),
                                bounds.r_min, bounds.r_max);
            const double ll = log_likelihood(obs, cfg, prop);
            const double t_energy = std::max(sched.sa_energy_t0 * temp, 1e-12);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            if (ll > walker_ll || unif(rng) < std::exp((ll - walker_ll) / t_energy)) {
                walker = prop;
                walker_ll = ll;
                if (ll > sa_best_ll) {
                    sa_best = prop;
                    sa_best_ll = ll;
                }
            }
            temp *= sched.sa_decay;
        }
        // Adam phase on all four parameters.
        auto [p_adam, ll_adam] = detail::adam_ascent(
            obs, cfg, bounds, sa_best, sched.adam_lr, sched.adam_iterations, sched,
            theta_unit, std::max(sa_best.amp_factor, 1e-300),
            std::max(sa_best.noise_power, 1e-300), out.iterations);
        cur = p_adam;
        cur_ll = ll_adam;
    }

    // Basin sweep: the likelihood's sub-grid ripples occasionally trap the
    // trajectory half a grid step off; restart around the incumbent and keep
    // the best endpoint.
    MleParams best = cur;
    double best_ll = cur_ll;
    const std::array<double, 4> offsets{-1.0, -0.5, 0.5, 1.0};
    for (int i = 0; i < std::min<int>(sched.sweep_restarts, 4); ++i) {
        MleParams start = cur;
        start.theta = std::clamp(cur.theta + offsets[i] * theta_unit,
                                 bounds.theta_min, bounds.theta_max);
        auto [p_s, ll_s] = detail::adam_ascent(
            obs, cfg, bounds, start, 0.5 * sched.adam_lr, sched.sweep_iterations,
            sched, theta_unit, std::max(cur.amp_factor, 1e-300),
            std::max(cur.noise_power, 1e-300), out.iterations);
        if (ll_s > best_ll) {
            best = p_s;
            best_ll = ll_s;
        }
    }
    out.params = best;
    out.log_lik = best_ll;
    return out;
}

struct FisherInfo {
    std::array<double, 16> matrix{};    // row-major 4x4
    std::array<double, 16> std_error{};  // Monte-Carlo standard errors
    std::array<double, 4> crb_diag{};
    bool pseudo_inverse = false;         // condition number exceeded 1e8
    double condition = 0.0;
};

// Monte-Carlo Fisher information: per-index score outer products summed over
// the sweep (the samples are independent), averaged over n_mc synthetic
// draws at the given parameters. CRB diagonal from the (pseudo-)inverse.
inline FisherInfo fisher_info(const geom::ArrayConfig& cfg,
                              const geom::Codebook& codebook, const MleParams& p,
                              int n_mc, std::mt19937_64& rng) {
    require(n_mc >= 2, "fisher_info: n_mc >= 2");
    const AmplitudeModel model(cfg, codebook, p, true);
    const int ns = codebook.size();
    const double inv_s2 = 1.0 / p.noise_power;
    Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d acc2 = Eigen::Matrix4d::Zero();
    for (int rep = 0; rep < n_mc; ++rep) {
        Eigen::Matrix4d x = Eigen::Matrix4d::Zero();
        for (int i = 0; i < ns; ++i) {
            const cdouble w = specfun::sample_complex_gaussian(rng, p.noise_power);
            const double z = std::abs(model.u[i] + w);
            const double ratio = specfun::i1_over_i0(2.0 * z * model.u[i] * inv_s2);
            const double dl_du = (-2.0 * model.u[i] + 2.0 * z * ratio) * inv_s2;
            Eigen::Vector4d s;
            s << dl_du * model.du_theta[i], dl_du * model.du_r[i],
                dl_du * model.du_amp[i],
                (-1.0 + (z * z + model.u[i] * model.u[i]) * inv_s2 -
                 ratio * 2.0 * z * model.u[i] * inv_s2) * inv_s2;
            x += s * s.transpose();
        }
        acc += x;
        acc2 += x.cwiseProduct(x);
    }
    const Eigen::Matrix4d info = acc / n_mc;
    const Eigen::Matrix4d var =
        (acc2 / n_mc - info.cwiseProduct(info)) / std::max(1, n_mc - 1);

    FisherInfo out;
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(info,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(3);
    out.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    Eigen::Matrix4d inv;
    if (out.condition > 1e8) {
        out.pseudo_inverse = true;
        Eigen::Vector4d sinv = svd.singularValues();
        for (int i = 0; i < 4; ++i)
            sinv(i) = sinv(i) > smax * 1e-12 ? 1.0 / sinv(i) : 0.0;
        inv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
    } else {
        inv = info.inverse();
    }
    for (int i = 0; i < 4; ++i) {
        out.crb_diag[i] = inv(i, i);
        for (int j = 0; j < 4; ++j) {
            out.matrix[4 * i + j] = info(i, j);
            out.std_error[4 * i + j] = std::sqrt(std::max(0.0, var(i, j)));
        }
    }
    return out;
}

}  // namespace nfbeam::mle
