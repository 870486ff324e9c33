// Low-complexity beam training: sweep clustering, coarse angle/distance
// estimation with median-k candidate selection, and the exact-threshold
// iterative refinement.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "nfbeam/geometry.hpp"
#include "nfbeam/pattern.hpp"

namespace nfbeam::train {

struct ClusterSet {
    std::vector<std::vector<int>> clusters;
    double threshold_used = 0.0;
    int gap = 0;
};

enum class WidthMode {
    interpolated,  // sub-grid rho-crossings by linear interpolation (default)
    grid,          // literal Range of above-threshold grid angles
};

struct TrainParams {
    double rho = 0.5;          // width threshold
    double rho2_factor = 0.65; // cluster threshold as fraction of max amplitude
    int gap = 8;               // cluster gap L
    int k = 3;                 // median-k candidates
    double p = 3.0;            // beam width scaling factor
    double epsilon = 1e-4;     // width convergence tolerance
    int i_max = 10;            // refinement iteration cap
    double alpha_min = 1.0;    // skip refinement below this focusing gain
    double damping = 0.5;      // relaxation on the alpha update
    WidthMode width_mode = WidthMode::interpolated;
};

inline constexpr double kFarRange = std::numeric_limits<double>::infinity();

struct CandidateRecord {
    double theta = 0.0;
    double range_m = kFarRange;
    double response = 0.0;  // winner-probe amplitude
};

struct PositionEstimate {
    double theta_hat = 0.0;
    double r_hat = kFarRange;   // kFarRange sentinel for far-field users
    bool near_field = false;
    geom::WeightVector codeword;
    enum class Method { coarse, refined, mle } method = Method::coarse;
    std::vector<CandidateRecord> candidates;
    int iterations = 0;      // refinement iterations run
    bool converged = true;   // width-convergence flag
    int probes_used = 0;     // references + winner probes beyond the sweep
};

// Algorithm-1 clustering: ascending scan, an above-threshold index joins the
// current cluster iff its gap to the previous member is <= L.
inline ClusterSet cluster_indices(const std::vector<double>& amplitudes, double rho2,
                                  int gap) {
    require(gap >= 1, "cluster_indices: L >= 1");
    ClusterSet out;
    out.threshold_used = rho2;
    out.gap = gap;
    std::vector<int> current;
    int last = -1;
    for (int n = 0; n < static_cast<int>(amplitudes.size()); ++n) {
        if (!(amplitudes[n] > rho2)) continue;
        if (!current.empty() && n - last > gap) {
            out.clusters.push_back(std::move(current));
            current.clear();
        }
        current.push_back(n);
        last = n;
    }
    if (!current.empty()) out.clusters.push_back(std::move(current));
    return out;
}

// Cluster with the highest peak amplitude; ties go to the lower start index.
inline const std::vector<int>& select_best_cluster(const ClusterSet& set,
                                                   const std::vector<double>& amplitudes) {
    if (set.clusters.empty())
        throw no_signal_error("select_best_cluster: no clusters above threshold");
    const std::vector<int>* best = nullptr;
    double best_peak = -1.0;
    for (const auto& c : set.clusters) {
        double peak = 0.0;
        for (int idx : c) peak = std::max(peak, amplitudes[idx]);
        if (peak > best_peak) {
            best_peak = peak;
            best = &c;
        }
    }
    return *best;
}

struct AngleEstimate {
    double theta0 = 0.0;              // midpoint of the Main Angle Set
    std::vector<int> candidate_idx;   // k nearest grid indices, center first
    std::vector<int> best_cluster;
    ClusterSet clusters;
};

// rho2 = rho2_factor * max amplitude; theta0 = midpoint of the best cluster's
// angle span; candidates are the nearest grid angle plus alternating
// immediate neighbours.
inline AngleEstimate estimate_angle(const geom::SweepMeasurement& sweep,
                                    const TrainParams& params) {
    const auto& z = sweep.amplitudes;
    require(!z.empty(), "estimate_angle: empty sweep");
    const double zmax = *std::max_element(z.begin(), z.end());
    AngleEstimate est;
    est.clusters = cluster_indices(z, params.rho2_factor * zmax, params.gap);
    est.best_cluster = select_best_cluster(est.clusters, z);
    const auto& angles = sweep.codebook->angles;
    est.theta0 = 0.5 * (angles[est.best_cluster.front()] +
                        angles[est.best_cluster.back()]);
    const int ns = sweep.codebook->size();
    int nearest = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ns; ++i) {
        const double d = std::fabs(angles[i] - est.theta0);
        if (d < dist) {
            dist = d;
            nearest = i;
        }
    }
    est.candidate_idx.push_back(nearest);
    for (int step = 1; static_cast<int>(est.candidate_idx.size()) < params.k; ++step) {
        if (nearest - step >= 0) est.candidate_idx.push_back(nearest - step);
        if (static_cast<int>(est.candidate_idx.size()) < params.k && nearest + step < ns)
            est.candidate_idx.push_back(nearest + step);
        if (step > ns) break;
    }
    return est;
}

namespace detail {

// Search window: the best cluster extended by one cluster length per side.
// Keeps the rho-level set local to the main lobe so isolated noise spikes
// cannot inflate Range(.).
struct WidthContext {
    int lo = 0, hi = 0;  // inclusive window
    int peak = 0;
};

inline WidthContext make_width_context(const std::vector<int>& cluster,
                                       const std::vector<double>& z, int ns) {
    WidthContext ctx;
    const int span = static_cast<int>(cluster.size());
    ctx.lo = std::max(0, cluster.front() - span);
    ctx.hi = std::min(ns - 1, cluster.back() + span);
    ctx.peak = cluster.front();
    for (int idx : cluster)
        if (z[idx] > z[ctx.peak]) ctx.peak = idx;
    return ctx;
}

}  // namespace detail

// Width of the normalized pattern z_n / ref above `rho`, measured inside the
// cluster window. Interpolated mode extends each edge to the linear
// rho-crossing between the outermost above sample and its below neighbour.
inline std::optional<pattern::MainAngleSet> measure_width(
    const geom::SweepMeasurement& sweep, const detail::WidthContext& ctx,
    double ref_amplitude, double rho, WidthMode mode) {
    require(ref_amplitude > 0.0, "measure_width: reference amplitude must be > 0");
    const auto& z = sweep.amplitudes;
    const auto& angles = sweep.codebook->angles;
    int lo = -1, hi = -1;
    for (int n = ctx.lo; n <= ctx.hi; ++n) {
        if (z[n] / ref_amplitude > rho) {
            if (lo < 0) lo = n;
            hi = n;
        }
    }
    if (lo < 0) return std::nullopt;
    pattern::MainAngleSet mas;
    for (int n = lo; n <= hi; ++n)
        if (z[n] / ref_amplitude > rho) mas.angles.push_back(angles[n]);
    mas.width = angles[hi] - angles[lo];
    if (mode == WidthMode::interpolated) {
        const double step = sweep.codebook->angle_step();
        const int ns = sweep.codebook->size();
        const double glo = z[lo] / ref_amplitude;
        const double ghi = z[hi] / ref_amplitude;
        if (lo > 0) {
            const double gprev = z[lo - 1] / ref_amplitude;
            if (glo > gprev) mas.width += step * (glo - rho) / (glo - gprev);
        }
        if (hi < ns - 1) {
            const double gnext = z[hi + 1] / ref_amplitude;
            if (ghi > gnext) mas.width += step * (ghi - rho) / (ghi - gnext);
        }
    }
    return mas;
}

// Per-candidate width against the candidate's own reference sample.
inline std::optional<pattern::MainAngleSet> measure_width_for_candidate(
    const geom::SweepMeasurement& sweep, const std::vector<int>& cluster,
    double candidate_angle, double rho_effective, WidthMode mode) {
    const auto it = sweep.reference_samples.find(candidate_angle);
    require(it != sweep.reference_samples.end(),
            "measure_width_for_candidate: reference sample missing");
    const auto ctx = detail::make_width_context(cluster, sweep.amplitudes,
                                                sweep.codebook->size());
    return measure_width(sweep, ctx, std::abs(it->second), rho_effective, mode);
}

// Closed-form inversion of the width, Eq.-(25) form; exact inverse of
// beamwidth_closed. With rho = 0.5 it reduces to r = N d (1 - theta^2) / B.
inline double distance_from_width(const geom::ArrayConfig& cfg, double theta_hat,
                                  double width, double rho) {
    require(width > 0.0, "distance_from_width: width must be > 0");
    const double s = pattern::s_from_rho(rho);
    const double omt = 1.0 - theta_hat * theta_hat;
    const double root = std::sqrt(2.0 / kPi) * s +
                        std::sqrt(2.0 * s * s / kPi + width * cfg.n_elements);
    return cfg.spacing_m * omt / (width * width) * root * root;
}

// Measurement hooks the training loop needs beyond the recorded sweep: one
// reference probe per candidate angle and one beamformed response probe per
// candidate codeword. In simulation both draw fresh noise from the trial's
// generator.
struct ProbeInterface {
    std::function<cdouble(double angle)> reference;
    std::function<double(const geom::WeightVector&)> response;
};

struct TrainOutcome {
    PositionEstimate estimate;
    geom::SweepMeasurement sweep;  // input sweep plus reference samples
    std::vector<int> best_cluster;
};

// Far/near split threshold: p times the array's far-field resolution 2/N.
inline double far_width_threshold(const geom::ArrayConfig& cfg, const TrainParams& p) {
    return p.p * 2.0 / cfg.n_elements;
}

// Algorithm 2. For each candidate: probe the reference, measure the width,
// classify far (width <= Delta_p) or invert Eq. (25); the winner is the
// candidate with the highest probed beamforming response.
inline TrainOutcome coarse_train(const geom::ArrayConfig& cfg,
                                 geom::SweepMeasurement sweep,
                                 const TrainParams& params,
                                 const ProbeInterface& probes) {
    TrainOutcome out;
    const auto angle_est = estimate_angle(sweep, params);
    out.best_cluster = angle_est.best_cluster;
    const double delta_far = far_width_threshold(cfg, params);
    const auto& angles = sweep.codebook->angles;

    PositionEstimate est;
    est.method = PositionEstimate::Method::coarse;
    for (int ci : angle_est.candidate_idx) {
        const double theta_i = angles[ci];
        sweep.reference_samples[theta_i] = probes.reference(theta_i);
        est.probes_used++;
        CandidateRecord rec;
        rec.theta = theta_i;
        const auto mas = measure_width_for_candidate(
            sweep, angle_est.best_cluster, theta_i, params.rho, params.width_mode);
        if (mas && mas->width > delta_far)
            rec.range_m = distance_from_width(cfg, theta_i, mas->width, params.rho);
        est.candidates.push_back(rec);
    }
    // Winner probe: one extra noisy response per candidate codeword.
    double best_resp = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < est.candidates.size(); ++i) {
        auto& rec = est.candidates[i];
        const geom::WeightVector v =
            std::isinf(rec.range_m)
                ? geom::far_field_codeword(cfg, rec.theta)
                : geom::steering_vector(cfg, {rec.theta, rec.range_m});
        rec.response = probes.response(v);
        est.probes_used++;
        if (rec.response > best_resp) {
            best_resp = rec.response;
            best_i = i;
        }
    }
    const auto& win = est.candidates[best_i];
    est.theta_hat = win.theta;
    est.r_hat = win.range_m;
    est.near_field = !std::isinf(win.range_m);
    est.codeword = est.near_field
                       ? geom::steering_vector(cfg, {est.theta_hat, est.r_hat})
                       : geom::far_field_codeword(cfg, est.theta_hat);
    out.estimate = std::move(est);
    out.sweep = std::move(sweep);
    return out;
}

// Algorithm 3. Re-thresholds the measured normalized pattern at the exact
// finite-alpha threshold and re-inverts with the base rho's s until the
// width stabilizes. The alpha update is relaxed (damping) because the plain
// fixed-point map two-cycles. Below alpha_min the exact-threshold
// construction is outside its validity region and refinement is skipped.
inline PositionEstimate refine_train(const geom::ArrayConfig& cfg,
                                     PositionEstimate initial,
                                     const geom::SweepMeasurement& sweep,
                                     const std::vector<int>& cluster,
                                     const TrainParams& params) {
    require(initial.near_field, "refine_train: requires a near-field initial estimate");
    PositionEstimate est = std::move(initial);
    est.method = PositionEstimate::Method::refined;
    const double s_rho = pattern::s_from_rho(params.rho);
    const double omt = 1.0 - est.theta_hat * est.theta_hat;
    const double n2d = static_cast<double>(cfg.n_elements) * cfg.n_elements *
                       cfg.spacing_m;
    double alpha = n2d * omt / (8.0 * est.r_hat);
    if (alpha < params.alpha_min) {
        est.iterations = 0;
        est.converged = true;
        return est;
    }
    double prev_width = -1.0;
    double r_cur = est.r_hat;
    est.converged = false;
    std::vector<std::pair<double, double>> visited;  // (width, r)
    for (int t = 0; t < params.i_max; ++t) {
        const double rho_exact = pattern::exact_threshold(alpha, s_rho);
        const auto mas = measure_width_for_candidate(sweep, cluster, est.theta_hat,
                                                     rho_exact, params.width_mode);
        est.iterations = t + 1;
        if (!mas || mas->width <= 0.0) break;
        r_cur = distance_from_width(cfg, est.theta_hat, mas->width, params.rho);
        visited.emplace_back(mas->width, r_cur);
        const double alpha_new = n2d * omt / (8.0 * r_cur);
        alpha = params.damping * alpha + (1.0 - params.damping) * alpha_new;
        if (prev_width >= 0.0 && std::fabs(mas->width - prev_width) < params.epsilon) {
            est.converged = true;
            break;
        }
        prev_width = mas->width;
    }
    if (!est.converged && visited.size() >= 2) {
        // No convergence: fall back to the most revisited width (modal
        // iterate), latest occurrence wins ties.
        double best_r = r_cur;
        int best_count = 0;
        for (std::size_t i = 0; i < visited.size(); ++i) {
            int count = 0;
            for (const auto& v : visited)
                if (std::fabs(v.first - visited[i].first) < params.epsilon) ++count;
            if (count >= best_count) {
                best_count = count;
                best_r = visited[i].second;
            }
        }
        r_cur = best_r;
    }
    est.r_hat = r_cur;
    est.near_field = true;
    est.codeword = geom::steering_vector(cfg, {est.theta_hat, est.r_hat});
    return est;
}

}  // namespace nfbeam::train
