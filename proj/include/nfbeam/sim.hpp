// Monte-Carlo campaigns and link metrics: reference-SNR calibration, single-
// and multi-user achievable rate, the exhaustive polar-codebook and full-CSI
// baselines, and the trial/campaign harness with reproducible seeding.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfbeam/common.hpp"
#include "nfbeam/geometry.hpp"
#include "nfbeam/io.hpp"
#include "nfbeam/mle.hpp"
#include "nfbeam/pattern.hpp"
#include "nfbeam/train.hpp"

namespace nfbeam::sim {

// Reference SNR: the SNR of a single element's capture for a user at
// (0, 5 m) with unit pilot, i.e. sigma^2 = g(5 m)^2 / snr.
inline double calibrate_noise(const geom::ArrayConfig& cfg, double reference_snr_db) {
    require(std::isfinite(reference_snr_db), "calibrate_noise: finite SNR required");
    const double g = geom::channel_gain(cfg, 5.0);
    return g * g / std::pow(10.0, reference_snr_db / 10.0);
}

inline double achievable_rate_single(const std::vector<cdouble>& h,
                                     const geom::WeightVector& v, double sigma2) {
    const double p = std::norm(geom::receive(h, v));
    return std::log2(1.0 + p / sigma2);
}

struct MultiuserResult {
    std::vector<double> rates;
    bool ill_conditioned = false;  // regularized Gram condition number > 1e8
};

// Regularized zero-forcing on the estimated steering vectors (regularizer
// M sigma^2), per-user columns normalized and total power fixed to 1;
// per-user rates from the SINR with the true channels.
inline MultiuserResult multiuser_rates(const std::vector<std::vector<cdouble>>& channels,
                                       const std::vector<geom::WeightVector>& est_dirs,
                                       double sigma2) {
    const int m = static_cast<int>(channels.size());
    require(m >= 2, "multiuser_rates: M >= 2");
    require(est_dirs.size() == channels.size(), "multiuser_rates: size mismatch");
    const int n = static_cast<int>(channels.front().size());
    Eigen::MatrixXcd b(n, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) b(i, j) = est_dirs[j][i];
    Eigen::MatrixXcd gram = b.adjoint() * b;
    gram += static_cast<double>(m) * sigma2 * Eigen::MatrixXcd::Identity(m, m);

    MultiuserResult out;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram);
    const double smin = svd.singularValues()(m - 1);
    out.ill_conditioned = smin <= 0.0 || svd.singularValues()(0) / smin > 1e8;

    Eigen::MatrixXcd w = b * gram.inverse();
    const double per_user = 1.0 / std::sqrt(static_cast<double>(m));
    for (int j = 0; j < m; ++j) {
        const double nrm = w.col(j).norm();
        if (nrm > 0.0) w.col(j) *= per_user / nrm;
    }
    out.rates.resize(m);
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXcd hi(n);
        for (int k = 0; k < n; ++k) hi(k) = channels[i][k];
        double sig = 0.0, interference = 0.0;
        for (int j = 0; j < m; ++j) {
            const double p = std::norm(hi.dot(w.col(j)));  // h^H w_j
            if (j == i)
                sig = p;
            else
                interference += p;
        }
        out.rates[i] = std::log2(1.0 + sig / (interference + sigma2));
    }
    return out;
}

// Exhaustive near-field baseline: probe every entry of a polar codebook
// (rings uniform in 1/r) with fresh noise, take the argmax-amplitude node.
inline train::PositionEstimate exhaustive_baseline(const geom::ArrayConfig& cfg,
                                                   const geom::Codebook& polar,
                                                   const geom::PolarPosition& user,
                                                   double sigma2,
                                                   std::mt19937_64& rng) {
    require(polar.kind == geom::CodebookKind::polar, "exhaustive_baseline: polar codebook");
    const auto h = geom::channel_vector(cfg, user);
    double best = -1.0;
    int best_i = 0;
    for (int i = 0; i < polar.size(); ++i) {
        const double amp =
            std::abs(geom::receive(h, polar.entries[i], geom::maybe_noise(rng, sigma2)));
        if (amp > best) {
            best = amp;
            best_i = i;
        }
    }
    train::PositionEstimate est;
    est.method = train::PositionEstimate::Method::coarse;
    est.theta_hat = polar.angles[best_i];
    est.r_hat = polar.ranges_m[best_i];
    est.near_field = true;
    est.codeword = polar.entries[best_i];
    est.probes_used = polar.size();
    return est;
}

enum class Estimator { coarse, refined, mle, exhaustive, full_csi };

inline const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::coarse: return "coarse";
        case Estimator::refined: return "refined";
        case Estimator::mle: return "mle";
        case Estimator::exhaustive: return "exhaustive";
        case Estimator::full_csi: return "full_csi";
    }
    return "?";
}

struct UserRegion {
    double theta_min = -0.9;
    double theta_max = 0.9;
    enum class RangeMode {
        relative_mray,  // r in [lo, hi] fractions of R_mRay(theta), floored at 1.1 R_Fre
        absolute,       // r in [lo, hi] meters
        far_field,      // r in [lo * R_mRay(theta), R_Ray]
    } mode = RangeMode::relative_mray;
    double lo = 0.0;    // defaults resolved in sample(): see below
    double hi = 0.95;
    double rho = 0.5;   // boundary parameters for R_mRay
    double p = 3.0;

    geom::PolarPosition sample(const geom::ArrayConfig& cfg, std::mt19937_64& rng,
                               bool snap_theta_to_grid = false, int n_grid = 0) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double theta = theta_min + (theta_max - theta_min) * unif(rng);
        if (snap_theta_to_grid && n_grid > 1) {
            const double step = 2.0 / n_grid;
            const double lo_a = (1.0 - n_grid) / static_cast<double>(n_grid);
            const double idx = std::round((theta - lo_a) / step);
            theta = std::clamp(lo_a + idx * step, -1.0, 1.0);
        }
        const auto bounds = geom::boundary_distances(cfg);
        double r_lo = lo, r_hi = hi;
        switch (mode) {
            case RangeMode::relative_mray: {
                const double mray = pattern::modified_rayleigh(cfg, theta, rho, p);
                r_lo = std::max(lo * mray, 1.1 * bounds.fresnel_m);
                r_hi = hi * mray;
                break;
            }
            case RangeMode::absolute:
                break;
            case RangeMode::far_field: {
                const double mray = pattern::modified_rayleigh(cfg, theta, rho, p);
                r_lo = lo * mray;
                r_hi = bounds.rayleigh_m;
                break;
            }
        }
        require(r_hi > r_lo && r_lo > 0.0, "UserRegion: empty range");
        return {theta, r_lo + (r_hi - r_lo) * unif(rng)};
    }
};

struct ScenarioConfig {
    geom::ArrayConfig array = geom::ArrayConfig::paper_profile();
    Estimator estimator = Estimator::coarse;
    double reference_snr_db = 20.0;
    int n_trials = 100;
    UserRegion region;
    int n_users = 1;
    int dft_samples = 0;  // 0: equal to the element count
    int exhaustive_rings = 5;
    std::uint64_t seed = 1;
    bool on_grid_users = false;
    train::TrainParams train_params;
    mle::OptimizeSchedule mle_schedule;
    int threads = 0;  // 0: hardware concurrency
};

struct TrialRecord {
    double theta_true = 0.0, r_true = 0.0;
    double theta_hat = 0.0, r_hat = 0.0;  // r_hat = inf for far classification
    bool far_classified = false;
    double sq_err_theta = 0.0;
    double sq_err_r = 0.0;  // NaN when far-classified
    double rate = 0.0;
    double rate_full_csi = 0.0;
    int overhead = 0;  // probes consumed (sweep + references + winner probes)
    int iterations = 0;
    bool converged = true;
};

struct CampaignResult {
    std::vector<TrialRecord> trials;
    double mse_theta = 0.0;
    double mse_r = 0.0;
    int n_far = 0;          // far-classified trials (excluded from mse_r)
    double rate_mean = 0.0;
    double rate_p10 = 0.0;
    double rate_p90 = 0.0;
    double median_iterations = 0.0;
    ScenarioConfig config;
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double frac = pos - i;
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

}  // namespace detail

// One single-user trial with its own generator. The codebooks are shared,
// read-only.
inline TrialRecord run_trial(const ScenarioConfig& sc, const geom::Codebook* polar,
                             std::shared_ptr<const geom::Codebook> dft,
                             const geom::PolarPosition& user, double sigma2,
                             std::mt19937_64& rng) {
    const auto& cfg = sc.array;
    const auto h = geom::channel_vector(cfg, user);
    TrialRecord rec;
    rec.theta_true = user.theta;
    rec.r_true = user.range_m;
    rec.rate_full_csi =
        achievable_rate_single(h, geom::steering_vector(cfg, user), sigma2);

    train::PositionEstimate est;
    if (sc.estimator == Estimator::full_csi) {
        est.theta_hat = user.theta;
        est.r_hat = user.range_m;
        est.near_field = true;
        est.codeword = geom::steering_vector(cfg, user);
    } else if (sc.estimator == Estimator::exhaustive) {
        est = exhaustive_baseline(cfg, *polar, user, sigma2, rng);
    } else {
        auto sweep = geom::run_sweep(cfg, user, dft, sigma2, rng);
        train::ProbeInterface probes{
            [&](double angle) {
                return geom::receive(h, geom::far_field_codeword(cfg, angle),
                                     geom::maybe_noise(rng, sigma2));
            },
            [&](const geom::WeightVector& v) {
                return std::abs(geom::receive(h, v, geom::maybe_noise(rng, sigma2)));
            }};
        auto outcome = train::coarse_train(cfg, std::move(sweep), sc.train_params, probes);
        est = outcome.estimate;
        est.probes_used += dft->size();
        if (sc.estimator == Estimator::refined && est.near_field) {
            const int probes_used = est.probes_used;
            est = train::refine_train(cfg, std::move(est), outcome.sweep,
                                      outcome.best_cluster, sc.train_params);
            est.probes_used = probes_used;
        } else if (sc.estimator == Estimator::mle) {
            mle::AmplitudeObservation obs{outcome.sweep.amplitudes, dft};
            const auto regions = mle::protected_regions(
                outcome.best_cluster, outcome.sweep.amplitudes, dft->size(), 3);
            const double s2_0 = mle::init_noise_power(obs, regions.noise_set);
            const auto bounds = mle::MleBounds::for_array(cfg);
            mle::MleParams init;
            init.theta = est.theta_hat;
            init.r = est.near_field
                         ? std::clamp(est.r_hat, bounds.r_min, bounds.r_max)
                         : 0.9 * pattern::modified_rayleigh(cfg, est.theta_hat,
                                                            sc.train_params.rho,
                                                            sc.train_params.p);
            const mle::AmplitudeModel shape(cfg, *dft, {init.theta, init.r, 1.0, 1.0},
                                            false);
            const auto d0 =
                mle::init_amp_factor(obs, shape.u, regions.signal_set, s2_0);
            init.amp_factor = d0.value;
            init.noise_power = s2_0;
            const auto opt = mle::optimize(obs, cfg, init, sc.mle_schedule, bounds, rng);
            const int probes_used = est.probes_used;
            est = train::PositionEstimate{};
            est.method = train::PositionEstimate::Method::mle;
            est.theta_hat = opt.params.theta;
            est.r_hat = opt.params.r;
            est.near_field = true;
            est.codeword = geom::steering_vector(cfg, {est.theta_hat, est.r_hat});
            est.probes_used = probes_used;
            est.iterations = opt.iterations;
        }
    }

    rec.theta_hat = est.theta_hat;
    rec.r_hat = est.r_hat;
    rec.far_classified = !est.near_field;
    rec.sq_err_theta = (est.theta_hat - user.theta) * (est.theta_hat - user.theta);
    rec.sq_err_r = est.near_field
                       ? (est.r_hat - user.range_m) * (est.r_hat - user.range_m)
                       : std::numeric_limits<double>::quiet_NaN();
    rec.rate = achievable_rate_single(h, est.codeword, sigma2);
    rec.overhead = est.probes_used;
    rec.iterations = est.iterations;
    rec.converged = est.converged;
    return rec;
}

inline CampaignResult run_campaign(const ScenarioConfig& sc) {
    require(sc.n_trials >= 1, "run_campaign: n_trials >= 1");
    const auto& cfg = sc.array;
    const int ns = sc.dft_samples > 0 ? sc.dft_samples : cfg.n_elements;
    auto dft = std::make_shared<const geom::Codebook>(geom::dft_codebook(cfg, ns));
    std::unique_ptr<geom::Codebook> polar;
    if (sc.estimator == Estimator::exhaustive) {
        const auto bounds = geom::boundary_distances(cfg);
        polar = std::make_unique<geom::Codebook>(geom::polar_codebook(
            cfg, ns, sc.exhaustive_rings, std::max(bounds.fresnel_m, 3.0),
            bounds.rayleigh_m));
    }
    const double sigma2 = calibrate_noise(cfg, sc.reference_snr_db);

    CampaignResult res;
    res.config = sc;
    res.trials.resize(sc.n_trials);
    parallel_for(
        static_cast<std::size_t>(sc.n_trials),
        [&](std::size_t i) {
            std::mt19937_64 rng(derive_seed(sc.seed, i));
            const auto user = sc.region.sample(cfg, rng, sc.on_grid_users, ns);
            try {
                res.trials[i] = run_trial(sc, polar.get(), dft, user, sigma2, rng);
            } catch (const no_signal_error&) {
                TrialRecord rec;  // all-noise sweep: count as far miss at broadside
                rec.theta_true = user.theta;
                rec.r_true = user.range_m;
                rec.far_classified = true;
                rec.sq_err_theta = user.theta * user.theta;
                rec.sq_err_r = std::numeric_limits<double>::quiet_NaN();
                rec.overhead = dft->size();
                res.trials[i] = rec;
            }
        },
        sc.threads == 0 ? 0 : static_cast<unsigned>(sc.threads));

    double acc_t = 0.0, acc_r = 0.0;
    int n_r = 0;
    std::vector<double> rates, iters;
    rates.reserve(res.trials.size());
    for (const auto& t : res.trials) {
        acc_t += t.sq_err_theta;
        if (std::isfinite(t.sq_err_r)) {
            acc_r += t.sq_err_r;
            ++n_r;
        } else {
            ++res.n_far;
        }
        rates.push_back(t.rate);
        iters.push_back(static_cast<double>(t.iterations));
    }
    res.mse_theta = acc_t / res.trials.size();
    res.mse_r = n_r > 0 ? acc_r / n_r : std::numeric_limits<double>::quiet_NaN();
    res.rate_mean = std::accumulate(rates.begin(), rates.end(), 0.0) / rates.size();
    res.rate_p10 = detail::percentile(rates, 0.10);
    res.rate_p90 = detail::percentile(rates, 0.90);
    res.median_iterations = detail::percentile(iters, 0.50);
    return res;
}

// Multi-user campaign: M users estimated independently (each with its own
// sweep), then served jointly by regularized zero-forcing; full-CSI mode
// beamforms on the true positions.
struct MultiuserCampaignResult {
    double rate_mean = 0.0;          // average per-user rate
    int n_ill_conditioned = 0;
    std::vector<double> per_trial_mean;
};

inline MultiuserCampaignResult run_multiuser_campaign(const ScenarioConfig& sc) {
    require(sc.n_users >= 2, "run_multiuser_campaign: M >= 2");
    const auto& cfg = sc.array;
    const int ns = sc.dft_samples > 0 ? sc.dft_samples : cfg.n_elements;
    auto dft = std::make_shared<const geom::Codebook>(geom::dft_codebook(cfg, ns));
    std::unique_ptr<geom::Codebook> polar;
    if (sc.estimator == Estimator::exhaustive) {
        const auto bounds = geom::boundary_distances(cfg);
        polar = std::make_unique<geom::Codebook>(geom::polar_codebook(
            cfg, ns, sc.exhaustive_rings, std::max(bounds.fresnel_m, 3.0),
            bounds.rayleigh_m));
    }
    const double sigma2 = calibrate_noise(cfg, sc.reference_snr_db);

    MultiuserCampaignResult res;
    res.per_trial_mean.resize(sc.n_trials);
    std::vector<int> ill(sc.n_trials, 0);
    parallel_for(
        static_cast<std::size_t>(sc.n_trials),
        [&](std::size_t i) {
            std::mt19937_64 rng(derive_seed(sc.seed, i));
            std::vector<std::vector<cdouble>> channels(sc.n_users);
            std::vector<geom::WeightVector> dirs(sc.n_users);
            for (int u = 0; u < sc.n_users; ++u) {
                const auto user = sc.region.sample(cfg, rng, sc.on_grid_users, ns);
                channels[u] = geom::channel_vector(cfg, user);
                if (sc.estimator == Estimator::full_csi) {
                    dirs[u] = geom::steering_vector(cfg, user);
                } else {
                    const auto rec = run_trial(sc, polar.get(), dft, user, sigma2, rng);
                    dirs[u] = rec.far_classified
                                  ? geom::far_field_codeword(cfg, rec.theta_hat)
                                  : geom::steering_vector(cfg,
                                                          {rec.theta_hat, rec.r_hat});
                }
            }
            const auto mu = multiuser_rates(channels, dirs, sigma2);
            res.per_trial_mean[i] =
                std::accumulate(mu.rates.begin(), mu.rates.end(), 0.0) / sc.n_users;
            ill[i] = mu.ill_conditioned ? 1 : 0;
        },
        sc.threads == 0 ? 0 : static_cast<unsigned>(sc.threads));
    res.rate_mean = std::accumulate(res.per_trial_mean.begin(),
                                    res.per_trial_mean.end(), 0.0) /
                    sc.n_trials;
    res.n_ill_conditioned = std::accumulate(ill.begin(), ill.end(), 0);
    return res;
}

// Stable CSV row for one campaign aggregate; the header pairs with it.
inline std::string campaign_csv_header() {
    return "snr_db,estimator,mse_theta,mse_r,rate_mean,rate_p10,rate_p90,n_trials,"
           "n_far,median_iterations\n";
}

inline std::string campaign_csv_row(const CampaignResult& res) {
    using io::format_double;
    std::string row;
    row += format_double(res.config.reference_snr_db);
    row += ',';
    row += estimator_name(res.config.estimator);
    for (double v : {res.mse_theta, res.mse_r, res.rate_mean, res.rate_p10,
                     res.rate_p90}) {
        row += ',';
        row += format_double(v);
    }
    row += ',' + std::to_string(res.trials.size());
    row += ',' + std::to_string(res.n_far);
    row += ',' + format_double(res.median_iterations);
    row += '\n';
    return row;
}

}  // namespace nfbeam::sim
