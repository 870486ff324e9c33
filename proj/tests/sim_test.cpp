#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfbeam/sim.hpp"

using namespace nfbeam;
using Catch::Approx;

namespace {
const geom::ArrayConfig kProfile = geom::ArrayConfig::paper_profile();
}

TEST_CASE("noise calibration", "[sim]") {
    const double g5 = geom::channel_gain(kProfile, 5.0);
    CHECK(sim::calibrate_noise(kProfile, 0.0) == Approx(g5 * g5).epsilon(1e-12));
    CHECK(sim::calibrate_noise(kProfile, 10.0) ==
          Approx(g5 * g5 / 10.0).epsilon(1e-12));
    CHECK_THROWS_AS(sim::calibrate_noise(kProfile, std::nan("")),
                    std::invalid_argument);
}

TEST_CASE("single-user rate", "[sim]") {
    const geom::PolarPosition user{0.0, 5.0};
    const auto h = geom::channel_vector(kProfile, user);
    double hn2 = 0.0;
    for (const auto& v : h) hn2 += std::norm(v);
    const double sigma2 = sim::calibrate_noise(kProfile, 20.0);

    // Matched beamformer attains log2(1 + ||h||^2 / sigma^2).
    geom::WeightVector matched(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) matched[i] = h[i] / std::sqrt(hn2);
    CHECK(sim::achievable_rate_single(h, matched, sigma2) ==
          Approx(std::log2(1.0 + hn2 / sigma2)).epsilon(1e-12));

    // The true-position steering vector is the matched direction.
    const auto b = geom::steering_vector(kProfile, user);
    CHECK(sim::achievable_rate_single(h, b, sigma2) >=
          std::log2(1.0 + hn2 / sigma2) - 0.01);

    // Far-away DFT codeword captures almost nothing.
    const auto hf = geom::channel_vector(kProfile, {0.9, 1e6});
    const auto a = geom::far_field_codeword(kProfile, -0.9);
    CHECK(sim::achievable_rate_single(hf, a, sigma2) <
          0.01 * std::log2(1.0 + hn2 / sigma2));
}

TEST_CASE("multiuser regularized zero-forcing", "[sim]") {
    const double sigma2 = sim::calibrate_noise(kProfile, 20.0);
    SECTION("well separated users lose almost nothing to interference") {
        const geom::PolarPosition u1{-0.5, 20.0}, u2{0.5, 30.0};
        const std::vector<std::vector<cdouble>> hs{
            geom::channel_vector(kProfile, u1), geom::channel_vector(kProfile, u2)};
        const std::vector<geom::WeightVector> dirs{
            geom::steering_vector(kProfile, u1), geom::steering_vector(kProfile, u2)};
        const auto mu = sim::multiuser_rates(hs, dirs, sigma2);
        REQUIRE(mu.rates.size() == 2);
        CHECK_FALSE(mu.ill_conditioned);
        for (int i = 0; i < 2; ++i) {
            double hn2 = 0.0;
            for (const auto& v : hs[i]) hn2 += std::norm(v);
            // Matched rate at the same per-user power 1/M.
            const double solo = std::log2(1.0 + hn2 / (2.0 * sigma2));
            CHECK(mu.rates[i] >= solo - 0.2);
            CHECK(mu.rates[i] <= solo + 1e-9);
        }
    }
    SECTION("identical estimates raise the condition flag") {
        const geom::PolarPosition u{0.1, 15.0};
        const std::vector<std::vector<cdouble>> hs{
            geom::channel_vector(kProfile, u), geom::channel_vector(kProfile, u)};
        const std::vector<geom::WeightVector> dirs{
            geom::steering_vector(kProfile, u), geom::steering_vector(kProfile, u)};
        const auto mu = sim::multiuser_rates(hs, dirs, sigma2);
        CHECK(mu.ill_conditioned);
    }
    SECTION("true positions beat coarse estimates on average") {
        sim::ScenarioConfig sc;
        sc.n_users = 2;
        sc.n_trials = 20;
        sc.reference_snr_db = 20.0;
        sc.seed = 5;
        sc.estimator = sim::Estimator::full_csi;
        const auto full = sim::run_multiuser_campaign(sc);
        sc.estimator = sim::Estimator::coarse;
        const auto coarse = sim::run_multiuser_campaign(sc);
        CHECK(full.rate_mean >= coarse.rate_mean - 1e-9);
    }
}

TEST_CASE("exhaustive baseline", "[sim]") {
    const auto bounds = geom::boundary_distances(kProfile);
    const auto polar = geom::polar_codebook(kProfile, 512, 5,
                                            std::max(bounds.fresnel_m, 3.0),
                                            bounds.rayleigh_m);
    REQUIRE(polar.size() == 512 * 5);

    // Noiseless user exactly on a codebook node is recovered exactly.
    std::mt19937_64 rng(2);
    const int node = 256 * 5 + 2;
    const geom::PolarPosition user{polar.angles[node], polar.ranges_m[node]};
    const auto est = sim::exhaustive_baseline(kProfile, polar, user, 0.0, rng);
    CHECK(est.theta_hat == Approx(user.theta));
    CHECK(est.r_hat == Approx(user.range_m));
    CHECK(est.probes_used == 512 * 5);

    // Users between rings see at least the ring-quantization floor.
    const double r_lo = polar.ranges_m[node + 1];
    const double r_hi = polar.ranges_m[node];
    const geom::PolarPosition mid{polar.angles[node], 0.5 * (r_lo + r_hi)};
    const auto est2 = sim::exhaustive_baseline(kProfile, polar, mid, 0.0, rng);
    CHECK(std::fabs(est2.r_hat - mid.range_m) >=
          0.4 * std::min(mid.range_m - r_lo, r_hi - mid.range_m));
}

TEST_CASE("campaign with full CSI is exact", "[sim]") {
    sim::ScenarioConfig sc;
    sc.estimator = sim::Estimator::full_csi;
    sc.n_trials = 25;
    sc.seed = 11;
    const auto res = sim::run_campaign(sc);
    CHECK(res.mse_theta == 0.0);
    CHECK(res.mse_r == 0.0);
    for (const auto& t : res.trials) CHECK(t.rate == Approx(t.rate_full_csi));
}

TEST_CASE("campaign determinism", "[sim]") {
    sim::ScenarioConfig sc;
    sc.estimator = sim::Estimator::refined;
    sc.n_trials = 12;
    sc.seed = 77;
    sc.threads = 2;
    const auto a = sim::run_campaign(sc);
    sc.threads = 1;
    const auto b = sim::run_campaign(sc);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].theta_hat == b.trials[i].theta_hat);
        CHECK(a.trials[i].r_hat == b.trials[i].r_hat);
        CHECK(a.trials[i].rate == b.trials[i].rate);
    }
    CHECK(a.mse_theta == b.mse_theta);
}

TEST_CASE("coarse MSE does not grow with SNR", "[sim][property]") {
    // Trend check over the paper's SNR grid; mild slack for MC noise.
    sim::ScenarioConfig sc;
    sc.estimator = sim::Estimator::coarse;
    sc.n_trials = 60;
    sc.seed = 3;
    sc.region.hi = 0.5;  // keep the width-ranging regime well conditioned
    std::vector<double> mse;
    for (double snr : {4.0, 10.0, 16.0, 22.0, 28.0}) {
        sc.reference_snr_db = snr;
        mse.push_back(sim::run_campaign(sc).mse_r);
    }
    for (std::size_t i = 1; i < mse.size(); ++i) CHECK(mse[i] <= mse[i - 1] * 1.5);
    CHECK(mse.back() < mse.front());
}

TEST_CASE("refined improves distance accuracy at high SNR", "[sim]") {
    sim::ScenarioConfig sc;
    sc.n_trials = 60;
    sc.seed = 9;
    sc.reference_snr_db = 25.0;
    sc.region.hi = 0.5;
    sc.estimator = sim::Estimator::coarse;
    const auto coarse = sim::run_campaign(sc);
    sc.estimator = sim::Estimator::refined;
    const auto refined = sim::run_campaign(sc);
    CHECK(refined.mse_r <= coarse.mse_r);
}
