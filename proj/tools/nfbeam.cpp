// Command-line front end. Subcommands map onto the library's experiments and
// emit plot-ready CSV/JSONL; outputs are written atomically and are
// byte-stable for a fixed seed (suppress the timestamp line for diffing).

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nfbeam/io.hpp"
#include "nfbeam/sim.hpp"

using namespace nfbeam;
using nlohmann::json;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    bool quiet = false;
    bool no_timestamp = false;
};

std::string timestamp_line(const GlobalOptions& g) {
    if (g.no_timestamp) return {};
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&now));
    return std::string("# generated ") + buf + "\n";
}

void emit(const GlobalOptions& g, const std::string& name, const std::string& body) {
    const auto path = std::filesystem::path(g.out_dir) / name;
    io::write_atomic(path, timestamp_line(g) + body);
    if (!g.quiet) std::printf("wrote %s\n", path.c_str());
}

struct ArrayOptions {
    int n_elements = 512;
    double carrier_hz = 1e11;

    geom::ArrayConfig config() const {
        return geom::ArrayConfig::make(n_elements, carrier_hz);
    }

    void attach(CLI::App* app) {
        app->add_option("--n-elements", n_elements, "ULA element count")
            ->capture_default_str();
        app->add_option("--carrier-hz", carrier_hz, "carrier frequency [Hz]")
            ->capture_default_str();
    }
};

struct TrainOptions {
    train::TrainParams params;
    std::string width_mode = "interpolated";

    void attach(CLI::App* app) {
        app->add_option("--rho", params.rho, "width threshold")->capture_default_str();
        app->add_option("--rho2-factor", params.rho2_factor,
                        "cluster threshold fraction of the peak")
            ->capture_default_str();
        app->add_option("--gap", params.gap, "cluster gap L")->capture_default_str();
        app->add_option("--k", params.k, "median-k candidates")->capture_default_str();
        app->add_option("--p", params.p, "beam width scaling factor")
            ->capture_default_str();
        app->add_option("--epsilon", params.epsilon, "width convergence tolerance")
            ->capture_default_str();
        app->add_option("--i-max", params.i_max, "refinement iteration cap")
            ->capture_default_str();
        app->add_option("--width-mode", width_mode,
                        "width estimator: interpolated | grid")
            ->check(CLI::IsMember({"interpolated", "grid"}))
            ->capture_default_str();
    }

    train::TrainParams resolved() const {
        auto p = params;
        p.width_mode = width_mode == "grid" ? train::WidthMode::grid
                                            : train::WidthMode::interpolated;
        return p;
    }
};

std::vector<double> parse_snr_range(const std::string& text) {
    const auto c1 = text.find(':');
    if (c1 == std::string::npos) return {std::stod(text)};
    const auto c2 = text.find(':', c1 + 1);
    const double lo = std::stod(text.substr(0, c1));
    if (c2 == std::string::npos)
        throw CLI::ValidationError("--snr", "expected LO:HI:STEP or a single value");
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (step <= 0.0) throw CLI::ValidationError("--snr", "step must be > 0");
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(v);
    return out;
}

sim::Estimator parse_estimator(const std::string& name) {
    if (name == "coarse") return sim::Estimator::coarse;
    if (name == "refined") return sim::Estimator::refined;
    if (name == "mle") return sim::Estimator::mle;
    if (name == "exhaustive") return sim::Estimator::exhaustive;
    if (name == "full_csi") return sim::Estimator::full_csi;
    throw CLI::ValidationError("--estimator", "unknown estimator " + name);
}

json trial_to_json(const sim::TrialRecord& t) {
    json j{{"theta_true", t.theta_true},
           {"r_true", t.r_true},
           {"theta_hat", t.theta_hat},
           {"far", t.far_classified},
           {"sq_err_theta", t.sq_err_theta},
           {"rate", t.rate},
           {"rate_full_csi", t.rate_full_csi},
           {"overhead", t.overhead},
           {"iterations", t.iterations},
           {"converged", t.converged}};
    if (t.far_classified) {
        j["r_hat"] = nullptr;
    } else {
        j["r_hat"] = t.r_hat;
        j["sq_err_r"] = t.sq_err_r;
    }
    return j;
}

std::string trials_jsonl(const sim::CampaignResult& res) {
    std::string body;
    for (const auto& t : res.trials) body += trial_to_json(t).dump() + "\n";
    return body;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-field beam training with DFT codebooks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "declarative config file");
    app.allow_config_extras(false);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "master seed")->capture_default_str();
    app.add_option("--out", global.out_dir, "output directory")->capture_default_str();
    app.add_flag("--quiet", global.quiet, "suppress summary lines");
    app.add_flag("--no-timestamp", global.no_timestamp,
                 "omit the timestamp header for byte-stable output");

    ArrayOptions array;

    // pattern: (phi, discrete gain, closed-form gain) across the codebook grid.
    auto* cmd_pattern = app.add_subcommand("pattern", "beam pattern cut");
    array.attach(cmd_pattern);
    double pat_theta = 0.0, pat_r = 5.0;
    int pat_samples = 0;
    cmd_pattern->add_option("--theta", pat_theta)->capture_default_str();
    cmd_pattern->add_option("--r", pat_r)->capture_default_str();
    cmd_pattern->add_option("--samples", pat_samples, "angle samples (0: N)")
        ->capture_default_str();

    // width-sweep: measured and closed widths along r or theta.
    auto* cmd_width = app.add_subcommand("width-sweep", "beamwidth sweep");
    array.attach(cmd_width);
    std::string axis = "r";
    double ws_theta = 0.0, ws_r = 5.0, ws_rho = 0.5;
    double ws_min = 5.0, ws_max = 70.0;
    int ws_points = 131;
    cmd_width->add_option("--axis", axis)->check(CLI::IsMember({"r", "theta"}));
    cmd_width->add_option("--theta", ws_theta)->capture_default_str();
    cmd_width->add_option("--r", ws_r)->capture_default_str();
    cmd_width->add_option("--rho", ws_rho)->capture_default_str();
    cmd_width->add_option("--min", ws_min, "sweep start (r [m] or theta)")
        ->capture_default_str();
    cmd_width->add_option("--max", ws_max, "sweep end")->capture_default_str();
    cmd_width->add_option("--points", ws_points)->capture_default_str();

    // rayleigh: (theta, modified Rayleigh distance).
    auto* cmd_ray = app.add_subcommand("rayleigh", "modified Rayleigh distance");
    array.attach(cmd_ray);
    double ray_rho = 0.5, ray_p = 3.0;
    int ray_points = 97;
    cmd_ray->add_option("--rho", ray_rho)->capture_default_str();
    cmd_ray->add_option("--p", ray_p)->capture_default_str();
    cmd_ray->add_option("--points", ray_points)->capture_default_str();

    // train / refine: per-trial JSONL records.
    TrainOptions train_opts;
    auto* cmd_train = app.add_subcommand("train", "coarse training trials");
    auto* cmd_refine = app.add_subcommand("refine", "refined training trials");
    double tr_snr = 20.0;
    int tr_trials = 100, tr_ns = 0;
    for (auto* cmd : {cmd_train, cmd_refine}) {
        array.attach(cmd);
        train_opts.attach(cmd);
        cmd->add_option("--snr", tr_snr, "reference SNR [dB]")->capture_default_str();
        cmd->add_option("--trials", tr_trials)->capture_default_str();
        cmd->add_option("--n-s", tr_ns, "DFT sample count (0: N)")->capture_default_str();
    }

    // mle: one-shot estimate for one user.
    auto* cmd_mle = app.add_subcommand("mle", "maximum-likelihood refinement");
    array.attach(cmd_mle);
    TrainOptions mle_train_opts;
    mle_train_opts.attach(cmd_mle);
    double mle_snr = 10.0, mle_theta = 0.0, mle_r = 5.0;
    bool literal_sigma = false;
    mle::OptimizeSchedule sched;
    cmd_mle->add_option("--snr", mle_snr)->capture_default_str();
    cmd_mle->add_option("--theta", mle_theta)->capture_default_str();
    cmd_mle->add_option("--r", mle_r)->capture_default_str();
    cmd_mle->add_flag("--literal-sigma-mode", literal_sigma,
                      "paper-printed mean-amplitude noise initializer");
    cmd_mle->add_option("--sa-iterations", sched.sa_iterations)->capture_default_str();
    cmd_mle->add_option("--sa-decay", sched.sa_decay)->capture_default_str();
    cmd_mle->add_option("--adam-iterations", sched.adam_iterations)
        ->capture_default_str();
    cmd_mle->add_option("--adam-lr", sched.adam_lr)->capture_default_str();
    cmd_mle->add_option("--cycles", sched.cycles)->capture_default_str();
    cmd_mle->add_option("--sweep-restarts", sched.sweep_restarts)->capture_default_str();
    int mle_nmc = 2000;
    cmd_mle->add_option("--n-mc", mle_nmc, "Fisher Monte-Carlo draws")
        ->capture_default_str();

    // crb: Fisher information / CRB at a point.
    auto* cmd_crb = app.add_subcommand("crb", "Fisher information and CRB");
    array.attach(cmd_crb);
    double crb_snr = 10.0, crb_theta = 0.0, crb_r = 5.0;
    int crb_nmc = 2000;
    cmd_crb->add_option("--snr", crb_snr)->capture_default_str();
    cmd_crb->add_option("--theta", crb_theta)->capture_default_str();
    cmd_crb->add_option("--r", crb_r)->capture_default_str();
    cmd_crb->add_option("--n-mc", crb_nmc)->capture_default_str();

    // rate: mean achievable rate vs SNR for a set of estimators.
    auto* cmd_rate = app.add_subcommand("rate", "achievable-rate comparison");
    array.attach(cmd_rate);
    TrainOptions rate_train_opts;
    rate_train_opts.attach(cmd_rate);
    std::string rate_snr = "4:30:2";
    std::vector<std::string> rate_estimators{"full_csi", "refined", "coarse"};
    int rate_trials = 100, rate_users = 1, rate_ns = 0;
    cmd_rate->add_option("--snr", rate_snr, "SNR range LO:HI:STEP or value")
        ->capture_default_str();
    cmd_rate->add_option("--estimators", rate_estimators)->capture_default_str();
    cmd_rate->add_option("--trials", rate_trials)->capture_default_str();
    cmd_rate->add_option("--users", rate_users, "users per trial (1: single-user)")
        ->capture_default_str();
    cmd_rate->add_option("--n-s", rate_ns)->capture_default_str();

    // campaign: MSE/rate aggregates vs SNR for one estimator.
    auto* cmd_campaign = app.add_subcommand("campaign", "Monte-Carlo campaign");
    array.attach(cmd_campaign);
    TrainOptions campaign_train_opts;
    campaign_train_opts.attach(cmd_campaign);
    std::string campaign_snr = "4:30:2";
    std::string campaign_estimator = "coarse";
    int campaign_trials = 100, campaign_ns = 0, campaign_rings = 5;
    double region_hi = 0.95;
    bool emit_trials = false;
    cmd_campaign->add_option("--snr", campaign_snr)->capture_default_str();
    cmd_campaign->add_option("--estimator", campaign_estimator)
        ->check(CLI::IsMember({"coarse", "refined", "mle", "exhaustive", "full_csi"}))
        ->capture_default_str();
    cmd_campaign->add_option("--trials", campaign_trials)->capture_default_str();
    cmd_campaign->add_option("--n-s", campaign_ns)->capture_default_str();
    cmd_campaign->add_option("--rings", campaign_rings, "exhaustive distance rings")
        ->capture_default_str();
    cmd_campaign->add_option("--region-hi", region_hi,
                             "outer user bound as a fraction of R_mRay")
        ->capture_default_str();
    cmd_campaign->add_flag("--trials-jsonl", emit_trials,
                           "also write per-trial JSONL records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto cfg = array.config();

        if (cmd_pattern->parsed()) {
            const int ns = pat_samples > 0 ? pat_samples : cfg.n_elements;
            const auto cb = geom::dft_codebook(cfg, ns);
            std::string body = "phi,gain_discrete,gain_closed\n";
            for (int i = 0; i < cb.size(); ++i) {
                const double dg =
                    pattern::gain_discrete(cfg, pat_theta, pat_r, cb.angles[i]);
                const auto p =
                    pattern::focusing_params(cfg, pat_theta, pat_r, cb.angles[i]);
                const double cf =
                    p.alpha > 0.0 ? pattern::gain_closed_form(p) : dg;
                body += io::csv_row({io::format_double(cb.angles[i]),
                                     io::format_double(dg), io::format_double(cf)});
            }
            emit(global, "pattern.csv", body);
        } else if (cmd_width->parsed()) {
            const auto cb = geom::dft_codebook(cfg, cfg.n_elements);
            std::string body = axis == "r" ? "r_m,width_measured,width_closed\n"
                                           : "theta,width_measured,width_closed\n";
            for (int i = 0; i < ws_points; ++i) {
                const double x = ws_min + (ws_max - ws_min) * i / (ws_points - 1);
                const double theta = axis == "r" ? ws_theta : x;
                const double r = axis == "r" ? x : ws_r;
                const double center = pattern::gain_discrete(cfg, theta, r, theta);
                std::vector<double> normalized(cb.size());
                for (int n = 0; n < cb.size(); ++n)
                    normalized[n] =
                        pattern::gain_discrete(cfg, theta, r, cb.angles[n]) / center;
                const auto mas =
                    pattern::beamwidth_measured(cb.angles, normalized, ws_rho);
                body += io::csv_row(
                    {io::format_double(x),
                     io::format_double(mas ? mas->width : 0.0),
                     io::format_double(pattern::beamwidth_closed(cfg, theta, r, ws_rho))});
            }
            emit(global, "width_sweep.csv", body);
        } else if (cmd_ray->parsed()) {
            std::string body = "theta,r_mray_m\n";
            for (int i = 0; i < ray_points; ++i) {
                const double theta = -0.96 + 1.92 * i / (ray_points - 1);
                body += io::csv_row({io::format_double(theta),
                                     io::format_double(pattern::modified_rayleigh(
                                         cfg, theta, ray_rho, ray_p))});
            }
            emit(global, "rayleigh.csv", body);
        } else if (cmd_train->parsed() || cmd_refine->parsed()) {
            sim::ScenarioConfig sc;
            sc.array = cfg;
            sc.estimator = cmd_refine->parsed() ? sim::Estimator::refined
                                                : sim::Estimator::coarse;
            sc.reference_snr_db = tr_snr;
            sc.n_trials = tr_trials;
            sc.dft_samples = tr_ns;
            sc.seed = global.seed;
            sc.train_params = train_opts.resolved();
            const auto res = sim::run_campaign(sc);
            emit(global, cmd_refine->parsed() ? "refine_trials.jsonl" : "train_trials.jsonl",
                 trials_jsonl(res));
            if (!global.quiet)
                std::printf("%s: mse_theta %.3e mse_r %.3e rate %.3f (%d far)\n",
                            sim::estimator_name(sc.estimator), res.mse_theta, res.mse_r,
                            res.rate_mean, res.n_far);
        } else if (cmd_mle->parsed()) {
            sim::ScenarioConfig sc;
            sc.array = cfg;
            const double sigma2 = sim::calibrate_noise(cfg, mle_snr);
            auto cb = std::make_shared<const geom::Codebook>(
                geom::dft_codebook(cfg, cfg.n_elements));
            std::mt19937_64 rng(derive_seed(global.seed, 0));
            const geom::PolarPosition user{mle_theta, mle_r};
            const auto h = geom::channel_vector(cfg, user);
            auto sweep = geom::run_sweep(cfg, user, cb, sigma2, rng);
            train::ProbeInterface probes{
                [&](double angle) {
                    return geom::receive(h, geom::far_field_codeword(cfg, angle),
                                         geom::maybe_noise(rng, sigma2));
                },
                [&](const geom::WeightVector& v) {
                    return std::abs(geom::receive(h, v, geom::maybe_noise(rng, sigma2)));
                }};
            const auto params = mle_train_opts.resolved();
            auto out = train::coarse_train(cfg, std::move(sweep), params, probes);
            mle::AmplitudeObservation obs{out.sweep.amplitudes, cb};
            const auto regions = mle::protected_regions(
                out.best_cluster, out.sweep.amplitudes, cb->size(), 3);
            const double s2_0 = mle::init_noise_power(
                obs, regions.noise_set,
                literal_sigma ? mle::NoiseEstimatorMode::literal_paper
                              : mle::NoiseEstimatorMode::mean_square);
            auto bounds = mle::MleBounds::for_array(cfg);
            mle::MleParams init;
            init.theta = out.estimate.theta_hat;
            init.r = out.estimate.near_field
                         ? std::clamp(out.estimate.r_hat, bounds.r_min, bounds.r_max)
                         : 0.9 * pattern::modified_rayleigh(cfg, init.theta, params.rho,
                                                            params.p);
            const mle::AmplitudeModel shape(cfg, *cb, {init.theta, init.r, 1.0, 1.0},
                                            false);
            const auto d0 = mle::init_amp_factor(obs, shape.u, regions.signal_set, s2_0);
            init.amp_factor = d0.value;
            init.noise_power = s2_0;
            const auto res = mle::optimize(obs, cfg, init, sched, bounds, rng);
            std::mt19937_64 crb_rng(derive_seed(global.seed, 1));
            const auto fi = mle::fisher_info(cfg, *cb, res.params, mle_nmc, crb_rng);
            json j{{"theta_hat", res.params.theta},
                   {"r_hat", res.params.r},
                   {"amp_factor_hat", res.params.amp_factor},
                   {"noise_power_hat", res.params.noise_power},
                   {"log_lik", res.log_lik},
                   {"iterations", res.iterations},
                   {"coarse_init",
                    {{"theta", init.theta},
                     {"r", init.r},
                     {"amp_factor", init.amp_factor},
                     {"noise_power", init.noise_power},
                     {"ls_fallback", d0.least_squares_fallback}}},
                   {"crb_diag", fi.crb_diag},
                   {"truth", {{"theta", mle_theta}, {"r", mle_r}}}};
            emit(global, "mle.json", j.dump(2) + "\n");
        } else if (cmd_crb->parsed()) {
            const double sigma2 = sim::calibrate_noise(cfg, crb_snr);
            const auto cb = geom::dft_codebook(cfg, cfg.n_elements);
            const double d_true = std::sqrt(static_cast<double>(cfg.n_elements)) *
                                  cfg.wavelength_m / (4.0 * kPi);
            std::mt19937_64 rng(derive_seed(global.seed, 0));
            const auto fi = mle::fisher_info(cfg, cb, {crb_theta, crb_r, d_true, sigma2},
                                             crb_nmc, rng);
            json j{{"snr_db", crb_snr},
                   {"theta", crb_theta},
                   {"r", crb_r},
                   {"crb_diag", fi.crb_diag},
                   {"fisher", fi.matrix},
                   {"fisher_std_error", fi.std_error},
                   {"pseudo_inverse", fi.pseudo_inverse},
                   {"condition", fi.condition}};
            emit(global, "crb.json", j.dump(2) + "\n");
        } else if (cmd_rate->parsed()) {
            std::string body =
                "snr_db,estimator,rate_mean,rate_p10,rate_p90,n_trials\n";
            for (double snr : parse_snr_range(rate_snr)) {
                for (const auto& name : rate_estimators) {
                    sim::ScenarioConfig sc;
                    sc.array = cfg;
                    sc.estimator = parse_estimator(name);
                    sc.reference_snr_db = snr;
                    sc.n_trials = rate_trials;
                    sc.n_users = rate_users;
                    sc.dft_samples = rate_ns;
                    sc.seed = global.seed;
                    sc.train_params = rate_train_opts.resolved();
                    if (rate_users > 1) {
                        const auto res = sim::run_multiuser_campaign(sc);
                        body += io::csv_row({io::format_double(snr), name,
                                             io::format_double(res.rate_mean), "", "",
                                             std::to_string(rate_trials)});
                    } else {
                        const auto res = sim::run_campaign(sc);
                        body += io::csv_row({io::format_double(snr), name,
                                             io::format_double(res.rate_mean),
                                             io::format_double(res.rate_p10),
                                             io::format_double(res.rate_p90),
                                             std::to_string(rate_trials)});
                    }
                }
            }
            emit(global, "rate.csv", body);
        } else if (cmd_campaign->parsed()) {
            std::string body = sim::campaign_csv_header();
            std::string trials_body;
            for (double snr : parse_snr_range(campaign_snr)) {
                sim::ScenarioConfig sc;
                sc.array = cfg;
                sc.estimator = parse_estimator(campaign_estimator);
                sc.reference_snr_db = snr;
                sc.n_trials = campaign_trials;
                sc.dft_samples = campaign_ns;
                sc.exhaustive_rings = campaign_rings;
                sc.seed = global.seed;
                sc.region.hi = region_hi;
                sc.train_params = campaign_train_opts.resolved();
                const auto res = sim::run_campaign(sc);
                body += sim::campaign_csv_row(res);
                if (emit_trials) trials_body += trials_jsonl(res);
            }
            emit(global, "campaign.csv", body);
            if (emit_trials) emit(global, "campaign_trials.jsonl", trials_body);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
