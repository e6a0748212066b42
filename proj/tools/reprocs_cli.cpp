#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include "reprocs/harness.hpp"
#include "reprocs/theory.hpp"

using json = nlohmann::json;
using namespace reprocs;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (allowed.find(key) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

datagen::Ramp parse_ramp(const json& j) {
    reject_unknown(j, {"gamma_new", "ratio", "k_cap", "window"}, "ramp");
    datagen::Ramp r;
    r.gamma_new = j.value("gamma_new", r.gamma_new);
    r.ratio = j.value("ratio", r.ratio);
    r.k_cap = j.value("k_cap", r.k_cap);
    r.window = j.value("window", r.window);
    return r;
}

datagen::ModelConfig parse_model(const json& j) {
    reject_unknown(j, {"n", "r0", "t_train", "t_max", "gamma0", "gamma_star", "epochs"}, "model");
    datagen::ModelConfig m;
    m.n = j.at("n").get<int>();
    m.r0 = j.at("r0").get<int>();
    m.t_train = j.at("t_train").get<int>();
    m.t_max = j.at("t_max").get<int>();
    m.gamma0 = j.at("gamma0").get<std::vector<double>>();
    m.gamma_star = j.value("gamma_star", 1.0);
    for (const auto& je : j.value("epochs", json::array())) {
        reject_unknown(je, {"t_change", "c_new", "deleted", "gamma_existing", "ramp"}, "epoch");
        datagen::EpochSpec e;
        e.t_change = je.at("t_change").get<int>();
        e.c_new = je.value("c_new", 0);
        e.deleted = je.value("deleted", std::vector<int>{});
        e.gamma_existing = je.at("gamma_existing").get<std::vector<double>>();
        if (je.contains("ramp")) e.ramp = parse_ramp(je.at("ramp"));
        m.epochs.push_back(std::move(e));
    }
    return m;
}

datagen::SupportSchedule parse_support(const json& j, int t_train) {
    reject_unknown(j, {"s", "delta", "mag_low", "mag_high"}, "support");
    datagen::SupportSchedule s;
    s.s = j.at("s").get<int>();
    s.delta = j.at("delta").get<int>();
    s.t_train = t_train;
    s.mag_low = j.value("mag_low", 2.0);
    s.mag_high = j.value("mag_high", 3.0);
    return s;
}

tracker::TrackerConfig parse_tracker(const json& j, int n, int t_train) {
    reject_unknown(j,
                   {"alpha", "alpha_tilde", "K", "xi", "omega", "change_times", "c_new", "clusters",
                    "auto_cluster", "deletion_enabled", "cs_tol", "cs_max_iter"},
                   "tracker");
    tracker::TrackerConfig t;
    t.n = n;
    t.t_train = t_train;
    t.alpha = j.at("alpha").get<int>();
    t.alpha_tilde = j.value("alpha_tilde", t.alpha_tilde);
    t.K = j.at("K").get<int>();
    if (j.contains("xi")) {
        const auto& jx = j.at("xi");
        reject_unknown(jx, {"mode", "value"}, "xi");
        const std::string mode = jx.at("mode").get<std::string>();
        if (mode == "adaptive") {
            t.xi.adaptive = true;
        } else if (mode == "fixed") {
            t.xi.adaptive = false;
            t.xi.fixed_value = jx.at("value").get<double>();
        } else {
            throw ConfigError("config: xi mode must be 'adaptive' or 'fixed'");
        }
    }
    if (j.contains("omega")) {
        const auto& jo = j.at("omega");
        reject_unknown(jo, {"mode", "value"}, "omega");
        const std::string mode = jo.at("mode").get<std::string>();
        if (mode == "energy") {
            t.omega.energy = true;
        } else if (mode == "fixed") {
            t.omega.energy = false;
            t.omega.fixed_value = jo.at("value").get<double>();
        } else {
            throw ConfigError("config: omega mode must be 'energy' or 'fixed'");
        }
    }
    t.change_times = j.value("change_times", std::vector<int>{});
    t.c_new = j.value("c_new", std::vector<int>{});
    t.clusters = j.value("clusters", std::vector<std::vector<int>>{});
    if (j.contains("auto_cluster")) {
        const auto& ja = j.at("auto_cluster");
        reject_unknown(ja, {"d1", "merge_gap_threshold", "rank"}, "auto_cluster");
        tracker::AutoClusterConfig ac;
        ac.d1 = ja.value("d1", ac.d1);
        ac.merge_gap_threshold = ja.value("merge_gap_threshold", ac.merge_gap_threshold);
        ac.rank = ja.at("rank").get<std::vector<int>>();
        t.auto_cluster = std::move(ac);
    }
    t.deletion_enabled = j.value("deletion_enabled", true);
    t.cs_tol = j.value("cs_tol", t.cs_tol);
    t.cs_max_iter = j.value("cs_max_iter", t.cs_max_iter);
    return t;
}

harness::ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    reject_unknown(j,
                   {"preset", "trials", "seed", "out", "jobs", "algorithms", "delta",
                    "training_noise", "metrics_cadence", "model", "support", "tracker"},
                   "top level");
    harness::ExperimentConfig cfg;
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "desk") cfg = harness::desk_preset();
        else if (p == "paper") cfg = harness::paper_preset();
        else throw ConfigError("config: unknown preset '" + p + "'");
    } else {
        cfg.model = parse_model(j.at("model"));
        cfg.support = parse_support(j.at("support"), cfg.model.t_train);
        cfg.tracker = parse_tracker(j.at("tracker"), cfg.model.n, cfg.model.t_train);
    }
    cfg.trials = j.value("trials", cfg.trials);
    cfg.seed_base = j.value("seed", cfg.seed_base);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("algorithms")) cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("training_noise")) cfg.training_noise = j.at("training_noise").get<double>();
    if (j.contains("metrics_cadence")) cfg.metrics_cadence = j.at("metrics_cadence").get<int>();
    if (j.contains("delta")) harness::set_delta(cfg, j.at("delta").get<int>());
    return cfg;
}

theory::TheoryParams load_theory_params(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    reject_unknown(j,
                   {"n", "J", "r", "c", "r0", "zeta", "gamma_star", "gamma_new", "lambda_minus",
                    "lambda_plus", "kappa_s_e_plus", "g_tilde_max", "h_tilde_max", "c_tilde_min",
                    "vartheta_max", "rho", "ramp_ratio"},
                   "theory params");
    theory::TheoryParams p;
    p.n = j.value("n", p.n);
    p.J = j.value("J", p.J);
    p.r = j.value("r", p.r);
    p.c = j.value("c", p.c);
    p.r0 = j.value("r0", p.r0);
    p.zeta = j.value("zeta", p.zeta);
    p.gamma_star = j.value("gamma_star", p.gamma_star);
    p.gamma_new = j.value("gamma_new", p.gamma_new);
    p.lambda_minus = j.value("lambda_minus", p.lambda_minus);
    p.lambda_plus = j.value("lambda_plus", p.lambda_plus);
    p.kappa_s_e_plus = j.value("kappa_s_e_plus", p.kappa_s_e_plus);
    p.g_tilde_max = j.value("g_tilde_max", p.g_tilde_max);
    p.h_tilde_max = j.value("h_tilde_max", p.h_tilde_max);
    p.c_tilde_min = j.value("c_tilde_min", p.c_tilde_min);
    p.vartheta_max = j.value("vartheta_max", p.vartheta_max);
    p.rho = j.value("rho", p.rho);
    p.ramp_ratio = j.value("ramp_ratio", p.ramp_ratio);
    return p;
}

// Theory parameters implied by a generated preset: amplitudes give the
// lambda extremes, the clustering comes from the configured sizes.
theory::TheoryParams theory_from_experiment(const harness::ExperimentConfig& cfg) {
    theory::TheoryParams p;
    p.n = cfg.model.n;
    p.J = static_cast<int>(cfg.model.epochs.size());
    p.r0 = cfg.model.r0;
    int c_max = 1;
    for (const auto& e : cfg.model.epochs) c_max = std::max(c_max, e.c_new);
    p.c = c_max;
    p.r = p.r0 + p.c;
    double gmax = 0.0, gmin = 1e300;
    for (double g : cfg.model.gamma0) {
        gmax = std::max(gmax, g);
        gmin = std::min(gmin, g);
    }
    for (const auto& e : cfg.model.epochs) {
        for (double g : e.gamma_existing) {
            gmax = std::max(gmax, g);
            gmin = std::min(gmin, g);
        }
        p.gamma_new = e.ramp.gamma_new;
        p.ramp_ratio = e.ramp.ratio;
    }
    p.gamma_star = cfg.model.gamma_star;
    p.lambda_plus = gmax * gmax / 3.0;
    p.lambda_minus = gmin * gmin / 3.0;
    int c_min = 1 << 30;
    int v_max = 1;
    for (const auto& cl : cfg.tracker.clusters) {
        v_max = std::max(v_max, static_cast<int>(cl.size()));
        for (int c : cl) c_min = std::min(c_min, c);
    }
    p.c_tilde_min = (c_min == (1 << 30)) ? 1 : c_min;
    p.vartheta_max = v_max;
    const double rc = static_cast<double>(p.r) + p.c;
    p.zeta = std::min({1e-4 / (rc * rc), 1.5e-4 / (rc * rc * p.f()),
                       1.0 / (rc * rc * rc * p.gamma_star * p.gamma_star)});
    return p;
}

// Stable-phase spectrum of one epoch partitioned by the configured cluster
// sizes; gives the per-cluster (g̃, h̃) pairs for the report.
theory::ModelMeasurements measurements_from_experiment(const harness::ExperimentConfig& cfg) {
    theory::ModelMeasurements meas;
    if (!cfg.tracker.change_times.empty()) {
        double gap = 1e300;
        for (size_t j = 0; j + 1 < cfg.tracker.change_times.size(); ++j)
            gap = std::min(gap, static_cast<double>(cfg.tracker.change_times[j + 1] -
                                                    cfg.tracker.change_times[j]));
        if (gap < 1e300) meas.min_change_gap = gap;
    }
    if (cfg.model.epochs.empty() || cfg.tracker.clusters.empty()) return meas;
    const auto& e = cfg.model.epochs.front();
    std::vector<double> lam;
    for (double g : e.gamma_existing) lam.push_back(g * g / 3.0);
    const double ramp_final = std::min(
        std::pow(e.ramp.ratio, std::max(0, e.ramp.k_cap - 1)) * e.ramp.gamma_new,
        cfg.model.gamma_star);
    for (int c = 0; c < e.c_new; ++c) lam.push_back(ramp_final * ramp_final / 3.0);
    std::sort(lam.begin(), lam.end(), std::greater<double>());

    size_t lo = 0;
    const auto& sizes = cfg.tracker.clusters.front();
    for (size_t k = 0; k < sizes.size(); ++k) {
        const size_t hi = lo + static_cast<size_t>(sizes[k]);
        if (hi > lam.size()) return meas; // inconsistent config; skip the series
        const double g = lam[lo] / lam[hi - 1];
        const double h = (hi < lam.size()) ? lam[hi] / lam[hi - 1] : 0.0;
        meas.cluster_ghs.emplace_back(g, h);
        lo = hi;
    }
    return meas;
}

json report_to_json(const theory::BoundReport& r) {
    json j;
    j["K"] = r.K;
    j["xi0"] = r.xi0_value;
    j["alpha_add"] = r.alpha_add_value;
    j["alpha_del"] = r.alpha_del_value;
    j["zeta_plus"] = r.zeta_plus;
    j["f_inc"] = r.f_inc_at_max;
    j["f_dec"] = r.f_dec_at_max;
    j["zeta_tilde_plus"] = r.zeta_tilde_plus_at_max;
    j["zeta_tilde_series"] = r.zeta_tilde_series;
    j["all_checked_pass"] = r.all_checked_pass;
    json conds = json::array();
    for (const auto& c : r.conditions) {
        conds.push_back({{"name", c.name},
                         {"checked", c.checked},
                         {"pass", c.pass},
                         {"margin", c.margin},
                         {"detail", c.detail}});
    }
    j["conditions"] = conds;
    if (r.corollary_small_f) {
        const auto& c = *r.corollary_small_f;
        j["corollary_small_f"] = {{"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}};
    }
    return j;
}

harness::ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset,
                                         int delta) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = load_experiment_config(config_path);
    } else if (preset == "desk") {
        cfg = harness::desk_preset();
    } else if (preset == "paper") {
        cfg = harness::paper_preset();
    } else {
        throw ConfigError("either --config or --preset {desk,paper} is required");
    }
    if (delta > 0) harness::set_delta(cfg, delta);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive projected CS tracker with subspace addition and cluster-wise deletion"};
    app.require_subcommand(1);

    std::string config_path, preset, out;
    std::uint64_t seed = 0;
    int jobs = 1, trials = 0, delta = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON experiment config");
        cmd->add_option("--preset", preset, "Built-in configuration: desk or paper");
        cmd->add_option("--seed", seed, "Base seed");
        cmd->add_option("--out", out, "Output directory or file");
        cmd->add_option("--jobs", jobs, "Concurrent trials");
        cmd->add_option("--delta", delta, "Override the support shift period");
    };

    CLI::App* cmd_generate = app.add_subcommand("generate", "Write a synthetic sequence binary");
    add_common(cmd_generate);

    CLI::App* cmd_track = app.add_subcommand("track", "Run one tracker over a preset or file");
    add_common(cmd_track);
    std::string input, algo = "reprocs-cpca";
    cmd_track->add_option("--input", input, "Sequence binary from 'generate'");
    cmd_track->add_option("--algo", algo, "reprocs or reprocs-cpca");

    CLI::App* cmd_theory = app.add_subcommand("theory", "Print the bound report");
    add_common(cmd_theory);
    std::string theory_config;
    cmd_theory->add_option("--params", theory_config, "JSON theory parameters");

    CLI::App* cmd_experiment = app.add_subcommand("experiment", "Seeded Monte Carlo comparison");
    add_common(cmd_experiment);
    cmd_experiment->add_option("--trials", trials, "Number of Monte Carlo trials");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_generate->parsed()) {
            auto cfg = resolve_config(config_path, preset, delta);
            if (out.empty()) throw ConfigError("generate: --out FILE is required");
            const auto seq = datagen::generate(cfg.model, cfg.support, seed);
            datagen::write_sequence(seq, out);
            std::cout << "wrote " << out << " (n=" << cfg.model.n << ", t_max=" << cfg.model.t_max
                      << ")\n";
        } else if (cmd_track->parsed()) {
            auto cfg = resolve_config(config_path, preset, delta);
            if (algo != "reprocs" && algo != "reprocs-cpca")
                throw ConfigError("track: --algo must be reprocs or reprocs-cpca");
            cfg.algorithms = {algo};
            cfg.trials = 1;
            cfg.seed_base = seed;
            cfg.jobs = 1;
            if (!input.empty()) {
                // File-driven run: ground-truth bases are unavailable, so the
                // subspace-error column stays empty.
                const auto loaded = datagen::read_sequence(input);
                tracker::TrackerConfig tc = cfg.tracker;
                tc.deletion_enabled = (algo == "reprocs-cpca");
                const Matrix training = loaded.m.leftCols(cfg.model.t_train);
                const BasisMatrix p0 =
                    tracker::estimate_initial_subspace(training, cfg.model.r0).basis;
                const Vector last_training = training.col(training.cols() - 1);
                tracker::Tracker trk(p0, tc, &last_training);
                std::vector<harness::MetricsRow> rows;
                for (int t = cfg.model.t_train + 1; t <= static_cast<int>(loaded.m.cols()); ++t) {
                    const auto rec = trk.step(loaded.m.col(t - 1));
                    harness::MetricsRow row;
                    row.t = t;
                    row.algo = algo;
                    row.trial = 0;
                    const Vector s_true = loaded.s.col(t - 1);
                    const double sn = s_true.norm();
                    row.err_s_rel = sn > 0 ? (rec.s_hat - s_true).norm() / sn
                                           : (rec.s_hat - s_true).norm();
                    std::vector<int> supp;
                    for (int i = 0; i < s_true.size(); ++i)
                        if (s_true(i) != 0.0) supp.push_back(i);
                    std::vector<int> inter;
                    std::set_intersection(rec.t_hat.begin(), rec.t_hat.end(), supp.begin(),
                                          supp.end(), std::back_inserter(inter));
                    row.precision =
                        rec.t_hat.empty() ? 1.0 : double(inter.size()) / rec.t_hat.size();
                    row.recall = supp.empty() ? 1.0 : double(inter.size()) / supp.size();
                    row.phase = rec.phase == tracker::Phase::Addition  ? "addition"
                              : rec.phase == tracker::Phase::Deletion ? "deletion"
                                                                      : "stable";
                    rows.push_back(std::move(row));
                }
                if (out.empty()) throw ConfigError("track: --out DIR is required");
                std::filesystem::create_directories(out);
                harness::write_rows_csv(rows, out + "/rows.csv");
                std::cout << "wrote " << out << "/rows.csv\n";
            } else {
                if (out.empty()) throw ConfigError("track: --out DIR is required");
                cfg.out_dir = out;
                harness::run_and_emit(cfg);
                std::cout << "wrote " << out << "/rows.csv and " << out << "/mean.csv\n";
            }
        } else if (cmd_theory->parsed()) {
            theory::TheoryParams p;
            theory::ModelMeasurements meas;
            if (!theory_config.empty()) {
                p = load_theory_params(theory_config);
            } else {
                auto cfg = resolve_config(config_path, preset, delta);
                p = theory_from_experiment(cfg);
                meas = measurements_from_experiment(cfg);
                if (!meas.cluster_ghs.empty()) {
                    p.g_tilde_max = 1.0;
                    p.h_tilde_max = 0.0;
                    for (const auto& [g, h] : meas.cluster_ghs) {
                        p.g_tilde_max = std::max(p.g_tilde_max, g);
                        p.h_tilde_max = std::max(p.h_tilde_max, h);
                    }
                }
            }
            const auto report = theory::check_conditions(p, meas);
            std::cout << theory::format_report(report);
            if (!out.empty()) {
                std::filesystem::create_directories(out);
                std::ofstream os(out + "/bound_report.json");
                os << report_to_json(report).dump(2) << "\n";
                std::cout << "wrote " << out << "/bound_report.json\n";
            }
        } else if (cmd_experiment->parsed()) {
            auto cfg = resolve_config(config_path, preset, delta);
            if (trials > 0) cfg.trials = trials;
            cfg.seed_base = seed;
            cfg.jobs = jobs;
            if (out.empty()) throw ConfigError("experiment: --out DIR is required");
            cfg.out_dir = out;
            harness::run_and_emit(cfg);
            std::cout << "wrote " << out << "/rows.csv and " << out << "/mean.csv\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
