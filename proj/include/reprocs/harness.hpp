#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/datagen.hpp"
#include "reprocs/tracker.hpp"

namespace reprocs::harness {

struct ExperimentConfig {
    datagen::ModelConfig model;
    datagen::SupportSchedule support;
    double training_noise = 1e-3;
    tracker::TrackerConfig tracker; // deletion flag is overridden per algorithm
    int trials = 1;
    std::uint64_t seed_base = 0;
    std::vector<std::uint64_t> seeds; // optional explicit per-trial seeds
    std::string out_dir;
    int jobs = 1;
    int metrics_cadence = 1; // record every n-th frame; update frames always kept
    std::vector<std::string> algorithms{"reprocs-cpca", "reprocs"}; // subset of these two
    std::string name = "custom";

    void validate() const;
};

/// Scaled-down two-change configuration that runs in minutes: n = 256,
/// r0 = 10, three amplitude tiers, one direction added and three deleted per
/// change.
ExperimentConfig desk_preset();

/// The full-scale configuration (n = 2048, 5200 frames). Heavy; intended for
/// the CLI rather than the test suite.
ExperimentConfig paper_preset();

/// Replaces the support-shift period Δ in an existing configuration.
void set_delta(ExperimentConfig& cfg, int delta);

struct MetricsRow {
    int t = 0;
    std::string algo;
    int trial = 0;
    std::optional<double> se; // absent when ground-truth bases are unknown
    double err_s_rel = 0.0;
    double precision = 1.0;
    double recall = 1.0;
    std::optional<double> kappa_proxy; // only on frames where proj-PCA fired
    std::string phase;
};

struct MeanRow {
    int t = 0;
    std::string algo;
    double se = 0.0;
    double err_s_rel = 0.0;
    double precision = 1.0;
    double recall = 1.0;
    std::optional<double> kappa_proxy;
    std::string phase;
};

struct ProbePoint {
    std::string algo;
    int trial = 0;
    int epoch = 0;
    int k = 0; // 0 is the pre-update probe at t_j − 1
    int t = 0;
    double value = 0.0;
    bool degenerate = false; // unestimated new subspace had negligible norm
};

struct ExperimentResult {
    std::vector<MetricsRow> rows; // sorted by (algo, trial, t)
    std::vector<MeanRow> mean;    // sorted by (algo, t)
    std::vector<ProbePoint> probes;
};

/// Denseness proxy ‖I_{T_t}ᵀ D_{new,k}‖₂ / ‖D_{new,k}‖₂ at the update frames
/// t = t_j + kα − 1 (k = 0 probes the state just before the first update).
/// Needs ground truth, so it only exists in simulation.
std::vector<ProbePoint> kappa_probe(const datagen::GeneratedSequence& seq,
                                    const std::vector<tracker::AdditionEvent>& trace,
                                    int alpha);

/// Seeded Monte Carlo over trials × algorithms: trial i uses seed_base + i
/// and both algorithms see identical data. Trials run on up to `jobs`
/// threads; aggregation is order-independent.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// RFC-4180-style CSV with header
/// t,algo,trial,se,err_s_rel,precision,recall,kappa_proxy,phase.
/// Floats carry 17 significant digits so a round-trip parse is bit-exact;
/// absent optionals serialize as empty fields.
void write_rows_csv(const std::vector<MetricsRow>& rows, const std::string& path);
void write_mean_csv(const std::vector<MeanRow>& mean, const std::string& path);

/// Runs the experiment and writes rows.csv and mean.csv under cfg.out_dir.
ExperimentResult run_and_emit(const ExperimentConfig& cfg);

} // namespace reprocs::harness
