#include "reprocs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "reprocs/linalg.hpp"

namespace reprocs::harness {

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("ExperimentConfig: trials must be at least 1");
    if (!seeds.empty() && static_cast<int>(seeds.size()) != trials)
        throw ConfigError("ExperimentConfig: explicit seed list must have one seed per trial");
    if (metrics_cadence < 1) throw ConfigError("ExperimentConfig: metrics cadence must be positive");
    if (jobs < 1) throw ConfigError("ExperimentConfig: jobs must be at least 1");
    if (algorithms.empty()) throw ConfigError("ExperimentConfig: algorithms must be nonempty");
    for (const auto& a : algorithms)
        if (a != "reprocs" && a != "reprocs-cpca")
            throw ConfigError("ExperimentConfig: unknown algorithm '" + a + "'");
    if (training_noise < 0.0) throw ConfigError("ExperimentConfig: negative training noise");
}

ExperimentConfig desk_preset() {
    ExperimentConfig cfg;
    cfg.name = "desk";

    datagen::ModelConfig& m = cfg.model;
    m.n = 256;
    m.r0 = 10;
    m.t_train = 100;
    m.t_max = 2600;
    m.gamma_star = 30.0;
    m.gamma0 = {30, 30, 30, 5, 5, 5, 1, 1, 1, 1};

    datagen::Ramp ramp{1.0, 1.1, 4, 60};

    datagen::EpochSpec e1;
    e1.t_change = 201;
    e1.c_new = 1;
    e1.deleted = {2, 5, 9}; // last column of each amplitude tier
    e1.gamma_existing = {30, 30, 5, 5, 1, 1, 1};
    e1.ramp = ramp;

    datagen::EpochSpec e2;
    e2.t_change = 1401;
    e2.c_new = 1;
    e2.deleted = {1, 3, 6}; // again one per tier, in P_1 column order
    e2.gamma_existing = {30, 5, 1, 1, 1.331};
    e2.ramp = ramp;

    m.epochs = {e1, e2};

    cfg.support.s = 8;
    cfg.support.delta = 10;
    cfg.support.t_train = m.t_train;
    cfg.support.mag_low = 2.0;
    cfg.support.mag_high = 3.0;

    // Low enough that the estimate keeps improving across all K addition
    // steps, high enough that the stale initial estimate is visibly worse
    // than a fresh re-estimation.
    cfg.training_noise = 3e-5;

    tracker::TrackerConfig& t = cfg.tracker;
    t.n = m.n;
    t.t_train = m.t_train;
    t.alpha = 60;
    t.alpha_tilde = 120;
    t.K = 6;
    t.change_times = {201, 1401};
    t.c_new = {1, 1};
    t.clusters = {{2, 2, 4}, {1, 1, 4}};
    t.deletion_enabled = true;
    t.cs_tol = 1e-6;
    t.cs_max_iter = 3000;
    return cfg;
}

ExperimentConfig paper_preset() {
    ExperimentConfig cfg;
    cfg.name = "paper";

    datagen::ModelConfig& m = cfg.model;
    m.n = 2048;
    m.r0 = 36;
    m.t_train = 200;
    m.t_max = 5200;
    m.gamma_star = 400.0;
    m.gamma0.clear();
    for (int i = 0; i < 9; ++i) m.gamma0.push_back(400);
    for (int i = 0; i < 9; ++i) m.gamma0.push_back(30);
    for (int i = 0; i < 9; ++i) m.gamma0.push_back(2);
    for (int i = 0; i < 9; ++i) m.gamma0.push_back(1);

    datagen::EpochSpec e1;
    e1.t_change = 301;
    e1.c_new = 1;
    e1.deleted = {8, 17, 35};
    for (int i = 0; i < 8; ++i) e1.gamma_existing.push_back(400);
    for (int i = 0; i < 8; ++i) e1.gamma_existing.push_back(30);
    for (int i = 0; i < 8; ++i) e1.gamma_existing.push_back(2);
    for (int i = 0; i < 9; ++i) e1.gamma_existing.push_back(1);
    e1.ramp = {1.0, 1.1, 4, 100};

    datagen::EpochSpec e2;
    e2.t_change = 2501;
    e2.c_new = 1;
    e2.deleted = {7, 15, 32};
    for (int i = 0; i < 7; ++i) e2.gamma_existing.push_back(400);
    for (int i = 0; i < 7; ++i) e2.gamma_existing.push_back(30);
    for (int i = 0; i < 7; ++i) e2.gamma_existing.push_back(2);
    e2.gamma_existing.push_back(1.331);
    for (int i = 0; i < 9; ++i) e2.gamma_existing.push_back(1);
    e2.ramp = {1.0, 1.1, 7, 100};

    m.epochs = {e1, e2};

    cfg.support.s = 20;
    cfg.support.delta = 10;
    cfg.support.t_train = m.t_train;

    cfg.training_noise = 1e-3;

    tracker::TrackerConfig& t = cfg.tracker;
    t.n = m.n;
    t.t_train = m.t_train;
    t.alpha = 100;
    t.alpha_tilde = 200;
    t.K = 15;
    t.change_times = {301, 2501};
    t.c_new = {1, 1};
    t.clusters = {{8, 8, 18}, {7, 7, 18}};
    t.deletion_enabled = true;
    return cfg;
}

void set_delta(ExperimentConfig& cfg, int delta) {
    if (delta < 1) throw ConfigError("set_delta: delta must be positive");
    cfg.support.delta = delta;
}

std::vector<ProbePoint> kappa_probe(const datagen::GeneratedSequence& seq,
                                    const std::vector<tracker::AdditionEvent>& trace,
                                    int alpha) {
    std::vector<ProbePoint> out;
    const int n = seq.model.n;
    auto probe = [&](int epoch, int k, int t, const Matrix& d_new) {
        ProbePoint p;
        p.epoch = epoch;
        p.k = k;
        p.t = t;
        const std::vector<int> supp = datagen::support_at(seq.support, t, n);
        try {
            p.value = kappa_proxy(d_new, supp);
        } catch (const DegenerateInputError&) {
            p.degenerate = true;
            p.value = 0.0;
        }
        out.push_back(p);
    };

    int last_epoch = 0;
    for (const auto& ev : trace) {
        if (ev.epoch > static_cast<int>(seq.p_new.size())) continue;
        const Matrix& p_new = seq.p_new[static_cast<size_t>(ev.epoch - 1)].matrix();
        if (ev.epoch != last_epoch) {
            // k = 0: nothing of the new subspace is estimated yet.
            const int t0 = ev.t - alpha * ev.k; // t_j − 1
            Matrix d0 = ev.p_prev.projectOrthogonal(p_new);
            probe(ev.epoch, 0, t0, d0);
            last_epoch = ev.epoch;
        }
        Matrix d = ev.p_prev.projectOrthogonal(p_new);
        d = ev.p_new_hat.projectOrthogonal(d);
        probe(ev.epoch, ev.k, ev.t, d);
    }
    return out;
}

namespace {

struct TrialOutput {
    std::vector<MetricsRow> rows;
    std::vector<ProbePoint> probes;
};

TrialOutput run_trial(const ExperimentConfig& cfg, int trial) {
    using namespace reprocs::tracker;
    const std::uint64_t seed = cfg.seeds.empty()
                                   ? cfg.seed_base + static_cast<std::uint64_t>(trial)
                                   : cfg.seeds[static_cast<size_t>(trial)];
    const datagen::GeneratedSequence seq = datagen::generate(cfg.model, cfg.support, seed);
    const Matrix training = datagen::training_block(seq, cfg.training_noise);
    const BasisMatrix p0 =
        estimate_initial_subspace(training, cfg.model.r0).basis;
    const Vector last_training = training.col(training.cols() - 1);

    TrialOutput out;
    for (const std::string& algo : cfg.algorithms) {
        TrackerConfig tc = cfg.tracker;
        tc.deletion_enabled = (algo == "reprocs-cpca");
        Tracker trk(p0, tc, &last_training);

        std::map<int, size_t> row_at_t;
        for (int t = cfg.model.t_train + 1; t <= cfg.model.t_max; ++t) {
            const FrameRecord rec = trk.step(seq.m.col(t - 1));
            if ((t - cfg.model.t_train - 1) % cfg.metrics_cadence != 0 &&
                !rec.addition_update && !rec.deletion_update)
                continue;

            MetricsRow row;
            row.t = t;
            row.algo = algo;
            row.trial = trial;
            row.se = subspace_error(trk.current_basis(), seq.p_at(t));
            const Vector s_true = seq.s.col(t - 1);
            const double s_norm = s_true.norm();
            const double diff = (rec.s_hat - s_true).norm();
            row.err_s_rel = (s_norm > 0.0) ? diff / s_norm : diff;

            const std::vector<int> supp = datagen::support_at(seq.support, t, cfg.model.n);
            std::vector<int> inter;
            std::set_intersection(rec.t_hat.begin(), rec.t_hat.end(), supp.begin(), supp.end(),
                                  std::back_inserter(inter));
            row.precision = rec.t_hat.empty()
                                ? 1.0
                                : static_cast<double>(inter.size()) / rec.t_hat.size();
            row.recall = supp.empty() ? 1.0 : static_cast<double>(inter.size()) / supp.size();
            row.phase = rec.phase == Phase::Addition ? "addition"
                      : rec.phase == Phase::Deletion ? "deletion"
                                                     : "stable";
            row_at_t[t] = out.rows.size();
            out.rows.push_back(std::move(row));
        }

        std::vector<ProbePoint> probes = kappa_probe(seq, trk.addition_trace(), cfg.tracker.alpha);
        for (auto& p : probes) {
            p.algo = algo;
            p.trial = trial;
            if (p.k >= 1) {
                auto it = row_at_t.find(p.t);
                if (it != row_at_t.end() && !p.degenerate)
                    out.rows[it->second].kappa_proxy = p.value;
            }
        }
        out.probes.insert(out.probes.end(), probes.begin(), probes.end());
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<TrialOutput> outputs(static_cast<size_t>(cfg.trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= cfg.trials) break;
            try {
                outputs[static_cast<size_t>(i)] = run_trial(cfg, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                break;
            }
        }
    };

    const int threads = std::min(cfg.jobs, cfg.trials);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentResult res;
    for (auto& o : outputs) {
        res.rows.insert(res.rows.end(), o.rows.begin(), o.rows.end());
        res.probes.insert(res.probes.end(), o.probes.begin(), o.probes.end());
    }
    std::stable_sort(res.rows.begin(), res.rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        if (a.algo != b.algo) return a.algo < b.algo;
        if (a.trial != b.trial) return a.trial < b.trial;
        return a.t < b.t;
    });
    std::stable_sort(res.probes.begin(), res.probes.end(),
                     [](const ProbePoint& a, const ProbePoint& b) {
                         if (a.algo != b.algo) return a.algo < b.algo;
                         if (a.trial != b.trial) return a.trial < b.trial;
                         return a.t < b.t;
                     });

    // Mean over trials per (algo, t).
    struct Acc {
        double se = 0, err = 0, prec = 0, rec = 0, kappa = 0;
        int count = 0, kappa_count = 0;
        std::string phase;
    };
    std::map<std::pair<std::string, int>, Acc> acc;
    for (const auto& r : res.rows) {
        Acc& a = acc[{r.algo, r.t}];
        a.se += r.se.value_or(0.0);
        a.err += r.err_s_rel;
        a.prec += r.precision;
        a.rec += r.recall;
        if (r.kappa_proxy) {
            a.kappa += *r.kappa_proxy;
            ++a.kappa_count;
        }
        ++a.count;
        a.phase = r.phase;
    }
    for (const auto& [key, a] : acc) {
        MeanRow m;
        m.algo = key.first;
        m.t = key.second;
        m.se = a.se / a.count;
        m.err_s_rel = a.err / a.count;
        m.precision = a.prec / a.count;
        m.recall = a.rec / a.count;
        if (a.kappa_count > 0) m.kappa_proxy = a.kappa / a.kappa_count;
        m.phase = a.phase;
        res.mean.push_back(std::move(m));
    }
    std::stable_sort(res.mean.begin(), res.mean.end(), [](const MeanRow& a, const MeanRow& b) {
        if (a.algo != b.algo) return a.algo < b.algo;
        return a.t < b.t;
    });
    return res;
}

void write_rows_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("write_rows_csv: cannot open " + path);
    os << "t,algo,trial,se,err_s_rel,precision,recall,kappa_proxy,phase\n";
    for (const auto& r : rows) {
        os << r.t << ',' << r.algo << ',' << r.trial << ','
           << (r.se ? format_double(*r.se) : "") << ',' << format_double(r.err_s_rel) << ','
           << format_double(r.precision) << ',' << format_double(r.recall) << ','
           << (r.kappa_proxy ? format_double(*r.kappa_proxy) : "") << ',' << r.phase << '\n';
    }
    if (!os) throw ConfigError("write_rows_csv: write failed for " + path);
}

void write_mean_csv(const std::vector<MeanRow>& mean, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("write_mean_csv: cannot open " + path);
    os << "t,algo,se,err_s_rel,precision,recall,kappa_proxy,phase\n";
    for (const auto& m : mean) {
        os << m.t << ',' << m.algo << ',' << format_double(m.se) << ','
           << format_double(m.err_s_rel) << ',' << format_double(m.precision) << ','
           << format_double(m.recall) << ','
           << (m.kappa_proxy ? format_double(*m.kappa_proxy) : "") << ',' << m.phase << '\n';
    }
    if (!os) throw ConfigError("write_mean_csv: write failed for " + path);
}

ExperimentResult run_and_emit(const ExperimentConfig& cfg) {
    ExperimentResult res = run_experiment(cfg);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_rows_csv(res.rows, cfg.out_dir + "/rows.csv");
        write_mean_csv(res.mean, cfg.out_dir + "/mean.csv");
    }
    return res;
}

} // namespace reprocs::harness
