#include "reprocs/tracker.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "reprocs/linalg.hpp"

namespace reprocs::tracker {

namespace {

struct Span {
    int lo; // first index
    int hi; // one past last
};

double spread(const std::vector<double>& lam, const Span& s) {
    return lam[static_cast<size_t>(s.lo)] / lam[static_cast<size_t>(s.hi - 1)];
}

// Best strict-decrease cut inside [lo, hi), minimizing the larger of the two
// halves' spreads. Returns -1 when every adjacent pair is equal.
int best_cut(const std::vector<double>& lam, const Span& s) {
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int c = s.lo + 1; c < s.hi; ++c) {
        if (!(lam[static_cast<size_t>(c - 1)] > lam[static_cast<size_t>(c)])) continue;
        const double left = lam[static_cast<size_t>(s.lo)] / lam[static_cast<size_t>(c - 1)];
        const double right = lam[static_cast<size_t>(c)] / lam[static_cast<size_t>(s.hi - 1)];
        const double val = std::max(left, right);
        if (val < best_val) {
            best_val = val;
            best = c;
        }
    }
    return best;
}

} // namespace

ClusterPartition cluster_eigenvalues(const std::vector<double>& lambdas, int d1,
                                     double merge_gap_threshold) {
    const int r = static_cast<int>(lambdas.size());
    if (r == 0) throw ArgumentError("cluster_eigenvalues: empty spectrum");
    if (d1 < 0) throw ArgumentError("cluster_eigenvalues: negative split count");
    for (int i = 0; i < r; ++i) {
        if (!(lambdas[static_cast<size_t>(i)] > 0.0))
            throw ArgumentError("cluster_eigenvalues: eigenvalues must be positive");
        if (i > 0 && lambdas[static_cast<size_t>(i)] > lambdas[static_cast<size_t>(i - 1)])
            throw ArgumentError("cluster_eigenvalues: input is not non-increasing");
    }

    std::vector<Span> spans{{0, r}};
    for (int round = 0; round < d1; ++round) {
        std::vector<Span> next;
        for (const Span& s : spans) {
            const int c = best_cut(lambdas, s);
            if (c < 0) {
                next.push_back(s);
            } else {
                next.push_back({s.lo, c});
                next.push_back({c, s.hi});
            }
        }
        spans.swap(next);
    }

    // Merging two neighbors only deletes their shared boundary ratio; every
    // other h̃ is untouched. So the h̃-max-minimizing merge is "drop the
    // largest boundary", repeated while it is at least the gap threshold.
    auto boundary = [&](size_t i) {
        return lambdas[static_cast<size_t>(spans[i + 1].lo)] /
               lambdas[static_cast<size_t>(spans[i].hi - 1)];
    };
    while (spans.size() > 1) {
        size_t worst = 0;
        double worst_h = -1.0;
        for (size_t i = 0; i + 1 < spans.size(); ++i) {
            const double h = boundary(i);
            if (h > worst_h) {
                worst_h = h;
                worst = i;
            }
        }
        if (worst_h < merge_gap_threshold) break;
        spans[worst].hi = spans[worst + 1].hi;
        spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(worst) + 1);
    }

    ClusterPartition out;
    for (size_t i = 0; i < spans.size(); ++i) {
        out.sizes.push_back(spans[i].hi - spans[i].lo);
        out.g_tilde.push_back(spread(lambdas, spans[i]));
        const double h = (i + 1 < spans.size()) ? boundary(i) : 0.0;
        out.h_tilde.push_back(h);
    }
    out.g_tilde_max = *std::max_element(out.g_tilde.begin(), out.g_tilde.end());
    out.h_tilde_max = *std::max_element(out.h_tilde.begin(), out.h_tilde.end());
    return out;
}

InitialSubspace estimate_initial_subspace(const Matrix& training_block, int r0) {
    InitialSubspace out;
    const Eigen::Index n = training_block.rows();
    if (r0 < 0 || r0 > std::min(n, training_block.cols()))
        throw ArgumentError("estimate_initial_subspace: r0 out of range");
    if (r0 == 0) {
        out.basis = BasisMatrix::empty(n);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(training_block, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int numerical_rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-12 * sv(0)) ++numerical_rank;
    out.rank_warning = r0 > numerical_rank;
    out.basis = BasisMatrix(svd.matrixU().leftCols(r0));
    return out;
}

Tracker::Tracker(BasisMatrix p0_hat, TrackerConfig config, const Vector* last_training_frame)
    : cfg_(std::move(config)), p_hat_(std::move(p0_hat)) {
    if (p_hat_.isEmpty())
        throw ConfigError("Tracker: initial subspace estimate must be nonempty");
    if (p_hat_.rows() != cfg_.n)
        throw ConfigError("Tracker: initial basis row count disagrees with n");
    validate_config();
    // Rank bookkeeping must stay consistent: after epoch j the estimate has
    // rank Σc̃_{j,i} (deletion) or grows by c_new (no deletion).
    if (cfg_.deletion_enabled && !cfg_.auto_cluster) {
        int rank = static_cast<int>(p_hat_.cols());
        for (size_t j = 0; j < cfg_.change_times.size(); ++j) {
            const int after_add = rank + cfg_.c_new[j];
            int sum = 0;
            for (int c : cfg_.clusters[j]) sum += c;
            if (sum < 1 || sum > after_add)
                throw ConfigError("TrackerConfig: cluster sizes of epoch " + std::to_string(j + 1) +
                                  " sum to " + std::to_string(sum) + ", outside [1, " +
                                  std::to_string(after_add) + "]");
            rank = sum;
        }
    }
    p_prev_ = p_hat_;
    t_ = cfg_.t_train;
    if (cfg_.xi.adaptive) {
        if (last_training_frame == nullptr)
            throw ConfigError("Tracker: adaptive xi needs the last training frame to seed the "
                              "residual estimate");
        beta_prev_norm_ = p_hat_.projectOrthogonal(*last_training_frame).norm();
    }
}

void Tracker::validate_config() const {
    if (cfg_.n < 1 || cfg_.t_train < 1)
        throw ConfigError("TrackerConfig: n and t_train must be positive");
    if (cfg_.alpha < 1 || cfg_.alpha_tilde < 1 || cfg_.K < 1)
        throw ConfigError("TrackerConfig: alpha, alpha_tilde and K must be at least 1");
    if (!cfg_.xi.adaptive && cfg_.xi.fixed_value < 0.0)
        throw ConfigError("TrackerConfig: fixed xi must be nonnegative");
    if (!cfg_.omega.energy && cfg_.omega.fixed_value < 0.0)
        throw ConfigError("TrackerConfig: fixed omega must be nonnegative");
    if (cfg_.cs_max_iter < 1 || cfg_.cs_tol <= 0.0)
        throw ConfigError("TrackerConfig: bad solver settings");

    const size_t epochs = cfg_.change_times.size();
    if (cfg_.c_new.size() != epochs)
        throw ConfigError("TrackerConfig: c_new must have one entry per change time");
    const bool known_clusters = !cfg_.auto_cluster.has_value();
    if (cfg_.deletion_enabled && known_clusters && cfg_.clusters.size() != epochs)
        throw ConfigError("TrackerConfig: cluster sizes must be given per change time "
                          "(or auto clustering enabled)");
    if (cfg_.auto_cluster && cfg_.auto_cluster->rank.size() != epochs)
        throw ConfigError("TrackerConfig: auto clustering needs the target rank per epoch");

    int prev = cfg_.t_train;
    for (size_t j = 0; j < epochs; ++j) {
        const int tj = cfg_.change_times[j];
        if (tj <= prev)
            throw ConfigError("TrackerConfig: change times must be strictly increasing and "
                              "after t_train");
        if (cfg_.c_new[j] < 0)
            throw ConfigError("TrackerConfig: c_new must be nonnegative");
        int occupied = cfg_.K * cfg_.alpha;
        if (cfg_.deletion_enabled && known_clusters) {
            const auto& cl = cfg_.clusters[j];
            if (cl.empty())
                throw ConfigError("TrackerConfig: empty cluster list for epoch " +
                                  std::to_string(j + 1));
            for (int c : cl)
                if (c < 1)
                    throw ConfigError("TrackerConfig: cluster sizes must be positive");
            occupied += static_cast<int>(cl.size()) * cfg_.alpha_tilde;
        }
        if (j + 1 < epochs && cfg_.change_times[j + 1] - tj <= occupied)
            throw ConfigError("TrackerConfig: gap between change times " + std::to_string(j + 1) +
                              " and " + std::to_string(j + 2) +
                              " is too short for the scheduled subspace updates");
        prev = tj;
    }
}

double Tracker::current_xi() {
    return cfg_.xi.adaptive ? 2.0 * beta_prev_norm_ : cfg_.xi.fixed_value;
}

double Tracker::current_omega(const Vector& s_cs) const {
    if (!cfg_.omega.energy) return cfg_.omega.fixed_value;
    return 0.5 * energy_threshold(s_cs, 0.99);
}

void Tracker::finish_addition_window() {
    const int c_new = cfg_.c_new[static_cast<size_t>(j_)];
    Matrix d(cfg_.n, static_cast<Eigen::Index>(window_.size()));
    for (size_t i = 0; i < window_.size(); ++i)
        d.col(static_cast<Eigen::Index>(i)) = window_[i];
    window_.clear();
    if (d.cols() == 0)
        throw NumericalError("Tracker: every frame of an addition window failed");

    ProjPcaResult res = proj_pca(d, p_prev_, std::min<Eigen::Index>(c_new, d.cols()));
    pending_ppca_warnings_.ppca_ambiguous_cut |= res.ambiguous_cut;
    pending_ppca_warnings_.ppca_rank_deficient |= res.rank_deficient;
    p_new_hat_ = res.basis;
    p_hat_ = p_prev_.concat(p_new_hat_);
    addition_trace_.push_back({j_ + 1, k_, t_, p_prev_, p_new_hat_});

    if (k_ == cfg_.K) {
        k_ = 1;
        if (cfg_.deletion_enabled) {
            deletion_window_ = 1;
            g_hats_.clear();
            current_clusters_.clear();
        } else {
            p_prev_ = p_hat_;
            ++j_;
        }
    } else {
        ++k_;
    }
}

void Tracker::finish_deletion_window() {
    Matrix d(cfg_.n, static_cast<Eigen::Index>(window_.size()));
    for (size_t i = 0; i < window_.size(); ++i)
        d.col(static_cast<Eigen::Index>(i)) = window_[i];
    window_.clear();
    if (d.cols() == 0)
        throw NumericalError("Tracker: every frame of a re-estimation window failed");

    const int i = deletion_window_;
    BasisMatrix detected = BasisMatrix::empty(cfg_.n);
    for (const auto& g : g_hats_) detected = detected.concat(g);

    if (i == 1) {
        if (cfg_.auto_cluster) {
            const int rank = cfg_.auto_cluster->rank[static_cast<size_t>(j_)];
            ProjPcaResult res = proj_pca(d, detected, std::min<Eigen::Index>(rank, d.cols()));
            pending_ppca_warnings_.ppca_ambiguous_cut |= res.ambiguous_cut;
            pending_ppca_warnings_.ppca_rank_deficient |= res.rank_deficient;
            std::vector<double> lam(res.eigenvalues.data(),
                                    res.eigenvalues.data() + res.basis.cols());
            ClusterPartition part = cluster_eigenvalues(lam, cfg_.auto_cluster->d1,
                                                        cfg_.auto_cluster->merge_gap_threshold);
            current_clusters_ = part.sizes;
            // Room for the remaining windows must exist before the next change.
            if (j_ + 1 < static_cast<int>(cfg_.change_times.size())) {
                const int t_end = cfg_.change_times[static_cast<size_t>(j_)] +
                                  cfg_.K * cfg_.alpha +
                                  static_cast<int>(current_clusters_.size()) * cfg_.alpha_tilde - 1;
                if (t_end >= cfg_.change_times[static_cast<size_t>(j_ + 1)])
                    throw ConfigError("Tracker: auto clustering found " +
                                      std::to_string(current_clusters_.size()) +
                                      " clusters, which does not fit before the next change time");
            }
            g_hats_.push_back(BasisMatrix(res.basis.matrix().leftCols(current_clusters_[0])));
        } else {
            current_clusters_ = cfg_.clusters[static_cast<size_t>(j_)];
            ProjPcaResult res =
                proj_pca(d, detected, std::min<Eigen::Index>(current_clusters_[0], d.cols()));
            pending_ppca_warnings_.ppca_ambiguous_cut |= res.ambiguous_cut;
            pending_ppca_warnings_.ppca_rank_deficient |= res.rank_deficient;
            g_hats_.push_back(res.basis);
        }
    } else {
        ProjPcaResult res = proj_pca(
            d, detected,
            std::min<Eigen::Index>(current_clusters_[static_cast<size_t>(i - 1)], d.cols()));
        pending_ppca_warnings_.ppca_ambiguous_cut |= res.ambiguous_cut;
        pending_ppca_warnings_.ppca_rank_deficient |= res.rank_deficient;
        g_hats_.push_back(res.basis);
    }

    if (i == static_cast<int>(current_clusters_.size())) {
        BasisMatrix p_j = BasisMatrix::empty(cfg_.n);
        for (const auto& g : g_hats_) p_j = p_j.concat(g);
        p_hat_ = p_j;
        p_prev_ = p_j;
        p_new_hat_ = BasisMatrix::empty(cfg_.n);
        g_hats_.clear();
        clusters_used_.push_back(current_clusters_);
        deletion_window_ = 0;
        ++j_;
    } else {
        ++deletion_window_;
    }
}

FrameRecord Tracker::step(const Vector& m_t) {
    if (m_t.size() != cfg_.n) throw ArgumentError("Tracker::step: bad measurement size");
    if (!m_t.allFinite()) throw ArgumentError("Tracker::step: non-finite measurement");
    ++t_;
    const int t = t_;

    FrameRecord rec;
    rec.t = t;

    // 1) Projected CS: nullify most of the low-dimensional part, recover the
    // sparse part from the projection.
    ProjectorOperator phi(p_hat_);
    const Vector y = phi.apply(m_t);
    const double xi = current_xi();
    rec.xi_used = xi;

    BpdnOptions opts;
    opts.tol = cfg_.cs_tol;
    opts.max_iter = cfg_.cs_max_iter;
    opts.warm_z = &warm_z_;
    opts.warm_u = &warm_u_;
    opts.out_z = &warm_z_;
    opts.out_u = &warm_u_;
    const CsSolution cs = solve_bpdn(phi, y, xi, opts);
    rec.warnings.cs_not_converged = !cs.converged;

    if (cs.x_cs.lpNorm<Eigen::Infinity>() > 0.0) {
        const double omega = current_omega(cs.x_cs);
        rec.omega_used = omega;
        rec.t_hat = estimate_support(cs.x_cs, omega);
    } else if (!cfg_.omega.energy) {
        rec.omega_used = cfg_.omega.fixed_value; // no energy threshold exists for a zero solution
    }

    Vector s_hat = Vector::Zero(cfg_.n);
    if (!rec.t_hat.empty()) {
        try {
            s_hat = ls_debias(phi, y, rec.t_hat);
        } catch (const RankDeficiencyError&) {
            rec.warnings.ls_rank_failure = true;
            s_hat.setZero();
        }
    }

    // 2) The low-dimensional estimate is the exact complement.
    const Vector l_hat = m_t - s_hat;
    rec.s_hat = s_hat;
    rec.l_hat = l_hat;

    // 3) Subspace maintenance. The record keeps the phase the frame was
    // processed in; the machine state may already have moved on.
    Phase frame_phase = Phase::Stable;
    const int epochs = static_cast<int>(cfg_.change_times.size());
    if (j_ < epochs && t >= cfg_.change_times[static_cast<size_t>(j_)]) {
        const int t_j = cfg_.change_times[static_cast<size_t>(j_)];
        const int add_end = t_j + cfg_.K * cfg_.alpha - 1;
        if (t <= add_end) {
            frame_phase = Phase::Addition;
            if (!rec.warnings.ls_rank_failure) window_.push_back(l_hat);
            if (t == t_j + k_ * cfg_.alpha - 1) {
                finish_addition_window();
                rec.addition_update = true;
                rec.warnings.ppca_ambiguous_cut = pending_ppca_warnings_.ppca_ambiguous_cut;
                rec.warnings.ppca_rank_deficient = pending_ppca_warnings_.ppca_rank_deficient;
                pending_ppca_warnings_ = FrameWarnings{};
            }
        } else if (cfg_.deletion_enabled) {
            frame_phase = Phase::Deletion;
            if (!rec.warnings.ls_rank_failure) window_.push_back(l_hat);
            const int t_tilde = t_j + cfg_.K * cfg_.alpha;
            if (deletion_window_ > 0 &&
                t == t_tilde + deletion_window_ * cfg_.alpha_tilde - 1) {
                const int before = j_;
                finish_deletion_window();
                if (j_ != before) rec.deletion_update = true;
                rec.warnings.ppca_ambiguous_cut = pending_ppca_warnings_.ppca_ambiguous_cut;
                rec.warnings.ppca_rank_deficient = pending_ppca_warnings_.ppca_rank_deficient;
                pending_ppca_warnings_ = FrameWarnings{};
            }
        }
    }
    phase_ = frame_phase;
    rec.phase = frame_phase;

    if (cfg_.xi.adaptive)
        beta_prev_norm_ = p_hat_.projectOrthogonal(l_hat).norm();
    return rec;
}

} // namespace reprocs::tracker
