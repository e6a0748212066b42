#pragma once

#include <optional>
#include <vector>

#include "reprocs/sparse.hpp"
#include "reprocs/types.hpp"

namespace reprocs::tracker {

/// Contiguous partition of a non-increasing eigenvalue list, with the
/// within-cluster spread g̃_k = λ_max,k/λ_min,k and the boundary ratios
/// h̃_k = λ_max,k+1/λ_min,k (zero past the last cluster).
struct ClusterPartition {
    std::vector<int> sizes;
    std::vector<double> g_tilde;
    std::vector<double> h_tilde;
    double g_tilde_max = 1.0;
    double h_tilde_max = 0.0;
};

/// Split-and-merge clustering of a positive non-increasing spectrum.
/// Split phase: d1 rounds, each round splitting every cluster at the cut
/// that minimizes the larger of the two halves' spreads; cuts are only legal
/// at strict decreases, so equal eigenvalues always share a cluster. Merge
/// phase: repeatedly merge the consecutive pair that minimizes the resulting
/// h̃_max, considering only boundaries whose ratio is at least
/// merge_gap_threshold (clusters separated by less than a 1/threshold gap
/// are not meaningfully separated). Throws ArgumentError on a non-monotone
/// or non-positive input.
ClusterPartition cluster_eigenvalues(const std::vector<double>& lambdas, int d1,
                                     double merge_gap_threshold = 0.25);

struct XiPolicy {
    bool adaptive = true; // ξ_t = 2‖β̂_{t−1}‖₂
    double fixed_value = 0.0;
};

struct OmegaPolicy {
    bool energy = true; // ω_t = 0.5 · (99%-energy threshold of Ŝ_cs)
    double fixed_value = 0.0;
};

struct AutoClusterConfig {
    int d1 = 3;
    double merge_gap_threshold = 0.25;
    std::vector<int> rank; // r_j per epoch; the spectrum fed to the clustering
};

struct TrackerConfig {
    int n = 0;
    int t_train = 0;
    int alpha = 100;
    int alpha_tilde = 200;
    int K = 15;
    XiPolicy xi;
    OmegaPolicy omega;
    std::vector<int> change_times;           // t_j, 1-based, strictly increasing
    std::vector<int> c_new;                  // per epoch
    std::vector<std::vector<int>> clusters;  // per-epoch c̃ sizes; empty with auto_cluster set
    std::optional<AutoClusterConfig> auto_cluster;
    bool deletion_enabled = true;
    double cs_tol = 1e-7;
    int cs_max_iter = 5000;
};

struct FrameWarnings {
    bool cs_not_converged = false;
    bool ls_rank_failure = false;
    bool ppca_ambiguous_cut = false;
    bool ppca_rank_deficient = false;
    bool any() const {
        return cs_not_converged || ls_rank_failure || ppca_ambiguous_cut || ppca_rank_deficient;
    }
};

enum class Phase { Stable, Addition, Deletion };

struct FrameRecord {
    int t = 0;
    Vector s_hat;
    Vector l_hat;
    std::vector<int> t_hat;
    double xi_used = 0.0;
    double omega_used = 0.0;
    Phase phase = Phase::Stable;
    bool addition_update = false; // a proj-PCA addition step fired at this frame
    bool deletion_update = false; // the cluster-PCA re-estimate completed here
    FrameWarnings warnings;
};

/// Snapshot of one addition proj-PCA step, kept for the denseness probes.
struct AdditionEvent {
    int epoch = 0; // 1-based j
    int k = 0;
    int t = 0;
    BasisMatrix p_prev;    // P̂_{j−1}
    BasisMatrix p_new_hat; // P̂_{j,new,k}
};

/// The recursive projected-CS tracker, with per-change-time subspace
/// addition and optional cluster-wise re-estimation that deletes departed
/// directions. With deletion disabled this is the plain no-deletion tracker
/// over the identical code path.
class Tracker {
public:
    /// Starts at t = t_train with P̂ = p0_hat. The last training measurement
    /// seeds the adaptive ξ (there is no prior residual at the first tracked
    /// frame); it may be omitted when ξ is fixed.
    Tracker(BasisMatrix p0_hat, TrackerConfig config,
            const Vector* last_training_frame = nullptr);

    FrameRecord step(const Vector& m_t);

    int time() const { return t_; }
    const BasisMatrix& current_basis() const { return p_hat_; }
    const std::vector<AdditionEvent>& addition_trace() const { return addition_trace_; }
    /// Cluster sizes actually used per completed epoch (config or auto).
    const std::vector<std::vector<int>>& cluster_sizes_used() const { return clusters_used_; }

private:
    void validate_config() const;
    void finish_addition_window();
    void finish_deletion_window();
    double current_xi();
    double current_omega(const Vector& s_cs) const;

    TrackerConfig cfg_;
    int t_ = 0;
    int j_ = 0; // completed epochs; epoch j_+1 is the next/current change
    int k_ = 1;
    Phase phase_ = Phase::Stable;
    int deletion_window_ = 0; // i of the window being collected

    BasisMatrix p_hat_;
    BasisMatrix p_prev_;
    BasisMatrix p_new_hat_;
    std::vector<BasisMatrix> g_hats_;
    std::vector<int> current_clusters_;

    std::vector<Vector> window_;
    FrameWarnings pending_ppca_warnings_;

    double beta_prev_norm_ = 0.0;
    Vector warm_z_, warm_u_;

    std::vector<AdditionEvent> addition_trace_;
    std::vector<std::vector<int>> clusters_used_;
};

struct InitialSubspace {
    BasisMatrix basis;
    bool rank_warning = false; // requested rank exceeds the numerical rank
};

/// Top-r0 left singular vectors of the training block.
InitialSubspace estimate_initial_subspace(const Matrix& training_block, int r0);

} // namespace reprocs::tracker
