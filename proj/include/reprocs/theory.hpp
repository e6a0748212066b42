#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/errors.hpp"

namespace reprocs::theory {

/// Scalar model and bound constants. Defaults carry the numeric thresholds
/// of the guarantee; everything can be overridden per experiment.
struct TheoryParams {
    int n = 256;
    int J = 1;             // number of subspace changes
    int r = 0;             // r_max = r0 + c
    int c = 1;             // c_max
    int r0 = 0;
    double zeta = 1e-6;
    double gamma_star = 1.0;
    double gamma_new = 1.0;
    double lambda_minus = 1.0;
    double lambda_plus = 1.0;

    double kappa_2s_star_plus = 0.3;   // bound on κ_2s(P_{j-1})
    double kappa_2s_new_plus = 0.15;   // bound on κ_2s(P_{j,new})
    double kappa_s_plus = 0.15;        // bound on κ_2s(D_{j,new,k})
    double kappa_2s_tilde_plus = 0.15; // bound on κ_2s(Q_{j,new,k})
    double kappa_s_e_plus = 0.15;      // bound on κ_s of the undeleted residual
    double g_plus = std::sqrt(2.0);
    double phi_plus = 1.1735;

    double g_tilde_max = 1.0;
    double h_tilde_max = 0.0;
    int c_tilde_min = 1;
    int vartheta_max = 1;

    double rho = 1.0;        // support-error denseness; 1 is the worst case
    double ramp_ratio = 1.2; // v in the γ_new ramp used by the guarantee

    double f() const { return lambda_plus / lambda_minus; }
};

/// Smallest number of subspace-addition steps guaranteed to bring the new
/// directions' error below cζ: ⌈log(0.6cζ)/log 0.6⌉. Domain error unless
/// 0 < 0.6cζ < 1. Evaluated in extended precision with an integer snap so
/// exact powers do not round up.
int k_of_zeta(double zeta, int c);

/// Noise bound fed to the sparse step: ξ₀(ζ) = √c·γ_new + 1.06·√ζ.
double xi0(double zeta, int c, double gamma_new);

/// Minimum window lengths for the addition and deletion averaging steps.
/// These grow like 1/ζ² and overflow any integer type for realistic ζ, so
/// they are returned as doubles (the ceiling is exact below 2^53).
double alpha_add(const TheoryParams& p);
double alpha_del(const TheoryParams& p);

/// The per-step error bound recursion ζ₀⁺ = 1, ζ_k⁺ = (b + 0.125cζ)/(1 −
/// (ζ*⁺)² − (ζ*⁺)²f − 0.25cζ − b). Returns K+1 values. Throws RegimeError
/// naming the first step whose denominator is nonpositive.
std::vector<double> zeta_plus_series(const TheoryParams& p, int k_steps);

struct ClusterBound {
    double f_inc = 0.0;
    double f_dec = 0.0;
    double zeta_tilde_plus = 0.0; // f_inc / f_dec
};

/// The deletion-step bound pair evaluated at one cluster's (g̃, h̃). Throws
/// RegimeError when f_dec ≤ 0.
ClusterBound f_inc_dec(double g_tilde, double h_tilde, const TheoryParams& p);

/// Empirical quantities that can only be measured on a concrete model or
/// run; absent values leave the matching condition unchecked.
struct ModelMeasurements {
    std::optional<double> kappa_2s_star;
    std::optional<double> kappa_2s_new;
    std::optional<double> kappa_D_max;    // max over j,k of κ(D_{j,new,k})
    std::optional<double> kappa_Q_max;    // max over j,k of κ(Q_{j,new,k})
    std::optional<double> kappa_s_e;
    std::optional<double> g_jk_max;       // condition number of avg Cov(a_new)
    std::optional<double> min_change_gap; // min_j (t_{j+1} − t_j)
    std::optional<double> ramp_violation; // max_k ‖a_new‖∞ / γ_new,k − 1
    std::optional<double> s_min;
    std::optional<double> xi_used;
    std::optional<double> omega_used;
    std::optional<int> k_used;
    std::optional<double> alpha_used;
    std::optional<double> alpha_tilde_used;
    // Per-cluster (g̃_k, h̃_k) pairs of the epoch under study; enables the
    // per-cluster ζ̃_k⁺ series in the report.
    std::vector<std::pair<double, double>> cluster_ghs;
};

struct ConditionCheck {
    std::string name;
    bool checked = false; // false when the needed measurement was not supplied
    bool pass = false;
    double margin = 0.0; // positive means satisfied with room
    std::string detail;
};

struct BoundReport {
    int K = 0;
    double xi0_value = 0.0;
    double alpha_add_value = 0.0;
    double alpha_del_value = 0.0;
    std::vector<double> zeta_plus;       // length K+1
    double f_inc_at_max = 0.0;           // at (g̃_max, h̃_max)
    double f_dec_at_max = 0.0;
    double zeta_tilde_plus_at_max = 0.0;
    std::vector<double> zeta_tilde_series; // ζ̃_k⁺ per supplied cluster, length ϑ
    std::vector<ConditionCheck> conditions;
    std::optional<ConditionCheck> corollary_small_f; // evaluated when ϑ_max = 1
    bool all_checked_pass = false;
};

/// Evaluates every checkable hypothesis of the guarantee with numeric
/// margins. Report-only: never throws on a failed condition.
BoundReport check_conditions(const TheoryParams& p, const ModelMeasurements& m = {});

std::string format_report(const BoundReport& r);

} // namespace reprocs::theory
