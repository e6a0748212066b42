#pragma once

#include <vector>

#include "reprocs/types.hpp"

namespace reprocs {

/// Applies x ↦ (I − P̂P̂ᵀ)x through two skinny matrix-vector products; the
/// n×n projector is never formed.
class ProjectorOperator {
public:
    explicit ProjectorOperator(BasisMatrix basis) : basis_(std::move(basis)) {}
    static ProjectorOperator identity(Eigen::Index n) {
        return ProjectorOperator(BasisMatrix::empty(n));
    }

    Eigen::Index dimension() const { return basis_.rows(); }
    const BasisMatrix& basis() const { return basis_; }

    Vector apply(const Vector& x) const { return basis_.projectOrthogonal(x); }

    /// The n×|T| block Φ I_T for a 0-based support T.
    Matrix columns(const std::vector<int>& t) const;

private:
    BasisMatrix basis_;
};

struct CsSolution {
    Vector x_cs;
    int iterations = 0;
    double primal_residual = 0.0; // ‖x − z‖₂ of the final split iterates
    bool converged = false;
    std::vector<double> objective_history; // ℓ1 norm of the returned candidate per iteration
};

struct BpdnOptions {
    double tol = 1e-7;
    int max_iter = 5000;
    bool record_history = false;
    // Optional warm start for the splitting variables (sizes must match n).
    const Vector* warm_z = nullptr;
    const Vector* warm_u = nullptr;
    // When set, receives the final splitting state for warm-starting the
    // next call on a nearby problem.
    Vector* out_z = nullptr;
    Vector* out_u = nullptr;
};

/// min ‖x‖₁  s.t.  ‖y − Φx‖₂ ≤ ξ, solved by ADMM on the splitting
/// x = z with the ball constraint handled by exact projection (Φ is an
/// orthogonal projector, so the projection onto {x : ‖y − Φx‖ ≤ ξ} has a
/// closed form). Every x iterate is feasible; the iterate with the smallest
/// ℓ1 norm seen so far is the returned candidate, which makes the recorded
/// objective sequence non-increasing.
/// The problem is solved in y-normalized scale, so the solution is
/// equivariant under (y, ξ) → (αy, αξ).
CsSolution solve_bpdn(const ProjectorOperator& phi, const Vector& y, double xi,
                      const BpdnOptions& opts = {});

/// Strict-exceedance support {i : |x_i| > ω}, 0-based.
std::vector<int> estimate_support(const Vector& x, double omega);

/// The largest magnitude m such that {i : |v_i| ≥ m} captures at least
/// `fraction` of ‖v‖₂², found by sorting magnitudes and accumulating.
double energy_threshold(const Vector& v, double fraction);

/// Least-squares re-estimate on the support: restriction to T solves
/// min ‖y − (Φ I_T) s‖₂, zero off T. Throws RankDeficiencyError when the
/// support columns of Φ are dependent (σ_min ≤ 1e-10).
Vector ls_debias(const ProjectorOperator& phi, const Vector& y, const std::vector<int>& t);

} // namespace reprocs
