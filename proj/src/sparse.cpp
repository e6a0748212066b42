#include "reprocs/sparse.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace reprocs {

Matrix ProjectorOperator::columns(const std::vector<int>& t) const {
    const Eigen::Index n = dimension();
    Matrix cols = Matrix::Zero(n, static_cast<Eigen::Index>(t.size()));
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0 || t[i] >= n)
            throw ArgumentError("ProjectorOperator::columns: index out of range");
        cols(t[i], static_cast<Eigen::Index>(i)) = 1.0;
    }
    if (basis_.isEmpty()) return cols;
    return cols - basis_.matrix() * (basis_.matrix().transpose() * cols);
}

namespace {

inline void soft_threshold(const Vector& v, double kappa, Vector& out) {
    out = (v.array().abs() - kappa).max(0.0) * v.array().sign();
}

// Euclidean projection of v onto {x : ‖y − Φx‖₂ ≤ ξ} for an orthogonal
// projector Φ and y ∈ range(Φ). Splitting v into range and null components,
// only the range part needs to be pulled inside the ball around y.
inline Vector project_feasible(const ProjectorOperator& phi, const Vector& y,
                               double xi, const Vector& v) {
    Vector r = phi.apply(v);
    Vector e = r - y;
    const double dist = e.norm();
    if (dist <= xi) return v;
    return v - (1.0 - xi / dist) * e;
}

} // namespace

CsSolution solve_bpdn(const ProjectorOperator& phi, const Vector& y, double xi,
                      const BpdnOptions& opts) {
    if (xi < 0.0) throw ArgumentError("solve_bpdn: xi must be nonnegative");
    if (!y.allFinite()) throw ArgumentError("solve_bpdn: y has non-finite entries");
    if (opts.max_iter < 1 || !(opts.tol > 0.0))
        throw ArgumentError("solve_bpdn: max_iter and tol must be positive");
    const Eigen::Index n = y.size();
    if (phi.dimension() != n) throw ArgumentError("solve_bpdn: dimension mismatch");

    CsSolution sol;
    const double y_norm = y.norm();
    // Zero is feasible and has minimal l1 norm.
    if (y_norm <= xi || y_norm == 0.0) {
        sol.x_cs = Vector::Zero(n);
        sol.converged = true;
        if (opts.record_history) sol.objective_history.push_back(0.0);
        if (opts.out_z) *opts.out_z = Vector::Zero(n);
        if (opts.out_u) *opts.out_u = Vector::Zero(n);
        return sol;
    }

    // Work in y-normalized scale for scale-free tolerances.
    const Vector ys = y / y_norm;
    const double xis = xi / y_norm;

    Vector z = Vector::Zero(n);
    Vector u = Vector::Zero(n);
    if (opts.warm_z && opts.warm_z->size() == n) z = *opts.warm_z / y_norm;
    if (opts.warm_u && opts.warm_u->size() == n) u = *opts.warm_u / y_norm;
    Vector x(n), z_old(n), tmp(n);

    const double rho = 1.0;
    const double relax = 1.6; // over-relaxation
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    Vector x_best;
    double best_obj = std::numeric_limits<double>::infinity();

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        x = project_feasible(phi, ys, xis, z - u); // feasible by construction
        z_old.swap(z);
        tmp = relax * x + (1.0 - relax) * z_old + u;
        soft_threshold(tmp, 1.0 / rho, z);
        u += relax * x + (1.0 - relax) * z_old - z;

        const double obj = x.lpNorm<1>();
        if (obj < best_obj) {
            best_obj = obj;
            x_best = x;
        }
        if (opts.record_history) sol.objective_history.push_back(best_obj);

        const double r_norm = (x - z).norm();
        const double s_norm = rho * (z - z_old).norm();
        const double eps_pri = sqrt_n * opts.tol + opts.tol * std::max(x.norm(), z.norm());
        const double eps_dual = sqrt_n * opts.tol + opts.tol * (rho * u).norm();
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            sol.converged = true;
            sol.primal_residual = r_norm * y_norm;
            ++it;
            break;
        }
        sol.primal_residual = r_norm * y_norm;
    }

    sol.iterations = it;
    sol.x_cs = x_best * y_norm;
    if (opts.out_z) *opts.out_z = z * y_norm;
    if (opts.out_u) *opts.out_u = u * y_norm;
    return sol;
}

std::vector<int> estimate_support(const Vector& x, double omega) {
    std::vector<int> t;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (std::abs(x(i)) > omega) t.push_back(static_cast<int>(i));
    return t;
}

double energy_threshold(const Vector& v, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ArgumentError("energy_threshold: fraction must lie in (0, 1]");
    const double total = v.squaredNorm();
    if (total == 0.0)
        throw DegenerateInputError("energy_threshold: zero vector");
    std::vector<double> mags(static_cast<size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) mags[static_cast<size_t>(i)] = std::abs(v(i));
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double acc = 0.0;
    for (double m : mags) {
        acc += m * m;
        if (acc >= fraction * total) return m;
    }
    return mags.back(); // unreachable in exact arithmetic; rounding guard
}

Vector ls_debias(const ProjectorOperator& phi, const Vector& y, const std::vector<int>& t) {
    const Eigen::Index n = phi.dimension();
    if (y.size() != n) throw ArgumentError("ls_debias: dimension mismatch");
    Vector s = Vector::Zero(n);
    if (t.empty()) return s;

    Matrix a = phi.columns(t);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-10)
        throw RankDeficiencyError("ls_debias: support columns of the projector are dependent "
                                  "(sigma_min = " + std::to_string(sv(sv.size() - 1)) + ")");
    Vector s_t = svd.solve(y);
    for (size_t i = 0; i < t.size(); ++i) s(t[i]) = s_t(static_cast<Eigen::Index>(i));
    return s;
}

} // namespace reprocs
