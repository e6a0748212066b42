#include "reprocs/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

namespace reprocs {

namespace {

// Largest singular value of a possibly very non-square block, via the Gram
// matrix on the smaller side. Closed forms for orders 1 and 2 keep the
// exhaustive kappa enumeration cheap.
double spectral_norm(const Matrix& b) {
    if (b.rows() == 0 || b.cols() == 0) return 0.0;
    const bool tall = b.rows() >= b.cols();
    Matrix g = tall ? Matrix(b.transpose() * b) : Matrix(b * b.transpose());
    const Eigen::Index m = g.rows();
    if (m == 1) return std::sqrt(std::max(0.0, g(0, 0)));
    if (m == 2) {
        // (tr/2)^2 - det rewritten as a sum of squares; the naive form
        // cancels catastrophically for near-equal eigenvalues
        const double mid = 0.5 * (g(0, 0) + g(1, 1));
        const double disc = std::hypot(0.5 * (g(0, 0) - g(1, 1)), g(0, 1));
        return std::sqrt(std::max(0.0, mid + disc));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Visits all size-s subsets of {0..n-1} in lexicographic order.
template <typename F>
void for_each_support(int n, int s, F&& visit) {
    std::vector<int> idx(s);
    for (int i = 0; i < s; ++i) idx[i] = i;
    while (true) {
        visit(idx);
        int i = s - 1;
        while (i >= 0 && idx[i] == n - s + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int k = i + 1; k < s; ++k) idx[k] = idx[k - 1] + 1;
    }
}

} // namespace

QrResult qr_decompose(const Matrix& m) {
    if (m.rows() < m.cols() || m.cols() == 0)
        throw ArgumentError("qr_decompose: expected a tall nonempty matrix");
    {
        Eigen::JacobiSVD<Matrix> svd(m);
        const auto& sv = svd.singularValues();
        if (sv(sv.size() - 1) <= 1e-12 * sv(0))
            throw RankDeficiencyError("qr_decompose: rank-deficient input, sigma_min/sigma_max = " +
                                      std::to_string(sv(sv.size() - 1) / sv(0)));
    }
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < r.rows(); ++j) {
        if (r(j, j) < 0.0) {
            r.row(j) = -r.row(j);
            q.col(j) = -q.col(j);
        }
    }
    return {BasisMatrix(std::move(q)), std::move(r)};
}

Evd sym_evd(const Matrix& a) {
    if (a.rows() != a.cols())
        throw ArgumentError("sym_evd: matrix is not square");
    const double scale = a.norm();
    if (!a.allFinite())
        throw ArgumentError("sym_evd: non-finite entries");
    if ((a - a.transpose()).norm() > 1e-10 * std::max(scale, 1e-300))
        throw ArgumentError("sym_evd: input asymmetric beyond 1e-10 relative");

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    const Eigen::Index n = a.rows();
    Evd out;
    out.values.resize(n);
    Matrix vecs(n, n);
    // Eigen sorts ascending; flip to non-increasing.
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = es.eigenvalues()(n - 1 - i);
        vecs.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    // Deterministic signs: largest-magnitude entry positive, first such
    // entry breaking magnitude ties.
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index imax = 0;
        double amax = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = std::abs(vecs(i, j));
            if (v > amax + 1e-15 * amax) {
                amax = v;
                imax = i;
            }
        }
        if (vecs(imax, j) < 0.0) vecs.col(j) = -vecs.col(j);
    }
    out.vectors = vecs;
    return out;
}

ProjPcaResult proj_pca(const Matrix& d, const BasisMatrix& p, Eigen::Index r) {
    const Eigen::Index n = d.rows();
    const Eigen::Index alpha = d.cols();
    if (!p.isEmpty() && p.rows() != n)
        throw ArgumentError("proj_pca: basis row dimension mismatch");
    if (r > n || r > alpha)
        throw ArgumentError("proj_pca: requested rank exceeds data dimensions");

    ProjPcaResult out;
    if (r == 0) {
        out.basis = BasisMatrix::empty(n);
        out.eigenvalues = Vector();
        return out;
    }

    Matrix d_proj = p.projectOrthogonal(d);
    Matrix cov = (d_proj * d_proj.transpose()) / static_cast<double>(alpha);
    Evd evd = sym_evd(cov);

    out.eigenvalues = evd.values;
    if (r < n && std::abs(evd.values(r - 1) - evd.values(r)) <= 1e-12)
        out.ambiguous_cut = true;
    if (evd.values(r - 1) < 1e-14)
        out.rank_deficient = true;
    out.basis = BasisMatrix(evd.vectors.leftCols(r));
    return out;
}

double subspace_error(const BasisMatrix& p_hat, const BasisMatrix& p) {
    if (p.isEmpty()) return 0.0;
    if (!p_hat.isEmpty() && p_hat.rows() != p.rows())
        throw ArgumentError("subspace_error: row dimension mismatch");
    Matrix residual = p_hat.projectOrthogonal(p.matrix());
    Eigen::JacobiSVD<Matrix> svd(residual);
    const double se = svd.singularValues()(0);
    return std::clamp(se, 0.0, 1.0);
}

double kappa_s_exact(const Matrix& b_in, int s, DensenessVariant variant) {
    const int n = static_cast<int>(b_in.rows());
    if (s < 1) throw ArgumentError("kappa_s_exact: s must be at least 1");
    // Enumeration ceiling: 3e6 supports, the cost of the worst n = 24 case.
    double subsets = 1.0;
    for (int i = 0; i < std::min(s, n - s); ++i)
        subsets *= static_cast<double>(n - i) / (i + 1);
    if (subsets > 3e6)
        throw SizeError("kappa_s_exact: C(" + std::to_string(n) + "," + std::to_string(s) +
                        ") supports exceed the enumeration budget; use kappa_proxy on a known "
                        "support");
    const double norm_b = spectral_norm(b_in);
    if (norm_b < 1e-14)
        throw DegenerateInputError("kappa_s_exact: input has negligible norm");

    Matrix b;
    double denom;
    if (variant == DensenessVariant::SpanBasis) {
        b = qr_decompose(b_in).q.matrix();
        denom = 1.0;
    } else {
        b = b_in;
        denom = norm_b;
    }

    if (s >= n) return spectral_norm(b) / denom;

    double best = 0.0;
    Matrix rows(s, b.cols());
    for_each_support(n, s, [&](const std::vector<int>& t) {
        for (int i = 0; i < s; ++i) rows.row(i) = b.row(t[i]);
        best = std::max(best, spectral_norm(rows));
    });
    return std::min(best / denom, 1.0);
}

double kappa_proxy(const Matrix& b, const std::vector<int>& t) {
    const double norm_b = spectral_norm(b);
    if (norm_b < 1e-14)
        throw DegenerateInputError("kappa_proxy: input has negligible norm");
    if (t.empty()) return 0.0;
    Matrix rows(static_cast<Eigen::Index>(t.size()), b.cols());
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0 || t[i] >= b.rows())
            throw ArgumentError("kappa_proxy: support index out of range");
        rows.row(static_cast<Eigen::Index>(i)) = b.row(t[i]);
    }
    return std::min(spectral_norm(rows) / norm_b, 1.0);
}

double ric_complement(const BasisMatrix& p, int s) {
    const double k = kappa_s_exact(p.matrix(), s);
    return k * k;
}

} // namespace reprocs
