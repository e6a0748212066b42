#pragma once

#include <vector>

#include "reprocs/types.hpp"

namespace reprocs {

struct QrResult {
    BasisMatrix q;
    Matrix r; // upper triangular with positive diagonal
};

/// Thin QR of a full-column-rank matrix. The sign convention forces a
/// positive diagonal of R so the factorization is unique and testable.
/// Throws RankDeficiencyError when the smallest singular value is below
/// 1e-12 times the largest.
QrResult qr_decompose(const Matrix& m);

/// Symmetric eigendecomposition, eigenvalues sorted non-increasing,
/// eigenvector signs fixed by making the largest-magnitude entry positive.
/// Throws ArgumentError when the input is asymmetric beyond 1e-10 relative.
Evd sym_evd(const Matrix& a);

struct ProjPcaResult {
    BasisMatrix basis;
    bool ambiguous_cut = false;  // eigenvalues r and r+1 agree to within 1e-12
    bool rank_deficient = false; // r-th eigenvalue below 1e-14
    Vector eigenvalues;          // full spectrum of (1/α) D_proj D_projᵀ
};

/// Projection-PCA: the top-r eigenvectors of (1/α) D_proj D_projᵀ where
/// D_proj = (I − PPᵀ)D. With an empty P this is standard PCA. Degenerate
/// spectra are reported through the warning flags, not errors.
ProjPcaResult proj_pca(const Matrix& d, const BasisMatrix& p, Eigen::Index r);

/// Directed subspace error ‖(I − P̂P̂ᵀ)P‖₂, the sine of the largest principal
/// angle from span(P) to span(P̂). Not symmetric in its arguments unless the
/// two bases have equal column count.
double subspace_error(const BasisMatrix& p_hat, const BasisMatrix& p);

enum class DensenessVariant {
    RowRestriction, // max_T ‖I_TᵀB‖₂ / ‖B‖₂ on B itself
    SpanBasis,      // max_T ‖I_TᵀQ(B)‖₂ with Q(B) an orthonormal basis of span(B)
};

/// Denseness coefficient κ_s(B) = max_{|T| = s} ‖I_TᵀB‖₂ / ‖B‖₂ by exhaustive
/// enumeration of all supports. Exponential cost; calls with more than 3e6
/// supports (the worst n = 24 case) raise SizeError; use kappa_proxy on a
/// known support instead.
double kappa_s_exact(const Matrix& b, int s,
                     DensenessVariant variant = DensenessVariant::RowRestriction);

/// ‖I_TᵀB‖₂ / ‖B‖₂ for one given support T (0-based row indices).
double kappa_proxy(const Matrix& b, const std::vector<int>& t);

/// s-restricted isometry constant of I − PPᵀ, equal to κ_s(P)². Same size cap
/// as kappa_s_exact.
double ric_complement(const BasisMatrix& p, int s);

} // namespace reprocs
