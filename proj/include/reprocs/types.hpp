#pragma once

#include <Eigen/Dense>
#include <utility>

#include "reprocs/errors.hpp"

namespace reprocs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tall matrix with orthonormal columns. The empty basis (zero columns) is a
/// legal value and stands for the trivial subspace; its row dimension is kept
/// so that projectors built from it have a well-defined size.
class BasisMatrix {
public:
    BasisMatrix() = default;

    /// An empty basis of the given row dimension.
    static BasisMatrix empty(Eigen::Index rows) {
        BasisMatrix b;
        b.mat_.resize(rows, 0);
        return b;
    }

    /// Wraps a matrix after checking orthonormality, ‖PᵀP − I‖₂ ≤ 1e-10.
    explicit BasisMatrix(Matrix m) : mat_(std::move(m)) {
        if (mat_.cols() == 0) return;
        Matrix g = mat_.transpose() * mat_;
        g.diagonal().array() -= 1.0;
        Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
        const double defect = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!(defect <= 1e-10))
            throw ArgumentError("BasisMatrix: columns are not orthonormal (defect " +
                                std::to_string(defect) + ")");
    }

    Eigen::Index rows() const { return mat_.rows(); }
    Eigen::Index cols() const { return mat_.cols(); }
    bool isEmpty() const { return mat_.cols() == 0; }

    const Matrix& matrix() const { return mat_; }

    /// x ↦ PPᵀx without forming the n×n projector.
    Vector projectOnto(const Vector& x) const {
        if (isEmpty()) return Vector::Zero(x.size());
        return mat_ * (mat_.transpose() * x);
    }

    /// x ↦ (I − PPᵀ)x.
    Vector projectOrthogonal(const Vector& x) const {
        if (isEmpty()) return x;
        return x - mat_ * (mat_.transpose() * x);
    }

    /// D ↦ (I − PPᵀ)D, column-wise.
    Matrix projectOrthogonal(const Matrix& d) const {
        if (isEmpty()) return d;
        return d - mat_ * (mat_.transpose() * d);
    }

    /// Horizontal concatenation [P Q]; the result is validated.
    BasisMatrix concat(const BasisMatrix& other) const {
        if (other.isEmpty()) return *this;
        if (isEmpty()) return other;
        if (rows() != other.rows())
            throw ArgumentError("BasisMatrix::concat: row dimension mismatch");
        Matrix m(rows(), cols() + other.cols());
        m << mat_, other.mat_;
        return BasisMatrix(std::move(m));
    }

private:
    Matrix mat_;
};

/// Symmetric eigendecomposition with eigenvalues in non-increasing order.
struct Evd {
    Matrix vectors; // n × n, orthonormal columns
    Vector values;  // length n, sorted non-increasing
};

} // namespace reprocs
