#pragma once

#include "sclq/grid.hpp"

namespace sclq::linalg {

[[nodiscard]] Matrix symmetrized(const Matrix& x);
[[nodiscard]] double max_abs(const Matrix& x);
/// max |x_ij - x_ji|
[[nodiscard]] double asymmetry(const Matrix& x);

/// Smallest eigenvalue of the symmetric part of `x`; +inf for an empty matrix.
[[nodiscard]] double min_eigenvalue(const Matrix& x);
[[nodiscard]] double max_eigenvalue(const Matrix& x);

/// Symmetric PSD square root; eigenvalues below zero are treated as zero.
[[nodiscard]] Matrix psd_sqrt(const Matrix& x);
/// Inverse symmetric square root of a symmetric positive definite matrix.
[[nodiscard]] Matrix spd_inverse_sqrt(const Matrix& x);
/// Replace negative eigenvalues by zero.
[[nodiscard]] Matrix clip_to_psd(const Matrix& x);

struct LeastSquares {
    Vector x;
    double residual = 0.0;  // ||A x - rhs||_2
    Eigen::Index rank = 0;
};

/// Minimal-norm least-squares solution of S x = rhs for symmetric S, via a
/// symmetric eigendecomposition; eigenvalues with |lambda| <= cutoff*lambda_max
/// are treated as zero.
[[nodiscard]] LeastSquares min_norm_solve_symmetric(const Matrix& s, const Vector& rhs,
                                                    double relative_cutoff = 1e-12);

/// Minimal-norm least-squares solution of a general (possibly rectangular) system
/// via SVD with the same relative singular-value cutoff.
[[nodiscard]] LeastSquares min_norm_solve(const Matrix& a, const Vector& rhs, double relative_cutoff = 1e-12);

}  // namespace sclq::linalg
