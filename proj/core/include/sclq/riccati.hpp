#pragma once

#include "sclq/grid.hpp"
#include "sclq/problem.hpp"

#include <vector>

namespace sclq {

/// Riccati solution on the problem grid, with LU factorizations of
/// (I + Sigma R) and (I + R Sigma) cached per node.
class SigmaPath {
public:
    /// Factorizes per node; NumericalFailure if a factor is numerically singular.
    SigmaPath(TimeGrid grid, std::vector<Matrix> values, const CoeffPath& R, std::vector<int> clipped_nodes = {});

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int nodes() const noexcept { return static_cast<int>(values_.size()); }
    [[nodiscard]] Eigen::Index n() const noexcept { return values_.front().rows(); }
    [[nodiscard]] const Matrix& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<Matrix>& values() const noexcept { return values_; }
    /// Value at grid time t (must be a node).
    [[nodiscard]] const Matrix& at_time(double t) const { return (*this)[grid_.index_of(t)]; }

    /// (I + Sigma_i R_i)^{-1} rhs
    [[nodiscard]] Matrix solve_isr(int i, const Matrix& rhs) const;
    /// (I + R_i Sigma_i)^{-1} rhs
    [[nodiscard]] Matrix solve_irs(int i, const Matrix& rhs) const;
    /// lhs (I + Sigma_i R_i)^{-1}
    [[nodiscard]] Matrix right_solve_isr(int i, const Matrix& lhs) const;

    /// Nodes where slightly negative eigenvalues were clipped to zero.
    [[nodiscard]] const std::vector<int>& clipped_nodes() const noexcept { return clipped_; }

private:
    TimeGrid grid_;
    std::vector<Matrix> values_;
    std::vector<Eigen::PartialPivLU<Matrix>> isr_;
    std::vector<Eigen::PartialPivLU<Matrix>> irs_;
    std::vector<int> clipped_;
};

/// Affine solution of the adjoint-target BSDE: phi(s) = a(s) + bc(s) W(s),
/// beta(s) = bc(s).
struct PhiCoeffs {
    TimeGrid grid;
    std::vector<Vector> a;
    std::vector<Vector> bc;

    [[nodiscard]] Vector phi(int i, double w) const {
        return a[static_cast<std::size_t>(i)] + bc[static_cast<std::size_t>(i)] * w;
    }
    [[nodiscard]] const Vector& beta(int i) const { return bc[static_cast<std::size_t>(i)]; }
};

/// Right-hand side S A^T + A S + S Q S - L N^{-1} L^T - K (I + S R)^{-1} S K^T
/// with the node-i coefficients of p.
[[nodiscard]] Matrix riccati_rhs(const ValidatedProblem& p, int i, const Matrix& sigma);

/// Backward RK4 from Sigma(T) = 0 with settings().ode_substeps steps per grid
/// interval, symmetrizing every step. Throws NumericalFailure on blow-up,
/// singular (I + Sigma R) or lambda_min below psd_tol.
[[nodiscard]] SigmaPath solve_sigma(const ValidatedProblem& p);

/// max over interior nodes of |central difference of Sigma - rhs|_max.
[[nodiscard]] double riccati_residual(const SigmaPath& sig, const ValidatedProblem& p);

/// Backward RK4 for bc' = (A + Sigma Q) bc, a' = (A + Sigma Q) a + K (I + Sigma R)^{-1} bc
/// from a(T) = -c0, bc(T) = -c1. Sigma between nodes is the cubic Hermite
/// interpolant of the node values and slopes.
[[nodiscard]] PhiCoeffs solve_target_odes(const SigmaPath& sig, const AffineTarget& target, const ValidatedProblem& p);

}  // namespace sclq
