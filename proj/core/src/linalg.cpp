#include "sclq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sclq::linalg {

Matrix symmetrized(const Matrix& x) { return 0.5 * (x + x.transpose()); }

double max_abs(const Matrix& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

double asymmetry(const Matrix& x) { return max_abs(x - x.transpose()); }

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> eig(const Matrix& x) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrized(x));
}

}  // namespace

double min_eigenvalue(const Matrix& x) {
    if (x.size() == 0) return std::numeric_limits<double>::infinity();
    if (x.rows() == 1) return x(0, 0);
    return eig(x).eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& x) {
    if (x.size() == 0) return -std::numeric_limits<double>::infinity();
    if (x.rows() == 1) return x(0, 0);
    return eig(x).eigenvalues().maxCoeff();
}

Matrix psd_sqrt(const Matrix& x) {
    if (x.size() == 0) return x;
    const auto es = eig(x);
    const Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return symmetrized(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Matrix spd_inverse_sqrt(const Matrix& x) {
    if (x.size() == 0) return x;
    const auto es = eig(x);
    const Vector d = es.eigenvalues().cwiseSqrt().cwiseInverse();
    return symmetrized(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Matrix clip_to_psd(const Matrix& x) {
    const auto es = eig(x);
    const Vector d = es.eigenvalues().cwiseMax(0.0);
    return symmetrized(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

LeastSquares min_norm_solve_symmetric(const Matrix& s, const Vector& rhs, double relative_cutoff) {
    LeastSquares out;
    out.x = Vector::Zero(s.cols());
    if (s.size() == 0) {
        out.residual = rhs.norm();
        return out;
    }
    const auto es = eig(s);
    const Vector& lam = es.eigenvalues();
    const double scale = lam.cwiseAbs().maxCoeff();
    const double cutoff = relative_cutoff * scale;
    const Vector coords = es.eigenvectors().transpose() * rhs;
    Vector sol = Vector::Zero(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (scale > 0.0 && std::abs(lam(i)) > cutoff) {
            sol(i) = coords(i) / lam(i);
            ++out.rank;
        }
    }
    out.x = es.eigenvectors() * sol;
    out.residual = (s * out.x - rhs).norm();
    return out;
}

LeastSquares min_norm_solve(const Matrix& a, const Vector& rhs, double relative_cutoff) {
    LeastSquares out;
    out.x = Vector::Zero(a.cols());
    if (a.size() == 0) {
        out.residual = rhs.norm();
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double cutoff = relative_cutoff * (sv.size() > 0 ? sv(0) : 0.0);
    const Vector coords = svd.matrixU().transpose() * rhs;
    Vector sol = Vector::Zero(a.cols());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > 0.0 && sv(i) > cutoff) {
            sol(i) = coords(i) / sv(i);
            ++out.rank;
        }
    }
    out.x = svd.matrixV() * sol;
    out.residual = (a * out.x - rhs).norm();
    return out;
}

}  // namespace sclq::linalg
