#include "sclq/controllability.hpp"

#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sclq {

HatCoefficients hat_coefficients(const SigmaPath& sig, const ValidatedProblem& p) {
    if (sig.grid() != p.grid()) raise(ErrorKind::DimensionMismatch, "Sigma was solved on a different grid");
    const int nodes = p.grid().nodes();
    const Eigen::Index n = p.n();
    const Eigen::Index mv = p.L().cols();
    std::vector<Matrix> ahat, khat, lhat;
    ahat.reserve(static_cast<std::size_t>(nodes));
    khat.reserve(static_cast<std::size_t>(nodes));
    lhat.reserve(static_cast<std::size_t>(nodes));
    const auto& w = p.weights();
    for (int i = 0; i < nodes; ++i) {
        const Matrix& s = sig[i];
        if (linalg::min_eigenvalue(w.N[i]) < w.delta) {
            raise(ErrorKind::NumericalFailure, "N below delta at node " + std::to_string(i));
        }
        ahat.push_back(p.A()[i] + s * w.Q[i]);
        Matrix k = sig.right_solve_isr(i, p.K()[i]);
        Matrix l(n, mv + 2 * n);
        l.leftCols(mv) = p.L()[i] * linalg::spd_inverse_sqrt(w.N[i]);
        l.middleCols(mv, n) = -s * linalg::psd_sqrt(w.Q[i]);
        l.rightCols(n) = k * s * linalg::psd_sqrt(w.R[i]);
        khat.push_back(std::move(k));
        lhat.push_back(std::move(l));
    }
    return {CoeffPath(std::move(ahat)), CoeffPath(std::move(khat)), CoeffPath(std::move(lhat))};
}

double exact_controllability_margin(const SigmaPath& sig, double t) { return linalg::min_eigenvalue(sig.at_time(t)); }

namespace {

ReachabilityResult finish(const linalg::LeastSquares& ls, const Vector& rhs, double tol, double margin) {
    ReachabilityResult out;
    out.xi = ls.x;
    out.residual = ls.residual;
    out.tolerance = tol * (1.0 + rhs.norm());
    out.reachable = ls.residual <= out.tolerance;
    out.margin = margin;
    return out;
}

}  // namespace

ReachabilityResult reachability_solve(const Vector& x0, const SigmaPath& sig, const PhiCoeffs& phi, double t,
                                      double tol) {
    const int i = sig.grid().index_of(t);
    const Matrix& s = sig[i];
    if (x0.size() != s.rows()) raise(ErrorKind::DimensionMismatch, "x0 must have length n");
    const Vector rhs = x0 + phi.a[static_cast<std::size_t>(i)];
    return finish(linalg::min_norm_solve_symmetric(s, rhs), rhs, tol, linalg::min_eigenvalue(s));
}

ReachabilityResult manifold_reachability_solve(const Matrix& F, const Vector& b, const SigmaPath& sig,
                                               const PhiCoeffs& phi, double t, double tol) {
    const int i = sig.grid().index_of(t);
    const Matrix& s = sig[i];
    if (F.cols() != s.rows() || F.rows() != b.size()) raise(ErrorKind::DimensionMismatch, "F must be k x n, b length k");
    const Vector rhs = b + F * phi.a[static_cast<std::size_t>(i)];
    return finish(linalg::min_norm_solve(F * s, rhs), rhs, tol, linalg::min_eigenvalue(s));
}

IdentityCheck candidate_identity_check(const Vector& xi, const HatCoefficients& hat, const NoiseEnsemble& noise,
                                       double t0, double t1, int workers) {
    const TimeGrid& grid = noise.grid();
    const int i0 = grid.index_of(t0);
    const int i1 = grid.index_of(t1);
    if (!(i0 < i1)) raise(ErrorKind::BadGrid, "identity check needs t0 < t1");
    const Eigen::Index n = hat.A.rows();
    if (xi.size() != n) raise(ErrorKind::DimensionMismatch, "xi must have length n");
    if (hat.A.nodes() != grid.nodes()) raise(ErrorKind::DimensionMismatch, "hat coefficients not on the noise grid");
    const double h = grid.step();
    std::vector<Matrix> lhs(static_cast<std::size_t>(noise.paths()));
    std::vector<Matrix> rhs(static_cast<std::size_t>(noise.paths()));
    parallel_for(noise.paths(), workers, [&](int p) {
        const auto dw = noise.increments(p);
        Matrix phi = Matrix::Identity(n, n), tmp(n, n);
        Vector moved = Vector::Zero(n);
        Matrix gram = Matrix::Zero(n, n);
        for (int i = i0; i < i1; ++i) {
            const Matrix pl = phi * hat.L[i];
            const Vector v = -(pl.transpose() * xi);
            moved.noalias() -= pl * v;
            gram.noalias() += pl * pl.transpose();
            tmp = phi;
            phi.noalias() -= h * (tmp * hat.A[i]);
            phi.noalias() -= dw[static_cast<std::size_t>(i)] * (tmp * hat.K[i]);
        }
        if (!phi.allFinite()) raise(ErrorKind::NonFinite, "Phi overflow on path " + std::to_string(p));
        lhs[static_cast<std::size_t>(p)] = h * moved;
        rhs[static_cast<std::size_t>(p)] = (h * linalg::symmetrized(gram)) * xi;
    });
    const auto l = sample_mean(std::span<const Matrix>(lhs));
    const auto r = sample_mean(std::span<const Matrix>(rhs));
    IdentityCheck out;
    out.lhs = l.mean;
    out.rhs = r.mean;
    const double scale = 1.0 + out.rhs.norm();
    out.residual = (out.lhs - out.rhs).norm() / scale;
    out.combined_se = std::sqrt(l.se.squaredNorm() + r.se.squaredNorm()) / scale;
    return out;
}

GramianCheck gramian_riccati_check(const HatCoefficients& hat, const SigmaPath& sig, const NoiseEnsemble& noise,
                                   double t, int workers) {
    GramianCheck out{estimate_gramian(t, noise.grid().t_end(), hat.A, hat.K, hat.L, noise, workers),
                     sig.at_time(t), 0.0};
    for (Eigen::Index r = 0; r < out.sigma.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.sigma.cols(); ++c) {
            const double d = std::abs(out.estimate.psi_hat(r, c) - out.sigma(r, c));
            const double floor = 1e-12 * (1.0 + std::abs(out.sigma(r, c)));
            out.max_z_score = std::max(out.max_z_score, d / std::max(out.estimate.se(r, c), floor));
        }
    }
    return out;
}

}  // namespace sclq
