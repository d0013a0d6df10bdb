#include "sclq/riccati.hpp"

#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"
#include "sclq/log.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace sclq {

namespace {

constexpr double kRcondFloor = 1e-13;

Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& x, int node, const char* what) {
    Eigen::PartialPivLU<Matrix> lu(x);
    if (!(lu.rcond() > kRcondFloor)) {
        raise(ErrorKind::NumericalFailure,
              std::string(what) + " numerically singular at node " + std::to_string(node));
    }
    return lu;
}

}  // namespace

SigmaPath::SigmaPath(TimeGrid grid, std::vector<Matrix> values, const CoeffPath& R, std::vector<int> clipped_nodes)
    : grid_(grid), values_(std::move(values)), clipped_(std::move(clipped_nodes)) {
    if (static_cast<int>(values_.size()) != grid_.nodes()) {
        raise(ErrorKind::DimensionMismatch, "Sigma needs one value per grid node");
    }
    if (R.nodes() != grid_.nodes()) raise(ErrorKind::DimensionMismatch, "R must live on the Sigma grid");
    const Eigen::Index n = values_.front().rows();
    const Matrix I = Matrix::Identity(n, n);
    isr_.reserve(values_.size());
    irs_.reserve(values_.size());
    for (int i = 0; i < nodes(); ++i) {
        const Matrix& s = values_[static_cast<std::size_t>(i)];
        isr_.push_back(checked_lu(I + s * R[i], i, "I + Sigma R"));
        irs_.push_back(checked_lu(I + R[i] * s, i, "I + R Sigma"));
    }
}

Matrix SigmaPath::solve_isr(int i, const Matrix& rhs) const { return isr_[static_cast<std::size_t>(i)].solve(rhs); }

Matrix SigmaPath::solve_irs(int i, const Matrix& rhs) const { return irs_[static_cast<std::size_t>(i)].solve(rhs); }

Matrix SigmaPath::right_solve_isr(int i, const Matrix& lhs) const {
    // (I + S R)^T = I + R S for symmetric S, R.
    return irs_[static_cast<std::size_t>(i)].solve(lhs.transpose()).transpose();
}

namespace {

struct NodeCoeffs {
    const Matrix* A;
    const Matrix* K;
    const Matrix* Q;
    const Matrix* R;
    Matrix lnl;  // L N^{-1} L^T
};

NodeCoeffs node_coeffs(const ValidatedProblem& p, int i) {
    const Matrix& L = p.L()[i];
    const Matrix& N = p.weights().N[i];
    Eigen::LLT<Matrix> llt(N);
    Matrix lnl = L * llt.solve(L.transpose());
    return {&p.A()[i], &p.K()[i], &p.weights().Q[i], &p.weights().R[i], linalg::symmetrized(lnl)};
}

Matrix rhs_with(const NodeCoeffs& c, const Matrix& s, int node) {
    const Eigen::Index n = s.rows();
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + s * *c.R);
    if (!(lu.rcond() > kRcondFloor)) {
        raise(ErrorKind::NumericalFailure, "I + Sigma R numerically singular near node " + std::to_string(node));
    }
    const Matrix ak = s * c.A->transpose();
    Matrix out = ak + ak.transpose();
    out.noalias() += s * *c.Q * s;
    out -= c.lnl;
    out.noalias() -= *c.K * lu.solve(s * c.K->transpose());
    return out;
}

}  // namespace

Matrix riccati_rhs(const ValidatedProblem& p, int i, const Matrix& sigma) {
    return rhs_with(node_coeffs(p, i), sigma, i);
}

SigmaPath solve_sigma(const ValidatedProblem& p) {
    const TimeGrid& grid = p.grid();
    const int sub = p.settings().ode_substeps;
    const double h = grid.step() / sub;
    const Eigen::Index n = p.n();
    const double psd_tol = p.settings().psd_tol;

    std::vector<Matrix> values(static_cast<std::size_t>(grid.nodes()));
    std::vector<int> clipped;
    Matrix s = Matrix::Zero(n, n);
    values.back() = s;
    for (int i = grid.steps() - 1; i >= 0; --i) {
        const NodeCoeffs c = node_coeffs(p, i);
        for (int j = 0; j < sub; ++j) {
            const Matrix k1 = rhs_with(c, s, i);
            const Matrix k2 = rhs_with(c, s - 0.5 * h * k1, i);
            const Matrix k3 = rhs_with(c, s - 0.5 * h * k2, i);
            const Matrix k4 = rhs_with(c, s - h * k3, i);
            s -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s = linalg::symmetrized(s);
        }
        if (!s.allFinite()) raise(ErrorKind::NumericalFailure, "Sigma is not finite at node " + std::to_string(i));
        const double lmin = linalg::min_eigenvalue(s);
        if (lmin < psd_tol) {
            std::ostringstream msg;
            msg << "Sigma lost positive semidefiniteness at node " << i << " (lambda_min = " << lmin << ")";
            raise(ErrorKind::NumericalFailure, msg.str());
        }
        if (lmin < 0.0) {
            s = linalg::clip_to_psd(s);
            clipped.push_back(i);
            std::ostringstream msg;
            msg << "clipped Sigma eigenvalue " << lmin << " at node " << i;
            warn(msg.str());
        }
        values[static_cast<std::size_t>(i)] = s;
    }
    return SigmaPath(grid, std::move(values), p.weights().R, std::move(clipped));
}

double riccati_residual(const SigmaPath& sig, const ValidatedProblem& p) {
    const TimeGrid& grid = p.grid();
    if (sig.grid() != grid) raise(ErrorKind::DimensionMismatch, "Sigma was solved on a different grid");
    const double h = grid.step();
    double worst = 0.0;
    for (int i = 1; i < grid.steps(); ++i) {
        const Matrix diff = (sig[i + 1] - sig[i - 1]) / (2.0 * h);
        worst = std::max(worst, linalg::max_abs(diff - riccati_rhs(p, i, sig[i])));
    }
    return worst;
}

PhiCoeffs solve_target_odes(const SigmaPath& sig, const AffineTarget& target, const ValidatedProblem& p) {
    const TimeGrid& grid = p.grid();
    if (sig.grid() != grid) raise(ErrorKind::DimensionMismatch, "Sigma was solved on a different grid");
    const Eigen::Index n = p.n();
    if (target.c0.size() != n || target.c1.size() != n) {
        raise(ErrorKind::DimensionMismatch, "target vectors must have length n");
    }
    const int sub = p.settings().ode_substeps;
    const double H = grid.step();
    const double h = H / sub;

    PhiCoeffs out{grid, std::vector<Vector>(static_cast<std::size_t>(grid.nodes())),
                  std::vector<Vector>(static_cast<std::size_t>(grid.nodes()))};
    Vector a = -target.c0;
    Vector bc = -target.c1;
    out.a.back() = a;
    out.bc.back() = bc;

    for (int i = grid.steps() - 1; i >= 0; --i) {
        const NodeCoeffs c = node_coeffs(p, i);
        const Matrix& s0 = sig[i];
        const Matrix& s1 = sig[i + 1];
        const Matrix d0 = rhs_with(c, s0, i);
        const Matrix d1 = rhs_with(c, s1, i);
        auto sigma_at = [&](double theta) -> Matrix {
            const double t2 = theta * theta;
            const double t3 = t2 * theta;
            const double h00 = 2 * t3 - 3 * t2 + 1;
            const double h10 = t3 - 2 * t2 + theta;
            const double h01 = -2 * t3 + 3 * t2;
            const double h11 = t3 - t2;
            return h00 * s0 + (h10 * H) * d0 + h01 * s1 + (h11 * H) * d1;
        };
        // Derivative of the stacked state (a, bc) with Sigma frozen at `s`.
        auto deriv = [&](const Matrix& s, const Vector& av, const Vector& bv, Vector& da, Vector& db) {
            const Matrix ahat = *c.A + s * *c.Q;
            Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + s * *c.R);
            db = ahat * bv;
            da = ahat * av + *c.K * lu.solve(bv);
        };
        for (int j = sub - 1; j >= 0; --j) {
            const Matrix s_hi = sigma_at(static_cast<double>(j + 1) / sub);
            const Matrix s_mid = sigma_at((j + 0.5) / sub);
            const Matrix s_lo = sigma_at(static_cast<double>(j) / sub);
            Vector ka1, kb1, ka2, kb2, ka3, kb3, ka4, kb4;
            deriv(s_hi, a, bc, ka1, kb1);
            deriv(s_mid, a - 0.5 * h * ka1, bc - 0.5 * h * kb1, ka2, kb2);
            deriv(s_mid, a - 0.5 * h * ka2, bc - 0.5 * h * kb2, ka3, kb3);
            deriv(s_lo, a - h * ka3, bc - h * kb3, ka4, kb4);
            a -= (h / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
            bc -= (h / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
        }
        if (!a.allFinite() || !bc.allFinite()) {
            raise(ErrorKind::NumericalFailure, "target ODE solution is not finite at node " + std::to_string(i));
        }
        out.a[static_cast<std::size_t>(i)] = a;
        out.bc[static_cast<std::size_t>(i)] = bc;
    }
    return out;
}

}  // namespace sclq
