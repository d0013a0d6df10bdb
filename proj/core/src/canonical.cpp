#include "sclq/canonical.hpp"

#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"
#include "sclq/monte_carlo.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sclq {

namespace {

void expect_wide(const CoeffPath& D) {
    if (D.empty()) raise(ErrorKind::DimensionMismatch, "D has no nodes");
    if (D.cols() <= D.rows()) {
        raise(ErrorKind::DimensionMismatch, "D must have more columns than rows (m > n), got " +
                                                std::to_string(D.rows()) + "x" + std::to_string(D.cols()));
    }
}

// Orthonormal basis of ker(D) from the trailing columns of a full QR of D^T.
Matrix kernel_basis(const Matrix& d) {
    const Eigen::Index n = d.rows();
    const Eigen::Index m = d.cols();
    Eigen::HouseholderQR<Matrix> qr(d.transpose());
    Matrix q = qr.householderQ() * Matrix::Identity(m, m);
    Matrix z = q.rightCols(m - n);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(z(i, j)) > 1e-12) {
                if (z(i, j) < 0.0) z.col(j) = -z.col(j);
                break;
            }
        }
    }
    return z;
}

}  // namespace

double check_nondegeneracy(const CoeffPath& D) {
    expect_wide(D);
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < D.nodes(); ++i) {
        const Matrix ddt = D[i] * D[i].transpose();
        margin = std::min(margin, linalg::min_eigenvalue(ddt));
    }
    return margin;
}

CoeffPath build_m(const CoeffPath& D) {
    expect_wide(D);
    const Eigen::Index n = D.rows();
    const Eigen::Index m = D.cols();
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(D.nodes()));
    for (int i = 0; i < D.nodes(); ++i) {
        const Matrix& d = D[i];
        const Matrix ddt = d * d.transpose();
        const double lmax = linalg::max_eigenvalue(ddt);
        const double lmin = linalg::min_eigenvalue(ddt);
        if (!(lmin > 1e-14 * std::max(1.0, lmax))) {
            raise(ErrorKind::Singular, "D D^T is singular at node " + std::to_string(i));
        }
        Eigen::LLT<Matrix> llt(ddt);
        Matrix mi(m, m);
        // D^T (D D^T)^{-1} = ((D D^T)^{-1} D)^T
        mi.leftCols(n) = llt.solve(d).transpose();
        mi.rightCols(m - n) = kernel_basis(d);
        out.push_back(std::move(mi));
    }
    return CoeffPath(std::move(out));
}

TransformResult to_canonical(const RawSystem& raw) {
    const int nodes = raw.grid.nodes();
    const Eigen::Index n = raw.A.rows();
    const Eigen::Index m = raw.B.cols();
    auto expect = [&](const CoeffPath& p, const char* name, Eigen::Index r, Eigen::Index c) {
        if (p.nodes() != nodes || p.rows() != r || p.cols() != c) {
            raise(ErrorKind::DimensionMismatch, std::string(name) + " must be " + std::to_string(r) + "x" +
                                                    std::to_string(c) + " on " + std::to_string(nodes) + " nodes");
        }
    };
    if (n < 1) raise(ErrorKind::DimensionMismatch, "state dimension must be positive");
    expect(raw.A, "A", n, n);
    expect(raw.C, "C", n, n);
    expect(raw.B, "B", n, m);
    expect(raw.D, "D", n, m);
    if (!(raw.delta_D > 0.0)) raise(ErrorKind::NotPositive, "delta_D must be positive");
    const double margin = check_nondegeneracy(raw.D);
    if (margin < raw.delta_D) {
        raise(ErrorKind::NotPositive, "nondegeneracy violated: min eig(D D^T) = " + std::to_string(margin) +
                                          " < delta_D = " + std::to_string(raw.delta_D));
    }

    TransformResult out{raw.grid, build_m(raw.D), {}, {}, {}, {}};
    std::vector<Matrix> abar, k, l;
    abar.reserve(static_cast<std::size_t>(nodes));
    k.reserve(static_cast<std::size_t>(nodes));
    l.reserve(static_cast<std::size_t>(nodes));
    out.cond_M.reserve(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) {
        const Matrix bm = raw.B[i] * out.M[i];
        k.push_back(bm.leftCols(n));
        l.push_back(bm.rightCols(m - n));
        abar.push_back(raw.A[i] - k.back() * raw.C[i]);
        Eigen::JacobiSVD<Matrix> svd(out.M[i]);
        const auto& sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        out.cond_M.push_back(smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity());
    }
    out.Abar = CoeffPath(std::move(abar));
    out.K = CoeffPath(std::move(k));
    out.L = CoeffPath(std::move(l));
    return out;
}

PathEnsemble lift_control(const PathEnsemble& z, const PathEnsemble& v, const PathEnsemble& xbar,
                          const CoeffPath& M, const CoeffPath& C) {
    const int paths = z.paths();
    const int nodes = z.nodes();
    const Eigen::Index n = z.rows();
    const Eigen::Index mv = v.rows();
    if (v.paths() != paths || xbar.paths() != paths || v.nodes() != nodes || xbar.nodes() != nodes ||
        M.nodes() != nodes || C.nodes() != nodes) {
        raise(ErrorKind::DimensionMismatch, "lift_control inputs must share paths and nodes");
    }
    if (z.cols() != 1 || v.cols() != 1 || xbar.cols() != 1 || xbar.rows() != n || C.rows() != n ||
        C.cols() != n || M.rows() != n + mv || M.cols() != n + mv) {
        raise(ErrorKind::DimensionMismatch, "lift_control shapes are inconsistent");
    }
    PathEnsemble u(z.grid(), paths, n + mv, 1);
    Vector stacked(n + mv);
    for (int p = 0; p < paths; ++p) {
        for (int i = 0; i < nodes; ++i) {
            stacked.head(n) = z.at(p, i) - C[i] * xbar.at(p, i);
            stacked.tail(mv) = v.at(p, i);
            u.at(p, i) = M[i] * stacked;
        }
    }
    return u;
}

}  // namespace sclq
