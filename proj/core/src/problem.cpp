#include "sclq/problem.hpp"

#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"

#include <string>

namespace sclq {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void expect_path(const CoeffPath& path, const char* name, Eigen::Index rows, Eigen::Index cols, int nodes) {
    if (path.nodes() != nodes) {
        raise(ErrorKind::DimensionMismatch, std::string(name) + " has " + std::to_string(path.nodes()) +
                                                " nodes, grid has " + std::to_string(nodes));
    }
    if (path.rows() != rows || path.cols() != cols) {
        raise(ErrorKind::DimensionMismatch,
              std::string(name) + " is " + shape(path.rows(), path.cols()) + ", expected " + shape(rows, cols));
    }
}

void expect_finite(const Matrix& m, const char* name) {
    if (!m.allFinite()) raise(ErrorKind::NonFinite, std::string(name) + " has non-finite entries");
}

Matrix checked_symmetric(const Matrix& x, const std::string& name, double tol) {
    const double asym = linalg::asymmetry(x);
    if (asym > tol) {
        raise(ErrorKind::NotPositive, name + " is not symmetric (asymmetry " + std::to_string(asym) + ")");
    }
    return asym == 0.0 ? x : linalg::symmetrized(x);
}

CoeffPath checked_symmetric_path(const CoeffPath& p, const char* name, double tol) {
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(p.nodes()));
    for (int i = 0; i < p.nodes(); ++i) {
        out.push_back(checked_symmetric(p[i], std::string(name) + "[" + std::to_string(i) + "]", tol));
    }
    return CoeffPath(std::move(out));
}

void expect_psd(const CoeffPath& p, const char* name, double psd_tol) {
    for (int i = 0; i < p.nodes(); ++i) {
        const double lam = linalg::min_eigenvalue(p[i]);
        if (lam < psd_tol) {
            raise(ErrorKind::NotPositive, std::string(name) + "[" + std::to_string(i) +
                                              "] has eigenvalue " + std::to_string(lam));
        }
    }
}

}  // namespace

void validate_settings(const SolverSettings& s) {
    if (s.mc_paths < 1) raise(ErrorKind::InvalidConfig, "mc_paths must be positive");
    if (s.ode_substeps < 1) raise(ErrorKind::InvalidConfig, "ode_substeps must be positive");
    if (s.workers < 1) raise(ErrorKind::InvalidConfig, "workers must be positive");
    if (!(s.symmetry_tol >= 0.0) || !(s.psd_tol <= 0.0) || !(s.lsq_residual_tol > 0.0) ||
        !(s.mc_sigma_mult > 0.0)) {
        raise(ErrorKind::InvalidConfig, "tolerances out of range");
    }
}

ValidatedProblem validate_problem(const CanonicalProblem& p, const SolverSettings& s) {
    validate_settings(s);
    const int nodes = p.grid.nodes();
    const Eigen::Index n = p.A.rows();
    if (n < 1) raise(ErrorKind::DimensionMismatch, "state dimension must be positive");
    const Eigen::Index mv = p.L.cols();
    if (mv < 1) raise(ErrorKind::DimensionMismatch, "L must have at least one column (m > n)");

    expect_path(p.A, "A", n, n, nodes);
    expect_path(p.K, "K", n, n, nodes);
    expect_path(p.L, "L", n, mv, nodes);
    expect_path(p.weights.Q, "Q", n, n, nodes);
    expect_path(p.weights.R, "R", n, n, nodes);
    expect_path(p.weights.N, "N", mv, mv, nodes);
    if (p.weights.G.rows() != n || p.weights.G.cols() != n) {
        raise(ErrorKind::DimensionMismatch, "G is " + shape(p.weights.G.rows(), p.weights.G.cols()) +
                                                ", expected " + shape(n, n));
    }
    const auto& F = p.manifold.F;
    if (F.cols() != n) raise(ErrorKind::DimensionMismatch, "F has " + std::to_string(F.cols()) + " columns, expected " + std::to_string(n));
    if (F.rows() > n) raise(ErrorKind::DimensionMismatch, "F has k=" + std::to_string(F.rows()) + " > n rows");
    if (p.manifold.b.size() != F.rows()) raise(ErrorKind::DimensionMismatch, "b length does not match F rows");
    if (p.target.c0.size() != n || p.target.c1.size() != n) {
        raise(ErrorKind::DimensionMismatch, "target vectors must have length n");
    }
    expect_finite(p.weights.G, "G");
    expect_finite(F, "F");
    expect_finite(p.manifold.b, "b");
    expect_finite(p.target.c0, "c0");
    expect_finite(p.target.c1, "c1");
    if (!(p.weights.delta > 0.0)) raise(ErrorKind::NotPositive, "delta must be positive");

    CanonicalProblem out = p;
    out.weights.G = checked_symmetric(p.weights.G, "G", s.symmetry_tol);
    out.weights.Q = checked_symmetric_path(p.weights.Q, "Q", s.symmetry_tol);
    out.weights.R = checked_symmetric_path(p.weights.R, "R", s.symmetry_tol);
    out.weights.N = checked_symmetric_path(p.weights.N, "N", s.symmetry_tol);

    if (linalg::min_eigenvalue(out.weights.G) < s.psd_tol) raise(ErrorKind::NotPositive, "G is not positive semidefinite");
    expect_psd(out.weights.Q, "Q", s.psd_tol);
    expect_psd(out.weights.R, "R", s.psd_tol);
    for (int i = 0; i < nodes; ++i) {
        const double lam = linalg::min_eigenvalue(out.weights.N[i]);
        if (lam < out.weights.delta) {
            raise(ErrorKind::NotPositive, "N[" + std::to_string(i) + "] has eigenvalue " + std::to_string(lam) +
                                              " below delta " + std::to_string(out.weights.delta));
        }
    }
    return ValidatedProblem(std::move(out), s);
}

ValidatedProblem validate_problem(const ValidatedProblem& p) { return p; }

CoeffPath refined(const CoeffPath& c, int factor) {
    if (factor < 1) raise(ErrorKind::BadGrid, "refinement factor must be positive");
    if (c.empty()) return c;
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>((c.nodes() - 1) * factor + 1));
    for (int i = 0; i + 1 < c.nodes(); ++i) {
        for (int j = 0; j < factor; ++j) out.push_back(c[i]);
    }
    out.push_back(c[c.nodes() - 1]);
    return CoeffPath(std::move(out));
}

CanonicalProblem refined(const CanonicalProblem& p, int factor) {
    CanonicalProblem out = p;
    out.grid = TimeGrid(p.grid.t_start(), p.grid.t_end(), p.grid.steps() * factor);
    out.A = refined(p.A, factor);
    out.K = refined(p.K, factor);
    out.L = refined(p.L, factor);
    out.weights.Q = refined(p.weights.Q, factor);
    out.weights.R = refined(p.weights.R, factor);
    out.weights.N = refined(p.weights.N, factor);
    return out;
}

namespace {

template <typename Derived>
bool eq(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const CoeffPath& a, const CoeffPath& b) {
    if (a.nodes() != b.nodes()) return false;
    for (int i = 0; i < a.nodes(); ++i) {
        if (!eq(a[i], b[i])) return false;
    }
    return true;
}

}  // namespace

bool operator==(const ValidatedProblem& a, const ValidatedProblem& b) {
    const auto& x = a.problem_;
    const auto& y = b.problem_;
    return x.grid == y.grid && same(x.A, y.A) && same(x.K, y.K) && same(x.L, y.L) &&
           eq(x.weights.G, y.weights.G) && same(x.weights.Q, y.weights.Q) && same(x.weights.R, y.weights.R) &&
           same(x.weights.N, y.weights.N) && x.weights.delta == y.weights.delta && eq(x.manifold.F, y.manifold.F) &&
           eq(x.manifold.b, y.manifold.b) && eq(x.target.c0, y.target.c0) && eq(x.target.c1, y.target.c1);
}

}  // namespace sclq
