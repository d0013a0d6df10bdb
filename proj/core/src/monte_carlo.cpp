#include "sclq/monte_carlo.hpp"

#include "sclq/errors.hpp"

#include <cmath>
#include <string>

namespace sclq {

PathEnsemble::PathEnsemble(TimeGrid grid, int paths, Eigen::Index rows, Eigen::Index cols)
    : grid_(grid), rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(paths), Matrix::Zero(rows * cols, grid.nodes())) {}

namespace {

template <typename Get>
Matrix pairwise_sum(int lo, int hi, const Get& get) {
    if (hi - lo <= 8) {
        Matrix acc = get(lo);
        for (int i = lo + 1; i < hi; ++i) acc += get(i);
        return acc;
    }
    const int mid = lo + (hi - lo) / 2;
    Matrix left = pairwise_sum(lo, mid, get);
    left += pairwise_sum(mid, hi, get);
    return left;
}

void check_noise_grid(const CoeffPath& c, const NoiseEnsemble& noise, const char* name) {
    if (!c.empty() && c.nodes() != noise.grid().nodes()) {
        raise(ErrorKind::DimensionMismatch, std::string(name) + " has " + std::to_string(c.nodes()) +
                                                " nodes, noise grid has " + std::to_string(noise.grid().nodes()));
    }
}

}  // namespace

SampleMean sample_mean(std::span<const Matrix> samples) {
    if (samples.empty()) raise(ErrorKind::DimensionMismatch, "sample_mean of an empty sample");
    const int count = static_cast<int>(samples.size());
    const Matrix& ref = samples.front();
    auto dev = [&](int i) -> Matrix { return samples[static_cast<std::size_t>(i)] - ref; };
    const Matrix shift = pairwise_sum(0, count, dev) / static_cast<double>(count);
    SampleMean out;
    out.mean = ref + shift;
    if (count == 1) {
        out.se = Matrix::Zero(ref.rows(), ref.cols());
        return out;
    }
    auto sq = [&](int i) -> Matrix { return (dev(i) - shift).array().square().matrix(); };
    const Matrix var = pairwise_sum(0, count, sq) / static_cast<double>(count - 1);
    out.se = (var / static_cast<double>(count)).cwiseSqrt();
    return out;
}

SampleMean sample_mean(std::span<const double> samples) {
    std::vector<Matrix> boxed;
    boxed.reserve(samples.size());
    for (double s : samples) boxed.push_back(Matrix::Constant(1, 1, s));
    return sample_mean(std::span<const Matrix>(boxed));
}

namespace {

PathEnsemble euler_impl(const LinearSde& sde, const std::vector<Matrix>& init, bool shared, const NoiseEnsemble& noise,
                        int workers) {
    const TimeGrid& grid = noise.grid();
    const Matrix& x0 = init.front();
    const Eigen::Index r = x0.rows();
    const Eigen::Index c = x0.cols();
    check_noise_grid(sde.alpha, noise, "alpha");
    check_noise_grid(sde.gamma, noise, "gamma");
    check_noise_grid(sde.kappa, noise, "kappa");
    check_noise_grid(sde.rho, noise, "rho");
    auto square = [&](const CoeffPath& p, const char* name) {
        if (!p.empty() && (p.rows() != r || p.cols() != r)) {
            raise(ErrorKind::DimensionMismatch, std::string(name) + " must be " + std::to_string(r) + "x" + std::to_string(r));
        }
    };
    auto shaped = [&](const CoeffPath& p, const char* name) {
        if (!p.empty() && (p.rows() != r || p.cols() != c)) {
            raise(ErrorKind::DimensionMismatch, std::string(name) + " must match the state shape");
        }
    };
    square(sde.alpha, "alpha");
    square(sde.kappa, "kappa");
    shaped(sde.gamma, "gamma");
    shaped(sde.rho, "rho");
    for (const auto& m : init) {
        if (m.rows() != r || m.cols() != c) raise(ErrorKind::DimensionMismatch, "initial states differ in shape");
    }

    const int paths = noise.paths();
    if (!shared && static_cast<int>(init.size()) != paths) {
        raise(ErrorKind::DimensionMismatch, "need one initial state per path");
    }
    PathEnsemble out(grid, paths, r, c);
    const double h = grid.step();
    parallel_for(paths, workers, [&](int p) {
        const auto dw = noise.increments(p);
        Matrix x = shared ? x0 : init[static_cast<std::size_t>(p)];
        out.at(p, 0) = x;
        Matrix drift(r, c), diff(r, c);
        for (int i = 0; i < grid.steps(); ++i) {
            drift.setZero();
            diff.setZero();
            if (!sde.alpha.empty()) drift.noalias() += sde.alpha[i] * x;
            if (!sde.gamma.empty()) drift += sde.gamma[i];
            if (!sde.kappa.empty()) diff.noalias() += sde.kappa[i] * x;
            if (!sde.rho.empty()) diff += sde.rho[i];
            x += drift * h + diff * dw[static_cast<std::size_t>(i)];
            if (!x.allFinite()) {
                raise(ErrorKind::NonFinite, "state overflow on path " + std::to_string(p) + " at step " + std::to_string(i));
            }
            out.at(p, i + 1) = x;
        }
    });
    return out;
}

}  // namespace

PathEnsemble euler_linear_sde(const LinearSde& sde, const Matrix& init, const NoiseEnsemble& noise, int workers) {
    return euler_impl(sde, {init}, true, noise, workers);
}

PathEnsemble euler_linear_sde(const LinearSde& sde, const std::vector<Matrix>& init_per_path,
                              const NoiseEnsemble& noise, int workers) {
    if (init_per_path.empty()) raise(ErrorKind::DimensionMismatch, "no initial states");
    return euler_impl(sde, init_per_path, false, noise, workers);
}

FundamentalEnsemble::FundamentalEnsemble(FundamentalKind kind, PathEnsemble values, CoeffPath drift,
                                         CoeffPath diffusion)
    : kind_(kind), values_(std::move(values)), drift_(std::move(drift)), diffusion_(std::move(diffusion)) {}

std::vector<Matrix> FundamentalEnsemble::relative(int p, int i0) const {
    const int nodes = values_.nodes();
    if (i0 < 0 || i0 >= nodes) raise(ErrorKind::DimensionMismatch, "relative start index out of range");
    Eigen::PartialPivLU<Matrix> lu(values_.at(p, i0));
    const Matrix start = values_.at(p, i0);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        raise(ErrorKind::Singular, "fundamental matrix singular on path " + std::to_string(p) + " at node " +
                                       std::to_string(i0));
    }
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(nodes - i0));
    for (int i = i0; i < nodes; ++i) out.push_back(lu.solve(Matrix(values_.at(p, i))));
    return out;
}

namespace {

// One step X <- X (I - c1 h - c2 dW), written without forming the product.
inline void fundamental_step(Matrix& x, const Matrix* c1, const Matrix* c2, double h, double dw, Matrix& tmp) {
    tmp = x;
    if (c1) x.noalias() -= h * (tmp * *c1);
    if (c2) x.noalias() -= dw * (tmp * *c2);
}

Eigen::Index fundamental_dim(const CoeffPath& c1, const CoeffPath& c2) {
    const Eigen::Index n = !c1.empty() ? c1.rows() : c2.rows();
    if (n < 1) raise(ErrorKind::DimensionMismatch, "fundamental matrix needs at least one non-empty coefficient");
    for (const auto* c : {&c1, &c2}) {
        if (!c->empty() && (c->rows() != n || c->cols() != n)) {
            raise(ErrorKind::DimensionMismatch, "fundamental coefficients must be square and equal in size");
        }
    }
    return n;
}

}  // namespace

FundamentalEnsemble fundamental_matrix(FundamentalKind kind, const CoeffPath& coeff1, const CoeffPath& coeff2,
                                       const NoiseEnsemble& noise, int workers) {
    check_noise_grid(coeff1, noise, "coeff1");
    check_noise_grid(coeff2, noise, "coeff2");
    const Eigen::Index n = fundamental_dim(coeff1, coeff2);
    const TimeGrid& grid = noise.grid();
    PathEnsemble values(grid, noise.paths(), n, n);
    const double h = grid.step();
    parallel_for(noise.paths(), workers, [&](int p) {
        const auto dw = noise.increments(p);
        Matrix x = Matrix::Identity(n, n), tmp(n, n);
        values.at(p, 0) = x;
        for (int i = 0; i < grid.steps(); ++i) {
            fundamental_step(x, coeff1.empty() ? nullptr : &coeff1[i], coeff2.empty() ? nullptr : &coeff2[i], h,
                             dw[static_cast<std::size_t>(i)], tmp);
            if (!x.allFinite()) raise(ErrorKind::NonFinite, "fundamental matrix overflow on path " + std::to_string(p));
            values.at(p, i + 1) = x;
        }
    });
    return FundamentalEnsemble(kind, std::move(values), coeff1, coeff2);
}

GramianEstimate estimate_gramian(double t0, double t1, const CoeffPath& drift_coeff, const CoeffPath& diff_coeff,
                                 const CoeffPath& lhat, const NoiseEnsemble& noise, int workers) {
    const TimeGrid& grid = noise.grid();
    const int i0 = grid.index_of(t0);
    const int i1 = grid.index_of(t1);
    if (!(i0 < i1)) raise(ErrorKind::BadGrid, "Gramian needs t0 < t1");
    check_noise_grid(drift_coeff, noise, "drift_coeff");
    check_noise_grid(diff_coeff, noise, "diff_coeff");
    check_noise_grid(lhat, noise, "lhat");
    const Eigen::Index n = lhat.rows();
    if (!drift_coeff.empty() || !diff_coeff.empty()) {
        if (fundamental_dim(drift_coeff, diff_coeff) != n) {
            raise(ErrorKind::DimensionMismatch, "Lhat rows must match the fundamental matrix size");
        }
    }
    const double h = grid.step();
    std::vector<Matrix> per_path(static_cast<std::size_t>(noise.paths()));
    parallel_for(noise.paths(), workers, [&](int p) {
        const auto dw = noise.increments(p);
        Matrix x = Matrix::Identity(n, n), tmp(n, n), xl(n, lhat.cols());
        Matrix acc = Matrix::Zero(n, n);
        for (int i = i0; i < i1; ++i) {
            xl.noalias() = x * lhat[i];
            acc.noalias() += xl * xl.transpose();
            fundamental_step(x, drift_coeff.empty() ? nullptr : &drift_coeff[i],
                             diff_coeff.empty() ? nullptr : &diff_coeff[i], h, dw[static_cast<std::size_t>(i)], tmp);
            if (!x.allFinite()) raise(ErrorKind::NonFinite, "fundamental matrix overflow on path " + std::to_string(p));
        }
        // Sum then scale; keeps the integrand symmetric entry for entry.
        per_path[static_cast<std::size_t>(p)] = h * (0.5 * (acc + acc.transpose()));
    });
    const auto stats = sample_mean(std::span<const Matrix>(per_path));
    return GramianEstimate{stats.mean, stats.se, t0, t1, noise.paths()};
}

TerminalRepresentation represent_terminal_expectation(const AffineTarget& eta, const CoeffPath& f, const CoeffPath& A,
                                                      const CoeffPath& C, const NoiseEnsemble& noise, int workers) {
    check_noise_grid(f, noise, "f");
    const Eigen::Index n = eta.c0.size();
    if (eta.c1.size() != n) raise(ErrorKind::DimensionMismatch, "target vectors differ in length");
    if (!f.empty() && (f.rows() != n || f.cols() != 1)) raise(ErrorKind::DimensionMismatch, "f must be an n-vector path");
    const bool trivial = A.empty() && C.empty();
    if (!trivial) {
        check_noise_grid(A, noise, "A");
        check_noise_grid(C, noise, "C");
        if (fundamental_dim(A, C) != n) raise(ErrorKind::DimensionMismatch, "A, C must be n x n");
    }
    const TimeGrid& grid = noise.grid();
    const double h = grid.step();
    std::vector<Matrix> per_path(static_cast<std::size_t>(noise.paths()));
    parallel_for(noise.paths(), workers, [&](int p) {
        const auto dw = noise.increments(p);
        Matrix gamma = Matrix::Identity(n, n), tmp(n, n);
        Vector integral = Vector::Zero(n);
        double w = 0.0;
        for (int i = 0; i < grid.steps(); ++i) {
            if (!f.empty()) integral.noalias() += gamma * f[i];
            if (!trivial) {
                fundamental_step(gamma, A.empty() ? nullptr : &A[i], C.empty() ? nullptr : &C[i], h,
                                 dw[static_cast<std::size_t>(i)], tmp);
            }
            w += dw[static_cast<std::size_t>(i)];
        }
        if (!gamma.allFinite()) raise(ErrorKind::NonFinite, "Gamma overflow on path " + std::to_string(p));
        per_path[static_cast<std::size_t>(p)] = gamma * eta.realize(w) - h * integral;
    });
    const auto stats = sample_mean(std::span<const Matrix>(per_path));
    return TerminalRepresentation{stats.mean, stats.se};
}

}  // namespace sclq
