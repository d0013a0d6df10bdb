#include "sclq/solver.hpp"

#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace sclq {

MultiplierResult solve_multiplier(const SigmaPath& sig, const PhiCoeffs& phi, const ValidatedProblem& p) {
    const Eigen::Index n = p.n();
    const Matrix& s = sig[0];
    const Matrix& G = p.weights().G;
    const Matrix& F = p.manifold().F;
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + s * G);
    if (!(lu.rcond() > 1e-13)) raise(ErrorKind::NumericalFailure, "I + Sigma G numerically singular");

    MultiplierResult out;
    out.s_matrix = linalg::symmetrized(F * lu.solve(s) * F.transpose());
    out.rhs = -(F * lu.solve(phi.a.front()) + p.manifold().b);
    const auto ls = linalg::min_norm_solve_symmetric(out.s_matrix, out.rhs);
    out.lambda_star = ls.x;
    out.residual = ls.residual;
    out.tolerance = p.settings().lsq_residual_tol * (1.0 + out.rhs.norm());
    if (!(out.residual <= out.tolerance)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "multiplier equation inconsistent: residual " << out.residual << " exceeds " << out.tolerance;
        throw UnreachableError(out.residual, out.tolerance, msg.str());
    }
    return out;
}

OptimalPathSimulator::OptimalPathSimulator(const MultiplierResult& mult, const SigmaPath& sig, const PhiCoeffs& phi,
                                           const ValidatedProblem& p)
    : grid_(p.grid()) {
    if (sig.grid() != grid_ || phi.grid != grid_) raise(ErrorKind::DimensionMismatch, "inputs on different grids");
    const Eigen::Index n = p.n();
    const Matrix& G = p.weights().G;
    if (mult.lambda_star.size() != p.k()) raise(ErrorKind::DimensionMismatch, "lambda must have length k");
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) + G * sig[0]);
    y0_ = lu.solve(p.manifold().F.transpose() * mult.lambda_star - G * phi.a.front());

    const int nodes = grid_.nodes();
    auto reserve = [nodes](auto&... v) { (v.reserve(static_cast<std::size_t>(nodes)), ...); };
    reserve(sigma_, drift_, qa_, qbc_, diff_y_, diff_b_, z_y_, z_b_, v_y_);
    const auto& w = p.weights();
    for (int i = 0; i < nodes; ++i) {
        const Matrix& s = sig[i];
        const Matrix& Q = w.Q[i];
        const Matrix& R = w.R[i];
        const Matrix kt = p.K()[i].transpose();
        const Vector& bc = phi.bc[static_cast<std::size_t>(i)];
        sigma_.push_back(s);
        drift_.push_back(p.A()[i].transpose() + Q * s);
        qa_.push_back(Q * phi.a[static_cast<std::size_t>(i)]);
        qbc_.push_back(Q * bc);
        diff_y_.push_back(sig.solve_irs(i, kt));
        diff_b_.push_back(sig.solve_irs(i, R * bc));
        z_y_.push_back(sig.solve_isr(i, s * kt));
        z_b_.push_back(sig.solve_isr(i, bc));
        v_y_.push_back(Eigen::LLT<Matrix>(w.N[i]).solve(p.L()[i].transpose()));
    }
    a_ = phi.a;
    bc_ = phi.bc;
}

OptimalPath OptimalPathSimulator::simulate(std::span<const double> dw) const {
    const int steps = grid_.steps();
    if (static_cast<int>(dw.size()) != steps) raise(ErrorKind::DimensionMismatch, "need one increment per step");
    const Eigen::Index n = y0_.size();
    const Eigen::Index mv = v_y_.front().rows();
    const double h = grid_.step();
    OptimalPath out{Matrix(n, steps + 1), Matrix(n, steps + 1), Matrix(n, steps + 1), Matrix(mv, steps + 1),
                    std::vector<double>(static_cast<std::size_t>(steps + 1))};
    Vector y = y0_;
    Vector drift(n), diff(n);
    double w = 0.0;
    for (int i = 0;; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out.y.col(i) = y;
        out.x.col(i).noalias() = sigma_[k] * y;
        out.x.col(i) = -(out.x.col(i) + a_[k] + bc_[k] * w);
        out.z.col(i).noalias() = z_y_[k] * y;
        out.z.col(i) -= z_b_[k];
        out.v.col(i).noalias() = v_y_[k] * y;
        out.w[k] = w;
        if (i == steps) break;
        const double d = dw[k];
        drift.noalias() = drift_[k] * y;
        drift += qa_[k] + qbc_[k] * w;
        diff.noalias() = diff_y_[k] * y;
        diff += diff_b_[k];
        y -= drift * h + diff * d;
        if (!y.allFinite()) raise(ErrorKind::NonFinite, "adjoint overflow at step " + std::to_string(i));
        w += d;
    }
    return out;
}

OptimalEnsemble simulate_optimal(const MultiplierResult& mult, const SigmaPath& sig, const PhiCoeffs& phi,
                                 const ValidatedProblem& p, const NoiseEnsemble& noise, int workers) {
    if (noise.grid() != p.grid()) raise(ErrorKind::DimensionMismatch, "noise grid differs from the problem grid");
    const OptimalPathSimulator sim(mult, sig, phi, p);
    const int paths = noise.paths();
    const TimeGrid& grid = p.grid();
    OptimalEnsemble ens{mult.lambda_star,
                        PathEnsemble(grid, paths, p.n(), 1),
                        PathEnsemble(grid, paths, p.n(), 1),
                        PathEnsemble(grid, paths, p.n(), 1),
                        PathEnsemble(grid, paths, p.L().cols(), 1),
                        noise};
    parallel_for(paths, workers, [&](int k) {
        const auto dw = noise.increments(k);
        auto path = sim.simulate(dw);
        ens.y.path(k) = std::move(path.y);
        ens.x.path(k) = std::move(path.x);
        ens.z.path(k) = std::move(path.z);
        ens.v.path(k) = std::move(path.v);
    });
    return ens;
}

CostBreakdown path_cost(const Matrix& x, const Matrix& z, const Matrix& v, const ValidatedProblem& p,
                        const std::optional<Vector>& lambda) {
    const TimeGrid& grid = p.grid();
    if (x.cols() != grid.nodes() || z.cols() != grid.nodes() || v.cols() != grid.nodes()) {
        raise(ErrorKind::DimensionMismatch, "trajectories must have one column per node");
    }
    const auto& w = p.weights();
    const double h = grid.step();
    double sq = 0.0, sr = 0.0, sn = 0.0;
    Vector bx(x.rows()), bz(z.rows()), bv(v.rows());
    for (int i = 0; i < grid.steps(); ++i) {
        bx.noalias() = w.Q[i] * x.col(i);
        bz.noalias() = w.R[i] * z.col(i);
        bv.noalias() = w.N[i] * v.col(i);
        sq += x.col(i).dot(bx);
        sr += z.col(i).dot(bz);
        sn += v.col(i).dot(bv);
    }
    CostBreakdown c;
    c.initial = x.col(0).dot(w.G * x.col(0));
    c.state = h * sq;
    c.diffusion = h * sr;
    c.drift = h * sn;
    if (lambda) c.multiplier = 2.0 * (p.manifold().F.transpose() * *lambda).dot(x.col(0));
    return c;
}

double total(const CostBreakdown& c, bool with_multiplier) {
    const double j = c.initial + c.state + c.diffusion + c.drift;
    return with_multiplier ? j + c.multiplier : j;
}

namespace {

CostEstimate reduce_costs(const std::vector<CostBreakdown>& per_path, bool with_lambda) {
    const auto count = per_path.size();
    std::vector<double> j(count), jl(count);
    std::vector<Matrix> parts(count);
    for (std::size_t q = 0; q < count; ++q) {
        const auto& c = per_path[q];
        j[q] = total(c, false);
        jl[q] = total(c, true);
        Matrix m(5, 1);
        m << c.initial, c.state, c.diffusion, c.drift, c.multiplier;
        parts[q] = std::move(m);
    }
    const auto js = sample_mean(std::span<const double>(j));
    const auto ps = sample_mean(std::span<const Matrix>(parts));
    CostEstimate out;
    out.j_hat = js.mean(0, 0);
    out.se = js.se(0, 0);
    out.breakdown = {ps.mean(0, 0), ps.mean(1, 0), ps.mean(2, 0), ps.mean(3, 0), ps.mean(4, 0)};
    if (with_lambda) {
        const auto ls = sample_mean(std::span<const double>(jl));
        out.lagrangian_j_hat = ls.mean(0, 0);
        out.lagrangian_se = ls.se(0, 0);
    }
    return out;
}

}  // namespace

CostEstimate evaluate_cost(const PathEnsemble& x, const PathEnsemble& z, const PathEnsemble& v,
                           const ValidatedProblem& p, const std::optional<Vector>& lambda, int workers) {
    if (x.paths() != z.paths() || x.paths() != v.paths()) raise(ErrorKind::DimensionMismatch, "path counts differ");
    if (x.cols() != 1 || z.cols() != 1 || v.cols() != 1) raise(ErrorKind::DimensionMismatch, "expected vector paths");
    std::vector<CostBreakdown> per_path(static_cast<std::size_t>(x.paths()));
    parallel_for(x.paths(), workers, [&](int k) {
        per_path[static_cast<std::size_t>(k)] = path_cost(x.path(k), z.path(k), v.path(k), p, lambda);
    });
    return reduce_costs(per_path, lambda.has_value());
}

CostEstimate evaluate_cost(const OptimalEnsemble& ens, const ValidatedProblem& p, const std::optional<Vector>& lambda,
                           int workers) {
    return evaluate_cost(ens.x, ens.z, ens.v, p, lambda, workers);
}

double path_forward_deviation(const Matrix& x, const Matrix& z, const Matrix& v, std::span<const double> dw,
                              const ValidatedProblem& p) {
    const int steps = p.grid().steps();
    const double h = p.grid().step();
    Vector xf = x.col(0);
    Vector drift(xf.size());
    double dev = 0.0;
    for (int i = 0; i < steps; ++i) {
        const auto zi = z.col(i);
        drift.noalias() = p.A()[i] * xf;
        drift.noalias() += p.K()[i] * zi;
        drift.noalias() += p.L()[i] * v.col(i);
        xf += drift * h + zi * dw[static_cast<std::size_t>(i)];
        dev = std::max(dev, (xf - x.col(i + 1)).lpNorm<Eigen::Infinity>());
    }
    return dev;
}

double forward_consistency_check(const OptimalEnsemble& ens, const ValidatedProblem& p, int workers) {
    std::vector<double> dev(static_cast<std::size_t>(ens.x.paths()));
    parallel_for(ens.x.paths(), workers, [&](int k) {
        const auto dw = ens.noise.increments(k);
        dev[static_cast<std::size_t>(k)] = path_forward_deviation(ens.x.path(k), ens.z.path(k), ens.v.path(k), dw, p);
    });
    return dev.empty() ? 0.0 : *std::max_element(dev.begin(), dev.end());
}

namespace {

double path_r1(const Matrix& y, const Matrix& v, const ValidatedProblem& p) {
    double r1 = 0.0;
    Vector r(v.rows());
    for (int i = 0; i < p.grid().nodes(); ++i) {
        r.noalias() = p.weights().N[i] * v.col(i);
        r.noalias() -= p.L()[i].transpose() * y.col(i);
        r1 = std::max(r1, r.lpNorm<Eigen::Infinity>());
    }
    return r1;
}

double path_r2(const Matrix& y, const Matrix& x, const Vector& lambda, const ValidatedProblem& p) {
    const Vector r = y.col(0) - p.weights().G * x.col(0) - p.manifold().F.transpose() * lambda;
    return r.lpNorm<Eigen::Infinity>();
}

}  // namespace

StationarityResiduals stationarity_check(const OptimalEnsemble& ens, const MultiplierResult& mult,
                                         const ValidatedProblem& p) {
    StationarityResiduals out;
    for (int k = 0; k < ens.x.paths(); ++k) {
        out.r1 = std::max(out.r1, path_r1(ens.y.path(k), ens.v.path(k), p));
        out.r2 = std::max(out.r2, path_r2(ens.y.path(k), ens.x.path(k), mult.lambda_star, p));
    }
    return out;
}

OptimalSummary summarize_optimal(const MultiplierResult& mult, const SigmaPath& sig, const PhiCoeffs& phi,
                                 const ValidatedProblem& p, const NoiseEnsemble& noise, int workers) {
    if (noise.grid() != p.grid()) raise(ErrorKind::DimensionMismatch, "noise grid differs from the problem grid");
    const OptimalPathSimulator sim(mult, sig, phi, p);
    struct PathStats {
        CostBreakdown cost;
        double forward = 0.0, r1 = 0.0, r2 = 0.0, manifold = 0.0, terminal = 0.0;
        Matrix x0;
    };
    std::vector<PathStats> stats(static_cast<std::size_t>(noise.paths()));
    const int last = p.grid().steps();
    parallel_for(noise.paths(), workers, [&](int k) {
        const auto dw = noise.increments(k);
        const auto path = sim.simulate(dw);
        auto& s = stats[static_cast<std::size_t>(k)];
        s.cost = path_cost(path.x, path.z, path.v, p, mult.lambda_star);
        s.forward = path_forward_deviation(path.x, path.z, path.v, dw, p);
        s.r1 = path_r1(path.y, path.v, p);
        s.r2 = path_r2(path.y, path.x, mult.lambda_star, p);
        s.manifold = (p.manifold().F * path.x.col(0) - p.manifold().b).norm();
        const Vector eta = p.target().realize(path.w.back());
        s.terminal = (path.x.col(last) - eta).lpNorm<Eigen::Infinity>();
        s.x0 = path.x.col(0);
    });
    OptimalSummary out;
    std::vector<CostBreakdown> costs;
    std::vector<Matrix> x0;
    costs.reserve(stats.size());
    x0.reserve(stats.size());
    for (auto& s : stats) {
        costs.push_back(s.cost);
        x0.push_back(std::move(s.x0));
        out.forward_consistency = std::max(out.forward_consistency, s.forward);
        out.stationarity.r1 = std::max(out.stationarity.r1, s.r1);
        out.stationarity.r2 = std::max(out.stationarity.r2, s.r2);
        out.manifold_error = std::max(out.manifold_error, s.manifold);
        out.terminal_error = std::max(out.terminal_error, s.terminal);
    }
    out.cost = reduce_costs(costs, true);
    out.y0 = sim.y0();
    out.x0_mean = sample_mean(std::span<const Matrix>(x0)).mean;
    return out;
}

Matrix perturbation_response(const CoeffPath& w, const ValidatedProblem& p) {
    const TimeGrid& grid = p.grid();
    if (w.nodes() != grid.nodes() || w.rows() != p.L().cols() || w.cols() != 1) {
        raise(ErrorKind::DimensionMismatch, "direction must be (m - n) x 1 at every node");
    }
    const int sub = p.settings().ode_substeps;
    const double h = grid.step() / sub;
    Matrix out(p.n(), grid.nodes());
    Vector x = Vector::Zero(p.n());
    out.col(grid.steps()) = x;
    for (int i = grid.steps() - 1; i >= 0; --i) {
        const Matrix& A = p.A()[i];
        const Vector f = p.L()[i] * w[i];
        auto rhs = [&](const Vector& s) -> Vector { return A * s + f; };
        for (int j = 0; j < sub; ++j) {
            const Vector k1 = rhs(x);
            const Vector k2 = rhs(x - 0.5 * h * k1);
            const Vector k3 = rhs(x - 0.5 * h * k2);
            const Vector k4 = rhs(x - h * k3);
            x -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.col(i) = x;
    }
    return out;
}

std::vector<PerturbationResult> perturbation_optimality_check(const MultiplierResult& mult, const SigmaPath& sig,
                                                              const PhiCoeffs& phi, const ValidatedProblem& p,
                                                              const NoiseEnsemble& noise,
                                                              const std::vector<CoeffPath>& directions, double eps,
                                                              int workers) {
    if (noise.grid() != p.grid()) raise(ErrorKind::DimensionMismatch, "noise grid differs from the problem grid");
    if (!(eps > 0.0) || !std::isfinite(eps)) raise(ErrorKind::InvalidConfig, "eps must be positive");
    const OptimalPathSimulator sim(mult, sig, phi, p);
    const std::size_t count = directions.size();
    const TimeGrid& grid = p.grid();
    const int steps = grid.steps();
    const double h = grid.step();
    const auto& wt = p.weights();
    const Vector mult_dir = p.manifold().F.transpose() * mult.lambda_star;
    // J is quadratic along each direction: J(eps) = J(0) + eps * d1 + eps^2 * d2.
    // d2 is deterministic; d1 is a path-wise inner product with the weighted direction.
    std::vector<Matrix> qx(count), nw(count);
    std::vector<Vector> gx0(count);
    std::vector<double> d2(count), d1_const(count);
    for (std::size_t d = 0; d < count; ++d) {
        const Matrix xt = perturbation_response(directions[d], p);
        const auto& dir = directions[d];
        if (dir.nodes() != grid.nodes()) raise(ErrorKind::DimensionMismatch, "direction must cover every node");
        qx[d] = Matrix::Zero(p.n(), steps);
        nw[d] = Matrix::Zero(dir.rows(), steps);
        double quad = 0.0;
        for (int i = 0; i < steps; ++i) {
            qx[d].col(i) = wt.Q[i] * xt.col(i);
            nw[d].col(i) = wt.N[i] * dir[i];
            quad += xt.col(i).dot(qx[d].col(i)) + dir[i].col(0).dot(nw[d].col(i));
        }
        gx0[d] = wt.G * xt.col(0);
        d2[d] = xt.col(0).dot(gx0[d]) + h * quad;
        d1_const[d] = 2.0 * mult_dir.dot(xt.col(0));
    }
    const auto paths = static_cast<std::size_t>(noise.paths());
    std::vector<std::vector<double>> delta(count, std::vector<double>(paths));
    std::vector<std::vector<double>> linear(count, std::vector<double>(paths));
    parallel_for(noise.paths(), workers, [&](int k) {
        const auto path = sim.simulate(noise.increments(k));
        const auto x = path.x.leftCols(steps);
        const auto v = path.v.leftCols(steps);
        for (std::size_t d = 0; d < count; ++d) {
            const double cross = path.x.col(0).dot(gx0[d]) +
                                 h * (x.cwiseProduct(qx[d]).sum() + v.cwiseProduct(nw[d]).sum());
            const double d1 = 2.0 * cross + d1_const[d];
            const double jp = eps * d1 + eps * eps * d2[d];
            const double jm = -eps * d1 + eps * eps * d2[d];
            delta[d][static_cast<std::size_t>(k)] = jp;
            linear[d][static_cast<std::size_t>(k)] = (jp - jm) / (2.0 * eps);
        }
    });
    std::vector<PerturbationResult> out;
    out.reserve(count);
    for (std::size_t d = 0; d < count; ++d) {
        const auto ds = sample_mean(std::span<const double>(delta[d]));
        const auto ls = sample_mean(std::span<const double>(linear[d]));
        out.push_back({ds.mean(0, 0), ds.se(0, 0), ls.mean(0, 0), ls.se(0, 0)});
    }
    return out;
}

std::vector<CoeffPath> random_directions(int count, std::uint64_t seed, const TimeGrid& grid, Eigen::Index dim) {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::vector<CoeffPath> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    const double span = grid.t_end() - grid.t_start();
    for (int d = 0; d < count; ++d) {
        std::vector<Matrix> values(static_cast<std::size_t>(grid.nodes()), Matrix::Zero(dim, 1));
        for (Eigen::Index c = 0; c < dim; ++c) {
            const auto stream = static_cast<std::uint64_t>(d) * 4096u + static_cast<std::uint64_t>(c);
            if (d % 2 == 0) {
                const auto lo = normal_pair(seed, stream, 0);
                const auto hi = normal_pair(seed, stream, 1);
                const double coef[4] = {lo[0], lo[1], hi[0], hi[1]};
                for (int i = 0; i < grid.nodes(); ++i) {
                    const double tau = (grid.node(i) - grid.t_start()) / span;
                    values[static_cast<std::size_t>(i)](c, 0) = coef[0] + tau * (coef[1] + tau * (coef[2] + tau * coef[3]));
                }
            } else {
                const auto bits = Philox4x32::apply({static_cast<std::uint32_t>(stream),
                                                     static_cast<std::uint32_t>(stream >> 32), 0x62616e67u, 0u},
                                                    key);
                const int pieces = 2 + static_cast<int>(bits[0] % 7u);
                const double sign = (bits[1] & 1u) ? 1.0 : -1.0;
                for (int i = 0; i < grid.nodes(); ++i) {
                    const int piece = std::min(pieces - 1, i * pieces / grid.steps());
                    values[static_cast<std::size_t>(i)](c, 0) = (piece % 2 == 0) ? sign : -sign;
                }
            }
        }
        out.emplace_back(std::move(values));
    }
    return out;
}

CanonicalProblem transfer_problem(const CanonicalProblem& base, const Vector& x0) {
    const Eigen::Index n = base.n();
    if (x0.size() != n) raise(ErrorKind::DimensionMismatch, "x0 must have length n");
    const int nodes = base.grid.nodes();
    CanonicalProblem out = base;
    out.weights.G = Matrix::Zero(n, n);
    out.weights.Q = CoeffPath::zeros(n, n, nodes);
    out.weights.R = CoeffPath::zeros(n, n, nodes);
    out.weights.N = CoeffPath::constant(Matrix::Identity(base.L.cols(), base.L.cols()), nodes);
    out.weights.delta = std::min(base.weights.delta, 1.0);
    out.manifold.F = Matrix::Identity(n, n);
    out.manifold.b = x0;
    return out;
}

}  // namespace sclq
