#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"
#include "sclq/solver.hpp"
#include "support/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sclq;
using namespace sclq::testing;

namespace {

struct Solved {
    ValidatedProblem p;
    SigmaPath sig;
    PhiCoeffs phi;
    MultiplierResult mult;
};

Solved solved(const CanonicalProblem& bp, SolverSettings s = {}) {
    auto p = validate_problem(bp, s);
    auto sig = solve_sigma(p);
    auto phi = solve_target_odes(sig, p.target(), p);
    auto mult = solve_multiplier(sig, phi, p);
    return {std::move(p), std::move(sig), std::move(phi), std::move(mult)};
}

std::vector<CanonicalProblem> reachable_benchmarks(int steps) {
    return {sys_a(steps), sys_b(steps), sys_c(steps), sys_e(steps), sys_f(steps), sys_k1_weighted(steps)};
}

}  // namespace

TEST(Multiplier, ScalarBenchmarks) {
    const auto a = solved(sys_a(200));
    EXPECT_NEAR(a.mult.lambda_star(0), 0.7, 1e-12);
    EXPECT_NEAR(a.mult.s_matrix(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(a.mult.rhs(0), 0.7, 1e-12);
    EXPECT_TRUE(a.mult.minimal_norm);
    const auto e = solved(sys_e(200));
    EXPECT_NEAR(e.mult.lambda_star(0), 0.4, 1e-12);
    EXPECT_NEAR(e.mult.s_matrix(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(e.mult.rhs(0), 0.2, 1e-12);
    const auto c = solved(sys_c(200));
    EXPECT_EQ(c.mult.lambda_star(0), 0.0);
    EXPECT_EQ(c.mult.rhs(0), 0.0);
}

TEST(Multiplier, SysGUnreachable) {
    const auto p = validate_problem(sys_g(200), {});
    const auto sig = solve_sigma(p);
    const auto phi = solve_target_odes(sig, p.target(), p);
    try {
        (void)solve_multiplier(sig, phi, p);
        FAIL();
    } catch (const UnreachableError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TargetUnreachableFromManifold);
        EXPECT_NEAR(e.residual(), 1.0, 1e-12);
        EXPECT_LT(e.tolerance(), 1e-7);
    }
}

TEST(Multiplier, SMatrixSymmetricPsd) {
    for (const auto& bp : reachable_benchmarks(200)) {
        const auto s = solved(bp);
        EXPECT_LE(linalg::asymmetry(s.mult.s_matrix), 1e-10);
        EXPECT_GE(linalg::min_eigenvalue(s.mult.s_matrix), -1e-10);
        EXPECT_LE(s.mult.residual, s.mult.tolerance);
    }
}

TEST(Multiplier, RangeProperty) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 4;
        const int k = 1 + trial % n;
        const int rank = trial % (n + 1);
        Matrix F(k, n), B(n, std::max(rank, 1));
        for (Eigen::Index i = 0; i < F.size(); ++i) F.data()[i] = nd(rng);
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = nd(rng);
        const Matrix S = rank == 0 ? Matrix::Zero(n, n) : Matrix(B * B.transpose());
        Vector w(n);
        for (int i = 0; i < n; ++i) w(i) = nd(rng);
        const Vector rhs = F * S * w;
        const auto ls = linalg::min_norm_solve_symmetric(F * S * F.transpose(), rhs);
        EXPECT_LE(ls.residual, 1e-8 * (1.0 + rhs.norm())) << "trial " << trial;
    }
}

TEST(SimulateOptimal, SysA) {
    const auto s = solved(sys_a(2000));
    const auto noise = generate_noise(1, 5, s.p.grid());
    const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise);
    for (int k = 0; k < 5; ++k) {
        for (int i = 0; i < s.p.grid().nodes(); ++i) {
            const double t = s.p.grid().node(i);
            EXPECT_NEAR(ens.y.at(k, i)(0, 0), 0.7, 1e-12);
            EXPECT_NEAR(ens.v.at(k, i)(0, 0), 0.7, 1e-12);
            EXPECT_EQ(ens.z.at(k, i)(0, 0), 0.0);
            EXPECT_NEAR(ens.x.at(k, i)(0, 0), 1.0 - 0.7 * (1.0 - t), 1e-10);
        }
        EXPECT_NEAR(ens.x.at(k, 0)(0, 0), 0.3, 1e-10);
        EXPECT_EQ(ens.x.at(k, 2000)(0, 0), 1.0);
    }
}

TEST(SimulateOptimal, SysC) {
    const auto s = solved(sys_c(400));
    const auto noise = generate_noise(2, 6, s.p.grid());
    const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise);
    for (int k = 0; k < 6; ++k) {
        const auto w = noise.brownian(k);
        for (int i = 0; i < s.p.grid().nodes(); ++i) {
            EXPECT_EQ(ens.y.at(k, i)(0, 0), 0.0);
            EXPECT_EQ(ens.v.at(k, i)(0, 0), 0.0);
            EXPECT_EQ(ens.z.at(k, i)(0, 0), 1.0);
            EXPECT_NEAR(ens.x.at(k, i)(0, 0), w[static_cast<std::size_t>(i)], 1e-14);
        }
    }
}

TEST(SimulateOptimal, SysF) {
    const auto s = solved(sys_f(500));
    EXPECT_NEAR(s.mult.lambda_star(0), 1.0, 1e-12);
    const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, generate_noise(3, 3, s.p.grid()));
    for (int i = 0; i < s.p.grid().nodes(); ++i) {
        const double t = s.p.grid().node(i);
        EXPECT_NEAR(ens.y.at(1, i)(0, 0), 1.0, 1e-12);
        EXPECT_NEAR(ens.y.at(1, i)(1, 0), 0.0, 1e-12);
        EXPECT_NEAR(ens.v.at(1, i)(0, 0), 1.0, 1e-12);
        EXPECT_NEAR(ens.v.at(1, i)(1, 0), 0.0, 1e-12);
        EXPECT_NEAR(ens.x.at(1, i)(0, 0), t, 1e-10);
        EXPECT_NEAR(ens.x.at(1, i)(1, 0), 1.0, 1e-10);
    }
}

TEST(SimulateOptimal, WorkerCountInvariant) {
    const auto s = solved(sys_k1_weighted(100));
    const auto noise = generate_noise(4, 50, s.p.grid());
    const auto a = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise, 1);
    const auto b = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise, 8);
    for (int k = 0; k < 50; ++k) {
        EXPECT_EQ(a.x.path(k), b.x.path(k));
        EXPECT_EQ(a.y.path(k), b.y.path(k));
    }
}

TEST(SimulateOptimal, TerminalExactnessAndInitialValues) {
    for (const auto& bp : reachable_benchmarks(200)) {
        const auto s = solved(bp);
        const auto noise = generate_noise(5, 40, s.p.grid());
        const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise);
        for (int k = 0; k < 40; ++k) {
            const Vector eta = s.p.target().realize(noise.brownian(k).back());
            EXPECT_EQ(Vector(ens.x.at(k, s.p.grid().steps())), eta);
            EXPECT_EQ(Vector(ens.y.at(k, 0)), Vector(ens.y.at(0, 0)));
            EXPECT_LE((s.p.manifold().F * Vector(ens.x.at(k, 0)) - s.p.manifold().b).norm(), 1e-10);
        }
    }
}

TEST(SimulateOptimal, SameTrajectoryForSysAAndSysE) {
    const auto a = solved(sys_a(300));
    const auto e = solved(sys_e(300));
    const auto noise = generate_noise(6, 3, a.p.grid());
    const auto ea = simulate_optimal(a.mult, a.sig, a.phi, a.p, noise);
    const auto ee = simulate_optimal(e.mult, e.sig, e.phi, e.p, noise);
    EXPECT_NEAR(a.mult.lambda_star(0), 0.7, 1e-12);
    EXPECT_NEAR(e.mult.lambda_star(0), 0.4, 1e-12);
    for (int k = 0; k < 3; ++k) {
        EXPECT_LE(linalg::max_abs(ea.x.path(k) - ee.x.path(k)), 1e-10);
        EXPECT_LE(linalg::max_abs(ea.v.path(k) - ee.v.path(k)), 1e-10);
    }
}

TEST(Cost, Benchmarks) {
    const auto a = solved(sys_a(2000));
    const auto ens = simulate_optimal(a.mult, a.sig, a.phi, a.p, generate_noise(1, 10, a.p.grid()));
    const auto c = evaluate_cost(ens, a.p);
    EXPECT_NEAR(c.j_hat, 0.49, 1e-4);
    EXPECT_EQ(c.se, 0.0);
    EXPECT_FALSE(c.lagrangian_j_hat.has_value());
    EXPECT_NEAR(c.breakdown.drift, 0.49, 1e-4);
    const auto cl = evaluate_cost(ens, a.p, vec({0.7}));
    EXPECT_NEAR(*cl.lagrangian_j_hat, 0.91, 1e-4);
    const auto c0 = evaluate_cost(ens, a.p, vec({0.0}));
    EXPECT_EQ(*c0.lagrangian_j_hat, c0.j_hat);

    const auto sc = solved(sys_c(200));
    const auto ec = simulate_optimal(sc.mult, sc.sig, sc.phi, sc.p, generate_noise(1, 10, sc.p.grid()));
    EXPECT_EQ(evaluate_cost(ec, sc.p).j_hat, 0.0);
}

TEST(Cost, NonNegativeWithPositiveWeights) {
    for (const auto& bp : reachable_benchmarks(100)) {
        const auto s = solved(bp);
        const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, generate_noise(7, 30, s.p.grid()));
        const auto c = evaluate_cost(ens, s.p);
        EXPECT_GE(c.j_hat, 0.0);
        EXPECT_GE(c.se, 0.0);
    }
}

TEST(Cost, SysAClosedFormOverHorizon) {
    // (eta - b)^2 / (T - t)
    auto bp = sys_a(1000, 0.5, 2.5);
    const auto s = solved(bp);
    const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, generate_noise(1, 2, s.p.grid()));
    EXPECT_NEAR(evaluate_cost(ens, s.p).j_hat, 0.49 / 2.0, 1e-4);
}

TEST(ForwardConsistency, ExactCases) {
    for (const auto& bp : {sys_a(1000), sys_c(1000)}) {
        const auto s = solved(bp);
        const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, generate_noise(8, 20, s.p.grid()));
        EXPECT_LE(forward_consistency_check(ens, s.p), 1e-12);
    }
}

TEST(ForwardConsistency, ConvergesOnK1Benchmark) {
    const auto base = generate_noise(20240917, 200, TimeGrid(0.0, 1.0, 512));
    double prev = INFINITY;
    for (int steps : {64, 128, 256, 512}) {
        const auto s = solved(sys_b(steps));
        const auto noise = base.coarsened(512 / steps);
        const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise);
        const double dev = forward_consistency_check(ens, s.p);
        EXPECT_LT(dev, prev) << steps;
        prev = dev;
    }
}

TEST(Stationarity, AllBenchmarks) {
    for (const auto& bp : reachable_benchmarks(200)) {
        const auto s = solved(bp);
        const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, generate_noise(9, 20, s.p.grid()));
        const auto r = stationarity_check(ens, s.mult, s.p);
        EXPECT_LE(r.r1, 1e-14);
        EXPECT_LE(r.r2, 1e-10);
    }
    const auto e = solved(sys_e(200));
    const auto ens = simulate_optimal(e.mult, e.sig, e.phi, e.p, generate_noise(9, 2, e.p.grid()));
    EXPECT_NEAR(ens.y.at(0, 0)(0, 0), 0.7, 1e-12);
}

TEST(Summary, MatchesMaterializedEnsemble) {
    const auto s = solved(sys_k1_weighted(100));
    const auto noise = generate_noise(10, 64, s.p.grid());
    const auto ens = simulate_optimal(s.mult, s.sig, s.phi, s.p, noise);
    const auto sum = summarize_optimal(s.mult, s.sig, s.phi, s.p, noise, 3);
    const auto cost = evaluate_cost(ens, s.p, s.mult.lambda_star);
    EXPECT_EQ(sum.cost.j_hat, cost.j_hat);
    EXPECT_EQ(sum.cost.se, cost.se);
    EXPECT_EQ(*sum.cost.lagrangian_j_hat, *cost.lagrangian_j_hat);
    EXPECT_EQ(sum.forward_consistency, forward_consistency_check(ens, s.p));
    const auto st = stationarity_check(ens, s.mult, s.p);
    EXPECT_EQ(sum.stationarity.r1, st.r1);
    EXPECT_EQ(sum.stationarity.r2, st.r2);
    EXPECT_EQ(sum.terminal_error, 0.0);
}

TEST(Perturbation, ResponseSolvesOde) {
    auto bp = sys_f(400);
    bp.A = cst(mat({{0.0, 1.0}, {-1.0, 0.0}}), bp.grid);
    const auto p = validate_problem(bp, {});
    const auto w = CoeffPath::constant(vec({1.0, 0.0}), p.grid().nodes());
    const Matrix x = perturbation_response(w, p);
    // x' = A x + (1, 0), x(1) = 0 -> x(s) = (sin(s - 1), cos(s - 1) - 1).
    for (int i = 0; i < p.grid().nodes(); ++i) {
        const double s = p.grid().node(i);
        EXPECT_NEAR(x(0, i), std::sin(s - 1.0), 1e-12);
        EXPECT_NEAR(x(1, i), std::cos(s - 1.0) - 1.0, 1e-12);
    }
}

TEST(Perturbation, SysAConstantDirection) {
    const auto s = solved(sys_a(1000));
    const auto noise = generate_noise(1, 20, s.p.grid());
    const std::vector<CoeffPath> dirs{CoeffPath::constant(vec({1.0}), s.p.grid().nodes()),
                                      CoeffPath::zeros(1, 1, s.p.grid().nodes())};
    const auto r = perturbation_optimality_check(s.mult, s.sig, s.phi, s.p, noise, dirs, 0.1);
    EXPECT_NEAR(r[0].delta_j, 0.01, 1e-4);
    EXPECT_LE(std::abs(r[0].linear_term), 1e-6);
    EXPECT_EQ(r[1].delta_j, 0.0);
    EXPECT_EQ(r[1].linear_term, 0.0);
}

TEST(Perturbation, RandomDirectionsAllBenchmarks) {
    for (const auto& bp : reachable_benchmarks(100)) {
        const auto s = solved(bp);
        const auto noise = generate_noise(2, 500, s.p.grid());
        const auto dirs = random_directions(20, 99, s.p.grid(), s.p.L().cols());
        const auto r = perturbation_optimality_check(s.mult, s.sig, s.phi, s.p, noise, dirs, 0.05, 2);
        for (const auto& d : r) {
            EXPECT_GE(d.delta_j, -4.0 * d.se);
            EXPECT_LE(std::abs(d.linear_term), 4.0 * d.linear_se + 1e-8);
        }
    }
}

TEST(Perturbation, MatchesDirectCostEvaluation) {
    auto bp = sys_k1_weighted(120);
    bp.weights.G = Matrix::Constant(1, 1, 0.7);
    const auto s = solved(bp);
    const auto noise = generate_noise(8, 6, s.p.grid());
    const auto dirs = random_directions(4, 21, s.p.grid(), s.p.L().cols());
    const double eps = 0.2;
    const auto r = perturbation_optimality_check(s.mult, s.sig, s.phi, s.p, noise, dirs, eps);
    const OptimalPathSimulator sim(s.mult, s.sig, s.phi, s.p);
    const std::optional<Vector> lam = s.mult.lambda_star;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        const Matrix xt = perturbation_response(dirs[d], s.p);
        Matrix w(1, s.p.grid().nodes());
        for (int i = 0; i < s.p.grid().nodes(); ++i) w.col(i) = dirs[d][i];
        double delta = 0.0, lin = 0.0;
        for (int k = 0; k < noise.paths(); ++k) {
            const auto path = sim.simulate(noise.increments(k));
            const double j0 = total(path_cost(path.x, path.z, path.v, s.p, lam), true);
            const double jp = total(path_cost(path.x + eps * xt, path.z, path.v + eps * w, s.p, lam), true);
            const double jm = total(path_cost(path.x - eps * xt, path.z, path.v - eps * w, s.p, lam), true);
            delta += (jp - j0) / noise.paths();
            lin += (jp - jm) / (2.0 * eps) / noise.paths();
        }
        EXPECT_NEAR(r[d].delta_j, delta, 1e-12 * (1.0 + std::abs(delta)));
        EXPECT_NEAR(r[d].linear_term, lin, 1e-10 * (1.0 + std::abs(lin)));
    }
}

TEST(Perturbation, DirectionsAreSeededAndVaried) {
    const TimeGrid g(0.0, 1.0, 64);
    const auto a = random_directions(6, 5, g, 2);
    const auto b = random_directions(6, 5, g, 2);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t d = 0; d < a.size(); ++d) {
        EXPECT_EQ(a[d].values(), b[d].values());
        EXPECT_EQ(a[d].rows(), 2);
        EXPECT_EQ(a[d].nodes(), 65);
    }
    for (int i = 0; i < 65; ++i) EXPECT_EQ(std::abs(a[1][i](0, 0)), 1.0);
    EXPECT_FALSE(a[0].is_constant());
    EXPECT_NE(a[0].values(), random_directions(6, 6, g, 2)[0].values());
}

TEST(Transfer, MinimumEnergyProblem) {
    auto base = sys_k1_weighted(200);
    base.weights.G = Matrix::Constant(1, 1, 3.0);
    const auto t = transfer_problem(base, vec({0.3}));
    EXPECT_EQ(t.weights.G(0, 0), 0.0);
    EXPECT_EQ(t.weights.Q[0](0, 0), 0.0);
    EXPECT_EQ(t.weights.N[0](0, 0), 1.0);
    EXPECT_EQ(t.manifold.F, Matrix::Identity(1, 1));
    auto a = sys_a(500);
    const auto s = solved(transfer_problem(a, vec({0.3})));
    EXPECT_NEAR(s.mult.lambda_star(0), 0.7, 1e-12);
    EXPECT_THROW((void)transfer_problem(a, vec({0.3, 0.1})), Error);
}
