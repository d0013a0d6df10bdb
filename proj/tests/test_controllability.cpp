#include "sclq/controllability.hpp"
#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"
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
};

Solved solved(const CanonicalProblem& bp) {
    auto p = validate_problem(bp, {});
    auto sig = solve_sigma(p);
    auto phi = solve_target_odes(sig, p.target(), p);
    return {std::move(p), std::move(sig), std::move(phi)};
}

CanonicalProblem weighted_2d(int steps) {
    auto p = sys_f(steps);
    p.K = cst(mat({{0.5, 0.0}, {0.2, 1.0}}), p.grid);
    p.L = cst(mat({{1.0}, {0.3}}), p.grid);
    p.weights.N = cst(Matrix::Constant(1, 1, 2.0), p.grid);
    p.weights.Q = cst(mat({{0.4, 0.1}, {0.1, 0.2}}), p.grid);
    p.weights.R = cst(mat({{0.3, 0.0}, {0.0, 0.1}}), p.grid);
    return p;
}

}  // namespace

TEST(HatCoefficients, ZeroWeightsReduceToOriginal) {
    auto bp = weighted_2d(20);
    bp.weights.Q = cst(Matrix::Zero(2, 2), bp.grid);
    bp.weights.R = cst(Matrix::Zero(2, 2), bp.grid);
    const auto s = solved(bp);
    const auto hat = hat_coefficients(s.sig, s.p);
    for (int i = 0; i < s.p.grid().nodes(); ++i) {
        EXPECT_EQ(hat.A[i], s.p.A()[i]);
        EXPECT_LE(linalg::max_abs(hat.K[i] - s.p.K()[i]), 1e-15);
        EXPECT_LE(linalg::max_abs(hat.L[i].leftCols(1) - s.p.L()[i] / std::sqrt(2.0)), 1e-15);
        EXPECT_EQ(linalg::max_abs(hat.L[i].rightCols(4)), 0.0);
    }
}

TEST(HatCoefficients, SysB) {
    const auto s = solved(sys_b(100));
    const auto hat = hat_coefficients(s.sig, s.p);
    EXPECT_EQ(hat.A[0](0, 0), 0.0);
    EXPECT_EQ(hat.K[0](0, 0), 1.0);
    EXPECT_EQ(hat.L[0], mat({{1.0, 0.0, 0.0}}));
}

TEST(HatCoefficients, Dimensions) {
    const auto s = solved(weighted_2d(10));
    const auto hat = hat_coefficients(s.sig, s.p);
    EXPECT_EQ(s.p.m(), 3);
    EXPECT_EQ(hat.L.rows(), 2);
    EXPECT_EQ(hat.L.cols(), 5);
    EXPECT_EQ(hat.A.rows(), 2);
    EXPECT_EQ(hat.K.cols(), 2);
}

TEST(HatCoefficients, BlocksMatchDefinition) {
    const auto s = solved(weighted_2d(10));
    const auto hat = hat_coefficients(s.sig, s.p);
    const int i = 3;
    const Matrix S = s.sig[i];
    const Matrix Q = s.p.weights().Q[i], R = s.p.weights().R[i];
    const Matrix inv = (Matrix::Identity(2, 2) + S * R).inverse();
    EXPECT_LE(linalg::max_abs(hat.A[i] - (s.p.A()[i] + S * Q)), 1e-15);
    EXPECT_LE(linalg::max_abs(hat.K[i] - s.p.K()[i] * inv), 1e-14);
    const Matrix sq = linalg::psd_sqrt(Q);
    EXPECT_LE(linalg::max_abs(sq * sq - Q), 1e-14);
    EXPECT_LE(linalg::max_abs(hat.L[i].middleCols(1, 2) + S * sq), 1e-14);
    EXPECT_LE(linalg::max_abs(hat.L[i].rightCols(2) - s.p.K()[i] * inv * S * linalg::psd_sqrt(R)), 1e-14);
}

TEST(Margin, Benchmarks) {
    const auto a = solved(sys_a(100));
    EXPECT_NEAR(exact_controllability_margin(a.sig, 0.0), 1.0, 1e-12);
    EXPECT_EQ(exact_controllability_margin(a.sig, 1.0), 0.0);
    const auto g = solved(sys_g(100));
    EXPECT_EQ(exact_controllability_margin(g.sig, 0.0), 0.0);
    EXPECT_LE(linalg::max_abs(g.sig[0] - mat({{1.0, 0.0}, {0.0, 0.0}})), 1e-12);
}

TEST(Margin, NonincreasingInTime) {
    for (const auto& bp : {sys_a(200), sys_b(200), sys_g(200), weighted_2d(200)}) {
        const auto s = solved(bp);
        double prev = INFINITY;
        for (int i = 0; i < s.p.grid().nodes(); ++i) {
            const double m = exact_controllability_margin(s.sig, s.p.grid().node(i));
            EXPECT_LE(m, prev + 1e-10);
            prev = m;
        }
    }
}

TEST(Reachability, SysA) {
    const auto s = solved(sys_a(100));
    const auto r = reachability_solve(vec({0.3}), s.sig, s.phi, 0.0);
    EXPECT_TRUE(r.reachable);
    EXPECT_NEAR(r.xi(0), -0.7, 1e-12);
    EXPECT_NEAR(r.margin, 1.0, 1e-12);
    const auto z = reachability_solve(-s.phi.a.front(), s.sig, s.phi, 0.0);
    EXPECT_TRUE(z.reachable);
    EXPECT_EQ(z.xi(0), 0.0);
}

TEST(Reachability, SysGUnreachable) {
    const auto s = solved(sys_g(100));
    const auto r = reachability_solve(vec({0.0, 0.0}), s.sig, s.phi, 0.0);
    EXPECT_FALSE(r.reachable);
    EXPECT_NEAR(r.residual, 1.0, 1e-12);
    EXPECT_NEAR(r.xi(0), -1.0, 1e-12);
    EXPECT_EQ(r.xi(1), 0.0);
}

TEST(ManifoldReachability, Examples) {
    const auto a = solved(sys_a(100));
    const auto r = manifold_reachability_solve(mat({{1.0}}), vec({0.3}), a.sig, a.phi, 0.0);
    EXPECT_TRUE(r.reachable);
    EXPECT_NEAR(r.xi(0), -0.7, 1e-12);
    const auto f = solved(sys_f(100));
    const auto rf = manifold_reachability_solve(f.p.manifold().F, f.p.manifold().b, f.sig, f.phi, 0.0);
    EXPECT_TRUE(rf.reachable);
    EXPECT_NEAR(rf.xi(0), -1.0, 1e-12);
    EXPECT_NEAR(rf.xi(1), 0.0, 1e-12);
    const Matrix F = mat({{1.0, 2.0}});
    const Vector b = -F * f.phi.a.front();
    const auto r0 = manifold_reachability_solve(F, b, f.sig, f.phi, 0.0);
    EXPECT_TRUE(r0.reachable);
    EXPECT_LE(r0.xi.norm(), 1e-15);
}

TEST(Reachability, EquivalentToManifoldWithIdentity) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const auto s = solved(weighted_2d(100));
    for (int trial = 0; trial < 50; ++trial) {
        const Vector x0 = vec({nd(rng), nd(rng)});
        const auto full = reachability_solve(x0, s.sig, s.phi, 0.0);
        const auto man = manifold_reachability_solve(Matrix::Identity(2, 2), x0, s.sig, s.phi, 0.0);
        ASSERT_TRUE(full.reachable);
        EXPECT_TRUE(man.reachable);
        EXPECT_LE((full.xi - man.xi).norm(), 1e-10);
        EXPECT_LE(full.residual, 1e-8 * (1.0 + (x0 + s.phi.a.front()).norm()));
    }
}

TEST(Reachability, PositiveMarginMeansEverythingReachable) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    for (const auto& bp : {sys_f(100), weighted_2d(100)}) {
        const auto s = solved(bp);
        ASSERT_GT(exact_controllability_margin(s.sig, 0.0), 0.0);
        for (int trial = 0; trial < 50; ++trial) {
            const auto r = reachability_solve(vec({10 * nd(rng), 10 * nd(rng)}), s.sig, s.phi, 0.0);
            EXPECT_TRUE(r.reachable);
        }
    }
}

TEST(IdentityCheck, ZeroCandidate) {
    const auto s = solved(sys_b(50));
    const auto hat = hat_coefficients(s.sig, s.p);
    const auto r = candidate_identity_check(vec({0.0}), hat, generate_noise(1, 20, s.p.grid()), 0.0, 1.0);
    EXPECT_EQ(r.residual, 0.0);
}

TEST(IdentityCheck, SysADeterministic) {
    const auto s = solved(sys_a(1000));
    const auto hat = hat_coefficients(s.sig, s.p);
    const auto r = candidate_identity_check(vec({-0.7}), hat, generate_noise(1, 10, s.p.grid()), 0.0, 1.0);
    EXPECT_LE(r.residual, 1e-12);
    EXPECT_EQ(r.combined_se, 0.0);
}

TEST(IdentityCheck, SysBMonteCarlo) {
    const auto s = solved(sys_b(500));
    const auto hat = hat_coefficients(s.sig, s.p);
    const auto r = candidate_identity_check(vec({0.8}), hat, generate_noise(20240917, 10000, s.p.grid()), 0.0, 1.0);
    EXPECT_GT(r.combined_se, 0.0);
    EXPECT_LE(r.residual, 4.0 * r.combined_se);
}

TEST(GramianCheck, HatGramianMatchesSigma) {
    for (const auto& bp : {sys_a(500), sys_b(500), sys_g(500), weighted_2d(500)}) {
        const auto s = solved(bp);
        const auto hat = hat_coefficients(s.sig, s.p);
        const auto chk = gramian_riccati_check(hat, s.sig, generate_noise(20240917, 4000, s.p.grid()), 0.0);
        EXPECT_LE(chk.max_z_score, 4.0) << chk.estimate.psi_hat << "\nvs\n" << chk.sigma;
    }
}
