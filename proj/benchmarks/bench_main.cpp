#include "sclq/controllability.hpp"
#include "sclq/monte_carlo.hpp"
#include "sclq/random.hpp"
#include "sclq/riccati.hpp"
#include "sclq/solver.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace sclq;

namespace {

CoeffPath cst(const Matrix& m, const TimeGrid& g) { return CoeffPath::constant(m, g.nodes()); }

// Scalar system with state-dependent diffusion and nonzero weights.
CanonicalProblem scalar_k1(int steps) {
    const TimeGrid g(0.0, 1.0, steps);
    const Matrix one = Matrix::Ones(1, 1);
    Vector b(1), c0(1), c1(1);
    b << 0.3;
    c0 << 1.0;
    c1 << 0.5;
    return {g,
            cst(Matrix::Zero(1, 1), g),
            cst(one, g),
            cst(one, g),
            Weights{Matrix::Zero(1, 1), cst(0.5 * one, g), cst(0.25 * one, g), cst(one, g), 1e-8},
            Manifold{one, b},
            AffineTarget{c0, c1}};
}

CanonicalProblem coupled(int n, int steps) {
    const TimeGrid g(0.0, 1.0, steps);
    Matrix A = Matrix::Zero(n, n), K = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
    K.diagonal().setConstant(0.2);
    const Matrix L = Matrix::Identity(n, n);
    const Matrix I = Matrix::Identity(n, n);
    return {g,
            cst(A, g),
            cst(K, g),
            cst(L, g),
            Weights{Matrix::Zero(n, n), cst(0.1 * I, g), cst(0.1 * I, g), cst(I, g), 1e-8},
            Manifold{Matrix::Identity(1, n), Vector::Zero(1)},
            AffineTarget{Vector::Ones(n), Vector::Zero(n)}};
}

void BM_SolveSigma(benchmark::State& state) {
    const auto p = validate_problem(coupled(static_cast<int>(state.range(0)), 2000), {});
    for (auto _ : state) benchmark::DoNotOptimize(solve_sigma(p));
}
BENCHMARK(BM_SolveSigma)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_FillIncrements(benchmark::State& state) {
    const TimeGrid g(0.0, 1.0, static_cast<int>(state.range(0)));
    const auto noise = generate_noise(1, 64, g);
    std::vector<double> buf(static_cast<std::size_t>(g.steps()));
    int p = 0;
    for (auto _ : state) {
        noise.fill_increments(p++ % 64, buf);
        benchmark::DoNotOptimize(buf.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillIncrements)->Arg(2000)->Arg(16000);

void BM_CoarsenedIncrements(benchmark::State& state) {
    const auto noise = generate_noise(1, 64, TimeGrid(0.0, 1.0, 16000)).coarsened(8);
    std::vector<double> buf(2000);
    int p = 0;
    for (auto _ : state) {
        noise.fill_increments(p++ % 64, buf);
        benchmark::DoNotOptimize(buf.data());
    }
}
BENCHMARK(BM_CoarsenedIncrements);

void BM_Gramian(benchmark::State& state) {
    const auto p = validate_problem(scalar_k1(2000), {});
    const auto sig = solve_sigma(p);
    const auto hat = hat_coefficients(sig, p);
    const auto noise = generate_noise(3, static_cast<int>(state.range(0)), p.grid());
    for (auto _ : state) benchmark::DoNotOptimize(estimate_gramian(0.0, 1.0, hat.A, hat.K, hat.L, noise));
}
BENCHMARK(BM_Gramian)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SummarizeOptimal(benchmark::State& state) {
    const auto p = validate_problem(scalar_k1(2000), {});
    const auto sig = solve_sigma(p);
    const auto phi = solve_target_odes(sig, p.target(), p);
    const auto mult = solve_multiplier(sig, phi, p);
    const auto noise = generate_noise(4, static_cast<int>(state.range(0)), p.grid());
    for (auto _ : state) benchmark::DoNotOptimize(summarize_optimal(mult, sig, phi, p, noise));
}
BENCHMARK(BM_SummarizeOptimal)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Perturbation(benchmark::State& state) {
    const auto p = validate_problem(scalar_k1(1000), {});
    const auto sig = solve_sigma(p);
    const auto phi = solve_target_odes(sig, p.target(), p);
    const auto mult = solve_multiplier(sig, phi, p);
    const auto noise = generate_noise(5, 1000, p.grid());
    const auto dirs = random_directions(20, 5, p.grid(), 1);
    for (auto _ : state) benchmark::DoNotOptimize(perturbation_optimality_check(mult, sig, phi, p, noise, dirs, 0.05));
}
BENCHMARK(BM_Perturbation)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
