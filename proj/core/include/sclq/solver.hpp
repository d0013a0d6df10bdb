#pragma once

#include "sclq/grid.hpp"
#include "sclq/monte_carlo.hpp"
#include "sclq/problem.hpp"
#include "sclq/random.hpp"
#include "sclq/riccati.hpp"

#include <optional>
#include <span>
#include <vector>

namespace sclq {

struct MultiplierResult {
    Vector lambda_star;
    Matrix s_matrix;  // F (I + Sigma G)^{-1} Sigma F^T at the start node
    Vector rhs;       // -(F (I + Sigma G)^{-1} phi(t) + b)
    double residual = 0.0;
    double tolerance = 0.0;
    bool minimal_norm = true;
};

/// Minimal-norm solution of the multiplier equation at the start node.
/// Throws UnreachableError when the least-squares residual exceeds
/// lsq_residual_tol * (1 + |rhs|).
[[nodiscard]] MultiplierResult solve_multiplier(const SigmaPath& sig, const PhiCoeffs& phi, const ValidatedProblem& p);

/// One optimal trajectory; column i is the value at node i.
struct OptimalPath {
    Matrix y;
    Matrix x;
    Matrix z;
    Matrix v;
    std::vector<double> w;  // W(s_i)
};

/// Per-node coefficients of the adjoint SDE and the decoupling recovery,
/// precomputed once and shared read-only by all paths.
class OptimalPathSimulator {
public:
    OptimalPathSimulator(const MultiplierResult& mult, const SigmaPath& sig, const PhiCoeffs& phi,
                         const ValidatedProblem& p);

    /// Adjoint start value (I + G Sigma(t))^{-1} (F^T lambda - G phi(t)).
    [[nodiscard]] const Vector& y0() const noexcept { return y0_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }

    /// `dw` holds the grid().steps() Brownian increments of one path.
    [[nodiscard]] OptimalPath simulate(std::span<const double> dw) const;

private:
    TimeGrid grid_;
    Vector y0_;
    std::vector<Matrix> sigma_;
    std::vector<Matrix> drift_;    // A^T + Q Sigma
    std::vector<Vector> qa_;       // Q a
    std::vector<Vector> qbc_;      // Q bc
    std::vector<Matrix> diff_y_;   // (I + R Sigma)^{-1} K^T
    std::vector<Vector> diff_b_;   // (I + R Sigma)^{-1} R bc
    std::vector<Matrix> z_y_;      // (I + Sigma R)^{-1} Sigma K^T
    std::vector<Vector> z_b_;      // (I + Sigma R)^{-1} bc
    std::vector<Matrix> v_y_;      // N^{-1} L^T
    std::vector<Vector> a_;
    std::vector<Vector> bc_;
};

struct OptimalEnsemble {
    Vector lambda_star;
    PathEnsemble y;
    PathEnsemble x;
    PathEnsemble z;
    PathEnsemble v;
    NoiseEnsemble noise;
};

/// Materializes every path. For large P x M prefer OptimalPathSimulator with
/// a per-path reduction such as summarize_optimal.
[[nodiscard]] OptimalEnsemble simulate_optimal(const MultiplierResult& mult, const SigmaPath& sig,
                                               const PhiCoeffs& phi, const ValidatedProblem& p,
                                               const NoiseEnsemble& noise, int workers = 1);

struct CostBreakdown {
    double initial = 0.0;     // x(t)^T G x(t)
    double state = 0.0;       // int x^T Q x
    double diffusion = 0.0;   // int z^T R z
    double drift = 0.0;       // int v^T N v
    double multiplier = 0.0;  // 2 <F^T lambda, x(t)>
};

struct CostEstimate {
    double j_hat = 0.0;
    double se = 0.0;
    std::optional<double> lagrangian_j_hat;
    std::optional<double> lagrangian_se;
    CostBreakdown breakdown;  // path means
};

/// Cost of one path (left Riemann sums); x, z, v hold one column per node.
[[nodiscard]] CostBreakdown path_cost(const Matrix& x, const Matrix& z, const Matrix& v, const ValidatedProblem& p,
                                      const std::optional<Vector>& lambda = std::nullopt);
[[nodiscard]] double total(const CostBreakdown& c, bool with_multiplier);

[[nodiscard]] CostEstimate evaluate_cost(const PathEnsemble& x, const PathEnsemble& z, const PathEnsemble& v,
                                         const ValidatedProblem& p, const std::optional<Vector>& lambda = std::nullopt,
                                         int workers = 1);
[[nodiscard]] CostEstimate evaluate_cost(const OptimalEnsemble& ens, const ValidatedProblem& p,
                                         const std::optional<Vector>& lambda = std::nullopt, int workers = 1);

/// max over nodes of |x_forward - x| for one path, where x_forward re-runs the
/// state equation from x(t) with the path's (z, v) and increments.
[[nodiscard]] double path_forward_deviation(const Matrix& x, const Matrix& z, const Matrix& v,
                                            std::span<const double> dw, const ValidatedProblem& p);
[[nodiscard]] double forward_consistency_check(const OptimalEnsemble& ens, const ValidatedProblem& p,
                                               int workers = 1);

struct StationarityResiduals {
    double r1 = 0.0;  // max |N v - L^T y|
    double r2 = 0.0;  // max |y(t) - G x(t) - F^T lambda|
};

[[nodiscard]] StationarityResiduals stationarity_check(const OptimalEnsemble& ens, const MultiplierResult& mult,
                                                       const ValidatedProblem& p);

/// Cost, constraint and consistency statistics of the optimal solution,
/// streamed path by path so nothing of size P x M is stored.
struct OptimalSummary {
    CostEstimate cost;
    double forward_consistency = 0.0;
    StationarityResiduals stationarity;
    double manifold_error = 0.0;  // max |F x(t) - b|
    double terminal_error = 0.0;  // max |x(T) - c0 - c1 W(T)|
    Vector y0;
    Vector x0_mean;
};

[[nodiscard]] OptimalSummary summarize_optimal(const MultiplierResult& mult, const SigmaPath& sig,
                                               const PhiCoeffs& phi, const ValidatedProblem& p,
                                               const NoiseEnsemble& noise, int workers = 1);

struct PerturbationResult {
    double delta_j = 0.0;      // mean of J(v + eps w) - J(v)
    double se = 0.0;
    double linear_term = 0.0;  // mean of (J(v + eps w) - J(v - eps w)) / (2 eps)
    double linear_se = 0.0;
};

/// Deterministic state response x' = A x + L w, x(T) = 0, by backward RK4
/// with w held constant on each grid interval. Returns n x nodes.
[[nodiscard]] Matrix perturbation_response(const CoeffPath& w, const ValidatedProblem& p);

/// Lagrangian cost changes along deterministic drift-control directions w
/// ((m - n) x 1 per node), on the optimal paths of `noise`.
[[nodiscard]] std::vector<PerturbationResult> perturbation_optimality_check(
    const MultiplierResult& mult, const SigmaPath& sig, const PhiCoeffs& phi, const ValidatedProblem& p,
    const NoiseEnsemble& noise, const std::vector<CoeffPath>& directions, double eps, int workers = 1);

/// Seeded directions: even indices are cubic polynomials in normalized time,
/// odd indices are piecewise-constant +-1 controls with 2 to 8 pieces.
[[nodiscard]] std::vector<CoeffPath> random_directions(int count, std::uint64_t seed, const TimeGrid& grid,
                                                       Eigen::Index dim);

/// Minimum-energy transfer to the target from x0: Q = R = 0, G = 0, N = I,
/// F = I, b = x0.
[[nodiscard]] CanonicalProblem transfer_problem(const CanonicalProblem& base, const Vector& x0);

}  // namespace sclq
