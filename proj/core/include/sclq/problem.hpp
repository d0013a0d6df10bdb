#pragma once

#include "sclq/grid.hpp"

#include <cstdint>
#include <optional>

namespace sclq {

/// Quadratic cost weights. G weighs the initial state, Q the state, R the
/// diffusion control z and N the drift control v.
struct Weights {
    Matrix G;
    CoeffPath Q;
    CoeffPath R;
    CoeffPath N;
    double delta = 1e-8;  // uniform lower bound N(s) >= delta*I
};

/// Initial-state constraint F x(t) = b (k <= n rows).
struct Manifold {
    Matrix F;
    Vector b;
};

/// Terminal target eta = c0 + c1 * W(T).
struct AffineTarget {
    Vector c0;
    Vector c1;

    [[nodiscard]] Vector realize(double terminal_brownian) const { return c0 + c1 * terminal_brownian; }
};

/// Canonical system dx = (A x + K z + L v) ds + z dW with cost weights,
/// initial manifold and affine terminal target.
struct CanonicalProblem {
    TimeGrid grid;
    CoeffPath A;
    CoeffPath K;
    CoeffPath L;
    Weights weights;
    Manifold manifold;
    AffineTarget target;

    [[nodiscard]] Eigen::Index n() const noexcept { return A.rows(); }
    /// Total control dimension m (z has n components, v has m - n).
    [[nodiscard]] Eigen::Index m() const noexcept { return A.rows() + L.cols(); }
    [[nodiscard]] Eigen::Index k() const noexcept { return manifold.F.rows(); }
};

struct SolverSettings {
    int mc_paths = 10000;
    std::uint64_t seed = 20240917;
    int ode_substeps = 1;
    int workers = 1;
    double symmetry_tol = 1e-12;
    double psd_tol = -1e-10;
    double lsq_residual_tol = 1e-8;
    double mc_sigma_mult = 4.0;
};

/// A problem that passed every dimension, positivity and grid check. Only
/// `validate_problem` constructs one; the stored weights are exactly symmetric.
class ValidatedProblem {
public:
    [[nodiscard]] const CanonicalProblem& problem() const noexcept { return problem_; }
    [[nodiscard]] const SolverSettings& settings() const noexcept { return settings_; }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return problem_.grid; }
    [[nodiscard]] const CoeffPath& A() const noexcept { return problem_.A; }
    [[nodiscard]] const CoeffPath& K() const noexcept { return problem_.K; }
    [[nodiscard]] const CoeffPath& L() const noexcept { return problem_.L; }
    [[nodiscard]] const Weights& weights() const noexcept { return problem_.weights; }
    [[nodiscard]] const Manifold& manifold() const noexcept { return problem_.manifold; }
    [[nodiscard]] const AffineTarget& target() const noexcept { return problem_.target; }
    [[nodiscard]] Eigen::Index n() const noexcept { return problem_.n(); }
    [[nodiscard]] Eigen::Index m() const noexcept { return problem_.m(); }
    [[nodiscard]] Eigen::Index k() const noexcept { return problem_.k(); }

    friend bool operator==(const ValidatedProblem& a, const ValidatedProblem& b);

private:
    ValidatedProblem(CanonicalProblem p, SolverSettings s) : problem_(std::move(p)), settings_(s) {}

    friend ValidatedProblem validate_problem(const CanonicalProblem&, const SolverSettings&);

    CanonicalProblem problem_;
    SolverSettings settings_;
};

/// Checks dimensions, finiteness, the grid, symmetry (asymmetry up to
/// symmetry_tol is symmetrized away) and G, Q, R >= 0, N >= delta*I.
/// Throws DimensionMismatch, NotPositive, BadGrid or NonFinite.
[[nodiscard]] ValidatedProblem validate_problem(const CanonicalProblem& p, const SolverSettings& s);

/// Re-validation is the identity.
[[nodiscard]] ValidatedProblem validate_problem(const ValidatedProblem& p);

/// The same piecewise-constant problem on a grid with factor times more
/// steps: node i of the original supplies nodes factor*i .. factor*i + factor - 1.
[[nodiscard]] CanonicalProblem refined(const CanonicalProblem& p, int factor);
[[nodiscard]] CoeffPath refined(const CoeffPath& c, int factor);

/// Check settings are usable (positive counts and sensible tolerances).
void validate_settings(const SolverSettings& s);

}  // namespace sclq
