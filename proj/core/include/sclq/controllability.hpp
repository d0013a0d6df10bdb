#pragma once

#include "sclq/grid.hpp"
#include "sclq/monte_carlo.hpp"
#include "sclq/problem.hpp"
#include "sclq/riccati.hpp"

namespace sclq {

/// Coefficients of the auxiliary (hat) system whose Gramian over [t, T] is Sigma(t).
struct HatCoefficients {
    CoeffPath A;  // A + Sigma Q
    CoeffPath K;  // K (I + Sigma R)^{-1}
    CoeffPath L;  // [L N^{-1/2} | -Sigma Q^{1/2} | K (I + Sigma R)^{-1} Sigma R^{1/2}]
};

struct ReachabilityResult {
    bool reachable = false;
    Vector xi;
    double residual = 0.0;
    double tolerance = 0.0;  // absolute threshold the residual was held to
    double margin = 0.0;     // lambda_min(Sigma(t))
};

[[nodiscard]] HatCoefficients hat_coefficients(const SigmaPath& sig, const ValidatedProblem& p);

/// lambda_min(Sigma(t)); positive iff exactly controllable on [t, T].
[[nodiscard]] double exact_controllability_margin(const SigmaPath& sig, double t);

/// Minimal-norm least squares for Sigma(t) xi = x0 + a(t). Reachable iff the
/// residual is at most tol * (1 + |rhs|).
[[nodiscard]] ReachabilityResult reachability_solve(const Vector& x0, const SigmaPath& sig, const PhiCoeffs& phi,
                                                    double t, double tol = 1e-8);

/// Minimal-norm least squares for F Sigma(t) xi = b + F a(t).
[[nodiscard]] ReachabilityResult manifold_reachability_solve(const Matrix& F, const Vector& b, const SigmaPath& sig,
                                                             const PhiCoeffs& phi, double t, double tol = 1e-8);

struct IdentityCheck {
    double residual = 0.0;     // |lhs - rhs| / (1 + |Psi xi|)
    double combined_se = 0.0;  // same scaling
    Vector lhs;                // -E int Phi Lhat v ds with v = -Lhat^T Phi^T xi
    Vector rhs;                // Psi_hat xi
};

/// Monte Carlo check that the candidate control v(s) = -Lhat^T Phi(t0,s)^T xi
/// moves the hat system by Psi(t0,t1) xi. Both sides use the same paths.
[[nodiscard]] IdentityCheck candidate_identity_check(const Vector& xi, const HatCoefficients& hat,
                                                     const NoiseEnsemble& noise, double t0, double t1,
                                                     int workers = 1);

struct GramianCheck {
    GramianEstimate estimate;
    Matrix sigma;
    double max_z_score = 0.0;
};

/// Hat-system Gramian over [t, T] against Sigma(t). Entries with zero standard
/// error are scored against an absolute floor of 1e-12 (1 + |Sigma_ij|).
[[nodiscard]] GramianCheck gramian_riccati_check(const HatCoefficients& hat, const SigmaPath& sig,
                                                 const NoiseEnsemble& noise, double t, int workers = 1);

}  // namespace sclq
