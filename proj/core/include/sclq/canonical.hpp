#pragma once

#include "sclq/grid.hpp"

#include <vector>

namespace sclq {

class PathEnsemble;

/// Raw system dx = (A x + B u) ds + (C x + D u) dW with u in R^m, m > n.
struct RawSystem {
    TimeGrid grid;
    CoeffPath A;
    CoeffPath B;
    CoeffPath C;
    CoeffPath D;
    double delta_D = 1e-8;  // required lower bound on D D^T
};

/// Result of reducing a raw system to diffusion coefficient (I, 0).
struct TransformResult {
    TimeGrid grid;
    CoeffPath M;      // m x m, D M = (I_n, 0) at each node
    CoeffPath Abar;   // A - K C
    CoeffPath K;      // first n columns of B M
    CoeffPath L;      // remaining m - n columns of B M
    std::vector<double> cond_M;
};

/// min over nodes of lambda_min(D D^T). DimensionMismatch if D is not wide.
[[nodiscard]] double check_nondegeneracy(const CoeffPath& D);

/// Per node M = [D^T (D D^T)^{-1} | Z] with Z an orthonormal kernel basis of D.
/// Each kernel column is oriented so its first nonzero entry is positive.
/// Throws Singular if D D^T is numerically singular at some node.
[[nodiscard]] CoeffPath build_m(const CoeffPath& D);

/// Validates the raw system (dimensions, D D^T >= delta_D I) and returns the
/// canonical coefficients. NotPositive if the nondegeneracy bound fails.
[[nodiscard]] TransformResult to_canonical(const RawSystem& raw);

/// u(s) = M(s) * [z(s) - C(s) xbar(s); v(s)] per path and node.
[[nodiscard]] PathEnsemble lift_control(const PathEnsemble& z, const PathEnsemble& v, const PathEnsemble& xbar,
                                        const CoeffPath& M, const CoeffPath& C);

}  // namespace sclq
