#pragma once

#include "sclq/grid.hpp"
#include "sclq/problem.hpp"
#include "sclq/random.hpp"

#include <algorithm>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace sclq {

/// Per-path, per-node matrix samples (rows x cols at every node). Vector
/// valued processes use cols == 1, in which case path(p) is rows x nodes.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, int paths, Eigen::Index rows, Eigen::Index cols);

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int paths() const noexcept { return static_cast<int>(data_.size()); }
    [[nodiscard]] int nodes() const noexcept { return grid_.nodes(); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return rows_; }
    [[nodiscard]] Eigen::Index cols() const noexcept { return cols_; }

    [[nodiscard]] Eigen::Map<Matrix> at(int p, int i) {
        return {data_[static_cast<std::size_t>(p)].col(i).data(), rows_, cols_};
    }
    [[nodiscard]] Eigen::Map<const Matrix> at(int p, int i) const {
        return {data_[static_cast<std::size_t>(p)].col(i).data(), rows_, cols_};
    }
    /// Column i holds the vectorized (column-major) node value.
    [[nodiscard]] Matrix& path(int p) { return data_[static_cast<std::size_t>(p)]; }
    [[nodiscard]] const Matrix& path(int p) const { return data_[static_cast<std::size_t>(p)]; }

private:
    TimeGrid grid_;
    Eigen::Index rows_;
    Eigen::Index cols_;
    std::vector<Matrix> data_;
};

/// Runs fn(p) for p in [0, count) on `workers` threads with a static
/// partition. If any call throws, the exception from the lowest path index
/// is rethrown.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int p = 0; p < count; ++p) fn(p);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<int> error_index(static_cast<std::size_t>(workers), count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
            const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
            for (int p = begin; p < end; ++p) {
                try {
                    fn(p);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                    error_index[static_cast<std::size_t>(w)] = p;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    int first = count;
    std::exception_ptr err;
    for (std::size_t w = 0; w < errors.size(); ++w) {
        if (errors[w] && error_index[w] < first) {
            first = error_index[w];
            err = errors[w];
        }
    }
    if (err) std::rethrow_exception(err);
}

struct SampleMean {
    Matrix mean;
    Matrix se;  // standard error of the mean, entrywise
};

/// Mean and standard error over samples, reduced in path-index order by
/// pairwise summation of deviations from the first sample. Identical samples
/// give exactly that sample as the mean and a zero standard error.
[[nodiscard]] SampleMean sample_mean(std::span<const Matrix> samples);
[[nodiscard]] SampleMean sample_mean(std::span<const double> samples);

/// dX = (alpha X + gamma) ds + (kappa X + rho) dW, X of shape rows x cols.
/// Empty coefficient paths are treated as zero.
struct LinearSde {
    CoeffPath alpha;
    CoeffPath gamma;
    CoeffPath kappa;
    CoeffPath rho;
};

/// Left-point Euler scheme X_{i+1} = X_i + drift_i h + diffusion_i dW_i on the
/// noise grid. NonFinite if a state overflows.
[[nodiscard]] PathEnsemble euler_linear_sde(const LinearSde& sde, const Matrix& init, const NoiseEnsemble& noise,
                                            int workers = 1);
[[nodiscard]] PathEnsemble euler_linear_sde(const LinearSde& sde, const std::vector<Matrix>& init_per_path,
                                            const NoiseEnsemble& noise, int workers = 1);

enum class FundamentalKind { Gamma, Phi, Pi };

/// Solutions of dX = -X c1 ds - X c2 dW, X(s_0) = I, per path.
class FundamentalEnsemble {
public:
    FundamentalEnsemble(FundamentalKind kind, PathEnsemble values, CoeffPath drift, CoeffPath diffusion);

    [[nodiscard]] FundamentalKind kind() const noexcept { return kind_; }
    [[nodiscard]] const PathEnsemble& values() const noexcept { return values_; }
    [[nodiscard]] const CoeffPath& drift() const noexcept { return drift_; }
    [[nodiscard]] const CoeffPath& diffusion() const noexcept { return diffusion_; }

    /// X(s_{i0})^{-1} X(s_i) for i = i0..steps, via an LU factorization of
    /// X(s_{i0}). Singular (with the path index) if X(s_{i0}) is singular.
    [[nodiscard]] std::vector<Matrix> relative(int p, int i0) const;

private:
    FundamentalKind kind_;
    PathEnsemble values_;
    CoeffPath drift_;
    CoeffPath diffusion_;
};

[[nodiscard]] FundamentalEnsemble fundamental_matrix(FundamentalKind kind, const CoeffPath& coeff1,
                                                     const CoeffPath& coeff2, const NoiseEnsemble& noise,
                                                     int workers = 1);

struct GramianEstimate {
    Matrix psi_hat;
    Matrix se;
    double t0 = 0.0;
    double t1 = 0.0;
    int paths = 0;
};

/// Monte Carlo estimate of E sum_i h (X(t0,s_i) Lhat_i)(X(t0,s_i) Lhat_i)^T over
/// [t0, t1) for X the fundamental matrix of (drift_coeff, diff_coeff).
/// X(t0, .) is propagated from the identity at t0; in the left-point scheme
/// this equals X(t0)^{-1} X(.) exactly.
[[nodiscard]] GramianEstimate estimate_gramian(double t0, double t1, const CoeffPath& drift_coeff,
                                               const CoeffPath& diff_coeff, const CoeffPath& lhat,
                                               const NoiseEnsemble& noise, int workers = 1);

struct TerminalRepresentation {
    Vector estimate;
    Vector se;
};

/// Monte Carlo value of E[Gamma(t,T) eta - int_t^T Gamma(t,s) f(s) ds] at the
/// start node, with dGamma = -Gamma A ds - Gamma C dW and eta = c0 + c1 W(T).
/// An empty `f` means f = 0.
[[nodiscard]] TerminalRepresentation represent_terminal_expectation(const AffineTarget& eta, const CoeffPath& f,
                                                                    const CoeffPath& A, const CoeffPath& C,
                                                                    const NoiseEnsemble& noise, int workers = 1);

}  // namespace sclq
