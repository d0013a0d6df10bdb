#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace sclq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Uniform grid s_i = t_start + i*h, i = 0..steps, on [t_start, t_end].
class TimeGrid {
public:
    /// Throws BadGrid unless t_start < t_end and steps >= 2.
    TimeGrid(double t_start, double t_end, int steps);

    [[nodiscard]] double t_start() const noexcept { return t_start_; }
    [[nodiscard]] double t_end() const noexcept { return t_end_; }
    [[nodiscard]] int steps() const noexcept { return steps_; }
    [[nodiscard]] int nodes() const noexcept { return steps_ + 1; }
    [[nodiscard]] double step() const noexcept { return h_; }
    [[nodiscard]] double node(int i) const noexcept { return t_start_ + i * h_; }

    /// Index of the node at time `t`; BadGrid if `t` is not a node.
    [[nodiscard]] int index_of(double t) const;

    /// Same interval with steps/factor steps. BadGrid if factor does not divide.
    [[nodiscard]] TimeGrid coarsened(int factor) const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double t_start_;
    double t_end_;
    int steps_;
    double h_;
};

/// Time-dependent matrix coefficient sampled at every grid node. The value
/// at node i holds on [s_i, s_{i+1}).
class CoeffPath {
public:
    CoeffPath() = default;

    /// One matrix per node; all must share dimensions and be finite.
    explicit CoeffPath(std::vector<Matrix> values);

    [[nodiscard]] static CoeffPath constant(const Matrix& value, int nodes);
    [[nodiscard]] static CoeffPath zeros(Eigen::Index rows, Eigen::Index cols, int nodes);

    [[nodiscard]] const Matrix& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const Matrix& at(int i) const { return values_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] int nodes() const noexcept { return static_cast<int>(values_.size()); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return rows_; }
    [[nodiscard]] Eigen::Index cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] const std::vector<Matrix>& values() const noexcept { return values_; }

    /// Every node value is the same matrix.
    [[nodiscard]] bool is_constant() const;

    /// Apply `fn` to every node value (used for symmetrization).
    template <typename Fn>
    [[nodiscard]] CoeffPath map(Fn&& fn) const {
        std::vector<Matrix> out;
        out.reserve(values_.size());
        for (const auto& v : values_) out.push_back(fn(v));
        return CoeffPath(std::move(out));
    }

private:
    std::vector<Matrix> values_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
};

}  // namespace sclq
