#include "sclq/grid.hpp"

#include "sclq/errors.hpp"

#include <cmath>
#include <string>

namespace sclq {

TimeGrid::TimeGrid(double t_start, double t_end, int steps)
    : t_start_(t_start), t_end_(t_end), steps_(steps), h_(0.0) {
    if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_start < t_end)) {
        raise(ErrorKind::BadGrid, "need t_start < t_end, got [" + std::to_string(t_start) + ", " +
                                      std::to_string(t_end) + "]");
    }
    if (steps < 2) raise(ErrorKind::BadGrid, "need at least 2 steps, got " + std::to_string(steps));
    h_ = (t_end - t_start) / steps;
}

int TimeGrid::index_of(double t) const {
    const double k = std::round((t - t_start_) / h_);
    if (!(k >= 0.0 && k <= steps_) || std::abs(node(static_cast<int>(k)) - t) > 1e-9 * h_) {
        raise(ErrorKind::BadGrid, "time " + std::to_string(t) + " is not a grid node");
    }
    return static_cast<int>(k);
}

TimeGrid TimeGrid::coarsened(int factor) const {
    if (factor < 1 || steps_ % factor != 0) {
        raise(ErrorKind::BadGrid, "coarsening factor " + std::to_string(factor) + " does not divide " +
                                      std::to_string(steps_) + " steps");
    }
    return TimeGrid(t_start_, t_end_, steps_ / factor);
}

CoeffPath::CoeffPath(std::vector<Matrix> values) : values_(std::move(values)) {
    if (values_.empty()) return;
    rows_ = values_.front().rows();
    cols_ = values_.front().cols();
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const auto& v = values_[i];
        if (v.rows() != rows_ || v.cols() != cols_) {
            raise(ErrorKind::DimensionMismatch, "coefficient node " + std::to_string(i) + " is " +
                                                    std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                                                    ", expected " + std::to_string(rows_) + "x" +
                                                    std::to_string(cols_));
        }
        if (!v.allFinite()) raise(ErrorKind::NonFinite, "coefficient node " + std::to_string(i) + " not finite");
    }
}

CoeffPath CoeffPath::constant(const Matrix& value, int nodes) {
    return CoeffPath(std::vector<Matrix>(static_cast<std::size_t>(nodes), value));
}

CoeffPath CoeffPath::zeros(Eigen::Index rows, Eigen::Index cols, int nodes) {
    return constant(Matrix::Zero(rows, cols), nodes);
}

bool CoeffPath::is_constant() const {
    for (const auto& v : values_) {
        if (v != values_.front()) return false;
    }
    return true;
}

}  // namespace sclq
