#include "sclq/random.hpp"

#include "sclq/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sclq {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

// Uniform in (0, 1) from 64 random bits, 53-bit resolution.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto r = Philox4x32::apply(ctr, key);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

NoiseEnsemble::NoiseEnsemble(std::uint64_t seed, int paths, TimeGrid grid)
    : seed_(seed), paths_(paths), base_(grid), grid_(grid) {
    if (paths < 1) raise(ErrorKind::InvalidConfig, "noise ensemble needs at least one path");
}

NoiseEnsemble NoiseEnsemble::coarsened(int factor) const {
    NoiseEnsemble out = *this;
    out.grid_ = grid_.coarsened(factor);
    out.factor_ = factor_ * factor;
    return out;
}

void NoiseEnsemble::fill_increments(int p, std::span<double> out) const {
    if (p < 0 || p >= paths_) raise(ErrorKind::DimensionMismatch, "path index " + std::to_string(p) + " out of range");
    if (static_cast<int>(out.size()) != grid_.steps()) {
        raise(ErrorKind::DimensionMismatch, "increment buffer has wrong length");
    }
    const double scale = std::sqrt(base_.step());
    const auto stream = static_cast<std::uint64_t>(p);
    std::array<double, 2> pair{};
    int j = 0;  // fine step index
    for (std::size_t i = 0; i < out.size(); ++i) {
        double sum = 0.0;
        for (int r = 0; r < factor_; ++r, ++j) {
            if ((j & 1) == 0) pair = normal_pair(seed_, stream, static_cast<std::uint64_t>(j >> 1));
            sum += scale * pair[static_cast<std::size_t>(j & 1)];
        }
        out[i] = sum;
    }
}

std::vector<double> NoiseEnsemble::increments(int p) const {
    std::vector<double> out(static_cast<std::size_t>(grid_.steps()));
    fill_increments(p, out);
    return out;
}

std::vector<double> NoiseEnsemble::brownian(int p) const {
    const auto dw = increments(p);
    std::vector<double> w(dw.size() + 1, 0.0);
    for (std::size_t i = 0; i < dw.size(); ++i) w[i + 1] = w[i] + dw[i];
    return w;
}

double NoiseEnsemble::increment(int p, int i) const {
    if (i < 0 || i >= grid_.steps()) raise(ErrorKind::DimensionMismatch, "step index out of range");
    const double scale = std::sqrt(base_.step());
    double sum = 0.0;
    for (int r = 0; r < factor_; ++r) {
        const int j = i * factor_ + r;
        const auto pair = normal_pair(seed_, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(j >> 1));
        sum += scale * pair[static_cast<std::size_t>(j & 1)];
    }
    return sum;
}

NoiseEnsemble generate_noise(std::uint64_t seed, int paths, const TimeGrid& grid) {
    return NoiseEnsemble(seed, paths, grid);
}

}  // namespace sclq
