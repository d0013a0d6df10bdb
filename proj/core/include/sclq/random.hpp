#pragma once

#include "sclq/grid.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace sclq {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
/// output is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    [[nodiscard]] static Counter apply(Counter ctr, Key key) noexcept;
};

/// Two standard normals from one Philox block via Box-Muller.
[[nodiscard]] std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

/// Brownian increments for `paths` paths on a uniform grid. Increments are
/// generated on demand from a per-path counter stream keyed by (seed, path),
/// so any subset of paths can be produced by any worker in any order with
/// bit-identical results.
///
/// A coarsened ensemble sums consecutive increments of its parent, so the
/// same Brownian paths can be sampled on nested grids.
class NoiseEnsemble {
public:
    NoiseEnsemble(std::uint64_t seed, int paths, TimeGrid grid);

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] int paths() const noexcept { return paths_; }
    /// Grid the increments live on.
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const TimeGrid& base_grid() const noexcept { return base_; }
    [[nodiscard]] int factor() const noexcept { return factor_; }

    /// Same Brownian paths on a grid with `factor` times fewer steps.
    [[nodiscard]] NoiseEnsemble coarsened(int factor) const;

    /// Write the grid().steps() increments of path p.
    void fill_increments(int p, std::span<double> out) const;
    [[nodiscard]] std::vector<double> increments(int p) const;
    /// W(s_i) for i = 0..steps with W(s_0) = 0.
    [[nodiscard]] std::vector<double> brownian(int p) const;
    /// Single increment; prefer fill_increments in loops.
    [[nodiscard]] double increment(int p, int i) const;

    friend bool operator==(const NoiseEnsemble&, const NoiseEnsemble&) = default;

private:
    std::uint64_t seed_;
    int paths_;
    TimeGrid base_;
    TimeGrid grid_;
    int factor_ = 1;
};

/// Convenience constructor matching the ensemble contract.
[[nodiscard]] NoiseEnsemble generate_noise(std::uint64_t seed, int paths, const TimeGrid& grid);

}  // namespace sclq
