#pragma once

#include "json_writer.hpp"

#include "sclq/canonical.hpp"
#include "sclq/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace sclq::cli {

/// Command-line values that take precedence over the config document.
struct Overrides {
    std::optional<int> paths;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> eps;
};

struct RunConfig {
    TimeGrid grid{0.0, 1.0, 2};
    std::optional<CanonicalProblem> problem;  // absent only for transform-only configs
    std::optional<RawSystem> raw;
    std::optional<TransformResult> transform;
    SolverSettings settings;
    std::optional<Vector> transfer_x0;
    double eps = 0.05;
    int directions = 20;
};

/// Parses a config document. Shape and schema problems raise InvalidConfig
/// with the offending field path (and line for syntax errors). When
/// `require_problem` is false the weights, manifold and target blocks may be
/// omitted (transform needs only the raw system).
[[nodiscard]] RunConfig parse_config(const std::string& text, const Overrides& overrides, bool require_problem = true);

[[nodiscard]] RunConfig load_config(const std::string& path, const Overrides& overrides, bool require_problem = true);

/// Resolved settings as embedded in every report.
[[nodiscard]] Json settings_json(const RunConfig& cfg);

}  // namespace sclq::cli
