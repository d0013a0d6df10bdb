#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <string>

namespace sclq::cli {

using Json = nlohmann::ordered_json;

/// Pretty-printed JSON with every floating-point value written with 17
/// significant digits; non-finite values become null. Arrays of scalars stay
/// on one line.
[[nodiscard]] std::string write_json(const Json& value);

[[nodiscard]] Json to_json(const Eigen::MatrixXd& m);
[[nodiscard]] Json to_json(const Eigen::VectorXd& v);

}  // namespace sclq::cli
