#include "json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace sclq::cli {

namespace {

void put_number(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);
    out += buf;
}

bool is_flat(const Json& arr) {
    for (const auto& e : arr) {
        if (e.is_structured()) return false;
    }
    return true;
}

void write(std::string& out, const Json& v, int indent) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
    switch (v.type()) {
        case Json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, val] : v.items()) {
                if (!first) out += ",\n";
                first = false;
                out += inner;
                out += Json(key).dump();
                out += ": ";
                write(out, val, indent + 2);
            }
            out += "\n" + pad + "}";
            return;
        }
        case Json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            if (is_flat(v)) {
                out += "[";
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (i) out += ", ";
                    write(out, v[i], indent);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ",\n";
                out += inner;
                write(out, v[i], indent + 2);
            }
            out += "\n" + pad + "]";
            return;
        }
        case Json::value_t::number_float:
            put_number(out, v.get<double>());
            return;
        default:
            out += v.dump();
            return;
    }
}

}  // namespace

std::string write_json(const Json& value) {
    std::string out;
    write(out, value, 0);
    out += "\n";
    return out;
}

Json to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

}  // namespace sclq::cli
