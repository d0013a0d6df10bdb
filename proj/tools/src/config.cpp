#include "config.hpp"

#include "sclq/errors.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace sclq::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    raise(ErrorKind::InvalidConfig, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, val] : obj.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
            fail(join(path, key), "unknown field");
        }
    }
}

const Json& required(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) fail(join(path, key), "missing required field");
    return obj.at(key);
}

double number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

int positive_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 1 || j.get<long long>() > std::numeric_limits<int>::max()) {
        fail(path, "expected a positive integer");
    }
    return j.get<int>();
}

std::uint64_t seed_value(const Json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
    fail(path, "expected a non-negative integer");
}

Vector vector_value(const Json& j, const std::string& path) {
    if (j.is_number()) return Vector::Constant(1, number(j, path));
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], index(path, i));
    return v;
}

Matrix matrix_value(const Json& j, const std::string& path) {
    if (j.is_number()) return Matrix::Constant(1, 1, number(j, path));
    if (!j.is_array() || j.empty() || !j[0].is_array()) fail(path, "expected a matrix as nested row arrays");
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto rp = index(path, r);
        if (!j[r].is_array() || j[r].size() != cols) fail(rp, "rows must all have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], index(rp, c));
        }
    }
    return m;
}

bool per_node(const Json& j) {
    return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
}

CoeffPath path_value(const Json& j, const std::string& path, const TimeGrid& grid) {
    if (!per_node(j)) return CoeffPath::constant(matrix_value(j, path), grid.nodes());
    if (static_cast<int>(j.size()) != grid.nodes()) {
        fail(path, "per-node list has " + std::to_string(j.size()) + " entries, grid has " +
                       std::to_string(grid.nodes()) + " nodes");
    }
    std::vector<Matrix> values;
    values.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) values.push_back(matrix_value(j[i], index(path, i)));
    try {
        return CoeffPath(std::move(values));
    } catch (const Error& e) {
        fail(path, e.what());
    }
}

std::size_t line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

RunConfig parse_config(const std::string& text, const Overrides& ov, bool require_problem) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        raise(ErrorKind::InvalidConfig, "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    allow_keys(doc, "", {"name", "description", "horizon", "system", "raw_system", "weights", "manifold", "target",
                         "settings", "transfer"});

    RunConfig cfg;
    const Json& hz = required(doc, "", "horizon");
    allow_keys(hz, "horizon", {"t", "T", "steps"});
    const double t0 = hz.contains("t") ? number(hz["t"], "horizon.t") : 0.0;
    const double t1 = number(required(hz, "horizon", "T"), "horizon.T");
    const int steps = ov.steps ? *ov.steps : positive_int(required(hz, "horizon", "steps"), "horizon.steps");
    try {
        cfg.grid = TimeGrid(t0, t1, steps);
    } catch (const Error& e) {
        fail("horizon", e.what());
    }
    const TimeGrid& grid = cfg.grid;

    if (doc.contains("settings")) {
        const Json& s = doc["settings"];
        allow_keys(s, "settings", {"mc_paths", "seed", "ode_substeps", "workers", "symmetry_tol", "psd_tol",
                                   "lsq_residual_tol", "mc_sigma_mult", "eps", "directions"});
        auto& st = cfg.settings;
        if (s.contains("mc_paths")) st.mc_paths = positive_int(s["mc_paths"], "settings.mc_paths");
        if (s.contains("seed")) st.seed = seed_value(s["seed"], "settings.seed");
        if (s.contains("ode_substeps")) st.ode_substeps = positive_int(s["ode_substeps"], "settings.ode_substeps");
        if (s.contains("workers")) st.workers = positive_int(s["workers"], "settings.workers");
        if (s.contains("symmetry_tol")) st.symmetry_tol = number(s["symmetry_tol"], "settings.symmetry_tol");
        if (s.contains("psd_tol")) st.psd_tol = number(s["psd_tol"], "settings.psd_tol");
        if (s.contains("lsq_residual_tol")) st.lsq_residual_tol = number(s["lsq_residual_tol"], "settings.lsq_residual_tol");
        if (s.contains("mc_sigma_mult")) st.mc_sigma_mult = number(s["mc_sigma_mult"], "settings.mc_sigma_mult");
        if (s.contains("eps")) cfg.eps = number(s["eps"], "settings.eps");
        if (s.contains("directions")) cfg.directions = positive_int(s["directions"], "settings.directions");
    }
    if (ov.paths) cfg.settings.mc_paths = *ov.paths;
    if (ov.seed) cfg.settings.seed = *ov.seed;
    if (ov.workers) cfg.settings.workers = *ov.workers;
    if (ov.eps) cfg.eps = *ov.eps;
    if (!(cfg.eps > 0.0)) fail("settings.eps", "must be positive");
    try {
        validate_settings(cfg.settings);
    } catch (const Error& e) {
        fail("settings", e.what());
    }

    const bool has_sys = doc.contains("system");
    const bool has_raw = doc.contains("raw_system");
    if (has_sys == has_raw) fail("<root>", "exactly one of 'system' or 'raw_system' is required");

    CoeffPath A, K, L;
    if (has_raw) {
        const Json& r = doc["raw_system"];
        allow_keys(r, "raw_system", {"A", "B", "C", "D", "delta_D"});
        RawSystem raw{grid,
                      path_value(required(r, "raw_system", "A"), "raw_system.A", grid),
                      path_value(required(r, "raw_system", "B"), "raw_system.B", grid),
                      path_value(required(r, "raw_system", "C"), "raw_system.C", grid),
                      path_value(required(r, "raw_system", "D"), "raw_system.D", grid),
                      r.contains("delta_D") ? number(r["delta_D"], "raw_system.delta_D") : 1e-8};
        try {
            cfg.transform = to_canonical(raw);
        } catch (const Error& e) {
            fail("raw_system", e.what());
        }
        cfg.raw = std::move(raw);
        A = cfg.transform->Abar;
        K = cfg.transform->K;
        L = cfg.transform->L;
    } else {
        const Json& s = doc["system"];
        allow_keys(s, "system", {"A", "K", "L"});
        A = path_value(required(s, "system", "A"), "system.A", grid);
        K = path_value(required(s, "system", "K"), "system.K", grid);
        L = path_value(required(s, "system", "L"), "system.L", grid);
    }

    if (doc.contains("transfer")) {
        allow_keys(doc["transfer"], "transfer", {"x0"});
        cfg.transfer_x0 = vector_value(required(doc["transfer"], "transfer", "x0"), "transfer.x0");
    }

    const bool any_problem = doc.contains("weights") || doc.contains("manifold") || doc.contains("target");
    if (!require_problem && !any_problem) return cfg;

    const Json& w = required(doc, "", "weights");
    allow_keys(w, "weights", {"G", "Q", "R", "N", "delta"});
    Weights weights{matrix_value(required(w, "weights", "G"), "weights.G"),
                    path_value(required(w, "weights", "Q"), "weights.Q", grid),
                    path_value(required(w, "weights", "R"), "weights.R", grid),
                    path_value(required(w, "weights", "N"), "weights.N", grid),
                    w.contains("delta") ? number(w["delta"], "weights.delta") : 1e-8};
    const Json& m = required(doc, "", "manifold");
    allow_keys(m, "manifold", {"F", "b"});
    Manifold manifold{matrix_value(required(m, "manifold", "F"), "manifold.F"),
                      vector_value(required(m, "manifold", "b"), "manifold.b")};
    const Json& tg = required(doc, "", "target");
    allow_keys(tg, "target", {"c0", "c1"});
    const Vector c0 = vector_value(required(tg, "target", "c0"), "target.c0");
    const Vector c1 = tg.contains("c1") ? vector_value(tg["c1"], "target.c1") : Vector::Zero(c0.size());
    cfg.problem = CanonicalProblem{grid, A, K, L, std::move(weights), std::move(manifold), AffineTarget{c0, c1}};
    return cfg;
}

RunConfig load_config(const std::string& path, const Overrides& overrides, bool require_problem) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::InvalidConfig, "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides, require_problem);
}

Json settings_json(const RunConfig& cfg) {
    const auto& s = cfg.settings;
    Json out;
    out["seed"] = s.seed;
    out["paths"] = s.mc_paths;
    out["steps"] = cfg.grid.steps();
    out["t"] = cfg.grid.t_start();
    out["T"] = cfg.grid.t_end();
    out["ode_substeps"] = s.ode_substeps;
    out["symmetry_tol"] = s.symmetry_tol;
    out["psd_tol"] = s.psd_tol;
    out["lsq_residual_tol"] = s.lsq_residual_tol;
    out["mc_sigma_mult"] = s.mc_sigma_mult;
    out["eps"] = cfg.eps;
    out["directions"] = cfg.directions;
    return out;
}

}  // namespace sclq::cli
