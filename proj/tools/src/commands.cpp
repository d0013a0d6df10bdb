#include "commands.hpp"

#include "config.hpp"
#include "json_writer.hpp"

#include "sclq/controllability.hpp"
#include "sclq/errors.hpp"
#include "sclq/linalg.hpp"
#include "sclq/monte_carlo.hpp"
#include "sclq/riccati.hpp"
#include "sclq/solver.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace sclq::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out_dir;
    bool dump_riccati = false;
    bool dump_trajectories = false;
    Overrides overrides;
};

/// Where reports and dumps go: a directory when --out is given, else stdout.
class Sink {
public:
    Sink(const Options& opt, std::ostream& out) : opt_(opt), out_(out) {}

    void report(const Json& doc, const std::string& command, int workers) const {
        const std::string text = write_json(doc);
        if (opt_.out_dir.empty()) {
            out_ << text;
            return;
        }
        write_file("report.json", text);
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
        Json meta;
        meta["command"] = command;
        meta["generated_at"] = stamp;
        meta["workers"] = workers;
        meta["version"] = "0.1.0";
        write_file("metadata.json", write_json(meta));
        out_ << "wrote " << (fs::path(opt_.out_dir) / "report.json").string() << "\n";
    }

    [[nodiscard]] std::ofstream open(const std::string& name) const {
        std::ofstream f(fs::path(opt_.out_dir) / name);
        if (!f) raise(ErrorKind::InvalidConfig, "cannot write " + (fs::path(opt_.out_dir) / name).string());
        return f;
    }

    void write_file(const std::string& name, const std::string& text) const {
        auto f = open(name);
        f << text;
    }

private:
    const Options& opt_;
    std::ostream& out_;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);
    return buf;
}

Json dims(const ValidatedProblem& p) {
    Json d;
    d["n"] = p.n();
    d["m"] = p.m();
    d["k"] = p.k();
    return d;
}

Json breakdown_json(const CostBreakdown& b) {
    Json j;
    j["initial"] = b.initial;
    j["state"] = b.state;
    j["diffusion"] = b.diffusion;
    j["drift"] = b.drift;
    j["multiplier"] = b.multiplier;
    return j;
}

struct Pipeline {
    ValidatedProblem p;
    SigmaPath sig;
    PhiCoeffs phi;
};

Pipeline solve_riccati(const ValidatedProblem& p) {
    auto sig = solve_sigma(p);
    auto phi = solve_target_odes(sig, p.target(), p);
    return {p, std::move(sig), std::move(phi)};
}

void dump_riccati(const Sink& sink, const Pipeline& pl) {
    auto f = sink.open("riccati.csv");
    const Eigen::Index n = pl.p.n();
    f << "step,time";
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) f << ",sigma_" << r << "_" << c;
    for (Eigen::Index r = 0; r < n; ++r) f << ",a_" << r;
    for (Eigen::Index r = 0; r < n; ++r) f << ",bc_" << r;
    f << "\n";
    for (int i = 0; i < pl.p.grid().nodes(); ++i) {
        f << i << "," << fmt(pl.p.grid().node(i));
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) f << "," << fmt(pl.sig[i](r, c));
        for (Eigen::Index r = 0; r < n; ++r) f << "," << fmt(pl.phi.a[static_cast<std::size_t>(i)](r));
        for (Eigen::Index r = 0; r < n; ++r) f << "," << fmt(pl.phi.bc[static_cast<std::size_t>(i)](r));
        f << "\n";
    }
}

void dump_trajectories(const Sink& sink, const Pipeline& pl, const MultiplierResult& mult, const NoiseEnsemble& noise) {
    const OptimalPathSimulator sim(mult, pl.sig, pl.phi, pl.p);
    const char* names[] = {"x", "z", "v", "y"};
    std::ofstream files[4] = {sink.open("x.csv"), sink.open("z.csv"), sink.open("v.csv"), sink.open("y.csv")};
    const Eigen::Index widths[] = {pl.p.n(), pl.p.n(), pl.p.L().cols(), pl.p.n()};
    for (int q = 0; q < 4; ++q) {
        files[q] << "path,step,time";
        for (Eigen::Index c = 0; c < widths[q]; ++c) files[q] << "," << names[q] << "_" << c;
        files[q] << "\n";
    }
    const TimeGrid& g = pl.p.grid();
    for (int k = 0; k < noise.paths(); ++k) {
        const auto path = sim.simulate(noise.increments(k));
        const Matrix* mats[] = {&path.x, &path.z, &path.v, &path.y};
        for (int q = 0; q < 4; ++q) {
            for (int i = 0; i < g.nodes(); ++i) {
                files[q] << k << "," << i << "," << fmt(g.node(i));
                for (Eigen::Index c = 0; c < widths[q]; ++c) files[q] << "," << fmt((*mats[q])(c, i));
                files[q] << "\n";
            }
        }
    }
}

Json unreachable_json(const std::string& command, const RunConfig& cfg, const UnreachableError& e) {
    Json j;
    j["command"] = command;
    j["settings"] = settings_json(cfg);
    j["error"] = std::string(to_string(e.kind()));
    j["message"] = e.what();
    j["residual"] = e.residual();
    j["tolerance"] = e.tolerance();
    return j;
}

int run_solve(const std::string& command, const RunConfig& cfg, const ValidatedProblem& vp, const Options& opt,
              const Sink& sink, std::ostream& out) {
    const auto pl = solve_riccati(vp);
    if (opt.dump_riccati) dump_riccati(sink, pl);
    MultiplierResult mult;
    try {
        mult = solve_multiplier(pl.sig, pl.phi, pl.p);
    } catch (const UnreachableError& e) {
        const Json j = unreachable_json(command, cfg, e);
        if (!opt.out_dir.empty()) sink.report(j, command, cfg.settings.workers);
        out << write_json(j);
        return kUnreachable;
    }
    const auto noise = generate_noise(cfg.settings.seed, cfg.settings.mc_paths, pl.p.grid());
    const auto sum = summarize_optimal(mult, pl.sig, pl.phi, pl.p, noise, cfg.settings.workers);
    if (opt.dump_trajectories) dump_trajectories(sink, pl, mult, noise);

    Json j;
    j["command"] = command;
    j["settings"] = settings_json(cfg);
    j["dims"] = dims(pl.p);
    j["lambda_star"] = to_json(mult.lambda_star);
    j["residual"] = mult.residual;
    j["tolerance"] = mult.tolerance;
    j["s_matrix"] = to_json(mult.s_matrix);
    j["rhs"] = to_json(mult.rhs);
    j["j_hat"] = sum.cost.j_hat;
    j["se"] = sum.cost.se;
    j["lagrangian_j_hat"] = *sum.cost.lagrangian_j_hat;
    j["lagrangian_se"] = *sum.cost.lagrangian_se;
    j["breakdown"] = breakdown_json(sum.cost.breakdown);
    j["y0"] = to_json(sum.y0);
    j["x0_mean"] = to_json(Vector(sum.x0_mean));
    Json checks;
    checks["forward_consistency"] = sum.forward_consistency;
    checks["stationarity_r1"] = sum.stationarity.r1;
    checks["stationarity_r2"] = sum.stationarity.r2;
    checks["manifold_error"] = sum.manifold_error;
    checks["terminal_error"] = sum.terminal_error;
    checks["riccati_residual"] = riccati_residual(pl.sig, pl.p);
    checks["riccati_clipped_nodes"] = pl.sig.clipped_nodes().size();
    j["checks"] = std::move(checks);
    sink.report(j, command, cfg.settings.workers);
    return kOk;
}

Json gramian_json(const GramianCheck& chk) {
    Json g;
    g["t0"] = chk.estimate.t0;
    g["t1"] = chk.estimate.t1;
    g["paths"] = chk.estimate.paths;
    g["psi_hat"] = to_json(chk.estimate.psi_hat);
    g["se"] = to_json(chk.estimate.se);
    g["sigma"] = to_json(chk.sigma);
    g["max_z_score"] = chk.max_z_score;
    return g;
}

ReachabilityResult reach_result(const Pipeline& pl, const RunConfig& cfg) {
    return manifold_reachability_solve(pl.p.manifold().F, pl.p.manifold().b, pl.sig, pl.phi, pl.p.grid().t_start(),
                                       cfg.settings.lsq_residual_tol);
}

Json reach_json(const ReachabilityResult& r) {
    Json j;
    j["reachable"] = r.reachable;
    j["xi"] = to_json(r.xi);
    j["residual"] = r.residual;
    j["tolerance"] = r.tolerance;
    j["margin"] = r.margin;
    return j;
}

int run_reach(const RunConfig& cfg, const ValidatedProblem& vp, const Options& opt, const Sink& sink) {
    const auto pl = solve_riccati(vp);
    if (opt.dump_riccati) dump_riccati(sink, pl);
    const auto r = reach_result(pl, cfg);
    const auto hat = hat_coefficients(pl.sig, pl.p);
    const auto noise = generate_noise(cfg.settings.seed, cfg.settings.mc_paths, pl.p.grid());
    const auto chk = gramian_riccati_check(hat, pl.sig, noise, pl.p.grid().t_start(), cfg.settings.workers);
    Json j;
    j["command"] = "reach";
    j["settings"] = settings_json(cfg);
    j["dims"] = dims(pl.p);
    const Json fields = reach_json(r);
    for (const auto& [k, v] : fields.items()) j[k] = v;
    j["exactly_controllable"] = r.margin > 0.0;
    if (cfg.transfer_x0) j["full_target"] = reach_json(reachability_solve(*cfg.transfer_x0, pl.sig, pl.phi,
                                                                           pl.p.grid().t_start(),
                                                                           cfg.settings.lsq_residual_tol));
    j["gramian_check"] = gramian_json(chk);
    sink.report(j, "reach", cfg.settings.workers);
    return r.reachable ? kOk : kUnreachable;
}

int run_gramian(const RunConfig& cfg, const ValidatedProblem& vp, const Options& opt, const Sink& sink) {
    const auto pl = solve_riccati(vp);
    if (opt.dump_riccati) dump_riccati(sink, pl);
    const auto hat = hat_coefficients(pl.sig, pl.p);
    const auto noise = generate_noise(cfg.settings.seed, cfg.settings.mc_paths, pl.p.grid());
    const auto chk = gramian_riccati_check(hat, pl.sig, noise, pl.p.grid().t_start(), cfg.settings.workers);
    Json table = Json::array();
    for (Eigen::Index r = 0; r < chk.sigma.rows(); ++r) {
        for (Eigen::Index c = 0; c < chk.sigma.cols(); ++c) {
            Json row;
            row["i"] = r;
            row["j"] = c;
            row["psi_hat"] = chk.estimate.psi_hat(r, c);
            row["se"] = chk.estimate.se(r, c);
            row["sigma"] = chk.sigma(r, c);
            row["difference"] = chk.estimate.psi_hat(r, c) - chk.sigma(r, c);
            table.push_back(std::move(row));
        }
    }
    Json j;
    j["command"] = "gramian";
    j["settings"] = settings_json(cfg);
    j["dims"] = dims(pl.p);
    j["gramian"] = gramian_json(chk);
    j["table"] = std::move(table);
    j["within_band"] = chk.max_z_score <= cfg.settings.mc_sigma_mult;
    sink.report(j, "gramian", cfg.settings.workers);
    return kOk;
}

Json path_json(const CoeffPath& c) {
    if (c.is_constant()) return to_json(c[0]);
    Json arr = Json::array();
    for (const auto& v : c.values()) arr.push_back(to_json(v));
    return arr;
}

int run_transform(const RunConfig& cfg, const Sink& sink) {
    if (!cfg.raw) raise(ErrorKind::InvalidConfig, "raw_system: transform needs a raw system");
    const auto& raw = *cfg.raw;
    const auto& t = *cfg.transform;
    const Eigen::Index n = raw.A.rows();
    const Eigen::Index m = raw.B.cols();
    double dm_err = 0.0;
    Matrix target = Matrix::Zero(n, m);
    target.leftCols(n) = Matrix::Identity(n, n);
    for (int i = 0; i < raw.D.nodes(); ++i) dm_err = std::max(dm_err, linalg::max_abs(raw.D[i] * t.M[i] - target));
    Json j;
    j["command"] = "transform";
    j["settings"] = settings_json(cfg);
    Json d;
    d["n"] = n;
    d["m"] = m;
    j["dims"] = d;
    j["nondegeneracy_margin"] = check_nondegeneracy(raw.D);
    j["max_dm_error"] = dm_err;
    Json cond;
    cond["min"] = *std::min_element(t.cond_M.begin(), t.cond_M.end());
    cond["max"] = *std::max_element(t.cond_M.begin(), t.cond_M.end());
    j["cond_M"] = cond;
    Json coeffs;
    coeffs["M"] = path_json(t.M);
    coeffs["Abar"] = path_json(t.Abar);
    coeffs["K"] = path_json(t.K);
    coeffs["L"] = path_json(t.L);
    j["coefficients"] = std::move(coeffs);
    sink.report(j, "transform", cfg.settings.workers);
    return kOk;
}

struct Check {
    std::string name;
    double value;
    double tolerance;
    bool pass;
};

int run_verify(const RunConfig& cfg, const ValidatedProblem& vp, const Options& opt, const Sink& sink,
               std::ostream& out) {
    const auto pl = solve_riccati(vp);
    if (opt.dump_riccati) dump_riccati(sink, pl);
    const auto& p = pl.p;
    const int workers = cfg.settings.workers;
    const double mult_sigma = cfg.settings.mc_sigma_mult;
    std::vector<Check> checks;
    auto add = [&](std::string name, double value, double tol, bool pass) {
        checks.push_back({std::move(name), value, tol, pass});
    };
    auto at_most = [&](std::string name, double value, double tol) { add(std::move(name), value, tol, value <= tol); };

    double asym = 0.0, lmin = INFINITY;
    for (const auto& s : pl.sig.values()) {
        asym = std::max(asym, linalg::asymmetry(s));
        lmin = std::min(lmin, linalg::min_eigenvalue(s));
    }
    at_most("sigma_terminal_zero", linalg::max_abs(pl.sig[p.grid().steps()]), 0.0);
    at_most("sigma_symmetric", asym, cfg.settings.symmetry_tol);
    add("sigma_psd", lmin, cfg.settings.psd_tol, lmin >= cfg.settings.psd_tol);
    // Same coefficients on a grid twice as fine, driven by the same Brownian paths.
    const auto fine = validate_problem(refined(p.problem(), 2), p.settings());
    const auto fpl = solve_riccati(fine);
    {
        const double res = riccati_residual(pl.sig, p);
        const double fres = riccati_residual(fpl.sig, fine);
        const double scale = 1.0 + linalg::max_abs(pl.sig[0]);
        add("riccati_residual", res, fres, res <= 1e-6 * scale || fres <= res / 3.0);
    }
    const double phi_end = std::max((pl.phi.a.back() + p.target().c0).lpNorm<Eigen::Infinity>(),
                                    (pl.phi.bc.back() + p.target().c1).lpNorm<Eigen::Infinity>());
    at_most("target_terminal", phi_end, 0.0);

    const auto noise = generate_noise(cfg.settings.seed, cfg.settings.mc_paths, p.grid());
    const auto hat = hat_coefficients(pl.sig, p);
    {
        const auto rep = represent_terminal_expectation(p.target(), {}, hat.A, hat.K, noise, workers);
        double z = 0.0;
        for (Eigen::Index i = 0; i < rep.estimate.size(); ++i) {
            const double d = std::abs(rep.estimate(i) + pl.phi.a.front()(i));
            z = std::max(z, d / std::max(rep.se(i), 1e-12 * (1.0 + std::abs(rep.estimate(i)))));
        }
        at_most("bsde_oracle_z", z, mult_sigma);
    }
    const auto gchk = gramian_riccati_check(hat, pl.sig, noise, p.grid().t_start(), workers);
    at_most("gramian_riccati_z", gchk.max_z_score, mult_sigma);

    const auto reach = reach_result(pl, cfg);
    add("manifold_reachable", reach.residual, reach.tolerance, reach.reachable);
    if (!reach.reachable) {
        add("multiplier_solvable", 1.0, 0.0, false);
    } else {
        const auto ident = candidate_identity_check(reach.xi, hat, noise, p.grid().t_start(), p.grid().t_end(), workers);
        at_most("candidate_identity", ident.residual, mult_sigma * ident.combined_se + 1e-12);

        const auto mult = solve_multiplier(pl.sig, pl.phi, p);
        at_most("multiplier_residual", mult.residual, mult.tolerance);
        const auto sum = summarize_optimal(mult, pl.sig, pl.phi, p, noise, workers);
        at_most("manifold_error", sum.manifold_error, 1e-10);
        at_most("terminal_error", sum.terminal_error, 0.0);
        at_most("stationarity_r1", sum.stationarity.r1, 1e-14);
        at_most("stationarity_r2", sum.stationarity.r2, 1e-10);

        const auto fnoise = generate_noise(cfg.settings.seed, cfg.settings.mc_paths, fine.grid());
        const auto fmult = solve_multiplier(fpl.sig, fpl.phi, fine);
        const auto fsum = summarize_optimal(fmult, fpl.sig, fpl.phi, fine, fnoise, workers);
        const auto csum = summarize_optimal(mult, pl.sig, pl.phi, p, fnoise.coarsened(2), workers);
        add("forward_consistency", csum.forward_consistency, fsum.forward_consistency,
            csum.forward_consistency <= 1e-12 || fsum.forward_consistency < csum.forward_consistency);

        const auto dirs = random_directions(cfg.directions, cfg.settings.seed, p.grid(), p.L().cols());
        const auto pert = perturbation_optimality_check(mult, pl.sig, pl.phi, p, noise, dirs, cfg.eps, workers);
        double worst_delta = INFINITY, worst_linear = -INFINITY;
        const double scale = 1.0 + std::abs(*sum.cost.lagrangian_j_hat);
        for (const auto& r : pert) {
            worst_delta = std::min(worst_delta, r.delta_j + mult_sigma * r.se);
            worst_linear = std::max(worst_linear, std::abs(r.linear_term) - mult_sigma * r.linear_se - 1e-8 * scale);
        }
        add("perturbation_nonnegative", worst_delta, 0.0, worst_delta >= 0.0);
        add("perturbation_linear_term", worst_linear, 0.0, worst_linear <= 0.0);
    }

    bool all = true;
    Json list = Json::array();
    for (const auto& c : checks) {
        all = all && c.pass;
        Json e;
        e["name"] = c.name;
        e["value"] = c.value;
        e["tolerance"] = c.tolerance;
        e["pass"] = c.pass;
        list.push_back(std::move(e));
        out << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << fmt(c.value) << " tolerance=" << fmt(c.tolerance)
            << "\n";
    }
    Json j;
    j["command"] = "verify";
    j["settings"] = settings_json(cfg);
    j["dims"] = dims(p);
    j["checks"] = std::move(list);
    j["all_passed"] = all;
    if (!opt.out_dir.empty()) sink.report(j, "verify", workers);
    return all ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constrained stochastic LQ solver"};
    app.require_subcommand(1);
    Options opt;
    std::optional<int> paths, steps, workers;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON config file")->required();
        sub->add_option("--out", opt.out_dir, "output directory for report.json, metadata.json and CSV dumps");
        sub->add_option("--paths", paths, "Monte Carlo paths P")->check(CLI::PositiveNumber);
        sub->add_option("--steps", steps, "grid steps M")->check(CLI::Range(2, 1 << 30));
        sub->add_option("--seed", seed, "noise seed");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--eps", eps, "perturbation size for verify")->check(CLI::PositiveNumber);
        sub->add_flag("--dump-riccati", opt.dump_riccati, "write riccati.csv");
        sub->add_flag("--dump-trajectories", opt.dump_trajectories, "write x/z/v/y.csv (solve, transfer)");
    };
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "solve the constrained problem and report multiplier, cost and checks"},
        {"reach", "manifold reachability and the Gramian-Riccati comparison"},
        {"gramian", "Monte Carlo Gramian of the hat system against Sigma(t)"},
        {"transform", "reduce a raw system to canonical form"},
        {"transfer", "minimum-energy transfer from transfer.x0 to the target"},
        {"verify", "run the invariant battery, one PASS/FAIL line per check"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalidConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    opt.overrides = {paths, steps, seed, workers, eps};
    const Sink sink(opt, out);

    std::optional<RunConfig> cfg;
    std::optional<ValidatedProblem> vp;
    try {
        if ((opt.dump_riccati || opt.dump_trajectories) && opt.out_dir.empty()) {
            raise(ErrorKind::InvalidConfig, "--dump-riccati and --dump-trajectories need --out DIR");
        }
        if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
        cfg = load_config(opt.config, opt.overrides, command != "transform");
        if (command == "transfer") {
            if (!cfg->transfer_x0) raise(ErrorKind::InvalidConfig, "transfer.x0: missing required field");
            cfg->problem = transfer_problem(*cfg->problem, *cfg->transfer_x0);
        }
        if (cfg->problem) vp = validate_problem(*cfg->problem, cfg->settings);
    } catch (const Error& e) {
        err << "sclq: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const fs::filesystem_error& e) {
        err << "sclq: " << e.what() << "\n";
        return kInvalidConfig;
    }

    try {
        if (command == "solve" || command == "transfer") return run_solve(command, *cfg, *vp, opt, sink, out);
        if (command == "reach") return run_reach(*cfg, *vp, opt, sink);
        if (command == "gramian") return run_gramian(*cfg, *vp, opt, sink);
        if (command == "transform") return run_transform(*cfg, sink);
        return run_verify(*cfg, *vp, opt, sink, out);
    } catch (const UnreachableError& e) {
        err << "sclq: " << e.what() << "\n";
        return kUnreachable;
    } catch (const Error& e) {
        err << "sclq: " << e.what() << "\n";
        return e.kind() == ErrorKind::InvalidConfig ? kInvalidConfig : kNumericalFailure;
    }
}

}  // namespace sclq::cli
