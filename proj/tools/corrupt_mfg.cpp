// Command-line front end: forward MFG solves, agent Monte Carlo, Carleman
// estimate verification and the retrospective stability experiment.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmfg/agents.hpp"
#include "cmfg/carleman.hpp"
#include "cmfg/config.hpp"
#include "cmfg/grid.hpp"
#include "cmfg/model.hpp"
#include "cmfg/retro.hpp"
#include "cmfg/rng.hpp"
#include "cmfg/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmfg;

namespace {

struct ManifestBuilder {
    RunManifest m;
    fs::path dir;

    ManifestBuilder(const std::string& cmd, const AppConfig& cfg, uint64_t seed,
                    const fs::path& out_dir)
        : dir(out_dir) {
        m.command = cmd;
        m.config_json = config_to_json(cfg);
        m.seed = seed;
        m.started_at = iso_now();
        m.version = kVersion;
        fs::create_directories(out_dir);
    }

    void add(const fs::path& p) {
        ManifestEntry e;
        e.path = p.filename().string();
        e.bytes = fs::file_size(p);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a_file(p.string())));
        e.checksum = buf;
        m.outputs.push_back(e);
    }

    void finish() {
        m.finished_at = iso_now();
        write_manifest(m, (dir / "manifest.json").string());
    }
};

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
    return out;
}

AppConfig load_or_default(const std::string& path) {
    if (path.empty()) return AppConfig{};
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    return load_config(path);
}

int run_solve(const std::string& config_path, const std::string& out_dir) {
    AppConfig cfg = load_or_default(config_path);
    Grid grid = cfg.make_grid();
    TimeGrid time = cfg.make_time();
    ManifestBuilder mf("solve", cfg, 0, out_dir);

    ScalarField m0 = default_m0(grid);
    ScalarField u_T =
        ScalarField::sample(grid, [&](double x, double y) { return cfg.model.psi_at(x, y); });
    MFGSolution sol = solve_mfg(m0, u_T, cfg.model, grid, time, cfg.solver);

    fs::path dir(out_dir);
    write_csv(sol.u, (dir / "u.csv").string());
    write_csv(sol.m, (dir / "m.csv").string());
    json conv;
    conv["iterations"] = sol.iterations;
    conv["residual_history"] = sol.residual_history;
    conv["converged"] = sol.converged;
    conv["mass_history"] = sol.mass_history;
    conv["cfl_warning"] = sol.flags.cfl_warning;
    conv["negativity_violation"] = sol.flags.negativity_violation;
    {
        std::ofstream out(dir / "convergence.json");
        out << conv.dump(2) << '\n';
    }
    mf.add(dir / "u.csv");
    mf.add(dir / "m.csv");
    mf.add(dir / "convergence.json");
    mf.finish();
    if (sol.flags.cfl_warning)
        std::cerr << "warning: explicit-term CFL estimate exceeded; consider more time levels\n";
    std::cout << "picard iterations: " << sol.iterations << ", converged: " << std::boolalpha
              << sol.converged << '\n';
    if (!sol.converged) {
        std::cerr << "solve: Picard iteration did not reach tolerance\n";
        return 1;
    }
    return 0;
}

int run_simulate(const std::string& config_path, int agents_override, int64_t seed_override,
                 const std::string& control, const std::string& u_field,
                 const std::string& m_field, double x0, double y0, const std::string& out_dir) {
    AppConfig cfg = load_or_default(config_path);
    if (agents_override > 0) cfg.sim.n_agents = agents_override;
    if (seed_override >= 0) cfg.sim.seed = static_cast<uint64_t>(seed_override);
    if (!control.empty()) {
        if (control == "zero")
            cfg.sim.control_mode = ControlMode::zero;
        else if (control == "feedback")
            cfg.sim.control_mode = ControlMode::feedback;
        else
            throw ConfigError("control must be one of \"zero\", \"feedback\"");
    }
    SpaceTimeField u, m;
    bool have_u = false, have_m = false;
    if (!u_field.empty()) {
        if (!fs::exists(u_field)) throw ConfigError("u-field file not found: " + u_field);
        u = read_spacetime_csv(u_field);
        have_u = true;
    }
    if (!m_field.empty()) {
        if (!fs::exists(m_field)) throw ConfigError("m-field file not found: " + m_field);
        m = read_spacetime_csv(m_field);
        have_m = true;
    }
    if (cfg.sim.control_mode == ControlMode::feedback && !have_u)
        throw ConfigError("feedback control requires --u-field");
    cfg.sim.bc = cfg.solver.bc;
    cfg.sim.record_levels = cfg.grid.nt;

    ManifestBuilder mf("simulate", cfg, cfg.sim.seed, out_dir);
    AgentEnsemble init = AgentEnsemble::at_point(cfg.sim.n_agents, x0, y0, cfg.sim.seed);
    SimResult res =
        simulate(init, have_u ? &u : nullptr, have_m ? &m : nullptr, cfg.model, cfg.sim);

    Grid density_grid = have_u ? u.grid : cfg.make_grid();
    SpaceTimeField dens = empirical_density(
        res.history, density_grid, 1.5 * std::max(density_grid.hx, density_grid.hy));
    fs::path dir(out_dir);
    write_paths_csv(res.history, (dir / "paths.csv").string());
    write_costs_csv(res.ensemble, (dir / "costs.csv").string());
    write_csv(dens, (dir / "density.csv").string());
    mf.add(dir / "paths.csv");
    mf.add(dir / "costs.csv");
    mf.add(dir / "density.csv");
    mf.finish();
    std::printf("mean cost: %.6f +- %.6f (se), absorbed: %d/%d\n", res.stats.mean_cost,
                res.stats.std_error, res.stats.absorbed, cfg.sim.n_agents);
    return 0;
}

json report_to_json(const CarlemanReport& r, int member) {
    json o;
    o["member"] = member;
    o["lambda"] = r.lambda;
    o["s"] = r.s;
    o["valid"] = r.valid;
    o["lhs"] = r.lhs;
    o["rhs_ut"] = r.rhs_ut;
    o["rhs_Lu"] = r.rhs_Lu;
    o["rhs_u2"] = r.rhs_u2;
    o["rhs_grad"] = r.rhs_grad;
    o["dropped_grad"] = r.dropped_grad;
    o["dropped_u2"] = r.dropped_u2;
    o["hess_block"] = r.hess_block;
    o["allow_uT"] = r.allow_uT;
    o["allow_gradT"] = r.allow_gradT;
    o["allow_gradT_alt"] = r.allow_gradT_alt;
    o["allow_init"] = r.allow_init;
    o["margin"] = r.margin;
    o["margin_alt"] = r.margin_alt;
    o["empirical_C"] = r.empirical_C;
    o["scale"] = r.scale;
    return o;
}

int run_verify_carleman(const std::string& config_path, const std::string& theorem,
                        int suite_size, const std::string& lambda_list, const std::string& s_list,
                        int64_t seed, const std::string& out_path) {
    AppConfig cfg = load_or_default(config_path);
    if (!theorem.empty()) cfg.carleman.theorem = theorem;
    if (suite_size > 0) cfg.carleman.suite_size = suite_size;
    if (!lambda_list.empty()) cfg.carleman.lambda_list = parse_double_list(lambda_list);
    if (!s_list.empty()) cfg.carleman.s_list = parse_double_list(s_list);
    if (seed >= 0) cfg.carleman.seed = static_cast<uint64_t>(seed);
    if (cfg.carleman.theorem != "5.1" && cfg.carleman.theorem != "5.2" &&
        cfg.carleman.theorem != "7.1")
        throw ConfigError("theorem must be one of \"5.1\", \"5.2\", \"7.1\"");

    CarlemanTheorem thm = cfg.carleman.theorem == "5.1"   ? CarlemanTheorem::thm51
                          : cfg.carleman.theorem == "5.2" ? CarlemanTheorem::thm52
                                                          : CarlemanTheorem::thm71;
    std::vector<TestFunction> suite = make_suite(cfg.carleman.suite_size, 2, cfg.carleman.seed);
    DiagOperator L = make_constant_operator(0.5 * cfg.model.sigma1_sq.base,
                                            0.5 * cfg.model.sigma2_sq.base);
    ScanResult scan = scan_thresholds(suite, thm, cfg.carleman.lambda_list, cfg.carleman.s_list,
                                      L, cfg.model, cfg.model.T, QuadratureSpec{}, true);

    fs::path out(out_path);
    fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    ManifestBuilder mf("verify-carleman", cfg, cfg.carleman.seed, dir);

    json rep;
    rep["theorem"] = cfg.carleman.theorem;
    rep["suite_size"] = cfg.carleman.suite_size;
    rep["seed"] = cfg.carleman.seed;
    if (thm == CarlemanTheorem::thm71) {
        rep["sigma0"] = cfg.model.sigma0();
        rep["c1_bound_D"] = cfg.model.c1_bound_D();
    }
    json cells = json::array();
    for (const ScanCell& c : scan.cells) {
        cells.push_back({{"lambda", c.lambda},
                         {"s", c.s},
                         {"min_margin", c.min_margin},
                         {"min_margin_alt", c.min_margin_alt},
                         {"min_empirical_C", c.min_empirical_C},
                         {"min_rel_margin", c.min_rel_margin},
                         {"pass", c.pass},
                         {"all_valid", c.all_valid}});
    }
    rep["cells"] = cells;
    rep["threshold_found"] = scan.threshold_found;
    if (scan.threshold_found) rep["threshold_s"] = scan.threshold_s;
    json reports = json::array();
    int per_cell = cfg.carleman.suite_size;
    for (size_t i = 0; i < scan.reports.size(); ++i)
        reports.push_back(report_to_json(scan.reports[i], static_cast<int>(i) % per_cell));
    rep["reports"] = reports;
    {
        std::ofstream o(out);
        if (!o) throw std::runtime_error("cannot open " + out_path + " for writing");
        o << rep.dump(2) << '\n';
    }
    mf.add(out);
    mf.finish();

    bool all_valid = true;
    for (const ScanCell& c : scan.cells) all_valid = all_valid && c.all_valid;
    for (const ScanCell& c : scan.cells)
        std::printf("lambda=%-5g s=%-5g min_margin=% .6e min_margin_alt=% .6e pass=%s\n",
                    c.lambda, c.s, c.min_margin, c.min_margin_alt, c.pass ? "yes" : "no");
    if (scan.threshold_found)
        std::printf("empirical threshold s = %g\n", scan.threshold_s);
    else
        std::printf("no passing threshold within the scanned s values\n");
    if (!all_valid) {
        std::cerr << "verify-carleman: quadrature refinement check failed for some cells\n";
        return 1;
    }
    return 0;
}

int run_retro(const std::string& config_path, const std::string& delta_list,
              const std::string& seed_list, double gamma_override, const std::string& alpha,
              const std::string& out_dir) {
    AppConfig cfg = load_or_default(config_path);
    std::vector<double> deltas = {1e-1, 1e-2, 1e-3, 1e-4};
    if (!delta_list.empty()) deltas = parse_double_list(delta_list);
    std::vector<uint64_t> seeds = {11};
    if (!seed_list.empty()) seeds = parse_seed_list(seed_list);
    if (gamma_override > 0.0) cfg.retro.gamma = gamma_override;
    if (!alpha.empty()) {
        if (alpha == "auto")
            cfg.retro.tikhonov_alpha = -1.0;
        else {
            double a = std::stod(alpha);
            if (!(a > 0.0)) throw ConfigError("alpha must be > 0 or \"auto\"");
            cfg.retro.tikhonov_alpha = a;
        }
    }
    cfg.retro.validate(cfg.model.T);
    for (double d : deltas)
        if (!(d > 0.0)) throw ConfigError("delta-list entries must be > 0");

    Grid grid = cfg.make_grid();
    TimeGrid time = cfg.make_time();
    ManifestBuilder mf("retro", cfg, seeds.front(), out_dir);
    StabilityOutcome outc =
        stability_experiment(cfg.model, cfg.solver, cfg.retro, grid, time, deltas, seeds, true);

    fs::path dir(out_dir);
    json st;
    st["gamma"] = cfg.retro.gamma;
    st["T"] = cfg.model.T;
    st["alpha"] = cfg.retro.alpha_auto() ? json("auto") : json(cfg.retro.tikhonov_alpha);
    json recs = json::array();
    for (size_t i = 0; i < outc.records.size(); ++i) {
        const StabilityRecord& r = outc.records[i];
        json o;
        o["delta"] = r.delta;
        o["seed"] = r.seed;
        o["norms"] = {{"ut", r.norms.ut},         {"uxx", r.norms.uxx},
                      {"uxy", r.norms.uxy},       {"uyy", r.norms.uyy},
                      {"grad_u", r.norms.grad_u}, {"u", r.norms.u},
                      {"grad_m", r.norms.grad_m}, {"m", r.norms.m}};
        o["total"] = r.total;
        o["converged"] = r.converged;
        o["cg_stagnated"] = r.cg_stagnated;
        o["u_c2_norm"] = r.u_c2_norm;
        o["m_c1_norm"] = r.m_c1_norm;
        recs.push_back(o);
        char name[64];
        std::snprintf(name, sizeof(name), "u_rec_%02zu.csv", i);
        write_csv(r.u_rec, (dir / name).string());
        mf.add(dir / name);
        std::snprintf(name, sizeof(name), "m_rec_%02zu.csv", i);
        write_csv(r.m_rec, (dir / name).string());
        mf.add(dir / name);
        std::snprintf(name, sizeof(name), "m0_rec_%02zu.csv", i);
        write_csv(r.m0_rec, (dir / name).string());
        mf.add(dir / name);
    }
    st["records"] = recs;
    st["rho_emp"] = outc.rho_emp;
    st["fit_ok"] = outc.fit_ok;
    {
        std::ofstream o(dir / "stability.json");
        o << st.dump(2) << '\n';
    }
    mf.add(dir / "stability.json");
    mf.finish();

    std::printf("fitted exponent rho_emp = %.4f (fit_ok=%s)\n", outc.rho_emp,
                outc.fit_ok ? "yes" : "no");
    bool any_ok = false;
    for (const auto& r : outc.records) any_ok = any_ok || r.converged;
    return any_ok ? 0 : 1;
}

// Deterministic career-growth sub-model: with x = 0, sigma = 0 and constant
// control beta the y-dynamics is the logistic ODE; the Euler path is
// compared against the closed form 1/(1 + e^{-t}).
int run_logistic_check() {
    ModelParams p;
    p.sigma1_sq.base = 0.0;
    p.sigma2_sq.base = 0.0;

    AgentEnsemble e = AgentEnsemble::at_point(1, 0.0, 0.5, 1);
    std::vector<Controls> ctl(1);
    ctl[0].beta = 1.0;
    const double dt = 1e-4;
    double max_err = 0.0;
    int steps_to_1 = static_cast<int>(std::llround(1.0 / dt));
    for (int s = 0; s < steps_to_1; ++s) {
        step_sde(e, ctl, p, dt, s * dt, s);
        double t = (s + 1) * dt;
        double exact = 1.0 / (1.0 + std::exp(-t));
        max_err = std::max(max_err, std::fabs(e.y[0] - exact));
    }
    double y1 = e.y[0];
    int steps_to_20 = static_cast<int>(std::llround(19.0 / dt));
    for (int s = 0; s < steps_to_20; ++s) step_sde(e, ctl, p, dt, 1.0 + s * dt, s);
    double y20 = e.y[0];
    std::printf("logistic check: y(1) = %.6f (exact %.6f), max error on [0,1] = %.3e\n", y1,
                1.0 / (1.0 + std::exp(-1.0)), max_err);
    std::printf("long-run: y(20) = %.6f (expect > 0.999)\n", y20);
    return (max_err < 1e-3 && y20 > 0.999) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corrupt-mfg: mean-field-game model of a corrupted hierarchy"};
    app.require_subcommand(1);

    auto* solve_cmd = app.add_subcommand("solve", "forward HJB/FP fixed point");
    std::string solve_config, solve_out = "out_solve";
    solve_cmd->add_option("--config", solve_config, "JSON config path");
    solve_cmd->add_option("--out-dir", solve_out, "output directory");

    auto* sim_cmd = app.add_subcommand("simulate", "agent Monte Carlo");
    std::string sim_config, sim_control, sim_u, sim_m, sim_out = "out_simulate";
    int sim_agents = 0;
    int64_t sim_seed = -1;
    double sim_x0 = 0.3, sim_y0 = 0.5;
    sim_cmd->add_option("--config", sim_config, "JSON config path");
    sim_cmd->add_option("--agents", sim_agents, "number of agents");
    sim_cmd->add_option("--seed", sim_seed, "RNG seed");
    sim_cmd->add_option("--control", sim_control, "zero | feedback");
    sim_cmd->add_option("--u-field", sim_u, "u.csv from a solve run (feedback mode)");
    sim_cmd->add_option("--m-field", sim_m, "m.csv from a solve run (g-term averages)");
    sim_cmd->add_option("--x0", sim_x0, "initial x");
    sim_cmd->add_option("--y0", sim_y0, "initial y");
    sim_cmd->add_option("--out-dir", sim_out, "output directory");

    auto* carl_cmd = app.add_subcommand("verify-carleman", "Carleman estimate verification");
    std::string carl_config, carl_thm, carl_lambdas, carl_ss, carl_out = "report.json";
    int carl_suite = 0;
    int64_t carl_seed = -1;
    carl_cmd->add_option("--config", carl_config, "JSON config path");
    carl_cmd->add_option("--theorem", carl_thm, "5.1 | 5.2 | 7.1");
    carl_cmd->add_option("--suite-size", carl_suite, "test-function count");
    carl_cmd->add_option("--lambda-list", carl_lambdas, "comma-separated lambdas");
    carl_cmd->add_option("--s-list", carl_ss, "comma-separated s values");
    carl_cmd->add_option("--seed", carl_seed, "suite RNG seed");
    carl_cmd->add_option("--out", carl_out, "report path");

    auto* retro_cmd = app.add_subcommand("retro", "retrospective stability experiment");
    std::string retro_config, retro_deltas, retro_seeds, retro_alpha, retro_out = "out_retro";
    double retro_gamma = 0.0;
    retro_cmd->add_option("--config", retro_config, "JSON config path");
    retro_cmd->add_option("--delta-list", retro_deltas, "comma-separated noise levels");
    retro_cmd->add_option("--seeds", retro_seeds, "comma-separated seeds");
    retro_cmd->add_option("--gamma", retro_gamma, "window start, 1 < gamma < T");
    retro_cmd->add_option("--alpha", retro_alpha, "Tikhonov alpha or \"auto\"");
    retro_cmd->add_option("--out-dir", retro_out, "output directory");

    app.add_subcommand("logistic-check", "closed-form check of the career sub-model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints usage, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (solve_cmd->parsed()) return run_solve(solve_config, solve_out);
        if (sim_cmd->parsed())
            return run_simulate(sim_config, sim_agents, sim_seed, sim_control, sim_u, sim_m,
                                sim_x0, sim_y0, sim_out);
        if (carl_cmd->parsed())
            return run_verify_carleman(carl_config, carl_thm, carl_suite, carl_lambdas, carl_ss,
                                       carl_seed, carl_out);
        if (retro_cmd->parsed())
            return run_retro(retro_config, retro_deltas, retro_seeds, retro_gamma, retro_alpha,
                             retro_out);
        return run_logistic_check();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const SolverBlowup& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
