#include "cmfg/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cmfg {

using nlohmann::json;

const char* kVersion = "0.1.0";

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

double get_pos(const json& j, const std::string& field, double dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number()) bad(field + " must be a number");
    double v = j[field].get<double>();
    if (!(v > 0.0)) bad(field + " must be > 0");
    return v;
}

double get_num(const json& j, const std::string& field, double dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number()) bad(field + " must be a number");
    return j[field].get<double>();
}

int get_int(const json& j, const std::string& field, int dflt, int lo) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number_integer()) bad(field + " must be an integer");
    int v = j[field].get<int>();
    if (v < lo) bad(field + " must be >= " + std::to_string(lo));
    return v;
}

void check_known(const json& j, const std::vector<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) ok = true;
        if (!ok) bad("unknown field \"" + it.key() + "\" in " + where);
    }
}

SigmaSpec parse_sigma(const json& j, const std::string& field, const SigmaSpec& dflt) {
    if (!j.contains(field)) return dflt;
    SigmaSpec s;
    if (j[field].is_number()) {
        s.variable = false;
        s.base = j[field].get<double>();
    } else if (j[field].is_object()) {
        check_known(j[field], {"base", "amp"}, field);
        s.variable = true;
        s.base = get_pos(j[field], "base", 0.2);
        s.amp = get_num(j[field], "amp", 0.0);
        if (s.amp < 0.0) bad(field + ".amp must be >= 0");
    } else {
        bad(field + " must be a number or {base, amp}");
    }
    if (!(s.base > 0.0)) bad(field + " must be > 0");
    return s;
}

}  // namespace

AppConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        bad(std::string("malformed JSON: ") + e.what());
    }
    AppConfig cfg;
    check_known(j, {"model", "solver", "grid", "simulate", "retro", "carleman"}, "config root");

    if (j.contains("model")) {
        const json& m = j["model"];
        check_known(m,
                    {"a", "b", "p1", "p2", "variant", "a0", "b0", "sigma1_sq", "sigma2_sq",
                     "epsilon", "g_a1", "g_b1", "income", "psi", "T"},
                    "model");
        cfg.model.a = get_pos(m, "a", cfg.model.a);
        cfg.model.b = get_pos(m, "b", cfg.model.b);
        cfg.model.p1 = get_pos(m, "p1", cfg.model.p1);
        cfg.model.p2 = get_pos(m, "p2", cfg.model.p2);
        if (m.contains("variant")) {
            std::string v = m["variant"].get<std::string>();
            if (v == "plus")
                cfg.model.variant = PhiVariant::plus;
            else if (v == "minus")
                cfg.model.variant = PhiVariant::minus;
            else
                bad("variant must be one of \"plus\", \"minus\"");
        }
        cfg.model.a0 = get_pos(m, "a0", cfg.model.a0);
        cfg.model.b0 = get_pos(m, "b0", cfg.model.b0);
        cfg.model.sigma1_sq = parse_sigma(m, "sigma1_sq", cfg.model.sigma1_sq);
        cfg.model.sigma2_sq = parse_sigma(m, "sigma2_sq", cfg.model.sigma2_sq);
        if (m.contains("epsilon")) {
            double e = get_num(m, "epsilon", cfg.model.epsilon);
            if (!(e > 0.0)) bad("epsilon must be > 0");
            cfg.model.epsilon = e;
        }
        cfg.model.g_a1 = get_pos(m, "g_a1", cfg.model.g_a1);
        cfg.model.g_b1 = get_pos(m, "g_b1", cfg.model.g_b1);
        if (m.contains("income")) {
            check_known(m["income"], {"p0", "q0", "r"}, "income");
            cfg.model.income.p0 = get_num(m["income"], "p0", cfg.model.income.p0);
            cfg.model.income.q0 = get_num(m["income"], "q0", cfg.model.income.q0);
            cfg.model.income.r = get_num(m["income"], "r", cfg.model.income.r);
        }
        if (m.contains("psi")) {
            check_known(m["psi"], {"c0", "cx", "cy", "cxx", "cyy"}, "psi");
            cfg.model.psi.c0 = get_num(m["psi"], "c0", cfg.model.psi.c0);
            cfg.model.psi.cx = get_num(m["psi"], "cx", cfg.model.psi.cx);
            cfg.model.psi.cy = get_num(m["psi"], "cy", cfg.model.psi.cy);
            cfg.model.psi.cxx = get_num(m["psi"], "cxx", cfg.model.psi.cxx);
            cfg.model.psi.cyy = get_num(m["psi"], "cyy", cfg.model.psi.cyy);
        }
        cfg.model.T = get_pos(m, "T", cfg.model.T);
    }
    try {
        cfg.model.validate();
    } catch (const std::exception& e) {
        bad(e.what());
    }

    if (j.contains("solver")) {
        const json& s = j["solver"];
        check_known(s, {"max_picard_iters", "picard_tol", "damping", "scheme", "bc"}, "solver");
        cfg.solver.max_picard_iters = get_int(s, "max_picard_iters", cfg.solver.max_picard_iters, 1);
        cfg.solver.picard_tol = get_pos(s, "picard_tol", cfg.solver.picard_tol);
        if (s.contains("damping")) {
            double th = get_num(s, "damping", cfg.solver.damping);
            if (!(th > 0.0 && th <= 1.0)) bad("damping must be in (0,1]");
            cfg.solver.damping = th;
        }
        if (s.contains("scheme")) cfg.solver.scheme = s["scheme"].get<std::string>();
        if (s.contains("bc")) {
            std::string b = s["bc"].get<std::string>();
            if (b == "absorbing")
                cfg.solver.bc = BoundaryMode::absorbing;
            else if (b == "all_neumann")
                cfg.solver.bc = BoundaryMode::all_neumann;
            else
                bad("bc must be one of \"absorbing\", \"all_neumann\"");
        }
    }

    if (j.contains("grid")) {
        const json& gjs = j["grid"];
        check_known(gjs, {"nx", "ny", "nt"}, "grid");
        cfg.grid.nx = get_int(gjs, "nx", cfg.grid.nx, 3);
        cfg.grid.ny = get_int(gjs, "ny", cfg.grid.ny, 3);
        cfg.grid.nt = get_int(gjs, "nt", cfg.grid.nt, 2);
    }

    if (j.contains("simulate")) {
        const json& s = j["simulate"];
        check_known(s, {"n_agents", "dt_sim", "seed", "control_mode"}, "simulate");
        cfg.sim.n_agents = get_int(s, "n_agents", cfg.sim.n_agents, 1);
        cfg.sim.dt_sim = get_pos(s, "dt_sim", cfg.sim.dt_sim);
        if (s.contains("seed")) cfg.sim.seed = s["seed"].get<uint64_t>();
        if (s.contains("control_mode")) {
            std::string cmode = s["control_mode"].get<std::string>();
            if (cmode == "zero")
                cfg.sim.control_mode = ControlMode::zero;
            else if (cmode == "feedback")
                cfg.sim.control_mode = ControlMode::feedback;
            else
                bad("control_mode must be one of \"zero\", \"feedback\"");
        }
    }

    if (j.contains("retro")) {
        const json& r = j["retro"];
        check_known(r, {"gamma", "tikhonov_alpha", "cg_iters", "outer_iters", "s1_hat"}, "retro");
        cfg.retro.gamma = get_num(r, "gamma", cfg.retro.gamma);
        if (r.contains("tikhonov_alpha")) {
            if (r["tikhonov_alpha"].is_string()) {
                if (r["tikhonov_alpha"].get<std::string>() != "auto")
                    bad("tikhonov_alpha must be a positive number or \"auto\"");
                cfg.retro.tikhonov_alpha = -1.0;
            } else {
                double a = get_num(r, "tikhonov_alpha", -1.0);
                if (!(a > 0.0)) bad("tikhonov_alpha must be > 0 (or \"auto\")");
                cfg.retro.tikhonov_alpha = a;
            }
        }
        cfg.retro.cg_iters = get_int(r, "cg_iters", cfg.retro.cg_iters, 1);
        cfg.retro.outer_iters = get_int(r, "outer_iters", cfg.retro.outer_iters, 1);
        cfg.retro.s1_hat = get_pos(r, "s1_hat", cfg.retro.s1_hat);
        try {
            cfg.retro.validate(cfg.model.T);
        } catch (const std::exception& e) {
            bad(e.what());
        }
    }

    if (j.contains("carleman")) {
        const json& c = j["carleman"];
        check_known(c, {"theorem", "suite_size", "lambda_list", "s_list", "seed"}, "carleman");
        if (c.contains("theorem")) {
            std::string t = c["theorem"].get<std::string>();
            if (t != "5.1" && t != "5.2" && t != "7.1")
                bad("theorem must be one of \"5.1\", \"5.2\", \"7.1\"");
            cfg.carleman.theorem = t;
        }
        cfg.carleman.suite_size = get_int(c, "suite_size", cfg.carleman.suite_size, 1);
        if (c.contains("lambda_list"))
            cfg.carleman.lambda_list = c["lambda_list"].get<std::vector<double>>();
        if (c.contains("s_list")) cfg.carleman.s_list = c["s_list"].get<std::vector<double>>();
        if (c.contains("seed")) cfg.carleman.seed = c["seed"].get<uint64_t>();
        for (double l : cfg.carleman.lambda_list)
            if (!(l >= 1.0)) bad("lambda_list entries must be >= 1");
        for (double s : cfg.carleman.s_list)
            if (!(s > 1.0)) bad("s_list entries must be > 1");
    }

    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) bad("config file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const AppConfig& cfg) {
    json j;
    json m;
    m["a"] = cfg.model.a;
    m["b"] = cfg.model.b;
    m["p1"] = cfg.model.p1;
    m["p2"] = cfg.model.p2;
    m["variant"] = cfg.model.variant == PhiVariant::plus ? "plus" : "minus";
    m["a0"] = cfg.model.a0;
    m["b0"] = cfg.model.b0;
    if (cfg.model.sigma1_sq.variable)
        m["sigma1_sq"] = {{"base", cfg.model.sigma1_sq.base}, {"amp", cfg.model.sigma1_sq.amp}};
    else
        m["sigma1_sq"] = cfg.model.sigma1_sq.base;
    if (cfg.model.sigma2_sq.variable)
        m["sigma2_sq"] = {{"base", cfg.model.sigma2_sq.base}, {"amp", cfg.model.sigma2_sq.amp}};
    else
        m["sigma2_sq"] = cfg.model.sigma2_sq.base;
    m["epsilon"] = cfg.model.epsilon;
    m["g_a1"] = cfg.model.g_a1;
    m["g_b1"] = cfg.model.g_b1;
    m["income"] = {{"p0", cfg.model.income.p0}, {"q0", cfg.model.income.q0},
                   {"r", cfg.model.income.r}};
    m["psi"] = {{"c0", cfg.model.psi.c0},
                {"cx", cfg.model.psi.cx},
                {"cy", cfg.model.psi.cy},
                {"cxx", cfg.model.psi.cxx},
                {"cyy", cfg.model.psi.cyy}};
    m["T"] = cfg.model.T;
    j["model"] = m;
    j["solver"] = {{"max_picard_iters", cfg.solver.max_picard_iters},
                   {"picard_tol", cfg.solver.picard_tol},
                   {"damping", cfg.solver.damping},
                   {"scheme", cfg.solver.scheme},
                   {"bc", cfg.solver.bc == BoundaryMode::absorbing ? "absorbing" : "all_neumann"}};
    j["grid"] = {{"nx", cfg.grid.nx}, {"ny", cfg.grid.ny}, {"nt", cfg.grid.nt}};
    j["simulate"] = {{"n_agents", cfg.sim.n_agents},
                     {"dt_sim", cfg.sim.dt_sim},
                     {"seed", cfg.sim.seed},
                     {"control_mode",
                      cfg.sim.control_mode == ControlMode::zero ? "zero" : "feedback"}};
    json r;
    r["gamma"] = cfg.retro.gamma;
    if (cfg.retro.alpha_auto())
        r["tikhonov_alpha"] = "auto";
    else
        r["tikhonov_alpha"] = cfg.retro.tikhonov_alpha;
    r["cg_iters"] = cfg.retro.cg_iters;
    r["outer_iters"] = cfg.retro.outer_iters;
    r["s1_hat"] = cfg.retro.s1_hat;
    j["retro"] = r;
    j["carleman"] = {{"theorem", cfg.carleman.theorem},
                     {"suite_size", cfg.carleman.suite_size},
                     {"lambda_list", cfg.carleman.lambda_list},
                     {"s_list", cfg.carleman.s_list},
                     {"seed", cfg.carleman.seed}};
    return j.dump(2);
}

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tmv{};
    gmtime_r(&t, &tmv);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tmv);
    return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
    json j;
    j["command"] = m.command;
    j["config"] = json::parse(m.config_json);
    j["seed"] = m.seed;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["version"] = m.version;
    json outs = json::array();
    for (const auto& e : m.outputs)
        outs.push_back({{"path", e.path}, {"bytes", e.bytes}, {"checksum", e.checksum}});
    j["outputs"] = outs;
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out << j.dump(2) << '\n';
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace cmfg
