#include "cmfg/agents.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cmfg/rng.hpp"

namespace cmfg {

AgentEnsemble AgentEnsemble::at_point(int n_agents, double x0, double y0, uint64_t seed) {
    AgentEnsemble e;
    e.x.assign(n_agents, x0);
    e.y.assign(n_agents, y0);
    e.alive.assign(n_agents, 1);
    e.absorption_time.assign(n_agents, -1.0);
    e.accumulated_cost.assign(n_agents, 0.0);
    e.rng_seed = seed;
    return e;
}

double AgentEnsemble::alive_fraction() const {
    if (x.empty()) return 0.0;
    int n = 0;
    for (char a : alive) n += (a != 0);
    return static_cast<double>(n) / static_cast<double>(x.size());
}

void SimConfig::validate() const {
    if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
    if (!(dt_sim > 0.0)) throw std::invalid_argument("dt_sim must be > 0");
}

namespace {

// fold a coordinate back into [0,1]; specular reflection
double fold_low(double z) { return z < 0.0 ? -z : z; }
double fold_high(double z) { return z > 1.0 ? 2.0 - z : z; }

}  // namespace

void step_sde(AgentEnsemble& e, const std::vector<Controls>& controls, const ModelParams& p,
              double dt, double t_now, int step_index, BoundaryMode bc) {
    const double sq_dt = std::sqrt(dt);
    for (int i = 0; i < e.size(); ++i) {
        if (!e.alive[i]) continue;
        double x = e.x[i], y = e.y[i];
        double s1 = std::sqrt(p.sigma1_sq.at(x, y));
        double s2 = std::sqrt(p.sigma2_sq.at(x, y));
        double dx = controls[i].alpha * p.phi1(x, y) * dt;
        double dy = controls[i].beta * p.phi2(x, y) * dt;
        if (s1 > 0.0) dx += s1 * sq_dt * normal(e.rng_seed, i, step_index, 0);
        if (s2 > 0.0) dy += s2 * sq_dt * normal(e.rng_seed, i, step_index, 1);
        x += dx;
        y += dy;
        for (int fold = 0; fold < 64; ++fold) {
            double x_old = x, y_old = y;
            y = fold_high(fold_low(y));
            x = fold_low(x);
            if (bc == BoundaryMode::all_neumann) x = fold_high(x);
            if (x == x_old && y == y_old) break;
        }
        if (bc == BoundaryMode::absorbing && x >= 1.0) {
            x = 1.0;
            e.alive[i] = 0;
            e.absorption_time[i] = t_now + dt;
            e.accumulated_cost[i] += p.psi_at(1.0, y);
        }
        e.x[i] = x;
        e.y[i] = y;
    }
}

namespace {

// bilinear interpolation of a node field at (x,y)
double bilinear(const Grid& g, const std::vector<double>& f, double x, double y) {
    double fx = std::min(std::max(x, 0.0), 1.0) * (g.nx - 1);
    double fy = std::min(std::max(y, 0.0), 1.0) * (g.ny - 1);
    int ix = std::min(static_cast<int>(fx), g.nx - 2);
    int iy = std::min(static_cast<int>(fy), g.ny - 2);
    double ax = fx - ix, ay = fy - iy;
    double v00 = f[g.index(ix, iy)], v10 = f[g.index(ix + 1, iy)];
    double v01 = f[g.index(ix, iy + 1)], v11 = f[g.index(ix + 1, iy + 1)];
    return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 +
           ax * ay * v11;
}

double lerp_line(const std::vector<double>& f, double z, int n) {
    double fz = std::min(std::max(z, 0.0), 1.0) * (n - 1);
    int i = std::min(static_cast<int>(fz), n - 2);
    double a = fz - i;
    return (1 - a) * f[i] + a * f[i + 1];
}

}  // namespace

SimResult simulate(const AgentEnsemble& init, const SpaceTimeField* u, const SpaceTimeField* m,
                   const ModelParams& p, const SimConfig& cfg) {
    cfg.validate();
    if (cfg.control_mode == ControlMode::feedback && u == nullptr)
        throw std::invalid_argument("simulate: feedback mode needs a u field");

    TimeGrid rec = u ? u->time : (m ? m->time : TimeGrid::make(p.T, cfg.record_levels));
    const double T = rec.T;

    // per-level gradients of u for the feedback law
    std::vector<std::vector<double>> ux, uy;
    if (u) {
        ux.resize(u->time.nt);
        uy.resize(u->time.nt);
        for (int k = 0; k < u->time.nt; ++k) {
            GradientField gr = gradient(u->slice(k));
            ux[k] = std::move(gr.x.v);
            uy[k] = std::move(gr.y.v);
        }
    }
    // per-level mean-field averages for the g-term; zero field when m absent
    std::vector<std::vector<double>> mby, mbx;
    int m_nt = 0;
    if (m) {
        m_nt = m->time.nt;
        mby.resize(m_nt);
        mbx.resize(m_nt);
        for (int k = 0; k < m_nt; ++k) {
            MeanFields mf = mean_fields(m->slice(k), p);
            mby[k] = std::move(mf.mbar_y);
            mbx[k] = std::move(mf.mbar_x);
        }
    }

    SimResult out;
    out.ensemble = init;
    AgentEnsemble& e = out.ensemble;
    e.rng_seed = cfg.seed;

    int nsteps = std::max(1, static_cast<int>(std::llround(T / cfg.dt_sim)));
    double dt = T / nsteps;

    auto level_frac = [](double t, const TimeGrid& tg, int& k) {
        double ft = std::min(std::max(t / tg.T, 0.0), 1.0) * (tg.nt - 1);
        k = std::min(static_cast<int>(ft), tg.nt - 2);
        return ft - k;
    };

    auto record = [&](double t) {
        out.history.times.push_back(t);
        out.history.xs.push_back(e.x);
        out.history.ys.push_back(e.y);
        out.history.alive.push_back(e.alive);
        out.history.alive_fraction.push_back(e.alive_fraction());
    };

    int next_rec = 0;
    std::vector<Controls> ctl(e.size());
    for (int s = 0; s < nsteps; ++s) {
        double t = dt * s;
        while (next_rec < rec.nt && rec.t(next_rec) <= t + 1e-12) {
            record(rec.t(next_rec));
            ++next_rec;
        }
        // controls at the current state
        for (int i = 0; i < e.size(); ++i) {
            ctl[i] = Controls{};
            if (!e.alive[i] || cfg.control_mode == ControlMode::zero) continue;
            int k;
            double a = level_frac(t, u->time, k);
            double gx = (1 - a) * bilinear(u->grid, ux[k], e.x[i], e.y[i]) +
                        a * bilinear(u->grid, ux[k + 1], e.x[i], e.y[i]);
            double gy = (1 - a) * bilinear(u->grid, uy[k], e.x[i], e.y[i]) +
                        a * bilinear(u->grid, uy[k + 1], e.x[i], e.y[i]);
            ctl[i].alpha = -p.phi1(e.x[i], e.y[i]) / p.a0 * gx;
            ctl[i].beta = -p.phi2(e.x[i], e.y[i]) / p.b0 * gy;
        }
        // accumulate the running cost -c + h + g at the left endpoint
        for (int i = 0; i < e.size(); ++i) {
            if (!e.alive[i]) continue;
            double mby_i = 0.0, mbx_i = 0.0;
            if (m) {
                int k;
                double a = level_frac(t, m->time, k);
                mby_i = (1 - a) * lerp_line(mby[k], e.x[i], m->grid.nx) +
                        a * lerp_line(mby[k + 1], e.x[i], m->grid.nx);
                mbx_i = (1 - a) * lerp_line(mbx[k], e.y[i], m->grid.ny) +
                        a * lerp_line(mbx[k + 1], e.y[i], m->grid.ny);
            }
            double run = -p.income_at(e.x[i], e.y[i], t) +
                         running_cost_h(ctl[i].alpha, ctl[i].beta, p) +
                         p.g(e.x[i] - mby_i, e.y[i] - mbx_i);
            e.accumulated_cost[i] += dt * run;
        }
        step_sde(e, ctl, p, dt, t, s, cfg.bc);
    }
    while (next_rec < rec.nt) {
        record(rec.t(next_rec));
        ++next_rec;
    }
    // terminal payoff for the survivors
    for (int i = 0; i < e.size(); ++i)
        if (e.alive[i]) e.accumulated_cost[i] += p.psi_at(e.x[i], e.y[i]);

    double mean = 0.0;
    for (double c : e.accumulated_cost) mean += c;
    mean /= e.size();
    double var = 0.0;
    for (double c : e.accumulated_cost) var += (c - mean) * (c - mean);
    var = (e.size() > 1) ? var / (e.size() - 1) : 0.0;
    out.stats.mean_cost = mean;
    out.stats.std_error = std::sqrt(var / e.size());
    for (char a : e.alive) out.stats.absorbed += (a == 0);
    return out;
}

SpaceTimeField empirical_density(const SimHistory& hist, const Grid& grid, double bandwidth) {
    if (hist.times.empty()) throw std::invalid_argument("empirical_density: empty history");
    TimeGrid tg = TimeGrid::make(std::max(hist.times.back(), 1e-300),
                                 std::max<int>(2, static_cast<int>(hist.times.size())));
    SpaceTimeField out(grid, tg);
    const double bw = bandwidth;
    const double inv2bw2 = 1.0 / (2.0 * bw * bw);
    const double norm = 1.0 / (2.0 * 3.14159265358979323846 * bw * bw);
    const int reach_x = std::max(1, static_cast<int>(std::ceil(4.0 * bw / grid.hx)));
    const int reach_y = std::max(1, static_cast<int>(std::ceil(4.0 * bw / grid.hy)));
    int n_agents = hist.xs.empty() ? 0 : static_cast<int>(hist.xs[0].size());
    for (size_t L = 0; L < hist.times.size(); ++L) {
        ScalarField f(grid);
        for (int i = 0; i < n_agents; ++i) {
            if (!hist.alive[L][i]) continue;
            double X = hist.xs[L][i], Y = hist.ys[L][i];
            int cx = static_cast<int>(std::lround(X * (grid.nx - 1)));
            int cy = static_cast<int>(std::lround(Y * (grid.ny - 1)));
            for (int iy = std::max(0, cy - reach_y); iy <= std::min(grid.ny - 1, cy + reach_y);
                 ++iy)
                for (int ix = std::max(0, cx - reach_x);
                     ix <= std::min(grid.nx - 1, cx + reach_x); ++ix) {
                    double dx = grid.x(ix) - X, dy = grid.y(iy) - Y;
                    f.at(ix, iy) += norm * std::exp(-(dx * dx + dy * dy) * inv2bw2);
                }
        }
        double total = integrate_space(f);
        double target = (n_agents > 0) ? hist.alive_fraction[L] : 0.0;
        if (total > 0.0 && target > 0.0) {
            double scale = target / total;
            for (double& v : f.v) v *= scale;
        } else {
            for (double& v : f.v) v = 0.0;
        }
        out.set_slice(static_cast<int>(L), f);
    }
    return out;
}

void write_paths_csv(const SimHistory& hist, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot open " + path + " for writing");
    outf << "t,agent_id,x,y,alive\n";
    char buf[128];
    for (size_t L = 0; L < hist.times.size(); ++L)
        for (size_t i = 0; i < hist.xs[L].size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g,%zu,%.17g,%.17g,%d\n", hist.times[L], i,
                          hist.xs[L][i], hist.ys[L][i], hist.alive[L][i] ? 1 : 0);
            outf << buf;
        }
}

void write_costs_csv(const AgentEnsemble& e, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot open " + path + " for writing");
    outf << "agent_id,total_cost,absorbed,absorption_time\n";
    char buf[128];
    for (int i = 0; i < e.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%.17g\n", i, e.accumulated_cost[i],
                      e.alive[i] ? 0 : 1, e.absorption_time[i]);
        outf << buf;
    }
}

}  // namespace cmfg
