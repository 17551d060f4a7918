#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/model.hpp"
#include "cmfg/solvers.hpp"

namespace cmfg {

/// Particle states for the controlled SDE (2.6). Absorbed agents sit on
/// {x=1} with their stopping time recorded; alive ones stay in [0,1]^2.
struct AgentEnsemble {
    std::vector<double> x, y;
    std::vector<char> alive;
    std::vector<double> absorption_time;  // -1 while alive
    std::vector<double> accumulated_cost;
    uint64_t rng_seed = 0;

    static AgentEnsemble at_point(int n_agents, double x0, double y0, uint64_t seed);
    int size() const { return static_cast<int>(x.size()); }
    double alive_fraction() const;
};

enum class ControlMode { zero, feedback };

struct SimConfig {
    int n_agents = 1000;
    double dt_sim = 1e-3;
    uint64_t seed = 1;
    ControlMode control_mode = ControlMode::zero;
    BoundaryMode bc = BoundaryMode::absorbing;
    int record_levels = 65;  // used when no PDE field supplies a time grid

    void validate() const;
};

/// One Euler-Maruyama step with explicit per-agent controls. Reflection by
/// folding on Gamma1; crossing x >= 1 absorbs (position clamped to x = 1).
/// `step_index` feeds the counter-based noise stream.
void step_sde(AgentEnsemble& e, const std::vector<Controls>& controls, const ModelParams& p,
              double dt, double t_now, int step_index,
              BoundaryMode bc = BoundaryMode::absorbing);

struct SimStats {
    double mean_cost = 0.0;
    double std_error = 0.0;
    int absorbed = 0;
};

struct SimHistory {
    std::vector<double> times;                  // recorded levels
    std::vector<std::vector<double>> xs, ys;    // per level, per agent
    std::vector<std::vector<char>> alive;
    std::vector<double> alive_fraction;
};

struct SimResult {
    AgentEnsemble ensemble;
    SimStats stats;
    SimHistory history;
};

/// Run the SDE to T accumulating the cost functional (4.1) along each path.
/// Feedback mode reads controls from u (and the g-term averages from m when
/// given; m = null means the zero-density averages).
SimResult simulate(const AgentEnsemble& init, const SpaceTimeField* u, const SpaceTimeField* m,
                   const ModelParams& p, const SimConfig& cfg);

/// Gaussian-kernel density of alive agents per recorded level, normalized so
/// the spatial integral equals the alive fraction.
SpaceTimeField empirical_density(const SimHistory& hist, const Grid& grid, double bandwidth);

void write_paths_csv(const SimHistory& hist, const std::string& path);
void write_costs_csv(const AgentEnsemble& e, const std::string& path);

}  // namespace cmfg
