#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/model.hpp"

namespace cmfg {

enum class BoundaryMode {
    absorbing,   // Dirichlet on Gamma0 = {x=1} (u = Psi trace, m = 0), Neumann on Gamma1
    all_neumann  // Neumann everywhere; test variant for conservation checks
};

struct SolverConfig {
    int max_picard_iters = 30;
    double picard_tol = 1e-6;
    double damping = 0.5;  // theta in (0,1]
    std::string scheme = "imex-lie";
    BoundaryMode bc = BoundaryMode::absorbing;

    void validate() const;
};

struct SolveFlags {
    bool cfl_warning = false;
    bool negativity_violation = false;
};

struct MFGSolution {
    SpaceTimeField u;
    SpaceTimeField m;
    int iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;
    std::vector<double> mass_history;
    SolveFlags flags;
};

/// Thrown when a march produces a non-finite value; carries the step index.
struct SolverBlowup : std::runtime_error {
    int step;
    explicit SolverBlowup(int k)
        : std::runtime_error("solver blow-up at time step " + std::to_string(k)), step(k) {}
};

/// Tridiagonal sweeps along one axis of the 2-D grid for (I - dt*D).
/// Rows are independent lines; Thomas solve per line. The transpose solve
/// swaps sub- and super-diagonals (used by the discrete adjoint).
struct AxisSolve {
    int axis = 0;  // 0: lines along x, 1: lines along y
    int nx = 0, ny = 0;
    std::vector<double> sub, dia, sup;  // per node, in field layout

    void solve(std::vector<double>& rhs) const;
    void solve_transpose(std::vector<double>& rhs) const;
};

/// Explicit 5-point update m* = S m (identity + upwinded advection fluxes).
struct Stencil5 {
    int nx = 0, ny = 0;
    std::vector<double> cc, cw, ce, cs, cn;

    void apply(const std::vector<double>& x, std::vector<double>& y) const;
    void apply_transpose(const std::vector<double>& x, std::vector<double>& y) const;
};

/// One forward step of the Fokker-Planck scheme is
///   m_{k+1} = diff_y.solve( diff_x.solve( adv[k].apply(m_k) ) ).
/// Retro reuses these operators and their exact transposes.
struct FpStepOperators {
    Grid grid;
    TimeGrid time;
    std::vector<Stencil5> adv;  // nt-1 entries
    AxisSolve diff_x, diff_y;
    double max_cfl = 0.0;  // max over steps of dt*(|v1|/hx + |v2|/hy)
};

FpStepOperators fp_build_operators(const SpaceTimeField& u, const ModelParams& p,
                                   BoundaryMode bc);
SpaceTimeField fp_apply_all(const FpStepOperators& ops, const ScalarField& m0);
std::vector<double> fp_apply_final(const FpStepOperators& ops, std::vector<double> m0);
std::vector<double> fp_apply_adjoint(const FpStepOperators& ops, std::vector<double> wT);

/// Backward HJB march: diffusion implicit per axis, the quadratic gradient
/// terms and sources explicit from the later level. u = Psi trace on
/// Gamma0, homogeneous Neumann on Gamma1.
SpaceTimeField solve_hjb_backward(const ScalarField& u_T, const SpaceTimeField& m,
                                  const ModelParams& p,
                                  BoundaryMode bc = BoundaryMode::absorbing,
                                  SolveFlags* flags = nullptr);

/// Forward Fokker-Planck march with advection velocity
/// (-phi1^2 u_x / a0, -phi2^2 u_y / b0), donor-cell upwinded, diffusion
/// implicit in (sigma^2 m) form. m = 0 on Gamma0, Neumann on Gamma1.
SpaceTimeField solve_fp_forward(const ScalarField& m0, const SpaceTimeField& u,
                                const ModelParams& p,
                                BoundaryMode bc = BoundaryMode::absorbing,
                                SolveFlags* flags = nullptr);

/// Damped Picard coupling of the two marches.
MFGSolution solve_mfg(const ScalarField& m0, const ScalarField& u_T, const ModelParams& p,
                      const Grid& grid, const TimeGrid& time, const SolverConfig& cfg);

}  // namespace cmfg
