#pragma once

#include <cstdint>
#include <vector>

#include "cmfg/grid.hpp"
#include "cmfg/model.hpp"
#include "cmfg/solvers.hpp"

namespace cmfg {

/// Terminal data perturbed by a band-limited cosine series scaled to a
/// prescribed H1 error level delta (independent draws for u and m).
struct NoisySnapshot {
    ScalarField u_T_noisy;
    ScalarField m_T_noisy;
    double delta = 0.0;
    uint64_t seed = 0;
};

NoisySnapshot make_noisy_snapshot(const ScalarField& u_T, const ScalarField& m_T, double delta,
                                  uint64_t seed);

struct RetroConfig {
    double gamma = 1.25;          // window Q_{gamma T}; 1 < gamma < T
    double tikhonov_alpha = -1.0; // < 0 means auto: alpha = delta^2
    int cg_iters = 400;
    int outer_iters = 8;
    double s1_hat = 2.0;          // exponent guess in the lambda(delta) schedule

    bool alpha_auto() const { return tikhonov_alpha < 0.0; }
    void validate(double T) const;
};

ScalarField add_noise(const ScalarField& f_true, double delta, uint64_t seed);

/// lambda(delta) = ln(delta^-alpha), alpha = 1/(3 (T+2)^{s1}); admissible for
/// 0 < delta <= exp(-1/alpha) so that lambda >= 1.
double lambda_of_delta(double delta, double T, double s1_hat);

struct CgInfo {
    int iters = 0;
    double rel_residual = 1.0;
    bool stagnated = false;
};

/// Tikhonov-regularized least squares for the initial density:
///   min || F m0 - m_T ||_{L2}^2 + alpha || m0 ||_{H1}^2
/// solved by CG on the normal equations with the exact discrete adjoint of
/// the per-step FP operators.
std::vector<double> solve_tikhonov_m0(const FpStepOperators& ops, const ScalarField& m_T_target,
                                      double alpha_reg, int cg_iters, CgInfo* info);

struct RetroResult {
    SpaceTimeField u;
    SpaceTimeField m;
    ScalarField m0;
    int outer_iterations = 0;
    std::vector<double> outer_residuals;
    bool converged = false;
    CgInfo cg;
    double u_c2_norm = 0.0;  // monitored, not enforced
    double m_c1_norm = 0.0;
};

RetroResult reconstruct(const ScalarField& u_T_noisy, const ScalarField& m_T_noisy,
                        const ModelParams& p, const TimeGrid& time, const SolverConfig& scfg,
                        const RetroConfig& rcfg, double delta = 0.0,
                        const ScalarField* m0_init = nullptr);

/// The eight L2(Q_{gamma T}) reconstruction-error norms of the stability
/// estimate: u_t, u_xx, u_xy, u_yy, grad u, u for the value function and
/// grad m, m for the density.
struct ErrorNorms {
    double ut = 0, uxx = 0, uxy = 0, uyy = 0, grad_u = 0, u = 0, grad_m = 0, m = 0;
    double total() const { return ut + uxx + uxy + uyy + grad_u + u + grad_m + m; }
};

ErrorNorms window_error_norms(const SpaceTimeField& du, const SpaceTimeField& dm, double gamma);

struct StabilityRecord {
    double delta = 0.0;
    uint64_t seed = 0;
    ErrorNorms norms;
    double total = 0.0;
    bool converged = false;
    bool cg_stagnated = false;
    double u_c2_norm = 0.0;
    double m_c1_norm = 0.0;
    // filled only when the experiment is asked to keep fields
    SpaceTimeField u_rec, m_rec;
    ScalarField m0_rec;
};

struct StabilityOutcome {
    std::vector<StabilityRecord> records;
    double rho_emp = 0.0;
    bool fit_ok = false;
    MFGSolution truth;
};

/// Smooth unit-mass bump used as the experiments' ground-truth m0.
ScalarField default_m0(const Grid& g);

/// Band-limited nonnegative unit-mass m0 built from the low absorbing /
/// reflecting eigenmodes; its content survives the forward smoothing, so
/// noiseless reconstruction is discretization-limited rather than
/// regularization-limited.
ScalarField bandlimited_m0(const Grid& g);

StabilityOutcome stability_experiment(const ModelParams& p, const SolverConfig& scfg,
                                      const RetroConfig& rcfg, const Grid& grid,
                                      const TimeGrid& time, const std::vector<double>& deltas,
                                      const std::vector<uint64_t>& seeds,
                                      bool keep_fields = false);

}  // namespace cmfg
