#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cmfg/model.hpp"

namespace cmfg {

/// Parameters of the Carleman weight  phi_{lambda,s}(t) = exp(lambda (t+2)^s).
struct CarlemanParams {
    double lambda = 1.0;  // >= 1
    double s = 2.0;       // > 1

    void validate() const;
};

/// Raw weight value; rejects lambda (t+2)^s > 700 (callers work in log space).
double cwf(double t, const CarlemanParams& cp);

enum class TimeFactor { one, linear, exp_neg, exp_pos, sine, one_plus_t };

/// Separable member of H_0^{2,1}(Q_T):
///   u = A cos((k+1/2) pi x) cos(j pi y) tau(t)
/// The x-factor vanishes on Gamma0 = {x=1} and has zero derivative at x=0;
/// the y-factor has zero derivative at y=0 and y=1.
struct TestFunction {
    int dim = 2;
    int k = 0;
    int j = 0;
    TimeFactor tau = TimeFactor::one;
    double amplitude = 1.0;

    double kappa() const;  // (k+1/2) pi
    double nu() const;     // j pi

    double w(double x, double y) const;
    double wx(double x, double y) const;
    double wy(double x, double y) const;
    double wxx(double x, double y) const;
    double wxy(double x, double y) const;
    double wyy(double x, double y) const;

    double tau_val(double t) const;
    double tau_dt(double t) const;
};

std::vector<TestFunction> make_suite(int size, int dim, uint64_t seed);

/// Diagonal elliptic operator, either divergence form (a1 u_x)_x + (a2 u_y)_y
/// or principal form a1 u_xx + a2 u_yy (the L0 of the retrospective problem).
struct DiagOperator {
    std::function<double(double, double)> a1, a2;
    std::function<double(double, double)> a1_dx, a2_dy;  // needed in divergence form
    bool divergence_form = true;
    double mu1 = 0.0, mu2 = 0.0;  // ellipticity bounds

    double apply(const TestFunction& tf, double x, double y) const;  // L(space part)
};

DiagOperator make_constant_operator(double c1, double c2);
DiagOperator make_variable_test_operator();
DiagOperator make_sigma_operator(const ModelParams& p);  // L0 = s1^2/2 dxx + s2^2/2 dyy

struct QuadratureSpec {
    int n_space = 385;
    int min_nt = 4001;
    double r_step = 0.005;  // step of the log-weight substitution grid
    double r_cut = 45.0;    // weight truncation depth exp(-r_cut)
    bool refinement_check = true;
};

/// One verification cell. Every weighted integral is normalized by
/// exp(-2 lambda (T+2)^s), a positive common factor, so margins keep their
/// sign and nothing overflows. Terminal-weight variants per the two readings
/// of the final gradient term: W_T = 2 lambda (T+2)^s (margin) and
/// W_T = 2 lambda (T+2)^2 (margin_alt).
struct CarlemanReport {
    double lambda = 0.0, s = 0.0;
    bool valid = true;

    double lhs = 0.0;           // integral of (u_t +- Lu)^2 phi^2
    double rhs_ut = 0.0;        // (1/4) u_t^2 term
    double rhs_Lu = 0.0;        // (Lu)^2 term
    double rhs_u2 = 0.0;        // (1/2) lambda^2 s^2 (t+2)^{2s-2} u^2 term
    double rhs_grad = 0.0;      // mu1 sqrt(s) |grad u|^2 term (Thm 5.2)
    double dropped_grad = 0.0;  // lambda s (t+2)^{s-1} |grad u|^2  (C-term shape, 5.1)
    double dropped_u2 = 0.0;    // lambda s^2 (t+2)^{s-1} u^2      (C-term shape, 5.2)
    double hess_block = 0.0;    // u_xx^2 + u_xy^2 + u_yy^2 block   (7.1)
    double allow_uT = 0.0;      // terminal u^2 allowance
    double allow_gradT = 0.0;   // terminal gradient allowance, W_T = 2l(T+2)^s
    double allow_gradT_alt = 0.0;  // same with W_T = 2l(T+2)^2
    double allow_init = 0.0;    // initial-time allowance (Thm 5.2)

    double margin = 0.0;
    double margin_alt = 0.0;
    double empirical_C = 0.0;
    double scale = 0.0;  // magnitude used for the relative sign test
};

CarlemanReport check_thm51(const TestFunction& tf, const DiagOperator& L, const CarlemanParams& cp,
                           double T, const QuadratureSpec& quad = {});
CarlemanReport check_thm52(const TestFunction& tf, const DiagOperator& L, const CarlemanParams& cp,
                           double T, const QuadratureSpec& quad = {});
CarlemanReport check_thm71(const TestFunction& tf, const ModelParams& p, const CarlemanParams& cp,
                           const QuadratureSpec& quad = {});

enum class CarlemanTheorem { thm51, thm52, thm71 };

struct ScanCell {
    double lambda = 0.0, s = 0.0;
    double min_margin = 0.0;
    double min_margin_alt = 0.0;
    double min_empirical_C = 0.0;
    double min_rel_margin = 0.0;  // min over suite of margin / scale
    bool pass = false;            // min_rel_margin >= -1e-9, both variants
    bool all_valid = true;
};

struct ScanResult {
    std::vector<ScanCell> cells;
    double threshold_s = 0.0;  // least s with all cells passing from there on
    bool threshold_found = false;
    // per-cell per-member reports (cell-major) when requested
    std::vector<CarlemanReport> reports;
};

ScanResult scan_thresholds(const std::vector<TestFunction>& suite, CarlemanTheorem theorem,
                           const std::vector<double>& lambdas, const std::vector<double>& ss,
                           const DiagOperator& L, const ModelParams& p, double T,
                           const QuadratureSpec& quad = {}, bool keep_reports = false);

/// Both sides of the integration-by-parts identity exploited at (5.200):
///   int_{Q_T} 2 sum (a_ii v_{x_i})_{x_i} v_t dx dt
///     = [- int_Omega sum a_ii v_{x_i}^2 dx]_0^T
struct IbpSides {
    double lhs = 0.0;
    double rhs = 0.0;
};

IbpSides ibp_identity_sides(const TestFunction& tf, const DiagOperator& L, double T,
                            const QuadratureSpec& quad = {});

}  // namespace cmfg
