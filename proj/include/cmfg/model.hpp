#pragma once

#include <string>
#include <vector>

#include "cmfg/grid.hpp"

namespace cmfg {

enum class PhiVariant { plus, minus };

/// Volatility squared: a constant, or a smooth in-domain bump
/// base + amp * 256 * [x(1-x)y(1-y)]^2 which is C^1-flat at the boundary.
/// Solvers freeze the variable profile to `base` in a collar of width
/// 2h near the boundary so the constant-trace assumption holds there.
struct SigmaSpec {
    bool variable = false;
    double base = 0.2;
    double amp = 0.0;

    double at(double x, double y, double collar = 0.0) const;
};

/// Income c(x,y,t) = p(y,t) + q(x,y,t) with lawful salary p = p0(1+y)(1+rt)
/// and unlawful income q = q0 x(1+y); both increase in every argument.
struct IncomeSpec {
    double p0 = 0.2;
    double q0 = 0.2;
    double r = 0.1;

    double at(double x, double y, double t) const {
        return p0 * (1.0 + y) * (1.0 + r * t) + q0 * x * (1.0 + y);
    }
};

/// Terminal payoff Psi as a quadratic form in (x,y). Added to the minimized
/// cost with a plus sign, taking the cost functional literally. The default
/// c0 + cxx x^2 has zero normal derivative on the reflecting faces, so the
/// terminal data is compatible with the Neumann condition there.
struct PsiSpec {
    double c0 = 0.1;
    double cx = 0.0;
    double cy = 0.0;
    double cxx = 0.3;
    double cyy = 0.0;

    double at(double x, double y) const {
        return c0 + cx * x + cy * y + cxx * x * x + cyy * y * y;
    }
};

struct ModelParams {
    double a = 1.0, b = 1.0;    // gains in phi1, phi2
    double p1 = 0.5, p2 = 0.5;  // cross couplings in phi1, phi2
    PhiVariant variant = PhiVariant::plus;
    double a0 = 1.0, b0 = 1.0;  // control cost coefficients (constant)
    SigmaSpec sigma1_sq, sigma2_sq;
    double epsilon = 0.1;
    double g_a1 = 0.01, g_b1 = 0.01;  // weights of the quadratic g
    IncomeSpec income;
    PsiSpec psi;
    double T = 2.0;

    double phi1(double x, double y) const;
    double phi2(double x, double y) const;
    double g(double u, double v) const { return 0.5 * g_a1 * u * u + 0.5 * g_b1 * v * v; }
    double psi_at(double x, double y) const { return psi.at(x, y); }
    double income_at(double x, double y, double t) const { return income.at(x, y, t); }

    /// sigma0 with sigma^2 >= 2 sigma0 everywhere; D bounds the C^1 norms.
    double sigma0() const;
    double c1_bound_D() const;

    ScalarField sigma1_sq_field(const Grid& g) const;
    ScalarField sigma2_sq_field(const Grid& g) const;

    void validate() const;  // throws std::invalid_argument naming the field
};

/// Mean-field averages: mbar_y[ix] is the epsilon-damped mean position held
/// by agents at corruption level x, mbar_x[iy] the mean corruption level of
/// agents at hierarchy position y.
struct MeanFields {
    std::vector<double> mbar_y;
    std::vector<double> mbar_x;
};

double running_cost_h(double alpha, double beta, const ModelParams& p);
MeanFields mean_fields(const ScalarField& m, const ModelParams& p);
double coupling_G(double x, double y, const ScalarField& m, const ModelParams& p);
ScalarField coupling_field(const ScalarField& m, const ModelParams& p);
double coupling_lipschitz_bound(const ScalarField& m1, const ScalarField& m2,
                                const ModelParams& p);

struct Controls {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Feedback controls alpha = -(phi1/a0) u_x, beta = -(phi2/b0) u_y at a node.
Controls optimal_controls(const ScalarField& u, int ix, int iy, const ModelParams& p);
/// Same for a whole slice; returns (alpha, beta) fields.
std::pair<ScalarField, ScalarField> control_fields(const ScalarField& u, const ModelParams& p);

double hamiltonian(double x, double y, double t, const ScalarField& m, double pc1, double pc2,
                   double alpha, double beta, const ModelParams& p);

}  // namespace cmfg
