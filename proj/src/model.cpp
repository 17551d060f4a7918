#include "cmfg/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfg {

double SigmaSpec::at(double x, double y, double collar) const {
    if (!variable) return base;
    if (collar > 0.0 &&
        (x < collar || x > 1.0 - collar || y < collar || y > 1.0 - collar))
        return base;
    double bump = x * (1.0 - x) * y * (1.0 - y);
    return base + amp * 256.0 * bump * bump;
}

double ModelParams::phi1(double x, double y) const {
    double cross = (variant == PhiVariant::plus) ? p1 * y : -p1 * y;
    return a * x * ((1.0 - x) + cross);
}

double ModelParams::phi2(double x, double y) const {
    double cross = (variant == PhiVariant::plus) ? p2 * x : -p2 * x;
    return b * y * ((1.0 - y) + cross);
}

double ModelParams::sigma0() const {
    double lo = std::min(sigma1_sq.base, sigma2_sq.base);
    // the variable bump is nonnegative, so the base is the minimum
    return 0.5 * lo;
}

double ModelParams::c1_bound_D() const {
    // crude numeric bound on max(|sigma^2|, |grad sigma^2|) over the square
    double D = 0.0;
    const int n = 101;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            double x = ix / double(n - 1), y = iy / double(n - 1);
            for (const SigmaSpec* s : {&sigma1_sq, &sigma2_sq}) {
                D = std::max(D, std::fabs(s->at(x, y)));
                if (s->variable) {
                    double h = 1e-5;
                    double gx = (s->at(std::min(x + h, 1.0), y) - s->at(std::max(x - h, 0.0), y)) /
                                (std::min(x + h, 1.0) - std::max(x - h, 0.0));
                    double gy = (s->at(x, std::min(y + h, 1.0)) - s->at(x, std::max(y - h, 0.0))) /
                                (std::min(y + h, 1.0) - std::max(y - h, 0.0));
                    D = std::max(D, std::hypot(gx, gy));
                }
            }
        }
    return D;
}

ScalarField ModelParams::sigma1_sq_field(const Grid& g) const {
    double collar = 2.0 * std::max(g.hx, g.hy);
    return ScalarField::sample(g, [&](double x, double y) { return sigma1_sq.at(x, y, collar); });
}

ScalarField ModelParams::sigma2_sq_field(const Grid& g) const {
    double collar = 2.0 * std::max(g.hx, g.hy);
    return ScalarField::sample(g, [&](double x, double y) { return sigma2_sq.at(x, y, collar); });
}

namespace {

void require_pos(double v, const char* name) {
    if (!(v > 0.0))
        throw std::invalid_argument(std::string(name) + " must be > 0");
}

}  // namespace

void ModelParams::validate() const {
    require_pos(a, "a");
    require_pos(b, "b");
    require_pos(p1, "p1");
    require_pos(p2, "p2");
    require_pos(a0, "a0");
    require_pos(b0, "b0");
    require_pos(epsilon, "epsilon");
    require_pos(g_a1, "g_a1");
    require_pos(g_b1, "g_b1");
    require_pos(T, "T");
    if (!(sigma1_sq.base > 0.0)) throw std::invalid_argument("sigma1_sq must be > 0 everywhere");
    if (!(sigma2_sq.base > 0.0)) throw std::invalid_argument("sigma2_sq must be > 0 everywhere");
    if (sigma1_sq.amp < 0.0 || sigma2_sq.amp < 0.0)
        throw std::invalid_argument("sigma amp must be >= 0");
}

double running_cost_h(double alpha, double beta, const ModelParams& p) {
    return 0.5 * p.a0 * alpha * alpha + 0.5 * p.b0 * beta * beta;
}

MeanFields mean_fields(const ScalarField& m, const ModelParams& p) {
    const Grid& g = m.grid;
    if (g.dim != 2) throw std::invalid_argument("mean_fields: needs a 2-D field");
    for (double v : m.v)
        if (v < 0.0) throw std::invalid_argument("mean_fields: m must be >= 0");
    MeanFields out;
    out.mbar_y.resize(g.nx);
    out.mbar_x.resize(g.ny);
    // averages along one axis by trapezoid
    for (int ix = 0; ix < g.nx; ++ix) {
        double num = 0.0, den = 0.0;
        for (int iy = 0; iy < g.ny; ++iy) {
            double w = (iy == 0 || iy == g.ny - 1) ? 0.5 : 1.0;
            num += w * g.y(iy) * m.at(ix, iy);
            den += w * m.at(ix, iy);
        }
        out.mbar_y[ix] = (num * g.hy) / (p.epsilon + den * g.hy);
    }
    for (int iy = 0; iy < g.ny; ++iy) {
        double num = 0.0, den = 0.0;
        for (int ix = 0; ix < g.nx; ++ix) {
            double w = (ix == 0 || ix == g.nx - 1) ? 0.5 : 1.0;
            num += w * g.x(ix) * m.at(ix, iy);
            den += w * m.at(ix, iy);
        }
        out.mbar_x[iy] = (num * g.hx) / (p.epsilon + den * g.hx);
    }
    return out;
}

double coupling_G(double x, double y, const ScalarField& m, const ModelParams& p) {
    MeanFields mf = mean_fields(m, p);
    const Grid& g = m.grid;
    // nearest node lookup; callers evaluate at grid nodes
    int ix = static_cast<int>(std::lround(x * (g.nx - 1)));
    int iy = static_cast<int>(std::lround(y * (g.ny - 1)));
    return p.g(x - mf.mbar_y[ix], y - mf.mbar_x[iy]);
}

ScalarField coupling_field(const ScalarField& m, const ModelParams& p) {
    MeanFields mf = mean_fields(m, p);
    const Grid& g = m.grid;
    ScalarField out(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            out.at(ix, iy) = p.g(g.x(ix) - mf.mbar_y[ix], g.y(iy) - mf.mbar_x[iy]);
    return out;
}

double coupling_lipschitz_bound(const ScalarField& m1, const ScalarField& m2,
                                const ModelParams& p) {
    MeanFields f1 = mean_fields(m1, p);
    MeanFields f2 = mean_fields(m2, p);
    const Grid& g = m1.grid;
    double worst = 0.0;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            double x = g.x(ix), y = g.y(iy);
            double g1 = p.g(x - f1.mbar_y[ix], y - f1.mbar_x[iy]);
            double g2 = p.g(x - f2.mbar_y[ix], y - f2.mbar_x[iy]);
            double den = std::fabs(f1.mbar_y[ix] - f2.mbar_y[ix]) +
                         std::fabs(f1.mbar_x[iy] - f2.mbar_x[iy]);
            if (den > 1e-12) worst = std::max(worst, std::fabs(g1 - g2) / den);
        }
    return worst;
}

Controls optimal_controls(const ScalarField& u, int ix, int iy, const ModelParams& p) {
    GradientField gr = gradient(u);
    Controls c;
    double x = u.grid.x(ix), y = u.grid.y(iy);
    c.alpha = -p.phi1(x, y) / p.a0 * gr.x.at(ix, iy);
    c.beta = -p.phi2(x, y) / p.b0 * gr.y.at(ix, iy);
    return c;
}

std::pair<ScalarField, ScalarField> control_fields(const ScalarField& u, const ModelParams& p) {
    GradientField gr = gradient(u);
    const Grid& g = u.grid;
    ScalarField alpha(g), beta(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            double x = g.x(ix), y = g.y(iy);
            alpha.at(ix, iy) = -p.phi1(x, y) / p.a0 * gr.x.at(ix, iy);
            beta.at(ix, iy) = -p.phi2(x, y) / p.b0 * gr.y.at(ix, iy);
        }
    return {alpha, beta};
}

double hamiltonian(double x, double y, double t, const ScalarField& m, double pc1, double pc2,
                   double alpha, double beta, const ModelParams& p) {
    return alpha * p.phi1(x, y) * pc1 + beta * p.phi2(x, y) * pc2 - p.income_at(x, y, t) +
           running_cost_h(alpha, beta, p) + coupling_G(x, y, m, p);
}

}  // namespace cmfg
