#include "cmfg/solvers.hpp"

#include <cmath>
#include <stdexcept>

namespace cmfg {

void SolverConfig::validate() const {
    if (!(picard_tol > 0.0)) throw std::invalid_argument("picard_tol must be > 0");
    if (!(damping > 0.0 && damping <= 1.0))
        throw std::invalid_argument("damping must be in (0,1]");
    if (max_picard_iters < 1) throw std::invalid_argument("max_picard_iters must be >= 1");
}

namespace {

// Thomas algorithm on one line; (a_i, b_i, c_i) couple x_{i-1}, x_i, x_{i+1}.
void thomas(const double* a, const double* b, const double* c, double* x, int n, int stride,
            std::vector<double>& cp, std::vector<double>& dp) {
    cp.resize(n);
    dp.resize(n);
    cp[0] = c[0] / b[0];
    dp[0] = x[0] / b[0];
    for (int i = 1; i < n; ++i) {
        double den = b[i * stride] - a[i * stride] * cp[i - 1];
        cp[i] = c[i * stride] / den;
        dp[i] = (x[i * stride] - a[i * stride] * dp[i - 1]) / den;
    }
    x[(n - 1) * stride] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i * stride] = dp[i] - cp[i] * x[(i + 1) * stride];
}

}  // namespace

void AxisSolve::solve(std::vector<double>& rhs) const {
    std::vector<double> cp, dp;
    if (axis == 0) {
        for (int iy = 0; iy < ny; ++iy) {
            int off = iy * nx;
            thomas(sub.data() + off, dia.data() + off, sup.data() + off, rhs.data() + off, nx, 1,
                   cp, dp);
        }
    } else {
        for (int ix = 0; ix < nx; ++ix) {
            thomas(sub.data() + ix, dia.data() + ix, sup.data() + ix, rhs.data() + ix, ny, nx, cp,
                   dp);
        }
    }
}

void AxisSolve::solve_transpose(std::vector<double>& rhs) const {
    // transpose of tridiag(sub, dia, sup) per line: sub'_i = sup_{i-1},
    // sup'_i = sub_{i+1}
    std::vector<double> a2, b2, c2, line, cp, dp;
    int n = (axis == 0) ? nx : ny;
    a2.resize(n);
    b2.resize(n);
    c2.resize(n);
    line.resize(n);
    auto run_line = [&](int off, int stride) {
        for (int i = 0; i < n; ++i) {
            a2[i] = (i > 0) ? sup[off + (i - 1) * stride] : 0.0;
            b2[i] = dia[off + i * stride];
            c2[i] = (i + 1 < n) ? sub[off + (i + 1) * stride] : 0.0;
            line[i] = rhs[off + i * stride];
        }
        thomas(a2.data(), b2.data(), c2.data(), line.data(), n, 1, cp, dp);
        for (int i = 0; i < n; ++i) rhs[off + i * stride] = line[i];
    };
    if (axis == 0) {
        for (int iy = 0; iy < ny; ++iy) run_line(iy * nx, 1);
    } else {
        for (int ix = 0; ix < nx; ++ix) run_line(ix, nx);
    }
}

void Stencil5::apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(x.size(), 0.0);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            int i = iy * nx + ix;
            double acc = cc[i] * x[i];
            if (ix > 0) acc += cw[i] * x[i - 1];
            if (ix + 1 < nx) acc += ce[i] * x[i + 1];
            if (iy > 0) acc += cs[i] * x[i - nx];
            if (iy + 1 < ny) acc += cn[i] * x[i + nx];
            y[i] = acc;
        }
}

void Stencil5::apply_transpose(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(x.size(), 0.0);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            int i = iy * nx + ix;
            double xi = x[i];
            y[i] += cc[i] * xi;
            if (ix > 0) y[i - 1] += cw[i] * xi;
            if (ix + 1 < nx) y[i + 1] += ce[i] * xi;
            if (iy > 0) y[i - nx] += cs[i] * xi;
            if (iy + 1 < ny) y[i + nx] += cn[i] * xi;
        }
}

namespace {

// (I - dt * 0.5 sigma^2 d^2/ds^2), non-conservative (HJB). Mirror ghost for
// Neumann ends; identity rows where `dirichlet` marks the node.
AxisSolve build_axis_hjb(const Grid& g, double dt, int axis, const ScalarField& sig_sq,
                         const std::vector<char>& dirichlet) {
    AxisSolve ax;
    ax.axis = axis;
    ax.nx = g.nx;
    ax.ny = g.ny;
    int nn = g.num_nodes();
    ax.sub.assign(nn, 0.0);
    ax.dia.assign(nn, 1.0);
    ax.sup.assign(nn, 0.0);
    int n = (axis == 0) ? g.nx : g.ny;
    double h = (axis == 0) ? g.hx : g.hy;
    double r = dt / (2.0 * h * h);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            int i = g.index(ix, iy);
            if (dirichlet[i]) continue;  // identity row
            int pos = (axis == 0) ? ix : iy;
            double s = sig_sq.at(ix, iy);
            if (pos == 0) {
                ax.dia[i] = 1.0 + 2.0 * r * s;
                ax.sup[i] = -2.0 * r * s;
            } else if (pos == n - 1) {
                ax.dia[i] = 1.0 + 2.0 * r * s;
                ax.sub[i] = -2.0 * r * s;
            } else {
                ax.dia[i] = 1.0 + 2.0 * r * s;
                ax.sub[i] = -r * s;
                ax.sup[i] = -r * s;
            }
        }
    return ax;
}

// (I - dt * 0.5 d^2(sigma^2 m)/ds^2), conservative flux form (FP). Zero
// diffusive flux through reflecting ends, identity rows at Dirichlet nodes.
AxisSolve build_axis_fp(const Grid& g, double dt, int axis, const ScalarField& sig_sq,
                        const std::vector<char>& dirichlet) {
    AxisSolve ax;
    ax.axis = axis;
    ax.nx = g.nx;
    ax.ny = g.ny;
    int nn = g.num_nodes();
    ax.sub.assign(nn, 0.0);
    ax.dia.assign(nn, 1.0);
    ax.sup.assign(nn, 0.0);
    int n = (axis == 0) ? g.nx : g.ny;
    double h = (axis == 0) ? g.hx : g.hy;
    double r = dt / (2.0 * h * h);
    auto q = [&](int ix, int iy) { return sig_sq.at(ix, iy); };
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            int i = g.index(ix, iy);
            if (dirichlet[i]) continue;
            int pos = (axis == 0) ? ix : iy;
            auto at_pos = [&](int pp) {
                return (axis == 0) ? q(pp, iy) : q(ix, pp);
            };
            if (pos == 0) {
                // half control volume; flux only through the right face
                ax.dia[i] = 1.0 + 2.0 * r * at_pos(0);
                ax.sup[i] = -2.0 * r * at_pos(1);
            } else if (pos == n - 1) {
                ax.dia[i] = 1.0 + 2.0 * r * at_pos(n - 1);
                ax.sub[i] = -2.0 * r * at_pos(n - 2);
            } else {
                ax.dia[i] = 1.0 + 2.0 * r * at_pos(pos);
                ax.sub[i] = -r * at_pos(pos - 1);
                ax.sup[i] = -r * at_pos(pos + 1);
            }
        }
    return ax;
}

std::vector<char> dirichlet_mask(const Grid& g, BoundaryMode bc) {
    std::vector<char> mask(g.num_nodes(), 0);
    if (bc == BoundaryMode::absorbing)
        for (int iy = 0; iy < g.ny; ++iy) mask[g.index(g.nx - 1, iy)] = 1;
    return mask;
}

}  // namespace

FpStepOperators fp_build_operators(const SpaceTimeField& u, const ModelParams& p,
                                   BoundaryMode bc) {
    const Grid& g = u.grid;
    const TimeGrid& tg = u.time;
    FpStepOperators ops;
    ops.grid = g;
    ops.time = tg;
    std::vector<char> mask = dirichlet_mask(g, bc);
    ScalarField s1 = p.sigma1_sq_field(g);
    ScalarField s2 = p.sigma2_sq_field(g);
    ops.diff_x = build_axis_fp(g, tg.dt, 0, s1, mask);
    ops.diff_y = build_axis_fp(g, tg.dt, 1, s2, mask);

    ops.adv.resize(tg.nt - 1);
    for (int k = 0; k + 1 < tg.nt; ++k) {
        // velocity (-phi1^2 u_x / a0, -phi2^2 u_y / b0) at the current level
        GradientField gr = gradient(u.slice(k));
        ScalarField v1(g), v2(g);
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                double x = g.x(ix), y = g.y(iy);
                double f1 = p.phi1(x, y), f2 = p.phi2(x, y);
                v1.at(ix, iy) = -f1 * f1 / p.a0 * gr.x.at(ix, iy);
                v2.at(ix, iy) = -f2 * f2 / p.b0 * gr.y.at(ix, iy);
            }
        Stencil5& st = ops.adv[k];
        st.nx = g.nx;
        st.ny = g.ny;
        int nn = g.num_nodes();
        st.cc.assign(nn, 1.0);
        st.cw.assign(nn, 0.0);
        st.ce.assign(nn, 0.0);
        st.cs.assign(nn, 0.0);
        st.cn.assign(nn, 0.0);
        double vmax1 = 0.0, vmax2 = 0.0;
        // donor-cell fluxes; per-node control volume width is h (interior)
        // or h/2 (boundary), matching the trapezoid mass
        auto wx = [&](int ix) { return (ix == 0 || ix == g.nx - 1) ? 0.5 * g.hx : g.hx; };
        auto wy = [&](int iy) { return (iy == 0 || iy == g.ny - 1) ? 0.5 * g.hy : g.hy; };
        // x faces between (ix, iy) and (ix+1, iy); face flux F = v_f * m_up
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix + 1 < g.nx; ++ix) {
                double vf = 0.5 * (v1.at(ix, iy) + v1.at(ix + 1, iy));
                vmax1 = std::max(vmax1, std::fabs(vf));
                int iL = g.index(ix, iy), iR = g.index(ix + 1, iy);
                // outflow from the upwind node, inflow to the other
                if (vf >= 0.0) {
                    st.cc[iL] -= tg.dt * vf / wx(ix);
                    st.cw[iR] += tg.dt * vf / wx(ix + 1);
                } else {
                    st.ce[iL] -= tg.dt * vf / wx(ix);
                    st.cc[iR] += tg.dt * vf / wx(ix + 1);
                }
            }
        for (int iy = 0; iy + 1 < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                double vf = 0.5 * (v2.at(ix, iy) + v2.at(ix, iy + 1));
                vmax2 = std::max(vmax2, std::fabs(vf));
                int iS = g.index(ix, iy), iN = g.index(ix, iy + 1);
                if (vf >= 0.0) {
                    st.cc[iS] -= tg.dt * vf / wy(iy);
                    st.cs[iN] += tg.dt * vf / wy(iy + 1);
                } else {
                    st.cn[iS] -= tg.dt * vf / wy(iy);
                    st.cc[iN] += tg.dt * vf / wy(iy + 1);
                }
            }
        // Dirichlet rows force m = 0 on Gamma0
        for (int i = 0; i < nn; ++i)
            if (mask[i]) {
                st.cc[i] = 0.0;
                st.cw[i] = st.ce[i] = st.cs[i] = st.cn[i] = 0.0;
            }
        ops.max_cfl = std::max(ops.max_cfl, tg.dt * (vmax1 / g.hx + vmax2 / g.hy));
    }
    return ops;
}

SpaceTimeField fp_apply_all(const FpStepOperators& ops, const ScalarField& m0) {
    SpaceTimeField m(ops.grid, ops.time);
    m.set_slice(0, m0);
    std::vector<double> cur = m0.v, tmp;
    for (int k = 0; k + 1 < ops.time.nt; ++k) {
        ops.adv[k].apply(cur, tmp);
        ops.diff_x.solve(tmp);
        ops.diff_y.solve(tmp);
        cur = tmp;
        if (!all_finite(cur)) throw SolverBlowup(k + 1);
        std::copy(cur.begin(), cur.end(), m.slice_data(k + 1));
    }
    return m;
}

std::vector<double> fp_apply_final(const FpStepOperators& ops, std::vector<double> m0) {
    std::vector<double> tmp;
    for (int k = 0; k + 1 < ops.time.nt; ++k) {
        ops.adv[k].apply(m0, tmp);
        ops.diff_x.solve(tmp);
        ops.diff_y.solve(tmp);
        m0.swap(tmp);
    }
    return m0;
}

std::vector<double> fp_apply_adjoint(const FpStepOperators& ops, std::vector<double> wT) {
    std::vector<double> tmp;
    for (int k = ops.time.nt - 2; k >= 0; --k) {
        ops.diff_y.solve_transpose(wT);
        ops.diff_x.solve_transpose(wT);
        ops.adv[k].apply_transpose(wT, tmp);
        wT.swap(tmp);
    }
    return wT;
}

SpaceTimeField solve_fp_forward(const ScalarField& m0, const SpaceTimeField& u,
                                const ModelParams& p, BoundaryMode bc, SolveFlags* flags) {
    for (double v : m0.v)
        if (v < 0.0) throw std::invalid_argument("solve_fp_forward: m0 must be >= 0");
    FpStepOperators ops = fp_build_operators(u, p, bc);
    SpaceTimeField m = fp_apply_all(ops, m0);
    if (flags) {
        if (ops.max_cfl > 1.0) flags->cfl_warning = true;
        double scale = sup_abs(m0.v);
        double floor = -1e-8 * std::max(scale, 1e-30);
        for (double v : m.v)
            if (v < floor) {
                flags->negativity_violation = true;
                break;
            }
    }
    return m;
}

SpaceTimeField solve_hjb_backward(const ScalarField& u_T, const SpaceTimeField& m,
                                  const ModelParams& p, BoundaryMode bc, SolveFlags* flags) {
    const Grid& g = u_T.grid;
    const TimeGrid& tg = m.time;
    for (double v : m.v)
        if (v < 0.0) throw std::invalid_argument("solve_hjb_backward: m must be >= 0");
    std::vector<char> mask = dirichlet_mask(g, bc);
    ScalarField s1 = p.sigma1_sq_field(g);
    ScalarField s2 = p.sigma2_sq_field(g);
    AxisSolve ax = build_axis_hjb(g, tg.dt, 0, s1, mask);
    AxisSolve ay = build_axis_hjb(g, tg.dt, 1, s2, mask);

    SpaceTimeField u(g, tg);
    u.set_slice(tg.nt - 1, u_T);
    std::vector<double> cur = u_T.v;
    double max_cfl = 0.0;
    for (int k = tg.nt - 2; k >= 0; --k) {
        // explicit part from the later level: quadratic gradient terms,
        // income and coupling at the target time t_k
        ScalarField uk1(g);
        uk1.v = cur;
        GradientField gr = gradient(uk1);
        ScalarField G = coupling_field(m.slice(k), p);
        double t = tg.t(k);
        std::vector<double> rhs(g.num_nodes());
        double vmax1 = 0.0, vmax2 = 0.0;
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                int i = g.index(ix, iy);
                double x = g.x(ix), y = g.y(iy);
                double f1 = p.phi1(x, y), f2 = p.phi2(x, y);
                double ux = gr.x.at(ix, iy), uy = gr.y.at(ix, iy);
                double nq = f1 * f1 / (2.0 * p.a0) * ux * ux + f2 * f2 / (2.0 * p.b0) * uy * uy;
                rhs[i] = cur[i] - tg.dt * (nq + p.income_at(x, y, t) - G.at(ix, iy));
                vmax1 = std::max(vmax1, std::fabs(f1 * f1 / p.a0 * ux));
                vmax2 = std::max(vmax2, std::fabs(f2 * f2 / p.b0 * uy));
            }
        max_cfl = std::max(max_cfl, tg.dt * (vmax1 / g.hx + vmax2 / g.hy));
        // Dirichlet trace u = Psi(1, y) on Gamma0, then the two sweeps
        if (bc == BoundaryMode::absorbing)
            for (int iy = 0; iy < g.ny; ++iy)
                rhs[g.index(g.nx - 1, iy)] = p.psi_at(1.0, g.y(iy));
        ax.solve(rhs);
        if (bc == BoundaryMode::absorbing)
            for (int iy = 0; iy < g.ny; ++iy)
                rhs[g.index(g.nx - 1, iy)] = p.psi_at(1.0, g.y(iy));
        ay.solve(rhs);
        cur = rhs;
        if (!all_finite(cur)) throw SolverBlowup(k);
        std::copy(cur.begin(), cur.end(), u.slice_data(k));
    }
    if (flags && max_cfl > 1.0) flags->cfl_warning = true;
    return u;
}

MFGSolution solve_mfg(const ScalarField& m0, const ScalarField& u_T, const ModelParams& p,
                      const Grid& grid, const TimeGrid& time, const SolverConfig& cfg) {
    cfg.validate();
    if (!all_finite(u_T.v)) throw std::invalid_argument("solve_mfg: u_T must be finite");
    MFGSolution sol;
    SpaceTimeField zero_u(grid, time);
    // m^(0) from pure diffusion
    SpaceTimeField m_prev = solve_fp_forward(m0, zero_u, p, cfg.bc, &sol.flags);
    SpaceTimeField u_prev;
    bool have_u = false;
    for (int it = 1; it <= cfg.max_picard_iters; ++it) {
        SpaceTimeField u_new = solve_hjb_backward(u_T, m_prev, p, cfg.bc, &sol.flags);
        SpaceTimeField m_hat = solve_fp_forward(m0, u_new, p, cfg.bc, &sol.flags);
        SpaceTimeField m_new = m_hat;
        for (size_t i = 0; i < m_new.v.size(); ++i)
            m_new.v[i] = cfg.damping * m_hat.v[i] + (1.0 - cfg.damping) * m_prev.v[i];
        double resid = sup_diff(m_new.v, m_prev.v);
        if (have_u) resid += sup_diff(u_new.v, u_prev.v);
        sol.residual_history.push_back(resid);
        sol.iterations = it;
        u_prev = u_new;
        have_u = true;
        m_prev = m_new;
        if (resid < cfg.picard_tol) {
            sol.converged = true;
            break;
        }
    }
    sol.u = u_prev;
    sol.m = m_prev;
    sol.mass_history.resize(time.nt);
    for (int k = 0; k < time.nt; ++k) sol.mass_history[k] = integrate_space(sol.m.slice(k));
    return sol;
}

}  // namespace cmfg
