#include "cmfg/retro.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cmfg/rng.hpp"

namespace cmfg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void RetroConfig::validate(double T) const {
    if (!(gamma > 1.0 && gamma < T))
        throw std::invalid_argument("gamma must lie in (1, T); the window needs T > 1");
    if (cg_iters < 1) throw std::invalid_argument("cg_iters must be >= 1");
    if (outer_iters < 1) throw std::invalid_argument("outer_iters must be >= 1");
    if (!(s1_hat > 0.0)) throw std::invalid_argument("s1_hat must be > 0");
}

ScalarField add_noise(const ScalarField& f_true, double delta, uint64_t seed) {
    if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
    if (delta == 0.0) return f_true;
    const Grid& g = f_true.grid;
    const int kmax = 6;
    std::vector<double> coef((kmax + 1) * (kmax + 1));
    for (int k = 0; k <= kmax; ++k)
        for (int j = 0; j <= kmax; ++j) coef[k * (kmax + 1) + j] = normal(seed, k, j);
    ScalarField eta = ScalarField::sample(g, [&](double x, double y) {
        double v = 0.0;
        for (int k = 0; k <= kmax; ++k)
            for (int j = 0; j <= kmax; ++j)
                v += coef[k * (kmax + 1) + j] * std::cos(k * kPi * x) * std::cos(j * kPi * y);
        return v;
    });
    double nrm = h1_norm(eta);
    double scale = delta / nrm;
    ScalarField out = f_true;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += scale * eta.v[i];
    return out;
}

NoisySnapshot make_noisy_snapshot(const ScalarField& u_T, const ScalarField& m_T, double delta,
                                  uint64_t seed) {
    NoisySnapshot s;
    s.delta = delta;
    s.seed = seed;
    s.u_T_noisy = add_noise(u_T, delta, seed);
    s.m_T_noisy = add_noise(m_T, delta, splitmix64(seed + 1));
    return s;
}

double lambda_of_delta(double delta, double T, double s1_hat) {
    double alpha = 1.0 / (3.0 * std::pow(T + 2.0, s1_hat));
    double bound = std::exp(-1.0 / alpha);
    if (!(delta > 0.0) || delta > bound * (1.0 + 1e-12))
        throw std::invalid_argument("delta outside the admissible range (0, " +
                                    std::to_string(bound) + "]");
    return -alpha * std::log(delta);
}

namespace {

std::vector<double> trapezoid_weights(const Grid& g) {
    std::vector<double> w(g.num_nodes());
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            double wx = ((ix == 0 || ix == g.nx - 1) ? 0.5 : 1.0) * g.hx;
            double wy = ((iy == 0 || iy == g.ny - 1) ? 0.5 : 1.0) * g.hy;
            w[g.index(ix, iy)] = wx * wy;
        }
    return w;
}

// first-derivative operator along an axis and its exact transpose
void apply_d(const Grid& g, int axis, const std::vector<double>& v, std::vector<double>& out) {
    out.assign(v.size(), 0.0);
    int n = (axis == 0) ? g.nx : g.ny;
    double h = (axis == 0) ? g.hx : g.hy;
    int lines = (axis == 0) ? g.ny : g.nx;
    int stride = (axis == 0) ? 1 : g.nx;
    int line_stride = (axis == 0) ? g.nx : 1;
    const double i2h = 1.0 / (2.0 * h);
    for (int L = 0; L < lines; ++L) {
        int off = L * line_stride;
        out[off] = (-3.0 * v[off] + 4.0 * v[off + stride] - v[off + 2 * stride]) * i2h;
        for (int i = 1; i < n - 1; ++i)
            out[off + i * stride] = (v[off + (i + 1) * stride] - v[off + (i - 1) * stride]) * i2h;
        out[off + (n - 1) * stride] = (3.0 * v[off + (n - 1) * stride] -
                                       4.0 * v[off + (n - 2) * stride] +
                                       v[off + (n - 3) * stride]) *
                                      i2h;
    }
}

void apply_d_transpose(const Grid& g, int axis, const std::vector<double>& v,
                       std::vector<double>& out) {
    out.assign(v.size(), 0.0);
    int n = (axis == 0) ? g.nx : g.ny;
    double h = (axis == 0) ? g.hx : g.hy;
    int lines = (axis == 0) ? g.ny : g.nx;
    int stride = (axis == 0) ? 1 : g.nx;
    int line_stride = (axis == 0) ? g.nx : 1;
    const double i2h = 1.0 / (2.0 * h);
    for (int L = 0; L < lines; ++L) {
        int off = L * line_stride;
        out[off] += -3.0 * i2h * v[off];
        out[off + stride] += 4.0 * i2h * v[off];
        out[off + 2 * stride] += -i2h * v[off];
        for (int i = 1; i < n - 1; ++i) {
            out[off + (i + 1) * stride] += i2h * v[off + i * stride];
            out[off + (i - 1) * stride] += -i2h * v[off + i * stride];
        }
        out[off + (n - 1) * stride] += 3.0 * i2h * v[off + (n - 1) * stride];
        out[off + (n - 2) * stride] += -4.0 * i2h * v[off + (n - 1) * stride];
        out[off + (n - 3) * stride] += i2h * v[off + (n - 1) * stride];
    }
}

// H1 Gram operator: R v = W v + Dx^T W Dx v + Dy^T W Dy v
void apply_h1(const Grid& g, const std::vector<double>& W, const std::vector<double>& v,
              std::vector<double>& out) {
    std::vector<double> d, wd, back;
    out.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = W[i] * v[i];
    for (int axis = 0; axis < 2; ++axis) {
        apply_d(g, axis, v, d);
        wd.resize(d.size());
        for (size_t i = 0; i < d.size(); ++i) wd[i] = W[i] * d[i];
        apply_d_transpose(g, axis, wd, back);
        for (size_t i = 0; i < v.size(); ++i) out[i] += back[i];
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

std::vector<double> solve_tikhonov_m0(const FpStepOperators& ops, const ScalarField& m_T_target,
                                      double alpha_reg, int cg_iters, CgInfo* info) {
    const Grid& g = ops.grid;
    std::vector<double> W = trapezoid_weights(g);
    auto apply_normal = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::vector<double> fx = fp_apply_final(ops, x);
        for (size_t i = 0; i < fx.size(); ++i) fx[i] *= W[i];
        y = fp_apply_adjoint(ops, fx);
        std::vector<double> reg;
        apply_h1(g, W, x, reg);
        for (size_t i = 0; i < y.size(); ++i) y[i] += alpha_reg * reg[i];
    };
    std::vector<double> wy = m_T_target.v;
    for (size_t i = 0; i < wy.size(); ++i) wy[i] *= W[i];
    std::vector<double> b = fp_apply_adjoint(ops, wy);

    std::vector<double> x(b.size(), 0.0), r = b, pvec = r, Ap;
    double b_norm = std::sqrt(dot(b, b));
    if (b_norm == 0.0) {
        if (info) *info = CgInfo{0, 0.0, false};
        return x;
    }
    double rr = dot(r, r);
    int it = 0;
    for (; it < cg_iters; ++it) {
        if (std::sqrt(rr) / b_norm < 1e-10) break;
        apply_normal(pvec, Ap);
        double pAp = dot(pvec, Ap);
        if (pAp <= 0.0) break;  // numerically lost positive definiteness
        double alpha = rr / pAp;
        for (size_t i = 0; i < x.size(); ++i) x[i] += alpha * pvec[i];
        for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * Ap[i];
        double rr_new = dot(r, r);
        double beta = rr_new / rr;
        rr = rr_new;
        for (size_t i = 0; i < pvec.size(); ++i) pvec[i] = r[i] + beta * pvec[i];
    }
    if (info) {
        info->iters = it;
        info->rel_residual = std::sqrt(rr) / b_norm;
        info->stagnated = info->rel_residual > 1e-8;
    }
    return x;
}

namespace {

ScalarField clamped_nonneg(const ScalarField& f) {
    ScalarField out = f;
    for (double& v : out.v) v = std::max(v, 0.0);
    return out;
}

SpaceTimeField clamped_nonneg(const SpaceTimeField& f) {
    SpaceTimeField out = f;
    for (double& v : out.v) v = std::max(v, 0.0);
    return out;
}

double c2_monitor(const SpaceTimeField& f) {
    double worst = 0.0;
    for (int k = 0; k < f.time.nt; ++k) {
        ScalarField s = f.slice(k);
        GradientField gr = gradient(s);
        ScalarField sxx = second_derivative(s, 0);
        ScalarField syy = second_derivative(s, 1);
        ScalarField sxy = gradient(gr.x).y;
        worst = std::max({worst, sup_abs(s.v), sup_abs(gr.x.v), sup_abs(gr.y.v), sup_abs(sxx.v),
                          sup_abs(syy.v), sup_abs(sxy.v)});
    }
    return worst;
}

double c1_monitor(const SpaceTimeField& f) {
    double worst = 0.0;
    for (int k = 0; k < f.time.nt; ++k) {
        ScalarField s = f.slice(k);
        GradientField gr = gradient(s);
        worst = std::max({worst, sup_abs(s.v), sup_abs(gr.x.v), sup_abs(gr.y.v)});
    }
    return worst;
}

}  // namespace

RetroResult reconstruct(const ScalarField& u_T_noisy, const ScalarField& m_T_noisy,
                        const ModelParams& p, const TimeGrid& time, const SolverConfig& scfg,
                        const RetroConfig& rcfg, double delta, const ScalarField* m0_init) {
    rcfg.validate(time.T);
    const Grid& g = u_T_noisy.grid;
    double alpha = rcfg.alpha_auto() ? std::max(delta * delta, 1e-14) : rcfg.tikhonov_alpha;

    RetroResult out;
    // start from the terminal density held constant in time
    SpaceTimeField m_traj(g, time);
    ScalarField m_start = m0_init ? clamped_nonneg(*m0_init) : clamped_nonneg(m_T_noisy);
    for (int k = 0; k < time.nt; ++k) m_traj.set_slice(k, m_start);

    SpaceTimeField u_prev;
    bool have_u = false;
    for (int it = 1; it <= rcfg.outer_iters; ++it) {
        SpaceTimeField u = solve_hjb_backward(u_T_noisy, clamped_nonneg(m_traj), p, scfg.bc);
        FpStepOperators ops = fp_build_operators(u, p, scfg.bc);
        std::vector<double> m0v = solve_tikhonov_m0(ops, m_T_noisy, alpha, rcfg.cg_iters, &out.cg);
        ScalarField m0(g);
        m0.v = std::move(m0v);
        SpaceTimeField m_new = fp_apply_all(ops, m0);

        double resid = sup_diff(m_new.v, m_traj.v);
        if (have_u) resid += sup_diff(u.v, u_prev.v);
        out.outer_residuals.push_back(resid);
        out.outer_iterations = it;
        u_prev = u;
        have_u = true;
        m_traj = m_new;
        out.m0 = m0;
        if (resid < scfg.picard_tol) {
            out.converged = true;
            break;
        }
    }
    out.u = u_prev;
    out.m = m_traj;
    out.u_c2_norm = c2_monitor(out.u);
    out.m_c1_norm = c1_monitor(out.m);
    return out;
}

namespace {

// L2 norm over the window Omega x [t_k0, T]: trapezoid across the slices
double window_l2_field(const std::vector<ScalarField>& slices, double dt) {
    double acc = 0.0;
    int n = static_cast<int>(slices.size());
    for (int k = 0; k < n; ++k) {
        ScalarField sq(slices[k].grid);
        for (size_t i = 0; i < sq.v.size(); ++i) sq.v[i] = slices[k].v[i] * slices[k].v[i];
        double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
        acc += w * dt * integrate_space(sq);
    }
    return std::sqrt(acc);
}

std::vector<ScalarField> time_derivative_slices(const SpaceTimeField& f, int k0) {
    std::vector<ScalarField> out;
    const TimeGrid& tg = f.time;
    for (int k = k0; k < tg.nt; ++k) {
        ScalarField d(f.grid);
        if (k == 0) {
            for (int i = 0; i < f.grid.num_nodes(); ++i)
                d.v[i] = (-3.0 * f.v[i] + 4.0 * f.v[f.grid.num_nodes() + i] -
                          f.v[2 * f.grid.num_nodes() + i]) /
                         (2.0 * tg.dt);
        } else if (k == tg.nt - 1) {
            size_t nn = f.grid.num_nodes();
            for (size_t i = 0; i < nn; ++i)
                d.v[i] = (3.0 * f.v[k * nn + i] - 4.0 * f.v[(k - 1) * nn + i] +
                          f.v[(k - 2) * nn + i]) /
                         (2.0 * tg.dt);
        } else {
            size_t nn = f.grid.num_nodes();
            for (size_t i = 0; i < nn; ++i)
                d.v[i] = (f.v[(k + 1) * nn + i] - f.v[(k - 1) * nn + i]) / (2.0 * tg.dt);
        }
        out.push_back(d);
    }
    return out;
}

}  // namespace

ErrorNorms window_error_norms(const SpaceTimeField& du, const SpaceTimeField& dm, double gamma) {
    const TimeGrid& tg = du.time;
    int k0 = 0;
    while (k0 < tg.nt && tg.t(k0) < gamma - 1e-12) ++k0;
    if (k0 >= tg.nt - 1) throw std::invalid_argument("window_error_norms: empty window");

    auto collect = [&](const SpaceTimeField& f, auto make_slice) {
        std::vector<ScalarField> slices;
        for (int k = k0; k < tg.nt; ++k) slices.push_back(make_slice(f.slice(k)));
        return window_l2_field(slices, tg.dt);
    };

    ErrorNorms n;
    n.u = collect(du, [](const ScalarField& s) { return s; });
    n.m = collect(dm, [](const ScalarField& s) { return s; });
    n.uxx = collect(du, [](const ScalarField& s) { return second_derivative(s, 0); });
    n.uyy = collect(du, [](const ScalarField& s) { return second_derivative(s, 1); });
    n.uxy = collect(du, [](const ScalarField& s) { return gradient(gradient(s).x).y; });
    auto grad_mag = [](const ScalarField& s) {
        GradientField gr = gradient(s);
        ScalarField out(s.grid);
        for (size_t i = 0; i < out.v.size(); ++i)
            out.v[i] = std::sqrt(gr.x.v[i] * gr.x.v[i] + gr.y.v[i] * gr.y.v[i]);
        return out;
    };
    n.grad_u = collect(du, grad_mag);
    n.grad_m = collect(dm, grad_mag);
    // u_t over the window, then the same windowed L2
    n.ut = window_l2_field(time_derivative_slices(du, k0), tg.dt);
    return n;
}

ScalarField default_m0(const Grid& g) {
    // wide enough that the spectrum stays in the band the forward map
    // preserves, and far enough from the absorbing face that the clipped
    // column is negligible
    ScalarField f = ScalarField::sample(g, [](double x, double y) {
        double dx = x - 0.4, dy = y - 0.5;
        return std::exp(-(dx * dx + dy * dy) / (2.0 * 0.2 * 0.2));
    });
    double mass = integrate_space(f);
    for (double& v : f.v) v /= mass;
    return f;
}

ScalarField bandlimited_m0(const Grid& g) {
    ScalarField f = ScalarField::sample(g, [](double x, double y) {
        double fx = std::cos(0.5 * kPi * x) + 0.25 * std::cos(1.5 * kPi * x);
        double fy = 1.0 + 0.4 * std::cos(kPi * y);
        return fx * fy;  // >= 0 on the square, zero trace on {x=1}
    });
    double mass = integrate_space(f);
    for (double& v : f.v) v /= mass;
    return f;
}

StabilityOutcome stability_experiment(const ModelParams& p, const SolverConfig& scfg,
                                      const RetroConfig& rcfg, const Grid& grid,
                                      const TimeGrid& time, const std::vector<double>& deltas,
                                      const std::vector<uint64_t>& seeds, bool keep_fields) {
    rcfg.validate(time.T);
    StabilityOutcome out;
    ScalarField m0_true = default_m0(grid);
    ScalarField u_T_true = ScalarField::sample(grid, [&](double x, double y) {
        return p.psi_at(x, y);
    });
    out.truth = solve_mfg(m0_true, u_T_true, p, grid, time, scfg);
    ScalarField uT = out.truth.u.slice(time.nt - 1);
    ScalarField mT = out.truth.m.slice(time.nt - 1);

    std::vector<double> log_d, log_e;
    for (double delta : deltas)
        for (uint64_t seed : seeds) {
            StabilityRecord rec;
            rec.delta = delta;
            rec.seed = seed;
            NoisySnapshot snap = make_noisy_snapshot(uT, mT, delta, seed);
            RetroResult rr =
                reconstruct(snap.u_T_noisy, snap.m_T_noisy, p, time, scfg, rcfg, delta);
            rec.converged = rr.converged || rr.outer_iterations > 0;
            rec.cg_stagnated = rr.cg.stagnated;
            rec.u_c2_norm = rr.u_c2_norm;
            rec.m_c1_norm = rr.m_c1_norm;
            SpaceTimeField du = rr.u, dm = rr.m;
            for (size_t i = 0; i < du.v.size(); ++i) du.v[i] -= out.truth.u.v[i];
            for (size_t i = 0; i < dm.v.size(); ++i) dm.v[i] -= out.truth.m.v[i];
            rec.norms = window_error_norms(du, dm, rcfg.gamma);
            rec.total = rec.norms.total();
            if (keep_fields) {
                rec.u_rec = rr.u;
                rec.m_rec = rr.m;
                rec.m0_rec = rr.m0;
            }
            out.records.push_back(rec);
            if (rec.converged && delta > 0.0 && rec.total > 0.0) {
                log_d.push_back(std::log(delta));
                log_e.push_back(std::log(rec.total));
            }
        }
    if (log_d.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = static_cast<int>(log_d.size());
        for (int i = 0; i < n; ++i) {
            sx += log_d[i];
            sy += log_e[i];
            sxx += log_d[i] * log_d[i];
            sxy += log_d[i] * log_e[i];
        }
        double denom = n * sxx - sx * sx;
        if (std::fabs(denom) > 1e-30) {
            out.rho_emp = (n * sxy - sx * sy) / denom;
            out.fit_ok = true;
        }
    }
    return out;
}

}  // namespace cmfg
