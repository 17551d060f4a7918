#include "cmfg/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cmfg/parallel.hpp"
#include "cmfg/rng.hpp"

namespace cmfg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void CarlemanParams::validate() const {
    if (!(lambda >= 1.0)) throw std::invalid_argument("lambda must be >= 1");
    if (!(s > 1.0)) throw std::invalid_argument("s must be > 1");
}

double cwf(double t, const CarlemanParams& cp) {
    double e = cp.lambda * std::pow(t + 2.0, cp.s);
    if (e > 700.0) throw std::overflow_error("cwf: lambda (t+2)^s > 700; use the log form");
    return std::exp(e);
}

double TestFunction::kappa() const { return (k + 0.5) * kPi; }
double TestFunction::nu() const { return j * kPi; }

double TestFunction::w(double x, double y) const {
    double v = std::cos(kappa() * x);
    if (dim == 2) v *= std::cos(nu() * y);
    return v;
}
double TestFunction::wx(double x, double y) const {
    double v = -kappa() * std::sin(kappa() * x);
    if (dim == 2) v *= std::cos(nu() * y);
    return v;
}
double TestFunction::wy(double x, double y) const {
    if (dim == 1) return 0.0;
    return -nu() * std::cos(kappa() * x) * std::sin(nu() * y);
}
double TestFunction::wxx(double x, double y) const { return -kappa() * kappa() * w(x, y); }
double TestFunction::wyy(double x, double y) const {
    if (dim == 1) return 0.0;
    return -nu() * nu() * w(x, y);
}
double TestFunction::wxy(double x, double y) const {
    if (dim == 1) return 0.0;
    return kappa() * nu() * std::sin(kappa() * x) * std::sin(nu() * y);
}

double TestFunction::tau_val(double t) const {
    switch (tau) {
        case TimeFactor::one: return 1.0;
        case TimeFactor::linear: return t;
        case TimeFactor::exp_neg: return std::exp(-t);
        case TimeFactor::exp_pos: return std::exp(t);
        case TimeFactor::sine: return std::sin(t);
        case TimeFactor::one_plus_t: return 1.0 + t;
    }
    return 0.0;
}
double TestFunction::tau_dt(double t) const {
    switch (tau) {
        case TimeFactor::one: return 0.0;
        case TimeFactor::linear: return 1.0;
        case TimeFactor::exp_neg: return -std::exp(-t);
        case TimeFactor::exp_pos: return std::exp(t);
        case TimeFactor::sine: return std::cos(t);
        case TimeFactor::one_plus_t: return 1.0;
    }
    return 0.0;
}

std::vector<TestFunction> make_suite(int size, int dim, uint64_t seed) {
    std::vector<TestFunction> suite;
    suite.reserve(size);
    const TimeFactor taus[] = {TimeFactor::one, TimeFactor::linear, TimeFactor::exp_neg,
                               TimeFactor::exp_pos, TimeFactor::sine};
    for (int i = 0; i < size; ++i) {
        TestFunction tf;
        tf.dim = dim;
        tf.k = static_cast<int>(uniform(seed, i, 0) * 5.0) % 5;
        tf.j = (dim == 2) ? static_cast<int>(uniform(seed, i, 1) * 5.0) % 5 : 0;
        tf.tau = taus[static_cast<int>(uniform(seed, i, 2) * 5.0) % 5];
        tf.amplitude = 0.5 + 1.5 * uniform(seed, i, 3);
        suite.push_back(tf);
    }
    return suite;
}

double DiagOperator::apply(const TestFunction& tf, double x, double y) const {
    double v = a1(x, y) * tf.wxx(x, y);
    if (tf.dim == 2) v += a2(x, y) * tf.wyy(x, y);
    if (divergence_form) {
        v += a1_dx(x, y) * tf.wx(x, y);
        if (tf.dim == 2) v += a2_dy(x, y) * tf.wy(x, y);
    }
    return v;
}

DiagOperator make_constant_operator(double c1, double c2) {
    DiagOperator op;
    op.a1 = [c1](double, double) { return c1; };
    op.a2 = [c2](double, double) { return c2; };
    op.a1_dx = [](double, double) { return 0.0; };
    op.a2_dy = [](double, double) { return 0.0; };
    op.divergence_form = true;
    op.mu1 = std::min(c1, c2);
    op.mu2 = std::max(c1, c2);
    return op;
}

DiagOperator make_variable_test_operator() {
    // a1 = 0.1 + 0.05 sin(pi x) sin(pi y), a2 = 0.1 + 0.03 x(1-x)
    DiagOperator op;
    op.a1 = [](double x, double y) { return 0.1 + 0.05 * std::sin(kPi * x) * std::sin(kPi * y); };
    op.a1_dx = [](double x, double y) {
        return 0.05 * kPi * std::cos(kPi * x) * std::sin(kPi * y);
    };
    op.a2 = [](double x, double) { return 0.1 + 0.03 * x * (1.0 - x); };
    op.a2_dy = [](double, double) { return 0.0; };
    op.divergence_form = true;
    // sin(pi x) sin(pi y) >= 0 on the unit square
    op.mu1 = 0.1;
    op.mu2 = 0.15;
    return op;
}

DiagOperator make_sigma_operator(const ModelParams& p) {
    DiagOperator op;
    SigmaSpec s1 = p.sigma1_sq, s2 = p.sigma2_sq;
    op.a1 = [s1](double x, double y) { return 0.5 * s1.at(x, y); };
    op.a2 = [s2](double x, double y) { return 0.5 * s2.at(x, y); };
    op.a1_dx = [](double, double) { return 0.0; };
    op.a2_dy = [](double, double) { return 0.0; };
    op.divergence_form = false;  // L0 is the principal part
    double lo = 1e300, hi = 0.0;
    const int n = 201;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            double x = ix / double(n - 1), y = iy / double(n - 1);
            lo = std::min({lo, op.a1(x, y), op.a2(x, y)});
            hi = std::max({hi, op.a1(x, y), op.a2(x, y)});
        }
    op.mu1 = lo;
    op.mu2 = hi;
    return op;
}

namespace {

struct SpatialIntegrals {
    double w2 = 0.0;
    double grad2 = 0.0;
    double Lw_w = 0.0;
    double Lw2 = 0.0;
    double hess2 = 0.0;
    double agrad2 = 0.0;  // a1 wx^2 + a2 wy^2
};

SpatialIntegrals spatial_integrals(const TestFunction& tf, const DiagOperator& L, int n) {
    SpatialIntegrals I;
    double h = 1.0 / (n - 1);
    if (tf.dim == 1) {
        for (int ix = 0; ix < n; ++ix) {
            double x = ix * h;
            double wt = ((ix == 0 || ix == n - 1) ? 0.5 : 1.0) * h;
            double w = tf.w(x, 0), gx = tf.wx(x, 0), Lw = L.apply(tf, x, 0);
            double hxx = tf.wxx(x, 0);
            I.w2 += wt * w * w;
            I.grad2 += wt * gx * gx;
            I.Lw_w += wt * Lw * w;
            I.Lw2 += wt * Lw * Lw;
            I.hess2 += wt * hxx * hxx;
            I.agrad2 += wt * L.a1(x, 0) * gx * gx;
        }
        return I;
    }
    for (int iy = 0; iy < n; ++iy) {
        double y = iy * h;
        double wty = ((iy == 0 || iy == n - 1) ? 0.5 : 1.0) * h;
        for (int ix = 0; ix < n; ++ix) {
            double x = ix * h;
            double wt = wty * ((ix == 0 || ix == n - 1) ? 0.5 : 1.0) * h;
            double w = tf.w(x, y);
            double gx = tf.wx(x, y), gy = tf.wy(x, y);
            double Lw = L.apply(tf, x, y);
            double hxx = tf.wxx(x, y), hxy = tf.wxy(x, y), hyy = tf.wyy(x, y);
            I.w2 += wt * w * w;
            I.grad2 += wt * (gx * gx + gy * gy);
            I.Lw_w += wt * Lw * w;
            I.Lw2 += wt * Lw * Lw;
            I.hess2 += wt * (hxx * hxx + hxy * hxy + hyy * hyy);
            I.agrad2 += wt * (L.a1(x, y) * gx * gx + L.a2(x, y) * gy * gy);
        }
    }
    return I;
}

struct TimeIntegrals {
    double tau2 = 0.0;       // int tau^2 W
    double taup2 = 0.0;      // int tau'^2 W
    double tau_taup = 0.0;   // int tau tau' W
    double ts1_tau2 = 0.0;   // int (t+2)^{s-1} tau^2 W
    double t2s2_tau2 = 0.0;  // int (t+2)^{2s-2} tau^2 W
};

// Weighted time integrals with W(t) = exp(2l[(t+2)^s - (T+2)^s]).
// Substituting r = 2l[(T+2)^s - (t+2)^s] gives int g e^{-r} dt/dr dr on a
// uniform r-grid, which resolves the weight however large lambda, s are.
// The tail beyond r_cut contributes less than e^{-r_cut} relatively.
TimeIntegrals time_integrals(const TestFunction& tf, const CarlemanParams& cp, double T,
                             const QuadratureSpec& q, int refine) {
    const double l = cp.lambda, s = cp.s;
    const double PT = std::pow(T + 2.0, s);
    const double R = 2.0 * l * (PT - std::pow(2.0, s));
    const double rmax = std::min(R, q.r_cut);
    double step = q.r_step / refine;
    int n = std::max(q.min_nt * refine, static_cast<int>(std::ceil(rmax / step)) + 1);
    TimeIntegrals out;
    double dr = rmax / (n - 1);
    for (int i = 0; i < n; ++i) {
        double r = i * dr;
        double wt = ((i == 0 || i == n - 1) ? 0.5 : 1.0) * dr;
        double tp2s = PT - r / (2.0 * l);          // (t+2)^s
        double tp2 = std::pow(tp2s, 1.0 / s);      // t+2
        double t = tp2 - 2.0;
        double jac = 1.0 / (2.0 * l * s * std::pow(tp2, s - 1.0));  // dt/dr
        double wgt = std::exp(-r) * jac * wt;
        double tv = tf.tau_val(t), tp = tf.tau_dt(t);
        double p1 = std::pow(tp2, s - 1.0);
        out.tau2 += wgt * tv * tv;
        out.taup2 += wgt * tp * tp;
        out.tau_taup += wgt * tv * tp;
        out.ts1_tau2 += wgt * p1 * tv * tv;
        out.t2s2_tau2 += wgt * p1 * p1 * tv * tv;
    }
    return out;
}

struct ReportTerms {
    CarlemanReport rep;
};

double rel_change(double a, double b, double floor_scale) {
    double denom = std::max({std::fabs(a), std::fabs(b), floor_scale});
    if (denom == 0.0) return 0.0;
    return std::fabs(a - b) / denom;
}

CarlemanReport assemble(CarlemanTheorem thm, const TestFunction& tf, const DiagOperator& L,
                        double sigma0, const CarlemanParams& cp, double T,
                        const QuadratureSpec& q, int refine) {
    cp.validate();
    const double l = cp.lambda, s = cp.s;
    const double A2 = tf.amplitude * tf.amplitude;
    int nsp = (q.n_space - 1) * refine + 1;
    SpatialIntegrals I = spatial_integrals(tf, L, nsp);
    TimeIntegrals J = time_integrals(tf, cp, T, q, refine);

    const double tT = tf.tau_val(T), t0 = tf.tau_val(0.0);
    const double PTs1 = std::pow(T + 2.0, s - 1.0);

    CarlemanReport r;
    r.lambda = l;
    r.s = s;

    // sign of the cross term distinguishes u_t + Lu from u_t - Lu
    double cross = (thm == CarlemanTheorem::thm52) ? -2.0 : 2.0;
    r.lhs = A2 * (J.taup2 * I.w2 + cross * J.tau_taup * I.Lw_w + J.tau2 * I.Lw2);

    r.allow_uT = l * s * PTs1 * A2 * tT * tT * I.w2;
    r.dropped_grad = l * s * A2 * J.ts1_tau2 * I.grad2;
    r.dropped_u2 = l * s * s * A2 * J.ts1_tau2 * I.w2;
    r.hess_block = A2 * J.tau2 * I.hess2;

    // terminal gradient allowance; the alternative uses the printed
    // exponent 2 lambda (T+2)^2 instead of 2 lambda (T+2)^s
    double alt_log = 2.0 * l * ((T + 2.0) * (T + 2.0) - std::pow(T + 2.0, s));
    double alt_factor = (alt_log < 700.0) ? std::exp(alt_log) : std::exp(700.0);
    double grad_coef = (thm == CarlemanTheorem::thm71) ? sigma0 * sigma0 : L.mu1;

    switch (thm) {
        case CarlemanTheorem::thm51:
            r.rhs_ut = 0.25 * A2 * J.taup2 * I.w2;
            r.rhs_Lu = A2 * J.tau2 * I.Lw2;
            r.rhs_u2 = 0.5 * l * l * s * s * A2 * J.t2s2_tau2 * I.w2;
            r.allow_gradT = grad_coef * A2 * tT * tT * I.grad2;
            r.allow_gradT_alt = grad_coef * alt_factor * A2 * tT * tT * I.grad2;
            r.margin = r.lhs + r.allow_uT + r.allow_gradT - (r.rhs_ut + r.rhs_Lu + r.rhs_u2);
            r.margin_alt =
                r.lhs + r.allow_uT + r.allow_gradT_alt - (r.rhs_ut + r.rhs_Lu + r.rhs_u2);
            r.empirical_C = (r.dropped_grad > 0.0) ? r.margin / r.dropped_grad : 0.0;
            break;
        case CarlemanTheorem::thm52: {
            r.rhs_grad = L.mu1 * std::sqrt(s) * A2 * J.tau2 * I.grad2;
            double init_log = 2.0 * l * (std::pow(2.0, s) - std::pow(T + 2.0, s));
            double init_factor = std::exp(init_log);  // <= 1 for T > 0
            r.allow_init =
                init_factor * A2 * t0 * t0 * (L.mu2 * I.grad2 + 0.5 * std::sqrt(s) * I.w2);
            r.margin = r.lhs + r.allow_uT + r.allow_init - r.rhs_grad;
            r.margin_alt = r.margin;
            r.empirical_C = (r.dropped_u2 > 0.0) ? r.margin / r.dropped_u2 : 0.0;
            break;
        }
        case CarlemanTheorem::thm71:
            r.rhs_ut = 0.25 * A2 * J.taup2 * I.w2;
            r.rhs_u2 = 0.5 * l * l * s * s * A2 * J.t2s2_tau2 * I.w2;
            r.allow_gradT = grad_coef * A2 * tT * tT * I.grad2;
            r.allow_gradT_alt = grad_coef * alt_factor * A2 * tT * tT * I.grad2;
            r.margin = r.lhs + r.allow_uT + r.allow_gradT - (r.rhs_ut + r.rhs_u2);
            r.margin_alt = r.lhs + r.allow_uT + r.allow_gradT_alt - (r.rhs_ut + r.rhs_u2);
            r.empirical_C = (r.hess_block > 0.0) ? r.margin / r.hess_block : 0.0;
            break;
    }
    r.scale = std::fabs(r.lhs) + r.allow_uT + std::max(r.allow_gradT, r.allow_gradT_alt) +
              r.allow_init + r.rhs_ut + r.rhs_Lu + r.rhs_u2 + r.rhs_grad;
    return r;
}

CarlemanReport checked(CarlemanTheorem thm, const TestFunction& tf, const DiagOperator& L,
                       double sigma0, const CarlemanParams& cp, double T,
                       const QuadratureSpec& q) {
    CarlemanReport r = assemble(thm, tf, L, sigma0, cp, T, q, 1);
    if (q.refinement_check) {
        CarlemanReport f = assemble(thm, tf, L, sigma0, cp, T, q, 2);
        double floor_scale = 1e-12 * std::max(r.scale, f.scale);
        double worst = 0.0;
        const double* a[] = {&r.lhs,       &r.rhs_ut,        &r.rhs_Lu,     &r.rhs_u2,
                             &r.rhs_grad,  &r.dropped_grad,  &r.dropped_u2, &r.hess_block,
                             &r.allow_uT,  &r.allow_gradT,   &r.allow_init};
        const double* b[] = {&f.lhs,       &f.rhs_ut,        &f.rhs_Lu,     &f.rhs_u2,
                             &f.rhs_grad,  &f.dropped_grad,  &f.dropped_u2, &f.hess_block,
                             &f.allow_uT,  &f.allow_gradT,   &f.allow_init};
        for (size_t i = 0; i < sizeof(a) / sizeof(a[0]); ++i)
            worst = std::max(worst, rel_change(*a[i], *b[i], floor_scale));
        r.valid = worst < 1e-3;
    }
    return r;
}

}  // namespace

CarlemanReport check_thm51(const TestFunction& tf, const DiagOperator& L, const CarlemanParams& cp,
                           double T, const QuadratureSpec& quad) {
    return checked(CarlemanTheorem::thm51, tf, L, 0.0, cp, T, quad);
}

CarlemanReport check_thm52(const TestFunction& tf, const DiagOperator& L, const CarlemanParams& cp,
                           double T, const QuadratureSpec& quad) {
    return checked(CarlemanTheorem::thm52, tf, L, 0.0, cp, T, quad);
}

CarlemanReport check_thm71(const TestFunction& tf, const ModelParams& p, const CarlemanParams& cp,
                           const QuadratureSpec& quad) {
    DiagOperator L0 = make_sigma_operator(p);
    return checked(CarlemanTheorem::thm71, tf, L0, p.sigma0(), cp, p.T, quad);
}

ScanResult scan_thresholds(const std::vector<TestFunction>& suite, CarlemanTheorem theorem,
                           const std::vector<double>& lambdas, const std::vector<double>& ss,
                           const DiagOperator& L, const ModelParams& p, double T,
                           const QuadratureSpec& quad, bool keep_reports) {
    if (suite.empty()) throw std::invalid_argument("scan_thresholds: empty suite");
    ScanResult out;
    double sigma0 = p.sigma0();
    DiagOperator op71;
    const DiagOperator* use = &L;
    if (theorem == CarlemanTheorem::thm71) {
        op71 = make_sigma_operator(p);
        use = &op71;
    }
    struct CellSpec {
        double lambda, s;
    };
    std::vector<CellSpec> specs;
    for (double s : ss)
        for (double l : lambdas) specs.push_back({l, s});
    out.cells.resize(specs.size());
    std::vector<std::vector<CarlemanReport>> all(specs.size());
    parallel_for(static_cast<int>(specs.size()), [&](int ci) {
        ScanCell cell;
        cell.lambda = specs[ci].lambda;
        cell.s = specs[ci].s;
        cell.min_margin = 1e300;
        cell.min_margin_alt = 1e300;
        cell.min_empirical_C = 1e300;
        cell.min_rel_margin = 1e300;
        CarlemanParams cp{cell.lambda, cell.s};
        std::vector<CarlemanReport>& reps = all[ci];
        for (const TestFunction& tf : suite) {
            CarlemanReport r = checked(theorem, tf, *use, sigma0, cp, T, quad);
            cell.min_margin = std::min(cell.min_margin, r.margin);
            cell.min_margin_alt = std::min(cell.min_margin_alt, r.margin_alt);
            cell.min_empirical_C = std::min(cell.min_empirical_C, r.empirical_C);
            double scale = std::max(r.scale, 1e-300);
            cell.min_rel_margin =
                std::min(cell.min_rel_margin, std::min(r.margin, r.margin_alt) / scale);
            cell.all_valid = cell.all_valid && r.valid;
            reps.push_back(r);
        }
        cell.pass = cell.min_rel_margin >= -1e-9;
        out.cells[ci] = cell;
    });
    if (keep_reports)
        for (auto& reps : all)
            for (auto& r : reps) out.reports.push_back(r);
    // least s such that every cell with s' >= s passes
    std::vector<double> sorted_s = ss;
    std::sort(sorted_s.begin(), sorted_s.end());
    for (double cand : sorted_s) {
        bool ok = true;
        for (const ScanCell& c : out.cells)
            if (c.s >= cand && !c.pass) ok = false;
        if (ok) {
            out.threshold_s = cand;
            out.threshold_found = true;
            break;
        }
    }
    return out;
}

IbpSides ibp_identity_sides(const TestFunction& tf, const DiagOperator& L, double T,
                            const QuadratureSpec& quad) {
    SpatialIntegrals I = spatial_integrals(tf, L, quad.n_space);
    // plain trapezoid in t for int 2 tau tau' dt
    int nt = quad.min_nt;
    double dt = T / (nt - 1);
    double Jtt = 0.0;
    for (int i = 0; i < nt; ++i) {
        double t = dt * i;
        double w = (i == 0 || i == nt - 1) ? 0.5 : 1.0;
        Jtt += w * dt * tf.tau_val(t) * tf.tau_dt(t);
    }
    double A2 = tf.amplitude * tf.amplitude;
    IbpSides sides;
    sides.lhs = 2.0 * A2 * I.Lw_w * Jtt;
    double tT = tf.tau_val(T), t0 = tf.tau_val(0.0);
    sides.rhs = -A2 * I.agrad2 * (tT * tT - t0 * t0);
    return sides;
}

}  // namespace cmfg
