#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cmfg/retro.hpp"
#include "cmfg/rng.hpp"
#include "cmfg/solvers.hpp"

using namespace cmfg;

namespace {

// gentler regime for the inverse runs: at sigma^2 = 0.2 the forward map
// smooths every mode above (2,.) beneath the alpha = 1e-8 floor, so the
// initial density is not recoverable to 1e-2 no matter the solver. The
// weaker gains and income keep the boundary layer at x = 1 inside the
// explicit-term CFL bound at this low diffusion.
ModelParams retro_params() {
    ModelParams p;
    p.sigma1_sq.base = 0.02;
    p.sigma2_sq.base = 0.02;
    p.a = 0.4;
    p.b = 0.4;
    p.income.p0 = 0.05;
    p.income.q0 = 0.05;
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("retro");

TEST_CASE("noise calibration meets the H1 level exactly") {
    Grid g = Grid::square(33, 33);
    ScalarField f = ScalarField::sample(g, [](double x, double y) {
        return 0.7 + 0.3 * std::sin(2.0 * x) * std::cos(y);
    });
    for (int seed = 1; seed <= 20; ++seed) {
        double delta = 0.05 + 0.95 * uniform(555, seed);
        ScalarField noisy = add_noise(f, delta, seed);
        ScalarField diff = noisy;
        for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] -= f.v[i];
        CHECK(h1_norm(diff) == doctest::Approx(delta).epsilon(1e-12));
    }
    // delta = 0 returns the field unchanged
    ScalarField same = add_noise(f, 0.0, 3);
    CHECK(sup_diff(same.v, f.v) == 0.0);
    // fixed seed reproduces bit-identically
    ScalarField n1 = add_noise(f, 0.1, 7);
    ScalarField n2 = add_noise(f, 0.1, 7);
    CHECK(sup_diff(n1.v, n2.v) == 0.0);
}

TEST_CASE("lambda(delta) schedule algebra") {
    const double T = 2.0, s1 = 2.0;
    const double alpha = 1.0 / (3.0 * std::pow(T + 2.0, s1));
    for (int k = 1; k <= 3; ++k) {
        double delta = std::exp(-k / alpha);
        CHECK(lambda_of_delta(delta, T, s1) == doctest::Approx(double(k)).epsilon(1e-12));
    }
    // monotone: smaller delta, larger lambda
    double l1 = lambda_of_delta(std::exp(-1.5 / alpha), T, s1);
    double l2 = lambda_of_delta(std::exp(-2.5 / alpha), T, s1);
    CHECK(l2 > l1);
    // outside the admissible range
    CHECK_THROWS_AS(lambda_of_delta(0.5, T, s1), std::invalid_argument);
    CHECK_THROWS_AS(lambda_of_delta(0.0, T, s1), std::invalid_argument);
}

TEST_CASE("adjoint dot-product identity for the fp step operators") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 64);
    ModelParams p = retro_params();
    // a u field with real advection
    SpaceTimeField u(g, tg);
    for (int k = 0; k < tg.nt; ++k)
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                u.at(k, ix, iy) =
                    0.4 * g.x(ix) * g.x(ix) + 0.2 * std::cos(3.0 * g.y(iy)) + 0.05 * tg.t(k);
    FpStepOperators ops = fp_build_operators(u, p, BoundaryMode::absorbing);
    int nn = g.num_nodes();
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> e(nn), w(nn);
        for (int i = 0; i < nn; ++i) {
            e[i] = normal(100 + trial, i, 0);
            w[i] = normal(200 + trial, i, 1);
        }
        std::vector<double> Fe = fp_apply_final(ops, e);
        std::vector<double> Ftw = fp_apply_adjoint(ops, w);
        double lhs = 0.0, rhs = 0.0, scale = 0.0;
        for (int i = 0; i < nn; ++i) {
            lhs += Fe[i] * w[i];
            rhs += e[i] * Ftw[i];
            scale += std::fabs(Fe[i] * w[i]);
        }
        CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(scale, 1e-12));
    }
}

TEST_CASE("zero terminal data reconstructs the zero density") {
    Grid g = Grid::square(17, 17);
    TimeGrid tg = TimeGrid::make(2.0, 33);
    ModelParams p = retro_params();
    SolverConfig scfg;
    RetroConfig rcfg;
    rcfg.tikhonov_alpha = 1e-6;
    rcfg.outer_iters = 2;
    rcfg.cg_iters = 200;
    ScalarField uT = ScalarField::sample(g, [&](double x, double y) { return p.psi_at(x, y); });
    ScalarField mT(g);
    RetroResult r = reconstruct(uT, mT, p, tg, scfg, rcfg);
    CHECK(sup_abs(r.m0.v) < 1e-8);
    CHECK(sup_abs(r.m.v) < 1e-8);
}

TEST_CASE("noiseless data recovers the initial density") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 64);
    ModelParams p = retro_params();
    SolverConfig scfg;
    RetroConfig rcfg;
    rcfg.tikhonov_alpha = 1e-8;
    rcfg.cg_iters = 800;
    rcfg.outer_iters = 6;
    ScalarField m0_true = bandlimited_m0(g);
    ScalarField uT = ScalarField::sample(g, [&](double x, double y) { return p.psi_at(x, y); });
    MFGSolution fwd = solve_mfg(m0_true, uT, p, g, tg, scfg);
    REQUIRE(fwd.converged);
    RetroResult r = reconstruct(fwd.u.slice(tg.nt - 1), fwd.m.slice(tg.nt - 1), p, tg, scfg,
                                rcfg);
    ScalarField diff = r.m0;
    for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] -= m0_true.v[i];
    double rel = l2_norm(diff) / l2_norm(m0_true);
    CHECK(rel <= 1e-2);
    // monitored norms are finite and reported
    CHECK(std::isfinite(r.u_c2_norm));
    CHECK(std::isfinite(r.m_c1_norm));
}

TEST_CASE("regularization ladder decreases the noiseless error to the floor") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 48);
    ModelParams p = retro_params();
    SolverConfig scfg;
    ScalarField m0_true = bandlimited_m0(g);
    ScalarField uT = ScalarField::sample(g, [&](double x, double y) { return p.psi_at(x, y); });
    MFGSolution fwd = solve_mfg(m0_true, uT, p, g, tg, scfg);
    REQUIRE(fwd.converged);
    double prev = 1e300;
    bool at_floor = false;
    for (double alpha : {1e-2, 1e-4, 1e-6, 1e-8}) {
        RetroConfig rcfg;
        rcfg.tikhonov_alpha = alpha;
        rcfg.cg_iters = 600;
        rcfg.outer_iters = 3;
        RetroResult r = reconstruct(fwd.u.slice(tg.nt - 1), fwd.m.slice(tg.nt - 1), p, tg, scfg,
                                    rcfg);
        ScalarField diff = r.m0;
        for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] -= m0_true.v[i];
        double rel = l2_norm(diff) / l2_norm(m0_true);
        if (!at_floor) CHECK(rel < prev * 1.02);
        if (prev < 1e300 && std::fabs(prev - rel) < 0.1 * prev) at_floor = true;
        prev = rel;
    }
}

TEST_CASE("window norms localize: Q_gammaT error below Q_T error") {
    Grid g = Grid::square(17, 17);
    TimeGrid tg = TimeGrid::make(2.0, 33);
    SpaceTimeField du(g, tg), dm(g, tg);
    for (size_t i = 0; i < du.v.size(); ++i) {
        du.v[i] = std::sin(0.001 * static_cast<double>(i));
        dm.v[i] = std::cos(0.002 * static_cast<double>(i));
    }
    ErrorNorms wide = window_error_norms(du, dm, 1e-9);  // whole cylinder
    ErrorNorms narrow = window_error_norms(du, dm, 1.25);
    CHECK(narrow.u <= wide.u + 1e-12);
    CHECK(narrow.m <= wide.m + 1e-12);
    CHECK(narrow.ut <= wide.ut + 1e-12);
    CHECK(narrow.total() <= wide.total() + 1e-9);
}

TEST_CASE("uniqueness surrogate: two initial guesses agree on the window") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 48);
    ModelParams p = retro_params();
    SolverConfig scfg;
    RetroConfig rcfg;
    rcfg.tikhonov_alpha = 1e-8;
    rcfg.cg_iters = 600;
    rcfg.outer_iters = 4;
    ScalarField m0_true = bandlimited_m0(g);
    ScalarField uT = ScalarField::sample(g, [&](double x, double y) { return p.psi_at(x, y); });
    MFGSolution fwd = solve_mfg(m0_true, uT, p, g, tg, scfg);
    REQUIRE(fwd.converged);
    ScalarField uT_d = fwd.u.slice(tg.nt - 1);
    ScalarField mT_d = fwd.m.slice(tg.nt - 1);

    RetroResult r1 = reconstruct(uT_d, mT_d, p, tg, scfg, rcfg);
    ScalarField other_guess = ScalarField::sample(g, [](double x, double y) {
        return 0.5 + 0.5 * x * (1.0 - x) * y;
    });
    RetroResult r2 = reconstruct(uT_d, mT_d, p, tg, scfg, rcfg, 0.0, &other_guess);

    SpaceTimeField du = r1.u, dm = r1.m;
    for (size_t i = 0; i < du.v.size(); ++i) du.v[i] -= fwd.u.v[i];
    for (size_t i = 0; i < dm.v.size(); ++i) dm.v[i] -= fwd.m.v[i];
    double err1 = window_error_norms(du, dm, 1.25).total();

    SpaceTimeField du12 = r1.u, dm12 = r1.m;
    for (size_t i = 0; i < du12.v.size(); ++i) du12.v[i] -= r2.u.v[i];
    for (size_t i = 0; i < dm12.v.size(); ++i) dm12.v[i] -= r2.m.v[i];
    double gap = window_error_norms(du12, dm12, 1.25).total();
    CHECK(gap <= 10.0 * std::max(err1, 1e-12));
}

TEST_CASE("stability sweep: errors decay and the fitted slope is positive") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 48);
    ModelParams p = retro_params();
    SolverConfig scfg;
    RetroConfig rcfg;  // auto alpha = delta^2
    rcfg.cg_iters = 400;
    rcfg.outer_iters = 4;
    std::vector<double> deltas = {1e-1, 1e-2, 1e-3};
    StabilityOutcome out = stability_experiment(p, scfg, rcfg, g, tg, deltas, {11});
    REQUIRE(out.records.size() == deltas.size());
    for (size_t i = 1; i < out.records.size(); ++i)
        CHECK(out.records[i].total <= 2.0 * out.records[i - 1].total);
    CHECK(out.fit_ok);
    CHECK(out.rho_emp > 0.0);
}

TEST_CASE("shrinking the window toward T does not increase the error") {
    Grid g = Grid::square(33, 33);
    TimeGrid tg = TimeGrid::make(2.0, 48);
    ModelParams p = retro_params();
    SolverConfig scfg;
    RetroConfig rcfg;
    rcfg.cg_iters = 400;
    rcfg.outer_iters = 3;
    ScalarField m0_true = default_m0(g);
    ScalarField uT = ScalarField::sample(g, [&](double x, double y) { return p.psi_at(x, y); });
    MFGSolution fwd = solve_mfg(m0_true, uT, p, g, tg, scfg);
    REQUIRE(fwd.converged);
    double delta = 1e-2;
    ScalarField uTn = add_noise(fwd.u.slice(tg.nt - 1), delta, 4);
    ScalarField mTn = add_noise(fwd.m.slice(tg.nt - 1), delta, 5);
    RetroResult r = reconstruct(uTn, mTn, p, tg, scfg, rcfg, delta);
    SpaceTimeField du = r.u, dm = r.m;
    for (size_t i = 0; i < du.v.size(); ++i) du.v[i] -= fwd.u.v[i];
    for (size_t i = 0; i < dm.v.size(); ++i) dm.v[i] -= fwd.m.v[i];
    double e_wide = window_error_norms(du, dm, 1.25).total();
    double e_tight = window_error_norms(du, dm, 1.75).total();
    CHECK(e_tight <= e_wide * 1.0 + 1e-12);
}

TEST_CASE("retro config validation") {
    RetroConfig r;
    r.gamma = 0.5;
    CHECK_THROWS_AS(r.validate(2.0), std::invalid_argument);
    r.gamma = 2.5;
    CHECK_THROWS_AS(r.validate(2.0), std::invalid_argument);
    r.gamma = 1.25;
    CHECK_NOTHROW(r.validate(2.0));
}

TEST_SUITE_END();
