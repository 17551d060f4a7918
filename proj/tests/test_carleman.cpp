#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cmfg/carleman.hpp"

using namespace cmfg;

TEST_SUITE_BEGIN("carleman");

TEST_CASE("weight function values and monotonicity") {
    CHECK(cwf(0.0, CarlemanParams{1.0, 1.0 + 1e-12}) ==
          doctest::Approx(7.3890560989306495).epsilon(1e-9));
    CHECK(cwf(0.0, CarlemanParams{1.0, 2.0}) ==
          doctest::Approx(54.598150033144236).epsilon(1e-12));
    CarlemanParams cp{3.0, 2.5};
    double prev = cwf(0.0, cp);
    for (int i = 1; i <= 10; ++i) {
        double cur = cwf(0.2 * i, cp);
        CHECK(cur > prev);
        prev = cur;
    }
    // overflow guard on the raw form
    CHECK_THROWS_AS(cwf(2.0, CarlemanParams{100.0, 4.0}), std::overflow_error);
    CHECK_THROWS_AS((CarlemanParams{0.5, 2.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CarlemanParams{1.0, 0.5}.validate()), std::invalid_argument);
}

TEST_CASE("test functions satisfy the boundary conditions analytically") {
    for (int k = 0; k <= 4; ++k)
        for (int j = 0; j <= 4; ++j) {
            TestFunction tf;
            tf.k = k;
            tf.j = j;
            for (int i = 0; i <= 10; ++i) {
                double s = i / 10.0;
                CHECK(tf.w(1.0, s) == doctest::Approx(0.0).epsilon(1e-12));   // Gamma0 trace
                CHECK(tf.wx(0.0, s) == doctest::Approx(0.0).epsilon(1e-12));  // Neumann at x=0
                CHECK(tf.wy(s, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
                CHECK(tf.wy(s, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
            }
        }
}

TEST_CASE("zero function gives zero margins") {
    TestFunction tf;
    tf.amplitude = 0.0;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    CarlemanReport r = check_thm51(tf, L, CarlemanParams{2.0, 2.0}, 2.0);
    CHECK(r.lhs == 0.0);
    CHECK(r.margin == 0.0);
    CHECK(r.margin_alt == 0.0);
    CarlemanReport r2 = check_thm52(tf, L, CarlemanParams{2.0, 2.0}, 2.0);
    CHECK(r2.margin == 0.0);
}

TEST_CASE("thm 5.1 margin nonnegative on the documented example") {
    // u = cos(pi x / 2) cos(pi y) e^{-t}, constant operator, lambda=2, s=2
    TestFunction tf;
    tf.k = 0;
    tf.j = 1;
    tf.tau = TimeFactor::exp_neg;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    CarlemanReport r = check_thm51(tf, L, CarlemanParams{2.0, 2.0}, 2.0);
    CHECK(r.valid);
    CHECK(r.margin >= 0.0);
    CHECK(r.margin_alt >= 0.0);
}

TEST_CASE("margins scale quadratically with the amplitude") {
    TestFunction tf;
    tf.k = 1;
    tf.j = 2;
    tf.tau = TimeFactor::sine;
    tf.amplitude = 1.0;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    CarlemanParams cp{2.0, 3.0};
    CarlemanReport r1 = check_thm51(tf, L, cp, 2.0);
    TestFunction tf3 = tf;
    tf3.amplitude = 3.0;
    CarlemanReport r9 = check_thm51(tf3, L, cp, 2.0);
    CHECK(r9.margin == doctest::Approx(9.0 * r1.margin).epsilon(1e-12));
    CHECK(r9.lhs == doctest::Approx(9.0 * r1.lhs).epsilon(1e-12));
    CHECK(r9.allow_uT == doctest::Approx(9.0 * r1.allow_uT).epsilon(1e-12));
}

TEST_CASE("itemized terms reproduce the margins") {
    TestFunction tf;
    tf.k = 2;
    tf.j = 1;
    tf.tau = TimeFactor::exp_pos;
    DiagOperator L = make_variable_test_operator();
    CarlemanParams cp{5.0, 3.0};
    CarlemanReport r = check_thm51(tf, L, cp, 2.0);
    double recompute = r.lhs + r.allow_uT + r.allow_gradT - (r.rhs_ut + r.rhs_Lu + r.rhs_u2);
    CHECK(std::fabs(recompute - r.margin) <= 1e-12 * std::max(1.0, std::fabs(r.margin)));
    CarlemanReport r2 = check_thm52(tf, L, cp, 2.0);
    double recompute2 = r2.lhs + r2.allow_uT + r2.allow_init - r2.rhs_grad;
    CHECK(std::fabs(recompute2 - r2.margin) <= 1e-12 * std::max(1.0, std::fabs(r2.margin)));
}

TEST_CASE("time-independent member evaluates with a vanishing u_t block") {
    TestFunction tf;
    tf.k = 0;
    tf.j = 0;
    tf.tau = TimeFactor::one;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    CarlemanReport r = check_thm52(tf, L, CarlemanParams{1.0, 4.0}, 2.0);
    CHECK(r.valid);
    CHECK(std::isfinite(r.margin));
}

TEST_CASE("thm 5.2 empirical threshold within the documented sweep") {
    std::vector<TestFunction> suite = make_suite(8, 2, 99);
    DiagOperator L = make_constant_operator(0.1, 0.1);
    ModelParams p;
    ScanResult scan = scan_thresholds(suite, CarlemanTheorem::thm52, {1, 2, 5, 10},
                                      {2, 3, 4, 6, 8}, L, p, 2.0);
    REQUIRE(scan.threshold_found);
    CHECK(scan.threshold_s <= 8.0);
    // the fitted constant for the lambda s^2 term is positive at the threshold
    for (const ScanCell& c : scan.cells)
        if (c.s >= scan.threshold_s) CHECK(c.min_empirical_C > 0.0);
}

TEST_CASE("thm 7.1 margins and hessian-block constant") {
    ModelParams p;  // sigma^2 = 0.2 everywhere
    std::vector<TestFunction> suite = make_suite(6, 2, 5);
    for (const TestFunction& tf : suite)
        for (double lambda : {1.0, 2.0, 5.0, 10.0}) {
            CarlemanReport r = check_thm71(tf, p, CarlemanParams{lambda, 2.0});
            CHECK(r.valid);
            CHECK(r.margin >= 0.0);
            CHECK(r.margin_alt >= 0.0);
            CHECK(r.empirical_C > 0.0);
            CHECK(r.hess_block > 0.0);
        }
    // the documented single example: cos(x pi/2) cos(pi y) (1+t)
    TestFunction ex;
    ex.k = 0;
    ex.j = 1;
    ex.tau = TimeFactor::one_plus_t;
    for (double lambda : {1.0, 4.0, 7.0, 10.0}) {
        CarlemanReport r = check_thm71(ex, p, CarlemanParams{lambda, 2.0});
        CHECK(r.margin >= 0.0);
    }
}

TEST_CASE("zero-function suite passes at the smallest scanned s") {
    TestFunction zero;
    zero.amplitude = 0.0;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    ModelParams p;
    ScanResult scan =
        scan_thresholds({zero}, CarlemanTheorem::thm51, {1, 10}, {4, 2, 3}, L, p, 2.0);
    for (const ScanCell& c : scan.cells) {
        CHECK(c.min_margin == 0.0);
        CHECK(c.pass);
    }
    REQUIRE(scan.threshold_found);
    CHECK(scan.threshold_s == 2.0);
}

TEST_CASE("scan table margins grow with s at fixed lambda") {
    std::vector<TestFunction> suite = make_suite(20, 2, 7);
    DiagOperator L = make_constant_operator(0.1, 0.1);
    ModelParams p;
    ScanResult scan =
        scan_thresholds(suite, CarlemanTheorem::thm51, {1, 2, 5, 10}, {2, 3, 4}, L, p, 2.0);
    REQUIRE(scan.threshold_found);
    for (double lambda : {1.0, 2.0, 5.0, 10.0}) {
        double prev = -1e300;
        for (double s : {2.0, 3.0, 4.0}) {
            for (const ScanCell& c : scan.cells)
                if (c.lambda == lambda && c.s == s) {
                    CHECK(c.min_margin >= prev);
                    prev = c.min_margin;
                }
        }
    }
}

TEST_CASE("scan on a scaled copy keeps the threshold") {
    std::vector<TestFunction> suite = make_suite(4, 2, 12);
    TestFunction copy = suite[1];
    copy.amplitude *= 7.0;
    suite.push_back(copy);
    DiagOperator L = make_constant_operator(0.1, 0.1);
    ModelParams p;
    ScanResult a = scan_thresholds({suite.begin(), suite.end() - 1}, CarlemanTheorem::thm51,
                                   {1, 5}, {2, 3}, L, p, 2.0);
    ScanResult b = scan_thresholds(suite, CarlemanTheorem::thm51, {1, 5}, {2, 3}, L, p, 2.0);
    REQUIRE(a.threshold_found == b.threshold_found);
    CHECK(a.threshold_s == b.threshold_s);
}

TEST_CASE("integration-by-parts identity holds to quadrature accuracy") {
    DiagOperator Lc = make_constant_operator(0.1, 0.1);
    DiagOperator Lv = make_variable_test_operator();
    std::vector<TestFunction> suite = make_suite(10, 2, 21);
    for (const DiagOperator* L : {&Lc, &Lv})
        for (const TestFunction& tf : suite) {
            IbpSides sides = ibp_identity_sides(tf, *L, 2.0);
            double scale = std::max({std::fabs(sides.lhs), std::fabs(sides.rhs), 1e-10});
            CHECK(std::fabs(sides.lhs - sides.rhs) / scale < 1e-3);
        }
}

TEST_CASE("quadrature refinement flag trips on a crude grid") {
    TestFunction tf;
    tf.k = 4;
    tf.j = 4;
    tf.tau = TimeFactor::exp_pos;
    DiagOperator L = make_constant_operator(0.1, 0.1);
    QuadratureSpec crude;
    crude.n_space = 9;  // far too coarse for mode 4
    crude.min_nt = 41;
    crude.r_step = 0.5;
    CarlemanReport r = check_thm51(tf, L, CarlemanParams{1.0, 2.0}, 2.0, crude);
    CHECK_FALSE(r.valid);
}

TEST_CASE("one-dimensional members verify as well") {
    DiagOperator L = make_constant_operator(0.1, 0.1);
    std::vector<TestFunction> suite = make_suite(6, 1, 3);
    ModelParams p;
    ScanResult scan =
        scan_thresholds(suite, CarlemanTheorem::thm51, {1, 10}, {2, 4}, L, p, 2.0);
    for (const ScanCell& c : scan.cells) {
        CHECK(c.all_valid);
        CHECK(c.pass);
    }
}

TEST_SUITE_END();
