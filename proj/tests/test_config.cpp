#include <doctest.h>

#include <string>

#include "cmfg/config.hpp"

using namespace cmfg;

TEST_SUITE_BEGIN("config");

TEST_CASE("minimal config gets defaults") {
    AppConfig cfg = parse_config_json(R"({"model": {"sigma1_sq": 0.2, "sigma2_sq": 0.2, "T": 2}})");
    CHECK(cfg.model.sigma1_sq.base == 0.2);
    CHECK(cfg.model.T == 2.0);
    CHECK(cfg.model.a == 1.0);
    CHECK(cfg.model.epsilon == 0.1);
    CHECK(cfg.grid.nx == 33);
    CHECK(cfg.grid.nt == 64);
    CHECK(cfg.solver.damping == 0.5);
    CHECK(cfg.retro.gamma == 1.25);
}

TEST_CASE("epsilon must be positive") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"model": {"epsilon": 0}})"),
                         "epsilon must be > 0", ConfigError);
}

TEST_CASE("variant values are constrained") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"model": {"variant": "sideways"}})"),
                         "variant must be one of \"plus\", \"minus\"", ConfigError);
    AppConfig cfg = parse_config_json(R"({"model": {"variant": "minus"}})");
    CHECK(cfg.model.variant == PhiVariant::minus);
}

TEST_CASE("unknown fields are rejected by name") {
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"sigmas": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"extra_section": {}})"), ConfigError);
}

TEST_CASE("malformed json is a config error") {
    CHECK_THROWS_AS(parse_config_json("{not json"), ConfigError);
}

TEST_CASE("sigma accepts a constant or a variable profile") {
    AppConfig c1 = parse_config_json(R"({"model": {"sigma1_sq": 0.3}})");
    CHECK_FALSE(c1.model.sigma1_sq.variable);
    CHECK(c1.model.sigma1_sq.base == 0.3);
    AppConfig c2 = parse_config_json(R"({"model": {"sigma1_sq": {"base": 0.2, "amp": 0.1}}})");
    CHECK(c2.model.sigma1_sq.variable);
    CHECK(c2.model.sigma1_sq.amp == 0.1);
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"sigma1_sq": -0.1}})"), ConfigError);
}

TEST_CASE("retro section validated against T") {
    CHECK_THROWS_AS(parse_config_json(R"({"model": {"T": 2}, "retro": {"gamma": 3.0}})"),
                    ConfigError);
    AppConfig ok = parse_config_json(R"({"retro": {"tikhonov_alpha": "auto"}})");
    CHECK(ok.retro.alpha_auto());
    AppConfig fixed = parse_config_json(R"({"retro": {"tikhonov_alpha": 1e-6}})");
    CHECK(fixed.retro.tikhonov_alpha == 1e-6);
    CHECK_THROWS_AS(parse_config_json(R"({"retro": {"tikhonov_alpha": "sometimes"}})"),
                    ConfigError);
}

TEST_CASE("carleman lists validated") {
    CHECK_THROWS_AS(parse_config_json(R"({"carleman": {"lambda_list": [0.5]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"carleman": {"s_list": [1.0]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"carleman": {"theorem": "9.9"}})"), ConfigError);
}

TEST_CASE("config echo round-trips") {
    AppConfig cfg = parse_config_json(
        R"({"model": {"variant": "minus", "T": 3, "sigma2_sq": {"base": 0.25, "amp": 0.05}},
            "solver": {"damping": 0.7}, "grid": {"nx": 17, "ny": 21, "nt": 40}})");
    std::string echoed = config_to_json(cfg);
    AppConfig cfg2 = parse_config_json(echoed);
    CHECK(cfg2.model.variant == PhiVariant::minus);
    CHECK(cfg2.model.T == 3.0);
    CHECK(cfg2.model.sigma2_sq.variable);
    CHECK(cfg2.model.sigma2_sq.base == 0.25);
    CHECK(cfg2.solver.damping == 0.7);
    CHECK(cfg2.grid.ny == 21);
}

TEST_SUITE_END();
