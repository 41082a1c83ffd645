#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "sketchdecomp/config.hpp"

using namespace sketchdecomp;

namespace {

nlohmann::json base_config() {
  return nlohmann::json::parse(R"({
    "windowing": {"n": 8, "T_ns": 10000000, "m": 2},
    "sketch": {"d": 3, "w": 8, "seed": 7},
    "simulator": {
      "seed": 11,
      "flows": [
        {"key": "a", "packets_per_window": 30, "first_window": 2, "last_window": 7},
        {"key": "b", "packets_per_window": 20}
      ],
      "delay": {"d_min_ns": 2000000, "jitter_bound_ns": 9000000,
                "distribution": {"family": "truncated_lognormal",
                                 "median_ns": 3000000, "log_sigma": 0.5}},
      "losses": [{"flow": "a", "p": 0.2}, {"flow": "b", "window": 3, "count": 5}]
    },
    "solver": {"sigma": 1.0, "gamma": 1.618, "tol": 0.0001, "max_iter": 3000},
    "report": {"t_severe": 5.0, "t_extreme": 50.0}
  })");
}

}  // namespace

TEST_CASE("full config parses") {
  const RunConfig cfg = parse_config(base_config());
  REQUIRE(cfg.windowing.n == 8);
  REQUIRE(cfg.windowing.m == 2);
  REQUIRE(cfg.windowing.depth == 3);
  REQUIRE(cfg.windowing.width == 8);
  REQUIRE(cfg.windowing.downstream_offset_ns == 2000000);  // defaults to d_min
  REQUIRE(cfg.flows.size() == 2);
  REQUIRE(cfg.flows[1].first_window == 1);  // default
  REQUIRE(cfg.flows[1].last_window == 8);   // default
  REQUIRE(cfg.losses.size() == 2);
  REQUIRE(cfg.losses[0].drop_probability == 0.2);
  REQUIRE(cfg.losses[1].drop_count == 5);
  REQUIRE(cfg.solver.gamma == 1.618);
  REQUIRE(cfg.thresholds.t_extreme == 50.0);
}

TEST_CASE("solver and report sections are optional") {
  nlohmann::json j = base_config();
  j.erase("solver");
  j.erase("report");
  const RunConfig cfg = parse_config(j);
  REQUIRE(cfg.solver.sigma == 1.0);
  REQUIRE(cfg.solver.max_iter == 5000);
  REQUIRE(cfg.thresholds.t_severe == 20.0);
}

TEST_CASE("jitter bound at or past m*T is rejected") {
  nlohmann::json j = base_config();
  j["simulator"]["delay"]["jitter_bound_ns"] = 20000000;  // == m*T
  REQUIRE_THROWS_AS(parse_config(j), std::invalid_argument);
  j["simulator"]["delay"]["jitter_bound_ns"] = 19999999;
  REQUIRE_NOTHROW(parse_config(j));
}

TEST_CASE("unknown distribution family is rejected") {
  nlohmann::json j = base_config();
  j["simulator"]["delay"]["distribution"]["family"] = "uniform";
  REQUIRE_THROWS_AS(parse_config(j), std::invalid_argument);
}

TEST_CASE("missing sections are reported as config errors") {
  nlohmann::json j = base_config();
  j.erase("sketch");
  try {
    parse_config(j);
    FAIL("expected a config error");
  } catch (const std::invalid_argument& e) {
    REQUIRE(std::string(e.what()).rfind("config:", 0) == 0);
  }
}

TEST_CASE("syntax errors carry line and column") {
  const std::string broken = "{\n  \"windowing\": {\n  oops\n}\n";
  try {
    parse_json_text(broken, "test.json");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    REQUIRE(std::string(e.what()).find("test.json:3") != std::string::npos);
  }
}

TEST_CASE("overrides rewrite the chosen fields and revalidate") {
  RunConfig cfg = parse_config(base_config());
  ConfigOverrides ov;
  ov.n = 12;
  ov.w = 16;
  ov.tol = 1e-3;
  ov.seed = 99;
  ov.apply(cfg);
  REQUIRE(cfg.windowing.n == 12);
  REQUIRE(cfg.windowing.width == 16);
  REQUIRE(cfg.solver.tol == 1e-3);
  REQUIRE(cfg.windowing.seed == 99);
  REQUIRE(cfg.sim_seed == 99);

  ConfigOverrides bad;
  bad.m = 12;  // n must stay > m
  REQUIRE_THROWS_AS(bad.apply(cfg), std::invalid_argument);
}
