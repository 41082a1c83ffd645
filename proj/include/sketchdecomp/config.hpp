#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/admm_solver.hpp"
#include "sketchdecomp/loss_report.hpp"
#include "sketchdecomp/traffic_sim.hpp"
#include "sketchdecomp/windowing.hpp"

namespace sketchdecomp {

/// Everything one run needs, from a single JSON document.
struct RunConfig {
  WindowingConfig windowing;
  std::vector<FlowSpec> flows;
  DelayModel delay;
  LossSchedule losses;
  std::int64_t clock_offset_ns = 0;
  std::uint64_t sim_seed = 0;
  SolverParams solver;
  SeverityThresholds thresholds;

  void validate() const {
    windowing.validate();
    solver.validate();
    thresholds.validate();
    if (delay.d_min_ns < 0 || delay.jitter_bound_ns < 0)
      throw std::invalid_argument("config: negative delay parameter");
    if (delay.jitter_bound_ns >=
        static_cast<std::int64_t>(windowing.m) * windowing.window_ns)
      throw std::invalid_argument(
          "config: jitter_bound_ns must be < m * T_ns (branches would fall "
          "outside the modeled span)");
  }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (auto it = j.find(key); it != j.end()) return it->get<T>();
  return fallback;
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    const auto& wj = j.at("windowing");
    cfg.windowing.n = wj.at("n").get<int>();
    cfg.windowing.window_ns = wj.at("T_ns").get<std::int64_t>();
    cfg.windowing.m = wj.at("m").get<int>();

    const auto& sk = j.at("sketch");
    cfg.windowing.depth = sk.at("d").get<int>();
    cfg.windowing.width = sk.at("w").get<int>();
    cfg.windowing.seed = sk.at("seed").get<std::uint64_t>();

    const auto& sim = j.at("simulator");
    cfg.sim_seed = sim.at("seed").get<std::uint64_t>();
    cfg.clock_offset_ns = detail::get_or<std::int64_t>(sim, "clock_offset_ns", 0);
    for (const auto& fj : sim.at("flows")) {
      FlowSpec spec;
      spec.key = FlowKey{fj.at("key").get<std::string>()};
      spec.packets_per_window = fj.at("packets_per_window").get<std::int64_t>();
      spec.first_window = detail::get_or<int>(fj, "first_window", 1);
      spec.last_window = detail::get_or<int>(fj, "last_window", cfg.windowing.n);
      cfg.flows.push_back(std::move(spec));
    }

    const auto& dj = sim.at("delay");
    cfg.delay.d_min_ns = dj.at("d_min_ns").get<std::int64_t>();
    cfg.delay.jitter_bound_ns = dj.at("jitter_bound_ns").get<std::int64_t>();
    if (auto it = dj.find("distribution"); it != dj.end()) {
      const std::string family = it->at("family").get<std::string>();
      if (family != "truncated_lognormal")
        throw std::invalid_argument("config: unknown delay distribution family '" +
                                    family + "'");
      cfg.delay.jitter_median_ns = it->at("median_ns").get<double>();
      cfg.delay.log_sigma = it->at("log_sigma").get<double>();
    } else {
      // Default shape: right-skewed with most mass in the lower quarter of
      // the jitter range.
      cfg.delay.jitter_median_ns =
          static_cast<double>(cfg.delay.jitter_bound_ns) / 4.0;
      cfg.delay.log_sigma = 0.5;
    }

    // Downstream windows start at the estimated minimum delay by default.
    cfg.windowing.downstream_offset_ns = detail::get_or<std::int64_t>(
        j.at("windowing"), "downstream_offset_ns", cfg.delay.d_min_ns);

    if (auto it = sim.find("losses"); it != sim.end()) {
      for (const auto& lj : *it) {
        LossRule rule;
        rule.flow = FlowKey{lj.at("flow").get<std::string>()};
        if (auto w = lj.find("window"); w != lj.end()) rule.window = w->get<int>();
        if (auto p = lj.find("p"); p != lj.end()) rule.drop_probability = p->get<double>();
        if (auto c = lj.find("count"); c != lj.end())
          rule.drop_count = c->get<std::int64_t>();
        cfg.losses.push_back(std::move(rule));
      }
    }

    if (auto it = j.find("solver"); it != j.end()) {
      cfg.solver.sigma = detail::get_or<double>(*it, "sigma", 1.0);
      cfg.solver.gamma = detail::get_or<double>(*it, "gamma", 1.618);
      cfg.solver.tol = detail::get_or<double>(*it, "tol", 1e-4);
      cfg.solver.max_iter = detail::get_or<int>(*it, "max_iter", 5000);
    }
    if (auto it = j.find("report"); it != j.end()) {
      cfg.thresholds.t_severe = detail::get_or<double>(*it, "t_severe", 20.0);
      cfg.thresholds.t_extreme = detail::get_or<double>(*it, "t_extreme", 300.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

/// Parse a JSON document, reporting syntax errors with line and column.
inline nlohmann::json parse_json_text(const std::string& text,
                                      const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(e.byte, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw std::invalid_argument(origin + ":" + std::to_string(line) + ":" +
                                std::to_string(col) + ": " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(parse_json_text(buf.str(), path));
}

/// Command-line overrides applied on top of the config file.
struct ConfigOverrides {
  std::optional<int> n, m, d, w, max_iter;
  std::optional<double> sigma, gamma, tol;
  std::optional<std::uint64_t> seed;

  void apply(RunConfig& cfg) const {
    if (n) cfg.windowing.n = *n;
    if (m) cfg.windowing.m = *m;
    if (d) cfg.windowing.depth = *d;
    if (w) cfg.windowing.width = *w;
    if (seed) {
      cfg.windowing.seed = *seed;
      cfg.sim_seed = *seed;
    }
    if (sigma) cfg.solver.sigma = *sigma;
    if (gamma) cfg.solver.gamma = *gamma;
    if (tol) cfg.solver.tol = *tol;
    if (max_iter) cfg.solver.max_iter = *max_iter;
    cfg.validate();
  }
};

}  // namespace sketchdecomp
