#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/constraint_ops.hpp"
#include "sketchdecomp/sketch.hpp"
#include "sketchdecomp/traffic_sim.hpp"

namespace sketchdecomp {

/// Windowing and sketch parameters for one run. Upstream window k covers
/// [(k-1)*T, k*T); downstream windows are shifted by downstream_offset_ns,
/// the estimated minimum one-way delay. All 2n sketches share one hash
/// family. Window boundaries are half-open.
struct WindowingConfig {
  int n = 0;
  std::int64_t window_ns = 0;
  int m = 1;
  std::int64_t downstream_offset_ns = 0;
  int depth = 2;
  int width = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (m < 1) throw std::invalid_argument("windowing: m must be >= 1");
    if (n <= m) throw std::invalid_argument("windowing: n must be > m");
    if (window_ns <= 0) throw std::invalid_argument("windowing: T must be > 0");
    if (downstream_offset_ns < 0)
      throw std::invalid_argument("windowing: downstream offset must be >= 0");
    if (depth < 2) throw std::invalid_argument("windowing: sketch depth must be >= 2");
    if (width < 1) throw std::invalid_argument("windowing: sketch width must be >= 1");
  }

  Dims dims() const { return Dims{n, m, depth, width}; }

  /// Horizon of windows whose loss is reportable: upstream window k needs
  /// downstream windows k..k+m-1, so beyond n-m+1 late arrival and loss
  /// are indistinguishable.
  int report_horizon() const { return n - m + 1; }

  HashFamily hash_family() const { return HashFamily(depth, width, seed); }

  std::optional<int> window_of(std::int64_t t_ns, std::int64_t offset_ns) const {
    const int k = window_index(t_ns, window_ns, offset_ns);
    if (k < 1 || k > n) return std::nullopt;
    return k;
  }

  /// 1-based index floor((t - offset)/T) + 1, without range clipping.
  static int window_index(std::int64_t t_ns, std::int64_t window_ns,
                          std::int64_t offset_ns) {
    if (window_ns <= 0) throw std::invalid_argument("window_index: T must be > 0");
    const std::int64_t shifted = t_ns - offset_ns;
    std::int64_t q = shifted / window_ns;
    if (shifted % window_ns != 0 && shifted < 0) --q;
    return static_cast<int>(q) + 1;
  }
};

/// The observed sketches: upstream[k-1] counts packets sent in window k,
/// downstream[k-1] counts packets arriving in downstream window k.
/// spillover tallies delivered packets whose arrival fell outside the
/// downstream horizon.
struct SketchSeries {
  WindowingConfig config;
  std::vector<CmSketch> upstream;
  std::vector<CmSketch> downstream;
  std::int64_t spillover = 0;
};

/// Count every packet of the trace into per-window sketches. Rejects sends
/// outside upstream windows [1, n].
inline SketchSeries build_series(const PacketTrace& trace,
                                 const WindowingConfig& cfg) {
  cfg.validate();
  SketchSeries series;
  series.config = cfg;
  const HashFamily family = cfg.hash_family();
  series.upstream.assign(static_cast<std::size_t>(cfg.n), CmSketch(family));
  series.downstream.assign(static_cast<std::size_t>(cfg.n), CmSketch(family));
  for (const PacketRecord& rec : trace.records) {
    const FlowKey& key = trace.flows[static_cast<std::size_t>(rec.flow)];
    const auto send_window = cfg.window_of(rec.send_ns, 0);
    if (!send_window)
      throw std::invalid_argument("build_series: send time outside windows [1, n]");
    series.upstream[static_cast<std::size_t>(*send_window - 1)].insert(key);
    if (rec.arrival_ns == kDropped) continue;
    const auto arrival_window =
        cfg.window_of(rec.arrival_ns, cfg.downstream_offset_ns);
    if (!arrival_window) {
      ++series.spillover;
      continue;
    }
    series.downstream[static_cast<std::size_t>(*arrival_window - 1)].insert(key);
  }
  return series;
}

/// Stack the observed sketches into the right-hand sides of the
/// decomposition model: R from downstream windows m..n, S from upstream
/// windows 1..n.
inline ConstraintSystem make_constraint_system(const SketchSeries& series) {
  const Dims dims = series.config.dims();
  ConstraintSystem sys;
  sys.dims = dims;
  sys.R_stack.resize(dims.eq_blocks() * dims.d, dims.w);
  sys.S_stack.resize(dims.n * dims.d, dims.w);
  for (int j = 1; j <= dims.eq_blocks(); ++j) {
    const int k = dims.m + j - 1;
    sys.R_stack.middleRows((j - 1) * dims.d, dims.d) =
        series.downstream[static_cast<std::size_t>(k - 1)].counts();
  }
  for (int k = 1; k <= dims.n; ++k) {
    sys.S_stack.middleRows((k - 1) * dims.d, dims.d) =
        series.upstream[static_cast<std::size_t>(k - 1)].counts();
  }
  return sys;
}

/// The true branch decomposition of a trace: block (k, i) sketches the
/// packets sent in window k and received in downstream window k+i-1, and
/// loss_sketches[k-1] the packets of window k that were dropped. Delivered
/// packets whose branch falls outside 1..m (possible only when the jitter
/// bound exceeds (m-1)*T) or outside the window range are tallied in
/// out_of_model.
struct BranchDecomposition {
  SubSketchStack stack;
  std::vector<CmSketch> loss_sketches;
  std::int64_t out_of_model = 0;
};

inline BranchDecomposition build_branch_stack(const PacketTrace& trace,
                                              const WindowingConfig& cfg) {
  cfg.validate();
  const HashFamily family = cfg.hash_family();
  BranchDecomposition out{SubSketchStack(cfg.dims()),
                          std::vector<CmSketch>(static_cast<std::size_t>(cfg.n),
                                                CmSketch(family)),
                          0};
  const Dims dims = cfg.dims();
  for (const PacketRecord& rec : trace.records) {
    const FlowKey& key = trace.flows[static_cast<std::size_t>(rec.flow)];
    const auto send_window = cfg.window_of(rec.send_ns, 0);
    if (!send_window)
      throw std::invalid_argument("build_branch_stack: send time outside windows");
    const int k = *send_window;
    if (rec.arrival_ns == kDropped) {
      out.loss_sketches[static_cast<std::size_t>(k - 1)].insert(key);
      continue;
    }
    const auto arrival_window =
        cfg.window_of(rec.arrival_ns, cfg.downstream_offset_ns);
    if (!arrival_window) {
      ++out.out_of_model;
      continue;
    }
    const int i = *arrival_window - k + 1;
    if (i < 1 || i > dims.m) {
      ++out.out_of_model;
      continue;
    }
    auto block = out.stack.block(k, i);
    for (int row = 0; row < dims.d; ++row) {
      block(row, family.column(row, key)) += 1.0;
    }
  }
  return out;
}

inline nlohmann::json windowing_to_json(const WindowingConfig& cfg) {
  return nlohmann::json{{"n", cfg.n},
                        {"T_ns", cfg.window_ns},
                        {"m", cfg.m},
                        {"downstream_offset_ns", cfg.downstream_offset_ns},
                        {"d", cfg.depth},
                        {"w", cfg.width},
                        {"seed", cfg.seed}};
}

inline WindowingConfig windowing_from_json(const nlohmann::json& j) {
  WindowingConfig cfg;
  cfg.n = j.at("n").get<int>();
  cfg.window_ns = j.at("T_ns").get<std::int64_t>();
  cfg.m = j.at("m").get<int>();
  cfg.downstream_offset_ns = j.at("downstream_offset_ns").get<std::int64_t>();
  cfg.depth = j.at("d").get<int>();
  cfg.width = j.at("w").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

inline nlohmann::json series_to_json(const SketchSeries& series) {
  nlohmann::json sketches = nlohmann::json::array();
  for (int k = 1; k <= series.config.n; ++k) {
    sketches.push_back(
        {{"window", k},
         {"role", "S"},
         {"sketch", sketch_to_json(series.upstream[static_cast<std::size_t>(k - 1)])}});
  }
  for (int k = 1; k <= series.config.n; ++k) {
    sketches.push_back(
        {{"window", k},
         {"role", "R"},
         {"sketch",
          sketch_to_json(series.downstream[static_cast<std::size_t>(k - 1)])}});
  }
  return nlohmann::json{{"config", windowing_to_json(series.config)},
                        {"spillover", series.spillover},
                        {"sketches", std::move(sketches)}};
}

inline SketchSeries series_from_json(const nlohmann::json& j) {
  SketchSeries series;
  series.config = windowing_from_json(j.at("config"));
  series.spillover = j.at("spillover").get<std::int64_t>();
  const CmSketch zero(series.config.hash_family());
  series.upstream.assign(static_cast<std::size_t>(series.config.n), zero);
  series.downstream.assign(static_cast<std::size_t>(series.config.n), zero);
  for (const auto& entry : j.at("sketches")) {
    const int k = entry.at("window").get<int>();
    if (k < 1 || k > series.config.n)
      throw std::invalid_argument("series_from_json: window outside [1, n]");
    const std::string role = entry.at("role").get<std::string>();
    CmSketch sketch = sketch_from_json(entry.at("sketch"));
    if (role == "S")
      series.upstream[static_cast<std::size_t>(k - 1)] = std::move(sketch);
    else if (role == "R")
      series.downstream[static_cast<std::size_t>(k - 1)] = std::move(sketch);
    else
      throw std::invalid_argument("series_from_json: role must be S or R");
  }
  return series;
}

}  // namespace sketchdecomp
