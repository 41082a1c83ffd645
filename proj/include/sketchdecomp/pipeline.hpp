#pragma once

#include <utility>
#include <vector>

#include "sketchdecomp/admm_solver.hpp"
#include "sketchdecomp/config.hpp"
#include "sketchdecomp/constraint_ops.hpp"
#include "sketchdecomp/loss_report.hpp"
#include "sketchdecomp/traffic_sim.hpp"
#include "sketchdecomp/windowing.hpp"

namespace sketchdecomp {

struct SimulateResult {
  PacketTrace trace;
  GroundTruth ground_truth;
};

inline SimulateResult run_simulate(const RunConfig& cfg) {
  cfg.validate();
  auto [trace, gt] =
      generate_trace(cfg.flows, cfg.delay, cfg.losses, cfg.windowing.n,
                     cfg.windowing.window_ns, cfg.sim_seed, cfg.clock_offset_ns);
  return SimulateResult{std::move(trace), std::move(gt)};
}

struct DetectResult {
  SketchSeries series;
  SolveResult solved;
  std::vector<CmSketch> loss_sketches;
  std::vector<FlowLossEstimate> estimates;
  int horizon = 0;
};

/// Count the trace into sketches, solve the decomposition model, and query
/// loss estimates for the configured flows. The solver's convergence flag
/// is left on `solved.converged`; estimates are produced either way.
inline DetectResult run_detect(const RunConfig& cfg, const PacketTrace& trace) {
  cfg.validate();
  DetectResult out;
  out.series = build_series(trace, cfg.windowing);
  out.solved = solve(make_constraint_system(out.series), cfg.solver);
  out.loss_sketches = recover_loss_sketches(out.solved.stack, out.series.upstream);
  out.horizon = cfg.windowing.report_horizon();
  std::vector<FlowKey> keys;
  keys.reserve(cfg.flows.size());
  for (const FlowSpec& spec : cfg.flows) keys.push_back(spec.key);
  out.estimates = estimate_flow_loss(out.loss_sketches, out.series.upstream, keys);
  return out;
}

struct EvaluateResult {
  FlowGroups groups;
  std::vector<GroupMetrics> metrics;
  std::vector<std::string> warnings;
};

inline EvaluateResult run_evaluate(const std::vector<FlowLossEstimate>& estimates,
                                   int horizon, const GroundTruth& gt,
                                   const SeverityThresholds& thresholds) {
  for (const FlowLossEstimate& e : estimates) {
    if (gt.loss.find(e.flow) == gt.loss.end())
      throw std::invalid_argument("evaluate: flow '" + e.flow.bytes +
                                  "' absent from ground truth");
  }
  EvaluateResult out;
  out.groups = group_flows(gt, horizon, thresholds);
  out.metrics = evaluate_groups(estimates, gt, out.groups, horizon, &out.warnings);
  return out;
}

}  // namespace sketchdecomp
