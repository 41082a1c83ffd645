#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/hashing.hpp"
#include "sketchdecomp/sketch.hpp"
#include "sketchdecomp/traffic_sim.hpp"

namespace sketchdecomp {

/// Denominator guard for loss rates of zero-traffic queries.
inline constexpr double kRateEpsilon = 1e-9;

struct FlowLossEstimate {
  FlowKey flow;
  int window = 0;
  double estimated_loss = 0.0;  // CM query on phi_k
  double sent_estimate = 0.0;   // CM query on S_k
  double loss_rate = 0.0;       // estimated_loss / max(sent_estimate, eps)
};

/// Query every (flow, window) pair against the recovered loss sketches.
/// phis covers the reportable horizon (windows 1..K); upstream must cover
/// at least as much.
inline std::vector<FlowLossEstimate> estimate_flow_loss(
    const std::vector<CmSketch>& phis, const std::vector<CmSketch>& upstream,
    const std::vector<FlowKey>& flows) {
  if (upstream.size() < phis.size())
    throw std::invalid_argument("estimate_flow_loss: fewer upstream sketches than phis");
  for (std::size_t k = 0; k < phis.size(); ++k)
    require_same_family(phis[k], upstream[k]);
  std::vector<FlowLossEstimate> out;
  out.reserve(flows.size() * phis.size());
  for (const FlowKey& flow : flows) {
    for (std::size_t k = 0; k < phis.size(); ++k) {
      FlowLossEstimate e;
      e.flow = flow;
      e.window = static_cast<int>(k) + 1;
      e.estimated_loss = phis[k].query(flow);
      e.sent_estimate = upstream[k].query(flow);
      e.loss_rate = e.estimated_loss / std::max(e.sent_estimate, kRateEpsilon);
      out.push_back(std::move(e));
    }
  }
  return out;
}

enum class Severity { kExtremelySevere, kSevere, kSlight };

inline const char* severity_label(Severity s) {
  switch (s) {
    case Severity::kExtremelySevere: return "extremely_severe";
    case Severity::kSevere: return "severe";
    case Severity::kSlight: return "slight";
  }
  return "?";
}

struct SeverityThresholds {
  double t_severe = 20.0;
  double t_extreme = 300.0;

  void validate() const {
    if (!(t_extreme > t_severe && t_severe > 0.0))
      throw std::invalid_argument("thresholds: need t_extreme > t_severe > 0");
  }
};

struct FlowGroups {
  std::vector<FlowKey> extremely_severe;
  std::vector<FlowKey> severe;
  std::vector<FlowKey> slight;

  const std::vector<FlowKey>& of(Severity s) const {
    switch (s) {
      case Severity::kExtremelySevere: return extremely_severe;
      case Severity::kSevere: return severe;
      case Severity::kSlight: return slight;
    }
    throw std::logic_error("unreachable");
  }
};

/// Partition flows by mean actual loss per window over windows 1..horizon:
/// above t_extreme, extremely severe; in (t_severe, t_extreme], severe;
/// at or below t_severe, slight.
inline FlowGroups group_flows(const GroundTruth& gt, int horizon,
                              const SeverityThresholds& thresholds) {
  thresholds.validate();
  if (horizon < 1 || horizon > gt.n)
    throw std::invalid_argument("group_flows: horizon outside [1, n]");
  FlowGroups groups;
  for (const auto& [flow, loss] : gt.loss) {
    double total = 0.0;
    for (int k = 0; k < horizon; ++k) total += static_cast<double>(loss[static_cast<std::size_t>(k)]);
    const double mean = total / static_cast<double>(horizon);
    if (mean > thresholds.t_extreme)
      groups.extremely_severe.push_back(flow);
    else if (mean > thresholds.t_severe)
      groups.severe.push_back(flow);
    else
      groups.slight.push_back(flow);
  }
  return groups;
}

struct GroupMetrics {
  Severity group = Severity::kSlight;
  int flow_count = 0;
  double avg_actual = 0.0;
  double avg_estimated = 0.0;
  double avg_error = 0.0;  // mean |actual - estimated| per (flow, window)
  double ratio = 0.0;      // avg_error / avg_actual
};

/// Per-group comparison of estimates against ground truth over windows
/// 1..horizon. Empty groups are omitted (with a note appended to
/// `warnings` when given) rather than reported as NaN.
inline std::vector<GroupMetrics> evaluate_groups(
    const std::vector<FlowLossEstimate>& estimates, const GroundTruth& gt,
    const FlowGroups& groups, int horizon,
    std::vector<std::string>* warnings = nullptr) {
  if (horizon < 1 || horizon > gt.n)
    throw std::invalid_argument("evaluate_groups: horizon outside [1, n]");
  std::map<FlowKey, std::map<int, double>> by_flow;
  for (const FlowLossEstimate& e : estimates) by_flow[e.flow][e.window] = e.estimated_loss;

  std::vector<GroupMetrics> out;
  for (Severity sev : {Severity::kExtremelySevere, Severity::kSevere, Severity::kSlight}) {
    const std::vector<FlowKey>& members = groups.of(sev);
    if (members.empty()) {
      if (warnings)
        warnings->push_back(std::string("group '") + severity_label(sev) +
                            "' is empty; omitted from metrics");
      continue;
    }
    GroupMetrics metrics;
    metrics.group = sev;
    metrics.flow_count = static_cast<int>(members.size());
    double sum_actual = 0.0, sum_estimated = 0.0, sum_abs_error = 0.0;
    std::int64_t cells = 0;
    for (const FlowKey& flow : members) {
      auto gt_it = gt.loss.find(flow);
      auto est_it = by_flow.find(flow);
      if (gt_it == gt.loss.end())
        throw std::invalid_argument("evaluate_groups: flow '" + flow.bytes +
                                    "' missing from ground truth");
      if (est_it == by_flow.end())
        throw std::invalid_argument("evaluate_groups: flow '" + flow.bytes +
                                    "' missing from estimates");
      for (int k = 1; k <= horizon; ++k) {
        auto cell = est_it->second.find(k);
        if (cell == est_it->second.end())
          throw std::invalid_argument("evaluate_groups: flow '" + flow.bytes +
                                      "' missing estimate for window " +
                                      std::to_string(k));
        const double actual =
            static_cast<double>(gt_it->second[static_cast<std::size_t>(k - 1)]);
        const double estimated = cell->second;
        sum_actual += actual;
        sum_estimated += estimated;
        sum_abs_error += std::abs(actual - estimated);
        ++cells;
      }
    }
    metrics.avg_actual = sum_actual / static_cast<double>(cells);
    metrics.avg_estimated = sum_estimated / static_cast<double>(cells);
    metrics.avg_error = sum_abs_error / static_cast<double>(cells);
    if (metrics.avg_actual > 0.0)
      metrics.ratio = metrics.avg_error / metrics.avg_actual;
    else
      metrics.ratio = metrics.avg_error == 0.0
                          ? 0.0
                          : std::numeric_limits<double>::infinity();
    out.push_back(metrics);
  }
  return out;
}

inline nlohmann::json estimates_to_json(const std::vector<FlowLossEstimate>& estimates,
                                        int horizon) {
  nlohmann::json arr = nlohmann::json::array();
  for (const FlowLossEstimate& e : estimates) {
    arr.push_back({{"flow", e.flow.bytes},
                   {"window", e.window},
                   {"estimated_loss", e.estimated_loss},
                   {"sent_estimate", e.sent_estimate},
                   {"loss_rate", e.loss_rate}});
  }
  return nlohmann::json{{"horizon", horizon}, {"estimates", std::move(arr)}};
}

inline std::pair<std::vector<FlowLossEstimate>, int> estimates_from_json(
    const nlohmann::json& j) {
  std::vector<FlowLossEstimate> out;
  const int horizon = j.at("horizon").get<int>();
  for (const auto& entry : j.at("estimates")) {
    FlowLossEstimate e;
    e.flow = FlowKey{entry.at("flow").get<std::string>()};
    e.window = entry.at("window").get<int>();
    e.estimated_loss = entry.at("estimated_loss").get<double>();
    e.sent_estimate = entry.at("sent_estimate").get<double>();
    e.loss_rate = entry.at("loss_rate").get<double>();
    out.push_back(std::move(e));
  }
  return {std::move(out), horizon};
}

/// Four-row metrics table, one column per non-empty group.
inline void write_metrics_csv(std::ostream& os,
                              const std::vector<GroupMetrics>& metrics) {
  os << std::setprecision(17);
  os << "metric";
  for (const GroupMetrics& g : metrics) os << ',' << severity_label(g.group);
  os << '\n';
  os << "avg_actual_loss";
  for (const GroupMetrics& g : metrics) os << ',' << g.avg_actual;
  os << '\n';
  os << "avg_estimated_loss";
  for (const GroupMetrics& g : metrics) os << ',' << g.avg_estimated;
  os << '\n';
  os << "avg_error";
  for (const GroupMetrics& g : metrics) os << ',' << g.avg_error;
  os << '\n';
  os << "ratio";
  for (const GroupMetrics& g : metrics) os << ',' << g.ratio;
  os << '\n';
}

/// Per-window actual vs estimated group means, for plotting.
inline void write_plot_csv(std::ostream& os,
                           const std::vector<FlowLossEstimate>& estimates,
                           const GroundTruth& gt, const FlowGroups& groups,
                           int horizon) {
  std::map<FlowKey, std::map<int, double>> by_flow;
  for (const FlowLossEstimate& e : estimates) by_flow[e.flow][e.window] = e.estimated_loss;
  std::vector<std::pair<Severity, const std::vector<FlowKey>*>> present;
  for (Severity sev : {Severity::kExtremelySevere, Severity::kSevere, Severity::kSlight}) {
    if (!groups.of(sev).empty()) present.emplace_back(sev, &groups.of(sev));
  }
  os << std::setprecision(17);
  os << "window";
  for (const auto& [sev, members] : present)
    os << ',' << severity_label(sev) << "_actual," << severity_label(sev)
       << "_estimated";
  os << '\n';
  for (int k = 1; k <= horizon; ++k) {
    os << k;
    for (const auto& [sev, members] : present) {
      double actual = 0.0, estimated = 0.0;
      for (const FlowKey& flow : *members) {
        actual += static_cast<double>(
            gt.loss.at(flow)[static_cast<std::size_t>(k - 1)]);
        auto it = by_flow.find(flow);
        if (it != by_flow.end()) {
          auto cell = it->second.find(k);
          if (cell != it->second.end()) estimated += cell->second;
        }
      }
      const double count = static_cast<double>(members->size());
      os << ',' << actual / count << ',' << estimated / count;
    }
    os << '\n';
  }
}

/// Delay histogram of a trace, for plotting.
inline void write_delay_histogram_csv(std::ostream& os, const PacketTrace& trace,
                                      int buckets, std::int64_t bucket_ns) {
  if (buckets < 1 || bucket_ns < 1)
    throw std::invalid_argument("delay histogram: invalid bucket spec");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(buckets), 0);
  std::int64_t overflow = 0;
  for (const PacketRecord& rec : trace.records) {
    if (rec.arrival_ns == kDropped) continue;
    const std::int64_t delta = rec.arrival_ns - rec.send_ns;
    const std::int64_t b = delta / bucket_ns;
    if (b >= 0 && b < buckets)
      ++counts[static_cast<std::size_t>(b)];
    else
      ++overflow;
  }
  os << "bucket_start_ns,bucket_end_ns,count\n";
  for (int b = 0; b < buckets; ++b) {
    os << b * bucket_ns << ',' << (b + 1) * bucket_ns << ','
       << counts[static_cast<std::size_t>(b)] << '\n';
  }
  os << (static_cast<std::int64_t>(buckets) * bucket_ns) << ",inf," << overflow
     << '\n';
}

}  // namespace sketchdecomp
