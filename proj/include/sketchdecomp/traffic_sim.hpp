#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sketchdecomp/hashing.hpp"

namespace sketchdecomp {

/// One flow of the synthetic workload. Sends packets_per_window packets in
/// every window of [first_window, last_window] (1-based, inclusive).
struct FlowSpec {
  FlowKey key;
  std::int64_t packets_per_window = 1;
  int first_window = 1;
  int last_window = 1;
};

/// Shared one-way delay model: every sampled delay lies in
/// [d_min_ns, d_min_ns + jitter_bound_ns), drawn from a lognormal with the
/// given median and log-space sigma, truncated at the jitter bound.
/// jitter_bound_ns == 0 means no jitter: every delay is exactly d_min_ns.
struct DelayModel {
  std::int64_t d_min_ns = 0;
  std::int64_t jitter_bound_ns = 0;
  double jitter_median_ns = 0.0;
  double log_sigma = 0.5;

  double sample_jitter_ns(std::mt19937_64& rng) const;
};

/// One loss rule. Applies to `flow` in `window` (or every window the flow
/// is active in when `window` is absent). Exactly one of drop_probability
/// (per-packet Bernoulli) or drop_count (exact drops per matched window)
/// must be set.
struct LossRule {
  FlowKey flow;
  std::optional<int> window;
  std::optional<double> drop_probability;
  std::optional<std::int64_t> drop_count;
};

using LossSchedule = std::vector<LossRule>;

/// In-memory packet record. `flow` indexes PacketTrace::flows;
/// arrival_ns == kDropped marks a lost packet. Arrival timestamps are as
/// seen by the downstream clock (clock offset already applied).
struct PacketRecord {
  std::int32_t flow = 0;
  std::int64_t send_ns = 0;
  std::int64_t arrival_ns = 0;
};

inline constexpr std::int64_t kDropped = -1;

struct PacketTrace {
  std::vector<FlowKey> flows;
  std::vector<PacketRecord> records;
};

/// Exact per-window tallies, indexed [window-1]. Keys are sorted so the
/// JSON form is deterministic.
struct GroundTruth {
  int n = 0;
  std::map<FlowKey, std::vector<std::int64_t>> sent;
  std::map<FlowKey, std::vector<std::int64_t>> loss;
};

inline double DelayModel::sample_jitter_ns(std::mt19937_64& rng) const {
  if (jitter_bound_ns <= 0) return 0.0;
  auto uniform01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  };
  for (int attempt = 0; attempt < 256; ++attempt) {
    double u1 = uniform01();
    double u2 = uniform01();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    double j = jitter_median_ns * std::exp(log_sigma * z);
    if (j >= 0.0 && j < static_cast<double>(jitter_bound_ns)) return j;
  }
  // The distribution puts almost no mass past the bound in any sane
  // configuration; park pathological draws just inside it.
  return static_cast<double>(jitter_bound_ns) * (1.0 - 1e-12);
}

namespace detail {

struct ResolvedLoss {
  // window -> rule index, plus an optional blanket rule
  std::unordered_map<int, std::size_t> per_window;
  std::optional<std::size_t> blanket;
};

inline void validate_rule(const LossRule& rule, const FlowSpec& flow, int n) {
  if (rule.drop_probability.has_value() == rule.drop_count.has_value())
    throw std::invalid_argument(
        "loss rule for flow '" + rule.flow.bytes +
        "': exactly one of drop_probability or drop_count required");
  if (rule.drop_probability &&
      (*rule.drop_probability < 0.0 || *rule.drop_probability > 1.0))
    throw std::invalid_argument("loss rule for flow '" + rule.flow.bytes +
                                "': probability outside [0, 1]");
  if (rule.drop_count && (*rule.drop_count < 0 ||
                          *rule.drop_count > flow.packets_per_window))
    throw std::invalid_argument(
        "loss rule for flow '" + rule.flow.bytes +
        "': drop_count exceeds packets sent per window");
  if (rule.window && (*rule.window < 1 || *rule.window > n))
    throw std::invalid_argument("loss rule for flow '" + rule.flow.bytes +
                                "': window outside [1, n]");
  if (rule.window && rule.drop_count && *rule.drop_count > 0 &&
      (*rule.window < flow.first_window || *rule.window > flow.last_window))
    throw std::invalid_argument("loss rule for flow '" + rule.flow.bytes +
                                "': drop_count set for a window the flow "
                                "does not send in");
}

}  // namespace detail

/// Generate a deterministic trace plus exact ground truth. Packets of each
/// active window are placed uniformly at random within it (sorted, so send
/// times are nondecreasing per flow); delivered packets get
/// send + d_min + jitter (+ clock_offset_ns) as their recorded arrival.
///
/// The RNG stream is consumed flow by flow in spec order, window by window
/// ascending: send offsets, then drop decisions, then jitters. Identical
/// inputs and seed reproduce the trace exactly.
inline std::pair<PacketTrace, GroundTruth> generate_trace(
    const std::vector<FlowSpec>& flows, const DelayModel& delay,
    const LossSchedule& losses, int n, std::int64_t window_ns,
    std::uint64_t seed, std::int64_t clock_offset_ns = 0) {
  if (n < 1) throw std::invalid_argument("generate_trace: n must be >= 1");
  if (window_ns <= 0)
    throw std::invalid_argument("generate_trace: window length must be > 0");
  if (delay.d_min_ns < 0 || delay.jitter_bound_ns < 0)
    throw std::invalid_argument("generate_trace: negative delay parameter");

  std::unordered_map<std::string, std::size_t> flow_index;
  for (std::size_t f = 0; f < flows.size(); ++f) {
    const FlowSpec& spec = flows[f];
    if (spec.packets_per_window < 1)
      throw std::invalid_argument("flow '" + spec.key.bytes +
                                  "': packets_per_window must be >= 1");
    if (spec.first_window < 1 || spec.last_window > n ||
        spec.first_window > spec.last_window)
      throw std::invalid_argument("flow '" + spec.key.bytes +
                                  "': active window range invalid");
    if (!flow_index.emplace(spec.key.bytes, f).second)
      throw std::invalid_argument("duplicate flow key '" + spec.key.bytes + "'");
  }

  std::vector<detail::ResolvedLoss> resolved(flows.size());
  for (std::size_t r = 0; r < losses.size(); ++r) {
    const LossRule& rule = losses[r];
    auto it = flow_index.find(rule.flow.bytes);
    if (it == flow_index.end())
      throw std::invalid_argument("loss rule references unknown flow '" +
                                  rule.flow.bytes + "'");
    detail::validate_rule(rule, flows[it->second], n);
    detail::ResolvedLoss& slot = resolved[it->second];
    if (rule.window) {
      if (!slot.per_window.emplace(*rule.window, r).second)
        throw std::invalid_argument("duplicate loss rule for flow '" +
                                    rule.flow.bytes + "' window " +
                                    std::to_string(*rule.window));
    } else {
      if (slot.blanket)
        throw std::invalid_argument("duplicate blanket loss rule for flow '" +
                                    rule.flow.bytes + "'");
      slot.blanket = r;
    }
  }

  PacketTrace trace;
  GroundTruth gt;
  gt.n = n;
  for (const FlowSpec& spec : flows) {
    trace.flows.push_back(spec.key);
    gt.sent.emplace(spec.key, std::vector<std::int64_t>(n, 0));
    gt.loss.emplace(spec.key, std::vector<std::int64_t>(n, 0));
  }

  std::mt19937_64 rng(seed);
  std::vector<double> offsets;
  std::vector<std::int32_t> order;
  for (std::size_t f = 0; f < flows.size(); ++f) {
    const FlowSpec& spec = flows[f];
    auto& sent = gt.sent[spec.key];
    auto& loss = gt.loss[spec.key];
    const std::int64_t ppw = spec.packets_per_window;
    for (int k = spec.first_window; k <= spec.last_window; ++k) {
      const std::int64_t window_start = static_cast<std::int64_t>(k - 1) * window_ns;

      offsets.resize(static_cast<std::size_t>(ppw));
      for (auto& o : offsets) {
        o = static_cast<double>(rng() >> 11) * 0x1.0p-53 *
            static_cast<double>(window_ns);
      }
      std::sort(offsets.begin(), offsets.end());

      // Drop decisions, one flag per packet.
      std::vector<char> dropped(static_cast<std::size_t>(ppw), 0);
      const detail::ResolvedLoss& slot = resolved[f];
      const LossRule* rule = nullptr;
      if (auto it = slot.per_window.find(k); it != slot.per_window.end())
        rule = &losses[it->second];
      else if (slot.blanket)
        rule = &losses[*slot.blanket];
      if (rule) {
        if (rule->drop_probability) {
          const double p = *rule->drop_probability;
          for (auto& flag : dropped) {
            double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            flag = (u < p) ? 1 : 0;
          }
        } else {
          // Exact count: seeded partial Fisher-Yates over packet indices.
          order.resize(static_cast<std::size_t>(ppw));
          for (std::int64_t i = 0; i < ppw; ++i)
            order[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
          const std::int64_t c = *rule->drop_count;
          for (std::int64_t t = 0; t < c; ++t) {
            std::int64_t pick =
                t + static_cast<std::int64_t>(
                        rng() % static_cast<std::uint64_t>(ppw - t));
            std::swap(order[static_cast<std::size_t>(t)],
                      order[static_cast<std::size_t>(pick)]);
            dropped[static_cast<std::size_t>(
                order[static_cast<std::size_t>(t)])] = 1;
          }
        }
      }

      sent[static_cast<std::size_t>(k - 1)] += ppw;
      for (std::int64_t p = 0; p < ppw; ++p) {
        PacketRecord rec;
        rec.flow = static_cast<std::int32_t>(f);
        rec.send_ns = window_start +
                      static_cast<std::int64_t>(offsets[static_cast<std::size_t>(p)]);
        if (dropped[static_cast<std::size_t>(p)]) {
          rec.arrival_ns = kDropped;
          loss[static_cast<std::size_t>(k - 1)] += 1;
        } else {
          std::int64_t jitter =
              static_cast<std::int64_t>(std::floor(delay.sample_jitter_ns(rng)));
          rec.arrival_ns =
              rec.send_ns + delay.d_min_ns + jitter + clock_offset_ns;
        }
        trace.records.push_back(rec);
      }
    }
  }
  return {std::move(trace), std::move(gt)};
}

/// True iff every delivered packet's recorded delay lies inside the model
/// bounds. Recorded arrivals include any clock offset, so this is meant
/// for traces generated with offset zero (the default).
inline bool delay_bounds_check(const PacketTrace& trace, const DelayModel& delay) {
  for (const PacketRecord& rec : trace.records) {
    if (rec.arrival_ns == kDropped) continue;
    const std::int64_t delta = rec.arrival_ns - rec.send_ns;
    if (delay.jitter_bound_ns == 0) {
      if (delta != delay.d_min_ns) return false;
    } else if (delta < delay.d_min_ns ||
               delta >= delay.d_min_ns + delay.jitter_bound_ns) {
      return false;
    }
  }
  return true;
}

/// Newline-delimited JSON: {"flow", "send_ns", "arrival_ns"|null} per packet.
inline void write_trace_ndjson(std::ostream& os, const PacketTrace& trace) {
  for (const PacketRecord& rec : trace.records) {
    nlohmann::json line{
        {"flow", trace.flows[static_cast<std::size_t>(rec.flow)].bytes},
        {"send_ns", rec.send_ns}};
    if (rec.arrival_ns == kDropped)
      line["arrival_ns"] = nullptr;
    else
      line["arrival_ns"] = rec.arrival_ns;
    os << line.dump() << '\n';
  }
}

inline PacketTrace read_trace_ndjson(std::istream& is) {
  PacketTrace trace;
  std::unordered_map<std::string, std::int32_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
    PacketRecord rec;
    try {
      const std::string flow = j.at("flow").get<std::string>();
      auto [it, inserted] =
          index.emplace(flow, static_cast<std::int32_t>(trace.flows.size()));
      if (inserted) trace.flows.push_back(FlowKey{flow});
      rec.flow = it->second;
      rec.send_ns = j.at("send_ns").get<std::int64_t>();
      const auto& arrival = j.at("arrival_ns");
      rec.arrival_ns = arrival.is_null() ? kDropped : arrival.get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
    if (rec.arrival_ns != kDropped && rec.arrival_ns < rec.send_ns)
      throw std::invalid_argument("trace line " + std::to_string(lineno) +
                                  ": arrival precedes send");
    trace.records.push_back(rec);
  }
  return trace;
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& gt) {
  nlohmann::json flows = nlohmann::json::object();
  for (const auto& [key, sent] : gt.sent) {
    flows[key.bytes] = {{"sent", sent}, {"loss", gt.loss.at(key)}};
  }
  return nlohmann::json{{"n", gt.n}, {"flows", std::move(flows)}};
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth gt;
  gt.n = j.at("n").get<int>();
  for (const auto& [name, entry] : j.at("flows").items()) {
    FlowKey key{name};
    gt.sent[key] = entry.at("sent").get<std::vector<std::int64_t>>();
    gt.loss[key] = entry.at("loss").get<std::vector<std::int64_t>>();
    if (gt.sent[key].size() != static_cast<std::size_t>(gt.n) ||
        gt.loss[key].size() != static_cast<std::size_t>(gt.n))
      throw std::invalid_argument("ground truth for flow '" + name +
                                  "': array length != n");
  }
  return gt;
}

}  // namespace sketchdecomp
