// Command-line frontend: simulate -> detect -> evaluate, driven by one JSON
// config. Exit codes: 0 success, 2 invalid input, 3 solver did not converge
// (outputs are still written), 1 unexpected internal error.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "sketchdecomp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sketchdecomp;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  bool emit_plot_data = false;
  bool round_estimates = false;
  ConfigOverrides overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: out)");
  cmd->add_flag("--emit-plot-data", args.emit_plot_data,
                "also write plot-ready CSVs");
  cmd->add_flag("--round-estimates", args.round_estimates,
                "round estimated loss counts to integers in the report");
  cmd->add_option("--n", args.overrides.n, "override window count");
  cmd->add_option("--m", args.overrides.m, "override branch count");
  cmd->add_option("--d", args.overrides.d, "override sketch depth");
  cmd->add_option("--w", args.overrides.w, "override sketch width");
  cmd->add_option("--sigma", args.overrides.sigma, "override solver penalty");
  cmd->add_option("--gamma", args.overrides.gamma, "override solver step length");
  cmd->add_option("--tol", args.overrides.tol, "override solver tolerance");
  cmd->add_option("--max-iter", args.overrides.max_iter,
                  "override solver iteration cap");
  cmd->add_option("--seed", args.overrides.seed,
                  "override both sketch and simulator seeds");
}

RunConfig load_run_config(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  args.overrides.apply(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_simulate_outputs(const CommonArgs& args, const RunConfig& cfg,
                            const SimulateResult& sim) {
  fs::create_directories(args.out_dir);
  {
    std::ofstream out(fs::path(args.out_dir) / "trace.ndjson", std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write trace.ndjson");
    write_trace_ndjson(out, sim.trace);
  }
  write_text(fs::path(args.out_dir) / "ground_truth.json",
             ground_truth_to_json(sim.ground_truth).dump(2) + "\n");
  if (args.emit_plot_data) {
    std::ofstream out(fs::path(args.out_dir) / "delay_histogram.csv",
                      std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write delay_histogram.csv");
    const std::int64_t span = cfg.delay.d_min_ns + cfg.delay.jitter_bound_ns;
    const std::int64_t bucket = std::max<std::int64_t>(1, span / 50);
    write_delay_histogram_csv(out, sim.trace, 50, bucket);
  }
}

int write_detect_outputs(const CommonArgs& args, const DetectResult& det) {
  fs::create_directories(args.out_dir);
  write_text(fs::path(args.out_dir) / "series.json",
             series_to_json(det.series).dump() + "\n");
  write_text(fs::path(args.out_dir) / "recovered_stack.json",
             stack_to_json(det.solved.stack).dump() + "\n");
  {
    std::ofstream out(fs::path(args.out_dir) / "residual_history.csv",
                      std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write residual_history.csv");
    write_history_csv(out, det.solved.history);
  }
  std::vector<FlowLossEstimate> estimates = det.estimates;
  if (args.round_estimates) {
    for (FlowLossEstimate& e : estimates)
      e.estimated_loss = std::round(e.estimated_loss);
  }
  write_text(fs::path(args.out_dir) / "report.json",
             estimates_to_json(estimates, det.horizon).dump(2) + "\n");
  if (det.solved.converged) {
    std::cout << "solver converged after " << det.solved.iterations
              << " sweeps (max residual "
              << det.solved.final_residuals.max_residual() << ")\n";
    return 0;
  }
  std::cout << "solver did NOT converge within " << det.solved.iterations
            << " sweeps (max residual "
            << det.solved.final_residuals.max_residual() << ")\n";
  return 3;
}

int write_evaluate_outputs(const CommonArgs& args, const EvaluateResult& eval,
                           const std::vector<FlowLossEstimate>& estimates,
                           const GroundTruth& gt, int horizon) {
  fs::create_directories(args.out_dir);
  {
    std::ofstream out(fs::path(args.out_dir) / "metrics.csv", std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write metrics.csv");
    write_metrics_csv(out, eval.metrics);
  }
  if (args.emit_plot_data) {
    std::ofstream out(fs::path(args.out_dir) / "loss_series.csv", std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write loss_series.csv");
    write_plot_csv(out, estimates, gt, eval.groups, horizon);
  }
  for (const std::string& w : eval.warnings) std::cerr << "note: " << w << "\n";
  for (const GroupMetrics& g : eval.metrics) {
    std::cout << severity_label(g.group) << ": flows=" << g.flow_count
              << " avg_actual=" << g.avg_actual
              << " avg_estimated=" << g.avg_estimated
              << " avg_error=" << g.avg_error << " ratio=" << g.ratio << "\n";
  }
  return 0;
}

int do_simulate(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  SimulateResult sim = run_simulate(cfg);
  write_simulate_outputs(args, cfg, sim);
  return 0;
}

int do_detect(const CommonArgs& args, const std::string& trace_path) {
  RunConfig cfg = load_run_config(args);
  const fs::path path = trace_path.empty()
                            ? fs::path(args.out_dir) / "trace.ndjson"
                            : fs::path(trace_path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open trace '" + path.string() + "'");
  PacketTrace trace = read_trace_ndjson(in);
  DetectResult det = run_detect(cfg, trace);
  return write_detect_outputs(args, det);
}

int do_evaluate(const CommonArgs& args, const std::string& report_path,
                const std::string& gt_path) {
  RunConfig cfg = load_run_config(args);
  const fs::path rp = report_path.empty() ? fs::path(args.out_dir) / "report.json"
                                          : fs::path(report_path);
  const fs::path gp = gt_path.empty()
                          ? fs::path(args.out_dir) / "ground_truth.json"
                          : fs::path(gt_path);
  auto [estimates, horizon] =
      estimates_from_json(parse_json_text(read_text(rp), rp.string()));
  GroundTruth gt =
      ground_truth_from_json(parse_json_text(read_text(gp), gp.string()));
  EvaluateResult eval = run_evaluate(estimates, horizon, gt, cfg.thresholds);
  return write_evaluate_outputs(args, eval, estimates, gt, horizon);
}

int do_run(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args);
  SimulateResult sim = run_simulate(cfg);
  write_simulate_outputs(args, cfg, sim);
  DetectResult det = run_detect(cfg, sim.trace);
  const int detect_code = write_detect_outputs(args, det);
  EvaluateResult eval = run_evaluate(det.estimates, det.horizon,
                                     sim.ground_truth, cfg.thresholds);
  const int eval_code = write_evaluate_outputs(args, eval, det.estimates,
                                               sim.ground_truth, det.horizon);
  return std::max(detect_code, eval_code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketch-decomposition packet loss detection"};
  app.require_subcommand(1);

  CommonArgs sim_args, det_args, eval_args, run_args;
  std::string trace_path, report_path, gt_path;

  CLI::App* sim = app.add_subcommand("simulate", "generate a trace and ground truth");
  add_common(sim, sim_args);
  CLI::App* det = app.add_subcommand(
      "detect", "build sketches, solve the decomposition, report loss");
  add_common(det, det_args);
  det->add_option("--trace", trace_path, "trace file (default: <out>/trace.ndjson)");
  CLI::App* eval = app.add_subcommand("evaluate", "compare a report to ground truth");
  add_common(eval, eval_args);
  eval->add_option("--report", report_path, "report file (default: <out>/report.json)");
  eval->add_option("--ground-truth", gt_path,
                   "ground truth file (default: <out>/ground_truth.json)");
  CLI::App* run = app.add_subcommand("run", "simulate + detect + evaluate");
  add_common(run, run_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return do_simulate(sim_args);
    if (det->parsed()) return do_detect(det_args, trace_path);
    if (eval->parsed()) return do_evaluate(eval_args, report_path, gt_path);
    if (run->parsed()) return do_run(run_args);
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    if (!e.checkpoint_json().empty()) {
      try {
        fs::create_directories("out");
        write_text(fs::path("out") / "solver_checkpoint.json",
                   e.checkpoint_json());
        std::cerr << "iterate dump written to out/solver_checkpoint.json\n";
      } catch (...) {
      }
    }
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
