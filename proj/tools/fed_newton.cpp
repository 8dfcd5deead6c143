#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fednewton/fednewton.hpp"

namespace fn = fednewton;

namespace {

int cmd_run(const std::string& config_path, const std::map<std::string, std::string>& flag_values, bool no_wall_clock) {
  fn::ConfigMap file_values;
  if (!config_path.empty()) file_values = fn::read_config_file(config_path);
  const fn::RunConfig config = fn::build_config(file_values, flag_values);
  const fn::ExperimentOutput out = fn::run_experiment(config, !no_wall_clock);
  std::size_t diverged = 0;
  for (const auto& r : out.rows)
    if (r.status == fn::RoundStatus::Diverged) ++diverged;
  std::cout << "trace: " << out.csv_path.string() << "\nsummary: " << out.summary_path.string() << "\n";
  if (diverged) std::cout << "diverged repeats: " << diverged << "\n";
  return 0;
}

int cmd_plot(const std::vector<std::string>& traces, const std::string& metric, bool log_y, const std::string& title,
             const std::string& out_path) {
  fn::PlotSpec spec;
  spec.column = fn::parse_plot_column(metric);
  spec.log_y = log_y;
  spec.title = title;
  fn::write_file_atomic(out_path, fn::emit_plot(traces, spec));
  std::cout << "plot: " << out_path << "\n";
  return 0;
}

int cmd_rounds_to_target(const std::vector<std::string>& traces, double target) {
  for (const std::string& path : traces) {
    const auto metric = fn::read_trace_metric(path).value_or(fn::MetricKind::Accuracy);
    const auto rows = fn::read_csv_file(path);
    std::map<int, std::vector<fn::TraceRecord>> by_repeat;
    for (const auto& r : rows) by_repeat[r.repeat].push_back(r);
    for (const auto& [repeat, trace] : by_repeat) {
      const auto t = fn::rounds_to_target(trace, metric, target);
      std::cout << path << " repeat " << repeat << ": " << (t ? std::to_string(*t) : std::string("not reached"))
                << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated Newton experiments: run, plot, rounds-to-target"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment and write <out>/<run_id>.csv and .json");
  std::string config_path;
  bool no_wall_clock = false;
  run->add_option("--config", config_path, "key=value config file; flags override its values");
  run->add_flag("--no-wall-clock", no_wall_clock, "write wall_ms as 0 for byte-comparable traces");
  std::map<std::string, std::string> run_values;
  for (const std::string& key : fn::config_keys())
    run->add_option("--" + key, run_values[key], "config key '" + key + "'");

  auto* plot = app.add_subcommand("plot", "Render trace CSVs as an SVG line chart");
  std::vector<std::string> plot_traces;
  std::string plot_metric = "train_loss", plot_title, plot_out = "plot.svg";
  bool plot_log = false;
  plot->add_option("traces", plot_traces, "trace CSV files")->required();
  plot->add_option("--metric", plot_metric, "train_loss | grad_norm | val_accuracy | eta")->capture_default_str();
  plot->add_flag("--log", plot_log, "log-scale y axis");
  plot->add_option("--title", plot_title, "chart title");
  plot->add_option("--out", plot_out, "output SVG path")->capture_default_str();

  auto* rtt = app.add_subcommand("rounds-to-target", "First round whose validation accuracy reaches a target");
  std::vector<std::string> rtt_traces;
  double target = 0.0;
  rtt->add_option("--target", target, "target accuracy in [0, 1]")->required();
  rtt->add_option("traces", rtt_traces, "trace CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::map<std::string, std::string> given;
      for (const std::string& key : fn::config_keys())
        if (run->get_option("--" + key)->count() > 0) given[key] = run_values[key];
      return cmd_run(config_path, given, no_wall_clock);
    }
    if (plot->parsed()) return cmd_plot(plot_traces, plot_metric, plot_log, plot_title, plot_out);
    if (rtt->parsed()) return cmd_rounds_to_target(rtt_traces, target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
