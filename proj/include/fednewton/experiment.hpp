#pragma once

// Experiment orchestration: dataset resolution, repeats, CSV traces and the
// JSON summary.

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fednewton/config.hpp"
#include "fednewton/datasets.hpp"
#include "fednewton/formats.hpp"
#include "fednewton/runner.hpp"
#include "fednewton/trace.hpp"

namespace fednewton {

struct LoadedData {
  FederatedDataset data;
  std::optional<Vector> w_star;  // synthetic only
};

inline LoadedData load_dataset(const RunConfig& c) {
  LoadedData out;
  switch (c.dataset) {
    case DatasetSource::Synthetic: {
      SyntheticSpec spec;
      spec.n = c.n;
      spec.d = c.d;
      spec.kappa = c.kappa;
      spec.size_min = c.size_min.value_or(540);
      spec.size_max = c.size_max.value_or(5630);
      spec.noise_std = c.noise_std;
      spec.seed = c.data_seed;
      auto [ds, w_star] = generate_synthetic(spec);
      out.data = std::move(ds);
      out.w_star = std::move(w_star);
      break;
    }
    case DatasetSource::Idx: {
      const auto samples = load_idx(c.images, c.labels);
      out.data = partition_by_label(
          samples, {c.n, c.labels_per_worker, c.size_min.value_or(219), c.size_max.value_or(3536), c.data_seed});
      out.data.provenance = "idx images=" + c.images + " " + out.data.provenance;
      break;
    }
    case DatasetSource::Libsvm: {
      auto samples = load_libsvm(c.libsvm_path, c.libsvm_dim);
      require(!samples.empty(), "libsvm file " + c.libsvm_path + " has no samples");
      if (c.partition == "label") {
        out.data = partition_by_label(
            samples, {c.n, c.labels_per_worker, c.size_min.value_or(2), c.size_max.value_or(samples.size() / c.n),
                      c.data_seed});
      } else {
        require(samples.size() >= 2 * static_cast<std::size_t>(c.n), "libsvm: too few samples for n workers");
        FederatedDataset ds;
        ds.dim = c.libsvm_dim;
        std::size_t classes = 0;
        for (const Sample& s : samples) classes = std::max(classes, static_cast<std::size_t>(std::max(0.0, s.label)) + 1);
        ds.task = c.task == "regression" ? Task{TaskKind::Regression, 0}
                  : c.task == "binary"   ? Task{TaskKind::BinaryClassification, 0}
                                         : Task{TaskKind::MultiClass, classes};
        const std::size_t per = samples.size() / static_cast<std::size_t>(c.n);
        for (int i = 0; i < c.n; ++i) {
          const auto begin = samples.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::size_t>(i));
          const auto end = i + 1 == c.n ? samples.end() : begin + static_cast<std::ptrdiff_t>(per);
          auto [train, val] = split_train_validation(Shard(begin, end), kTrainFraction, derive_seed(c.data_seed, 1000 + i));
          ds.shards.push_back({std::move(train), std::move(val)});
        }
        out.data = std::move(ds);
      }
      out.data.provenance = "libsvm path=" + c.libsvm_path + " partition=" + c.partition + " seed=" +
                            std::to_string(c.data_seed) + " " + out.data.provenance;
      break;
    }
    case DatasetSource::Shards:
      out.data = load_shards(c.shards_path);
      break;
  }
  out.data.validate();
  if (!c.save_shards.empty()) save_shards(c.save_shards, out.data);
  return out;
}

/// Canonical key=value view of a config, echoed into summaries.
inline ConfigMap config_to_map(const RunConfig& c) {
  ConfigMap m;
  static const char* sources[] = {"synthetic", "idx", "libsvm", "shards"};
  m["algo"] = algorithm_name(c.algo);
  m["dataset"] = sources[static_cast<int>(c.dataset)];
  m["alpha"] = format_double(c.alpha);
  m["R"] = std::to_string(c.rounds_local);
  m["T"] = std::to_string(c.rounds_global);
  m["batch"] = c.batch ? std::to_string(*c.batch) : "full";
  m["subset"] = c.subset ? std::to_string(*c.subset) : "all";
  m["lambda"] = format_double(c.lambda);
  m["stepsize"] = c.adaptive_step ? "adaptive" : "fixed:" + format_double(c.fixed_step);
  if (c.gd_eta) m["gd_eta"] = format_double(*c.gd_eta);
  m["seed"] = std::to_string(c.data_seed);
  m["run_seed"] = std::to_string(c.run_seed);
  m["repeats"] = std::to_string(c.repeats);
  m["run_id"] = c.effective_run_id();
  m["early_stop_tol"] = format_double(c.early_stop_tol);
  m["power_iters"] = std::to_string(c.power_iters);
  m["n"] = std::to_string(c.n);
  if (c.dataset == DatasetSource::Synthetic) {
    m["d"] = std::to_string(c.d);
    m["kappa"] = format_double(c.kappa);
    m["noise_std"] = format_double(c.noise_std);
  }
  if (c.size_min) m["size_min"] = std::to_string(*c.size_min);
  if (c.size_max) m["size_max"] = std::to_string(*c.size_max);
  return m;
}

struct MeanStd {
  double mean = NAN;
  double std = NAN;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.count = xs.size();
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  r.std = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  return r;
}

/// Final-round statistics over repeats; diverged repeats are counted, not averaged.
inline nlohmann::json summarize(const std::vector<TraceRecord>& rows, MetricKind metric) {
  std::map<int, const TraceRecord*> last_ok;
  std::set<int> repeats, diverged;
  for (const TraceRecord& r : rows) {
    repeats.insert(r.repeat);
    if (r.status == RoundStatus::Diverged)
      diverged.insert(r.repeat);
    else
      last_ok[r.repeat] = &r;
  }
  std::vector<double> metric_vals, loss_vals;
  for (const auto& [rep, rec] : last_ok) {
    if (diverged.count(rep)) continue;
    metric_vals.push_back(rec->val_accuracy);
    loss_vals.push_back(rec->train_loss);
  }
  auto pack = [](const MeanStd& m) {
    nlohmann::json j;
    j["mean"] = m.count ? nlohmann::json(m.mean) : nlohmann::json(nullptr);
    j["std"] = m.count ? nlohmann::json(m.std) : nlohmann::json(nullptr);
    j["count"] = m.count;
    return j;
  };
  nlohmann::json j;
  j["metric"] = metric_name(metric);
  j["repeats"] = repeats.size();
  j["diverged_repeats"] = diverged.size();
  j["final_metric"] = pack(mean_std(metric_vals));
  j["final_train_loss"] = pack(mean_std(loss_vals));
  return j;
}

struct ExperimentOutput {
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
  std::vector<TraceRecord> rows;
  MetricKind metric = MetricKind::Accuracy;
};

/// Runs every repeat and writes `<out>/<run_id>.csv` and `<out>/<run_id>.json`.
/// With `record_wall_clock` false the wall_ms column is written as 0.
inline ExperimentOutput run_experiment(const RunConfig& config, bool record_wall_clock = true) {
  const LoadedData loaded = load_dataset(config);
  ExperimentOutput out;
  out.metric = metric_for(loaded.data.task);
  nlohmann::json constants = nlohmann::json::array();
  for (int r = 0; r < config.repeats; ++r) {
    RunResult res = run_detailed(config, loaded.data, r);
    for (TraceRecord& rec : res.trace) {
      if (!record_wall_clock) rec.wall_ms = 0.0;
      out.rows.push_back(std::move(rec));
    }
    constants.push_back({{"lambda_strong", res.constants.lambda_strong},
                         {"smoothness", res.constants.smoothness},
                         {"kappa", res.constants.kappa()},
                         {"hessian_lipschitz", res.constants.hessian_lipschitz},
                         {"nu", config.estimate_nu ? nlohmann::json(res.constants.nu) : nlohmann::json(nullptr)}});
  }
  const std::string id = config.effective_run_id();
  const std::filesystem::path dir(config.out_dir);
  out.csv_path = dir / (id + ".csv");
  out.summary_path = dir / (id + ".json");

  std::ostringstream csv;
  write_csv(csv, out.rows);
  write_file_atomic(out.csv_path, csv.str());

  nlohmann::json summary = summarize(out.rows, out.metric);
  summary["schema_version"] = kCsvSchemaVersion;
  summary["run_id"] = id;
  summary["provenance"] = loaded.data.provenance;
  summary["constants"] = constants;
  summary["config"] = config_to_map(config);
  write_file_atomic(out.summary_path, summary.dump(2) + "\n");
  return out;
}

}  // namespace fednewton
