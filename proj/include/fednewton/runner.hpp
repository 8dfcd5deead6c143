#pragma once

// Outer loop: T global rounds of the selected algorithm, evaluated after
// every round.

#include <chrono>
#include <cmath>
#include <vector>

#include "fednewton/baselines.hpp"
#include "fednewton/config.hpp"
#include "fednewton/datasets.hpp"
#include "fednewton/federation.hpp"
#include "fednewton/parallel.hpp"
#include "fednewton/spectral.hpp"
#include "fednewton/trace.hpp"

namespace fednewton {

struct Evaluation {
  double train_loss = NAN;  // mean over workers of f_i(w)
  double grad_norm = NAN;   // ||mean_i grad f_i(w)||
  double val_metric = NAN;  // accuracy, or mean unregularized validation loss
};

inline MetricKind metric_for(const Task& task) {
  return task.kind == TaskKind::Regression ? MetricKind::ValidationLoss : MetricKind::Accuracy;
}

/// Global objective, gradient norm and size-weighted validation metric.
inline Evaluation evaluate(const GlmModel& model, const FederatedDataset& data, const Vector& w, int threads = 1) {
  const std::size_t n = data.workers();
  std::vector<double> losses(n), val_sums(n);
  std::vector<Vector> grads(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const WorkerData& wd = data.shards[i];
    losses[i] = loss(model, wd.train, w);
    grads[i] = gradient(model, wd.train, w);
    if (!wd.validation.empty())
      val_sums[i] = model.family == Family::Ridge ? sum_sample_loss(model, wd.validation, w)
                                                  : static_cast<double>(count_correct(model, wd.validation, w));
  });
  Evaluation ev;
  double total = 0.0, val_total = 0.0;
  std::size_t val_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += losses[i];
    val_total += val_sums[i];
    val_count += data.shards[i].validation.size();
  }
  ev.train_loss = total / static_cast<double>(n);
  ev.grad_norm = norm(pairwise_mean(grads));
  ev.val_metric = val_count ? val_total / static_cast<double>(val_count) : NAN;
  return ev;
}

struct RunResult {
  std::vector<TraceRecord> trace;
  Vector final_w;
  ConvergenceConstants constants;
  MetricKind metric = MetricKind::Accuracy;
  bool diverged = false;
};

inline std::vector<const Shard*> train_shards(const FederatedDataset& data) {
  std::vector<const Shard*> out;
  for (const WorkerData& wd : data.shards) out.push_back(&wd.train);
  return out;
}

/// Runs one repeat. Each trace row reports the model after that round's
/// update; divergence ends the run with a `diverged` marker row.
inline RunResult run_detailed(const RunConfig& config, const FederatedDataset& data, int repeat = 0) {
  data.validate();
  const GlmModel model = data.task.model(data.dim, config.lambda);
  const int n = static_cast<int>(data.workers());
  const int subset = config.subset.value_or(n);
  require(subset >= 1 && subset <= n, "subset " + std::to_string(subset) + " exceeds the " + std::to_string(n) + " workers");
  const int threads = effective_threads(config.threads);
  const std::uint64_t seed = derive_seed(config.run_seed, static_cast<std::uint64_t>(repeat));

  std::vector<WorkerState> workers;
  workers.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    workers.emplace_back(i, data.shards[static_cast<std::size_t>(i)].train, model,
                         derive_seed(seed, static_cast<std::uint64_t>(i)));

  RunResult result;
  result.metric = metric_for(data.task);
  AggregatorState agg;
  agg.w.assign(model.param_size(), 0.0);
  if (config.rounds_global == 0) {
    result.final_w = agg.w;
    return result;
  }
  agg.constants = estimate_constants(model, train_shards(data), agg.w,
                                     {config.power_iters, config.run_seed, config.estimate_nu});
  result.constants = agg.constants;

  const SamplingPolicy policy{config.batch, subset, seed};
  const StepSize step{config.adaptive_step, config.fixed_step};
  const double gd_eta = config.gd_eta.value_or(default_gd_step(agg.constants));
  const std::string run_id = config.effective_run_id();

  for (int t = 0; t < config.rounds_global; ++t) {
    const auto start = std::chrono::steady_clock::now();
    TraceRecord rec;
    try {
      std::pair<AggregatorState, TraceRecord> out;
      switch (config.algo) {
        case Algorithm::Done:
          out = done_round(agg, workers, config.alpha, config.rounds_local, policy, step, threads);
          break;
        case Algorithm::Gd:
          out = gd_round(agg, workers, gd_eta, threads);
          break;
        case Algorithm::Newton:
          out = newton_richardson_round(agg, workers, config.alpha, config.rounds_local, step, threads);
          break;
      }
      const Evaluation ev = evaluate(model, data, out.first.w, threads);
      if (!std::isfinite(ev.train_loss) || !std::isfinite(ev.grad_norm))
        throw DivergenceError("objective became non-finite in round " + std::to_string(t), t);
      agg = std::move(out.first);
      rec = out.second;
      rec.train_loss = ev.train_loss;
      rec.grad_norm = ev.grad_norm;
      rec.val_accuracy = ev.val_metric;
    } catch (const DivergenceError&) {
      rec = TraceRecord{};
      rec.round = t;
      rec.comm_rounds = agg.comm_count;
      rec.status = RoundStatus::Diverged;
      result.diverged = true;
    }
    rec.run_id = run_id;
    rec.repeat = repeat;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back(rec);
    if (result.diverged) break;
    if (config.early_stop_tol > 0.0 && rec.grad_norm <= config.early_stop_tol) break;
  }
  result.final_w = agg.w;
  return result;
}

inline std::vector<TraceRecord> run(const RunConfig& config, const FederatedDataset& data, int repeat = 0) {
  return run_detailed(config, data, repeat).trace;
}

}  // namespace fednewton
