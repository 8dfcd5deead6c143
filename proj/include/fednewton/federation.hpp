#pragma once

// The two-exchange federated Newton round: workers report local gradients,
// receive the averaged gradient, run R Richardson steps against their local
// Hessian and report the resulting direction, which the aggregator averages
// and applies with a step size.
//
// All traffic between the aggregator and workers goes through RoundMessage
// values; docs/protocol.md lists the kinds and payload layouts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fednewton/core.hpp"
#include "fednewton/glm.hpp"
#include "fednewton/parallel.hpp"
#include "fednewton/richardson.hpp"
#include "fednewton/rng.hpp"
#include "fednewton/spectral.hpp"
#include "fednewton/trace.hpp"

namespace fednewton {

enum class MessageKind {
  ModelBroadcast,  // aggregator -> worker: w_t
  GradientUp,      // worker -> aggregator: local gradient at w_t
  GradientDown,    // aggregator -> worker: averaged gradient
  DirectionUp,     // worker -> aggregator: R-step local Newton direction
  HvpRequest,      // aggregator -> worker: probe vector (centralized Newton baseline)
  HvpUp,           // worker -> aggregator: local Hessian times probe
};

inline const char* message_kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::ModelBroadcast: return "ModelBroadcast";
    case MessageKind::GradientUp: return "GradientUp";
    case MessageKind::GradientDown: return "GradientDown";
    case MessageKind::DirectionUp: return "DirectionUp";
    case MessageKind::HvpRequest: return "HvpRequest";
    case MessageKind::HvpUp: return "HvpUp";
  }
  return "?";
}

inline constexpr int kAggregatorId = -1;

struct RoundMessage {
  MessageKind kind = MessageKind::ModelBroadcast;
  int round = 0;
  int sender = kAggregatorId;
  Vector payload;
};

struct SamplingPolicy {
  std::optional<std::size_t> batch_size;  // none: full shard
  int subset_size = 1;
  std::uint64_t seed = 0;

  void validate(int n_workers) const {
    require(subset_size >= 1 && subset_size <= n_workers,
            "subset size " + std::to_string(subset_size) + " outside [1, " + std::to_string(n_workers) + "]");
    if (batch_size) require(*batch_size >= 1, "batch size must be >= 1");
  }

  static SamplingPolicy full(int n_workers, std::uint64_t seed = 0) { return {std::nullopt, n_workers, seed}; }
};

/// Local Richardson hyperparameters shared by every worker in a run.
struct LocalSolve {
  double alpha = 0.0;
  int rounds = 0;
  std::optional<std::size_t> batch_size;
};

struct WorkerState {
  enum class Phase { Idle, HaveModel, Done };

  WorkerState(int worker_id, const Shard& data, GlmModel glm, std::uint64_t seed)
      : id(worker_id), shard(&data), model(glm), rng(seed) {
    require(!data.empty(), "worker " + std::to_string(worker_id) + " has an empty shard");
  }

  int id;
  const Shard* shard;
  GlmModel model;
  Rng rng;  // mini-batch stream

  // Round-scoped state.
  Phase phase = Phase::Idle;
  int round = -1;
  Vector w;
  Shard batch;
  bool use_batch = false;

  /// The samples the current round computes on.
  std::span<const Sample> working_set() const {
    return use_batch ? std::span<const Sample>(batch) : std::span<const Sample>(*shard);
  }

  /// Draws a fresh uniform batch of min(B, D_i) samples without replacement,
  /// kept in shard order. B >= D_i selects the full shard and draws nothing.
  void draw_batch(std::optional<std::size_t> batch_size) {
    batch.clear();
    use_batch = batch_size && *batch_size < shard->size();
    if (!use_batch) return;
    for (std::size_t idx : rng.sample_without_replacement(shard->size(), *batch_size)) batch.push_back((*shard)[idx]);
  }
};

/// d^R from d^r = (I - alpha H_i(w_t)) d^{r-1} - alpha g, d^0 = 0, with H_i
/// applied on the worker's working set.
inline Vector local_direction(const WorkerState& worker, const Vector& w_t, const Vector& global_grad, double alpha,
                              int rounds) {
  require(global_grad.size() == worker.model.param_size(), "local_direction: gradient has the wrong length");
  if (rounds == 0) return Vector(global_grad.size(), 0.0);
  const auto data = worker.working_set();
  auto op = [&](const Vector& v) { return hvp(worker.model, data, w_t, v); };
  Vector rhs(global_grad.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -global_grad[i];
  try {
    return richardson_solve(op, rhs, RichardsonSettings{alpha, rounds, {}});
  } catch (const DivergenceError& e) {
    throw DivergenceError("worker " + std::to_string(worker.id) + ": " + e.what(), worker.round, worker.id);
  }
}

/// Same as above after drawing this round's batch (B unset: full shard).
inline Vector local_direction(WorkerState& worker, const Vector& w_t, const Vector& global_grad, double alpha,
                              int rounds, std::optional<std::size_t> batch) {
  worker.draw_batch(batch);
  return local_direction(static_cast<const WorkerState&>(worker), w_t, global_grad, alpha, rounds);
}

/// Worker side of the protocol. Rejects out-of-order or stale messages.
inline RoundMessage handle_message(WorkerState& worker, const RoundMessage& msg, const LocalSolve& solve) {
  const std::size_t p = worker.model.param_size();
  auto reject = [&](const std::string& why) {
    throw ContractError("worker " + std::to_string(worker.id) + " rejected " + message_kind_name(msg.kind) +
                        " for round " + std::to_string(msg.round) + ": " + why);
  };
  if (msg.sender != kAggregatorId) reject("sender is not the aggregator");
  if (msg.payload.size() != p) reject("payload length " + std::to_string(msg.payload.size()));
  switch (msg.kind) {
    case MessageKind::ModelBroadcast: {
      if (msg.round <= worker.round) reject("round already started");
      worker.round = msg.round;
      worker.w = msg.payload;
      worker.phase = WorkerState::Phase::HaveModel;
      worker.draw_batch(solve.batch_size);
      return {MessageKind::GradientUp, msg.round, worker.id, gradient(worker.model, worker.working_set(), worker.w)};
    }
    case MessageKind::GradientDown: {
      if (msg.round != worker.round || worker.phase != WorkerState::Phase::HaveModel) reject("no model for round");
      Vector d = local_direction(static_cast<const WorkerState&>(worker), worker.w, msg.payload, solve.alpha,
                                 solve.rounds);
      worker.phase = WorkerState::Phase::Done;
      return {MessageKind::DirectionUp, msg.round, worker.id, std::move(d)};
    }
    case MessageKind::HvpRequest: {
      if (msg.round != worker.round || worker.phase != WorkerState::Phase::HaveModel) reject("no model for round");
      return {MessageKind::HvpUp, msg.round, worker.id, hvp(worker.model, worker.working_set(), worker.w, msg.payload)};
    }
    default:
      reject("workers only accept aggregator messages");
  }
  return {};
}

/// eta_t = min(1, lambda^2 / (M ||g||)), M the Hessian Lipschitz constant.
/// Returns 1 when the gradient vanishes or the Hessian is constant (M = 0).
inline double adaptive_stepsize(double grad_norm, const ConvergenceConstants& c) {
  if (grad_norm <= 0.0 || c.hessian_lipschitz <= 0.0) return 1.0;
  return std::min(1.0, c.lambda_strong * c.lambda_strong / (c.hessian_lipschitz * grad_norm));
}

struct StepSize {
  bool adaptive = true;
  double fixed = 1.0;

  double operator()(double grad_norm, const ConvergenceConstants& c) const {
    return adaptive ? adaptive_stepsize(grad_norm, c) : fixed;
  }
};

/// Uniform draw of `subset_size` distinct worker ids, deterministic in
/// (seed, round), sorted ascending.
inline std::vector<int> sample_workers(int n, int subset_size, int round, std::uint64_t seed) {
  require(n >= 1, "sample_workers: n must be >= 1");
  require(subset_size >= 1 && subset_size <= n, "sample_workers: subset size out of range");
  std::vector<int> ids;
  if (subset_size == n) {
    ids.resize(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(round)));
  for (std::size_t i : rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(subset_size)))
    ids.push_back(static_cast<int>(i));
  return ids;
}

struct AggregatorState {
  Vector w;
  int round = 0;
  ConvergenceConstants constants;
  long comm_count = 0;
};

namespace detail {

/// One aggregator -> workers -> aggregator exchange. Replies are validated
/// and returned in `ids` order.
inline std::vector<Vector> exchange(std::vector<WorkerState>& workers, const std::vector<int>& ids, MessageKind kind,
                                    int round, const Vector& payload, MessageKind expect, const LocalSolve& solve,
                                    int threads) {
  std::vector<RoundMessage> replies(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t k) {
    replies[k] = handle_message(workers[static_cast<std::size_t>(ids[k])], RoundMessage{kind, round, kAggregatorId, payload},
                                solve);
  });
  std::vector<Vector> out;
  out.reserve(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    RoundMessage& r = replies[k];
    require(r.kind == expect && r.round == round && r.sender == ids[k] && r.payload.size() == payload.size(),
            std::string("aggregator: malformed ") + message_kind_name(r.kind) + " from worker " + std::to_string(r.sender));
    out.push_back(std::move(r.payload));
  }
  return out;
}

inline void check_workers(const AggregatorState& agg, const std::vector<WorkerState>& workers) {
  require(!workers.empty(), "no workers");
  for (const auto& wk : workers)
    require(wk.model.param_size() == agg.w.size() && wk.model.family == workers.front().model.family,
            "worker " + std::to_string(wk.id) + " disagrees with the aggregator on the model");
}

inline AggregatorState apply_update(const AggregatorState& agg, const Vector& direction, double eta, long comm) {
  AggregatorState next = agg;
  for (std::size_t i = 0; i < next.w.size(); ++i) next.w[i] = agg.w[i] + eta * direction[i];
  if (!all_finite(next.w)) throw DivergenceError("model became non-finite in round " + std::to_string(agg.round), agg.round);
  next.round = agg.round + 1;
  next.comm_count = agg.comm_count + comm;
  return next;
}

}  // namespace detail

/// One global iteration. The returned record carries the aggregator's view
/// of the round: eta_t, ||grad f(w_t)|| and the cumulative exchange count.
inline std::pair<AggregatorState, TraceRecord> done_round(const AggregatorState& agg, std::vector<WorkerState>& workers,
                                                          double alpha, int rounds, const SamplingPolicy& policy,
                                                          const StepSize& step = {}, int threads = 1) {
  detail::check_workers(agg, workers);
  const int n = static_cast<int>(workers.size());
  policy.validate(n);
  require(alpha > 0.0, "done_round: alpha must be > 0");
  require(rounds >= 0, "done_round: rounds must be >= 0");
  const LocalSolve solve{alpha, rounds, policy.batch_size};
  const std::vector<int> ids = sample_workers(n, policy.subset_size, agg.round, policy.seed);

  const Vector grad = pairwise_mean(detail::exchange(workers, ids, MessageKind::ModelBroadcast, agg.round, agg.w,
                                                     MessageKind::GradientUp, solve, threads));
  const Vector direction = pairwise_mean(detail::exchange(workers, ids, MessageKind::GradientDown, agg.round, grad,
                                                          MessageKind::DirectionUp, solve, threads));
  const double gnorm = norm(grad);
  const double eta = step(gnorm, agg.constants);
  AggregatorState next = detail::apply_update(agg, direction, eta, 2);

  TraceRecord rec;
  rec.round = agg.round;
  rec.grad_norm = gnorm;
  rec.eta = eta;
  rec.comm_rounds = next.comm_count;
  return {std::move(next), rec};
}

}  // namespace fednewton
