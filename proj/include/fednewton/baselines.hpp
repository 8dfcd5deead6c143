#pragma once

// Reference methods sharing the federation message machinery: distributed
// gradient descent and Newton's method with the Richardson solve run on the
// global Hessian (one worker exchange per inner step).

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fednewton/federation.hpp"

namespace fednewton {

struct DistributedGd {
  double eta = 0.0;
};

struct NewtonRichardson {
  double alpha = 0.0;
  int inner_rounds = 1;
};

using BaselineKind = std::variant<DistributedGd, NewtonRichardson>;

/// 2 / (lambda + L), the classical step for strongly convex smooth objectives.
inline double default_gd_step(const ConvergenceConstants& c) { return 2.0 / (c.lambda_strong + c.smoothness); }

/// w_{t+1} = w_t - eta * mean_i grad f_i(w_t).
inline std::pair<AggregatorState, TraceRecord> gd_round(const AggregatorState& agg, std::vector<WorkerState>& workers,
                                                        double eta, int threads = 1) {
  detail::check_workers(agg, workers);
  require(eta >= 0.0, "gd_round: eta must be >= 0");
  const int n = static_cast<int>(workers.size());
  const std::vector<int> ids = sample_workers(n, n, agg.round, 0);
  const LocalSolve none{};
  const Vector grad = pairwise_mean(detail::exchange(workers, ids, MessageKind::ModelBroadcast, agg.round, agg.w,
                                                     MessageKind::GradientUp, none, threads));
  Vector direction(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) direction[i] = -grad[i];
  AggregatorState next = detail::apply_update(agg, direction, eta, 2);
  TraceRecord rec;
  rec.round = agg.round;
  rec.grad_norm = norm(grad);
  rec.eta = eta;
  rec.comm_rounds = next.comm_count;
  return {std::move(next), rec};
}

/// Richardson on the global Hessian: every inner step broadcasts the iterate
/// and averages the workers' Hessian products, so a round costs R + 2
/// exchanges.
inline std::pair<AggregatorState, TraceRecord> newton_richardson_round(const AggregatorState& agg,
                                                                       std::vector<WorkerState>& workers, double alpha,
                                                                       int inner_rounds, const StepSize& step = {},
                                                                       int threads = 1) {
  detail::check_workers(agg, workers);
  require(alpha > 0.0, "newton_richardson_round: alpha must be > 0");
  require(inner_rounds >= 1, "newton_richardson_round: inner_rounds must be >= 1");
  const int n = static_cast<int>(workers.size());
  const std::vector<int> ids = sample_workers(n, n, agg.round, 0);
  const LocalSolve none{};
  const Vector grad = pairwise_mean(detail::exchange(workers, ids, MessageKind::ModelBroadcast, agg.round, agg.w,
                                                     MessageKind::GradientUp, none, threads));
  auto global_op = [&](const Vector& v) {
    return pairwise_mean(
        detail::exchange(workers, ids, MessageKind::HvpRequest, agg.round, v, MessageKind::HvpUp, none, threads));
  };
  Vector rhs(grad.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -grad[i];
  Vector direction;
  try {
    direction = richardson_solve(global_op, rhs, RichardsonSettings{alpha, inner_rounds, {}});
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("global Newton solve: ") + e.what(), agg.round);
  }
  const double gnorm = norm(grad);
  const double eta = step(gnorm, agg.constants);
  AggregatorState next = detail::apply_update(agg, direction, eta, inner_rounds + 2);
  TraceRecord rec;
  rec.round = agg.round;
  rec.grad_norm = gnorm;
  rec.eta = eta;
  rec.comm_rounds = next.comm_count;
  return {std::move(next), rec};
}

}  // namespace fednewton
