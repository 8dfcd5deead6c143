#pragma once

// Power-iteration spectral estimates over Hessian-vector closures, and the
// problem constants (strong convexity, smoothness, Hessian Lipschitz bound,
// heterogeneity) derived from them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "fednewton/core.hpp"
#include "fednewton/glm.hpp"
#include "fednewton/rng.hpp"

namespace fednewton {

template <class F>
concept LinearOperator = std::invocable<const F&, const Vector&> &&
                         std::convertible_to<std::invoke_result_t<const F&, const Vector&>, Vector>;

/// Rayleigh-quotient estimate of the largest eigenvalue of a symmetric PSD
/// operator after `iters` power steps from a seeded random unit vector.
template <LinearOperator Op>
double estimate_lambda_max(const Op& apply, std::size_t dim, int iters, std::uint64_t seed) {
  require(dim >= 1, "estimate_lambda_max: dim must be >= 1");
  require(iters >= 1, "estimate_lambda_max: iters must be >= 1");
  Rng rng(seed);
  Vector x(dim);
  for (double& v : x) v = rng.normal();
  double rq = 0.0;
  for (int k = 0; k < iters; ++k) {
    const double nx = norm(x);
    if (nx == 0.0 || !std::isfinite(nx)) throw ContractError("estimate_lambda_max: operator annihilated the iterate");
    scale(1.0 / nx, x);
    Vector y = apply(x);
    require(y.size() == dim, "estimate_lambda_max: operator changed the dimension");
    rq = dot(x, y);
    x = std::move(y);
  }
  if (norm(x) == 0.0) throw ContractError("estimate_lambda_max: zero operator, Rayleigh quotient undefined");
  return rq;
}

/// Smallest eigenvalue of a symmetric PSD operator whose spectrum lies in
/// [0, upper], from power iteration on upper*I - A.
template <LinearOperator Op>
double estimate_lambda_min(const Op& apply, std::size_t dim, double upper, int iters, std::uint64_t seed) {
  auto shifted = [&](const Vector& v) {
    Vector av = apply(v);
    for (std::size_t i = 0; i < v.size(); ++i) av[i] = upper * v[i] - av[i];
    return av;
  };
  double top;
  try {
    top = estimate_lambda_max(shifted, dim, iters, seed);
  } catch (const ContractError&) {
    return upper;  // A == upper * I
  }
  return std::max(0.0, upper - top);
}

/// Spectral norm of a symmetric (possibly indefinite) operator B, as
/// sqrt(lambda_max(B^2)).
template <LinearOperator Op>
double estimate_symmetric_norm(const Op& apply, std::size_t dim, int iters, std::uint64_t seed) {
  auto squared = [&](const Vector& v) { return apply(apply(v)); };
  try {
    return std::sqrt(std::max(0.0, estimate_lambda_max(squared, dim, iters, seed)));
  } catch (const ContractError&) {
    return 0.0;
  }
}

struct ConvergenceConstants {
  double lambda_strong = 1.0;      // strong convexity
  double smoothness = 1.0;         // L
  double hessian_lipschitz = 0.0;  // M
  double nu = 0.0;                 // heterogeneity, reporting only

  double kappa() const { return smoothness / lambda_strong; }

  void validate() const {
    require(lambda_strong > 0.0 && std::isfinite(lambda_strong), "constants: lambda_strong must be > 0");
    require(smoothness >= lambda_strong, "constants: smoothness must be >= lambda_strong");
    require(hessian_lipschitz >= 0.0, "constants: hessian_lipschitz must be >= 0");
    require(nu >= 0.0, "constants: nu must be >= 0");
  }
};

struct ConstantEstimateOptions {
  int power_iters = 30;
  std::uint64_t seed = 0;
  bool estimate_nu = false;
};

/// Upper bound on the Lipschitz constant of the shard Hessian. Zero for
/// ridge (quadratic). For the logistic families the per-sample curvature
/// weight has derivative at most 1/(6*sqrt(3)) (binary) or 1 (softmax third
/// derivative along a unit direction), times ||a||^3.
inline double hessian_lipschitz_bound(const GlmModel& m, std::span<const Sample> shard) {
  if (m.family == Family::Ridge || shard.empty()) return 0.0;
  const double weight = m.family == Family::BinaryLogistic ? 1.0 / (6.0 * std::sqrt(3.0)) : 1.0;
  double cube = 0.0;
  for (const Sample& s : shard) {
    const double n = norm(s.features);
    cube += n * n * n;
  }
  return weight * cube / static_cast<double>(shard.size());
}

/// Largest per-worker Hessian eigenvalue at `w` (the lambda-hat-max of the
/// Richardson step-size rule).
inline double max_worker_lambda_max(const GlmModel& m, const std::vector<const Shard*>& shards,
                                    std::span<const double> w, int iters, std::uint64_t seed) {
  double best = 0.0;
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const Shard& sh = *shards[i];
    auto op = [&](const Vector& v) { return hvp(m, sh, w, v); };
    best = std::max(best, estimate_lambda_max(op, m.param_size(), iters, derive_seed(seed, i)));
  }
  return best;
}

/// Mean of the per-worker Hessians applied to v (the global Hessian of the
/// unweighted average objective).
inline Vector global_hvp(const GlmModel& m, const std::vector<const Shard*>& shards, std::span<const double> w,
                         std::span<const double> v) {
  std::vector<Vector> parts;
  parts.reserve(shards.size());
  for (const Shard* sh : shards) parts.push_back(hvp(m, *sh, w, v));
  return pairwise_mean(parts);
}

/// Estimate the problem constants at `w`.
/// L: max over workers of the per-worker lambda_max. lambda: the global
/// Hessian's smallest eigenvalue for ridge (constant Hessian), the
/// regularization strength for the logistic families (the only curvature
/// floor valid everywhere). M: averaged per-worker bound. nu:
/// ||A^2 - mean(A_i^2)|| by power iteration, only when requested.
inline ConvergenceConstants estimate_constants(const GlmModel& m, const std::vector<const Shard*>& shards,
                                               std::span<const double> w, const ConstantEstimateOptions& opt) {
  require(!shards.empty(), "estimate_constants: no shards");
  ConvergenceConstants c;
  const std::size_t p = m.param_size();
  c.smoothness = max_worker_lambda_max(m, shards, w, opt.power_iters, opt.seed);
  if (m.family == Family::Ridge) {
    auto global = [&](const Vector& v) { return global_hvp(m, shards, w, v); };
    // The shift must dominate the global spectrum; the worker maximum does.
    c.lambda_strong = std::max(m.lambda, estimate_lambda_min(global, p, c.smoothness, opt.power_iters,
                                                             derive_seed(opt.seed, 0xA11)));
  } else {
    c.lambda_strong = m.lambda;
  }
  if (!(c.lambda_strong > 0.0)) c.lambda_strong = std::max(m.lambda, 1e-12);
  c.smoothness = std::max(c.smoothness, c.lambda_strong);
  double mbound = 0.0;
  for (const Shard* sh : shards) mbound += hessian_lipschitz_bound(m, *sh);
  c.hessian_lipschitz = mbound / static_cast<double>(shards.size());
  if (opt.estimate_nu) {
    auto diff = [&](const Vector& v) {
      Vector global2 = global_hvp(m, shards, w, global_hvp(m, shards, w, v));
      std::vector<Vector> local2;
      for (const Shard* sh : shards) local2.push_back(hvp(m, *sh, w, hvp(m, *sh, w, v)));
      return global2 - pairwise_mean(local2);
    };
    c.nu = estimate_symmetric_norm(diff, p, opt.power_iters, derive_seed(opt.seed, 0x5EED));
  }
  return c;
}

// Post-hoc analysis quantities. They need the exact Newton direction or the
// initial gradient norm and are meant for small problems where those are
// computable.

/// Relative error of an approximate Newton direction, ||exact - approx|| / ||exact||.
inline double delta_approximation(std::span<const double> exact, std::span<const double> approx) {
  require(exact.size() == approx.size(), "delta_approximation: size mismatch");
  const double denom = norm(exact);
  require(denom > 0.0, "delta_approximation: exact direction is zero");
  double s = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) s += (exact[i] - approx[i]) * (exact[i] - approx[i]);
  return std::sqrt(s) / denom;
}

struct DampedPhase {
  int t0 = 0;          // damped-phase length
  double gamma = 0.0;  // quadratic-phase contraction seed
};

/// Damped-phase length and contraction seed of the adaptive Newton step:
/// t0 = max(0, ceil(2 C ||g0|| / lambda^2) - 2), gamma = C ||g0|| / (2 lambda^2) - t0 / 4,
/// with C the curvature constant the step size uses.
inline DampedPhase damped_phase(const ConvergenceConstants& c, double grad_norm0) {
  const double curv = c.hessian_lipschitz;
  const double ratio = curv * grad_norm0 / (c.lambda_strong * c.lambda_strong);
  DampedPhase out;
  out.t0 = std::max(0, static_cast<int>(std::ceil(2.0 * ratio)) - 2);
  out.gamma = ratio / 2.0 - out.t0 / 4.0;
  return out;
}

}  // namespace fednewton
