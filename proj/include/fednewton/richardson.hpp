#pragma once

// Richardson iteration x_k = (I - alpha A) x_{k-1} + alpha b over a
// matrix-free operator.

#include <algorithm>
#include <cmath>
#include <string>

#include "fednewton/core.hpp"
#include "fednewton/spectral.hpp"

namespace fednewton {

struct RichardsonSettings {
  double alpha = 0.0;
  int rounds = 0;
  Vector x0;  // empty means the zero vector

  void validate() const {
    require(alpha > 0.0 && std::isfinite(alpha), "Richardson: alpha must be > 0");
    require(rounds >= 0, "Richardson: rounds must be >= 0");
  }
};

/// Iterates whose norm exceeds this multiple of (||b|| + ||x0|| + 1) count as
/// diverged.
inline constexpr double kDivergenceFactor = 1e12;

/// Runs exactly `settings.rounds` steps. With 0 < alpha < 2 / lambda_max(A)
/// the iterates converge to A^{-1} b.
template <LinearOperator Op>
Vector richardson_solve(const Op& apply, const Vector& b, const RichardsonSettings& settings) {
  settings.validate();
  require(all_finite(b), "Richardson: right-hand side is not finite");
  Vector x = settings.x0.empty() ? Vector(b.size(), 0.0) : settings.x0;
  require(x.size() == b.size(), "Richardson: x0 and b differ in length");
  const double alpha = settings.alpha;
  const double limit = kDivergenceFactor * (norm(b) + norm(x) + 1.0);
  for (int k = 1; k <= settings.rounds; ++k) {
    const Vector ax = apply(x);
    require(ax.size() == x.size(), "Richardson: operator changed the dimension");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] - alpha * ax[i] + alpha * b[i];
    const double nx = norm(x);
    if (!std::isfinite(nx) || nx > limit)
      throw DivergenceError("Richardson iteration diverged at round " + std::to_string(k), k);
  }
  return x;
}

/// alpha = min(1/rounds, 1/lambda_max_hat), the step that keeps the averaged
/// per-worker iterates close to the centralized one.
inline double spectral_alpha(double lambda_max_hat, int rounds) {
  require(lambda_max_hat > 0.0 && std::isfinite(lambda_max_hat), "spectral_alpha: lambda_max_hat must be > 0");
  require(rounds >= 1, "spectral_alpha: rounds must be >= 1");
  return std::min(1.0 / rounds, 1.0 / lambda_max_hat);
}

}  // namespace fednewton
