#pragma once

// Loss, gradient and Hessian-vector kernels for the three generalized linear
// model families. Every curvature product is evaluated sample by sample as
// beta_j * a_j * <a_j, v>, so no d x d matrix is ever formed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fednewton/core.hpp"

namespace fednewton {

struct Sample {
  Vector features;
  // Regression: any real. Binary: -1 or +1. Multinomial: class index.
  double label = 0.0;
};

using Shard = std::vector<Sample>;

enum class Family { Ridge, BinaryLogistic, Multinomial };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Ridge: return "ridge";
    case Family::BinaryLogistic: return "logistic";
    case Family::Multinomial: return "multinomial";
  }
  return "?";
}

struct GlmModel {
  Family family = Family::Ridge;
  double lambda = 0.0;
  std::size_t dim = 1;
  std::size_t classes = 0;  // multinomial only

  static GlmModel ridge(std::size_t d, double lambda) { return checked({Family::Ridge, lambda, d, 0}); }
  static GlmModel logistic(std::size_t d, double lambda) {
    return checked({Family::BinaryLogistic, lambda, d, 0});
  }
  static GlmModel multinomial(std::size_t d, std::size_t c, double lambda) {
    return checked({Family::Multinomial, lambda, d, c});
  }

  /// d for ridge/logistic; d*C for multinomial, class c occupying
  /// [c*d, (c+1)*d).
  std::size_t param_size() const { return family == Family::Multinomial ? dim * classes : dim; }

  void validate() const {
    require(lambda >= 0.0 && std::isfinite(lambda), "GlmModel: lambda must be finite and >= 0");
    require(dim >= 1, "GlmModel: dim must be >= 1");
    if (family == Family::Multinomial) require(classes >= 2, "GlmModel: multinomial needs >= 2 classes");
  }

 private:
  static GlmModel checked(GlmModel m) {
    m.validate();
    return m;
  }
};

namespace detail {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void check_shard(const GlmModel& m, std::span<const Sample> shard) {
  require(!shard.empty(), "empty shard");
  for (const Sample& s : shard) {
    if (s.features.size() != m.dim)
      throw ContractError("sample has " + std::to_string(s.features.size()) + " features, model expects " +
                          std::to_string(m.dim));
    if (m.family == Family::BinaryLogistic && s.label != 1.0 && s.label != -1.0)
      throw ContractError("binary label must be -1 or +1");
    if (m.family == Family::Multinomial) {
      const double c = s.label;
      if (c < 0.0 || c >= static_cast<double>(m.classes) || c != std::floor(c))
        throw ContractError("multinomial label out of range");
    }
  }
}

inline void check_param(const GlmModel& m, std::span<const double> w, const char* what) {
  if (w.size() != m.param_size())
    throw ContractError(std::string(what) + " has length " + std::to_string(w.size()) + ", expected " +
                        std::to_string(m.param_size()));
}

// Class scores s_c = <a, w_c> and the softmax probabilities; returns
// log-sum-exp of the scores.
inline double softmax_scores(const GlmModel& m, const Sample& s, std::span<const double> w,
                             std::vector<double>& p) {
  const std::size_t d = m.dim;
  double top = -INFINITY;
  for (std::size_t c = 0; c < m.classes; ++c) {
    p[c] = dot(s.features, w.subspan(c * d, d));
    top = std::max(top, p[c]);
  }
  double z = 0.0;
  for (std::size_t c = 0; c < m.classes; ++c) {
    p[c] = std::exp(p[c] - top);
    z += p[c];
  }
  for (std::size_t c = 0; c < m.classes; ++c) p[c] /= z;
  return top + std::log(z);
}

}  // namespace detail

/// Regularized empirical risk of one shard.
inline double loss(const GlmModel& m, std::span<const Sample> shard, std::span<const double> w) {
  detail::check_shard(m, shard);
  detail::check_param(m, w, "w");
  double total = 0.0;
  std::vector<double> p(m.classes);
  for (const Sample& s : shard) {
    switch (m.family) {
      case Family::Ridge: {
        const double r = dot(s.features, w) - s.label;
        total += 0.5 * r * r;
        break;
      }
      case Family::BinaryLogistic:
        total += detail::softplus(-s.label * dot(s.features, w));
        break;
      case Family::Multinomial: {
        const auto y = static_cast<std::size_t>(s.label);
        const double lse = detail::softmax_scores(m, s, w, p);
        total += lse - dot(s.features, w.subspan(y * m.dim, m.dim));
        break;
      }
    }
  }
  return total / static_cast<double>(shard.size()) + 0.5 * m.lambda * dot(w, w);
}

inline Vector gradient(const GlmModel& m, std::span<const Sample> shard, std::span<const double> w) {
  detail::check_shard(m, shard);
  detail::check_param(m, w, "w");
  Vector g(m.param_size(), 0.0);
  std::vector<double> p(m.classes);
  const std::size_t d = m.dim;
  for (const Sample& s : shard) {
    switch (m.family) {
      case Family::Ridge:
        axpy(dot(s.features, w) - s.label, s.features, g);
        break;
      case Family::BinaryLogistic: {
        const double margin = s.label * dot(s.features, w);
        axpy(-s.label * detail::sigmoid(-margin), s.features, g);
        break;
      }
      case Family::Multinomial: {
        const auto y = static_cast<std::size_t>(s.label);
        detail::softmax_scores(m, s, w, p);
        for (std::size_t c = 0; c < m.classes; ++c)
          axpy(p[c] - (c == y ? 1.0 : 0.0), s.features, std::span<double>(g).subspan(c * d, d));
        break;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(shard.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv + m.lambda * w[i];
  return g;
}

/// Hessian of the shard risk at `w` applied to `v`. O(D*d) per call
/// (O(D*d*C) multinomial).
inline Vector hvp(const GlmModel& m, std::span<const Sample> shard, std::span<const double> w,
                  std::span<const double> v) {
  detail::check_shard(m, shard);
  detail::check_param(m, w, "w");
  detail::check_param(m, v, "v");
  Vector out(m.param_size(), 0.0);
  std::vector<double> p(m.classes), u(m.classes);
  const std::size_t d = m.dim;
  for (const Sample& s : shard) {
    switch (m.family) {
      case Family::Ridge:
        axpy(dot(s.features, v), s.features, out);
        break;
      case Family::BinaryLogistic: {
        const double sg = detail::sigmoid(s.label * dot(s.features, w));
        axpy(sg * (1.0 - sg) * dot(s.features, v), s.features, out);
        break;
      }
      case Family::Multinomial: {
        detail::softmax_scores(m, s, w, p);
        double pu = 0.0;
        for (std::size_t c = 0; c < m.classes; ++c) {
          u[c] = dot(s.features, v.subspan(c * d, d));
          pu += p[c] * u[c];
        }
        // (diag(p) - p p^T) u
        for (std::size_t c = 0; c < m.classes; ++c)
          axpy(p[c] * (u[c] - pu), s.features, std::span<double>(out).subspan(c * d, d));
        break;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(shard.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * inv + m.lambda * v[i];
  return out;
}

/// Predicted label: sign of the score for binary (ties go to +1), argmax
/// class for multinomial, the real-valued prediction for ridge.
inline double predict(const GlmModel& m, const Sample& s, std::span<const double> w) {
  switch (m.family) {
    case Family::Ridge: return dot(s.features, w);
    case Family::BinaryLogistic: return dot(s.features, w) >= 0.0 ? 1.0 : -1.0;
    case Family::Multinomial: {
      std::size_t best = 0;
      double best_score = -INFINITY;
      for (std::size_t c = 0; c < m.classes; ++c) {
        const double sc = dot(s.features, w.subspan(c * m.dim, m.dim));
        if (sc > best_score) {
          best_score = sc;
          best = c;
        }
      }
      return static_cast<double>(best);
    }
  }
  return 0.0;
}

/// Number of correctly classified samples.
inline std::size_t count_correct(const GlmModel& m, std::span<const Sample> shard, std::span<const double> w) {
  require(m.family != Family::Ridge, "count_correct: regression has no accuracy");
  std::size_t hits = 0;
  for (const Sample& s : shard)
    if (predict(m, s, w) == s.label) ++hits;
  return hits;
}

/// Sum (not mean) of unregularized per-sample losses; used for validation
/// metrics aggregated across shards.
inline double sum_sample_loss(const GlmModel& m, std::span<const Sample> shard, std::span<const double> w) {
  if (shard.empty()) return 0.0;
  GlmModel plain = m;
  plain.lambda = 0.0;
  return loss(plain, shard, w) * static_cast<double>(shard.size());
}

}  // namespace fednewton
