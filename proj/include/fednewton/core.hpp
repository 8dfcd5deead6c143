#pragma once

// Dense vector helpers and the error types shared by every module.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fednewton {

using Vector = std::vector<double>;

/// Thrown when a caller breaks a documented precondition (dimension
/// mismatch, empty shard, out-of-range hyperparameter).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterate became non-finite or blew past the divergence threshold.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int round, int worker = -1)
      : std::runtime_error(what), round_(round), worker_(worker) {}

  int round() const noexcept { return round_; }
  int worker() const noexcept { return worker_; }

 private:
  int round_;
  int worker_;
};

/// Malformed input file. `position` is a byte offset (binary formats) or a
/// 1-based line number (text formats).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline void scale(double s, std::span<double> x) {
  for (double& v : x) v *= s;
}

inline Vector operator-(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vector operator+(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vector operator*(double s, const Vector& a) {
  Vector r(a);
  scale(s, r);
  return r;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Mean of equally sized vectors by pairwise (tree) summation in index
/// order. Deterministic for a fixed input order, and exact when every input
/// is identical and the count is a power of two.
inline Vector pairwise_mean(const std::vector<Vector>& parts) {
  require(!parts.empty(), "pairwise_mean: no inputs");
  std::vector<Vector> level = parts;
  while (level.size() > 1) {
    std::vector<Vector> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(level[i] + level[i + 1]);
    if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
    level = std::move(next);
  }
  Vector out = std::move(level.front());
  const double n = static_cast<double>(parts.size());
  for (double& v : out) v /= n;
  return out;
}

}  // namespace fednewton
