#pragma once

// Federated data: condition-number-controlled synthetic regression, label-skew
// partitioning of labelled pools, and per-worker train/validation splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fednewton/core.hpp"
#include "fednewton/glm.hpp"
#include "fednewton/rng.hpp"

namespace fednewton {

enum class TaskKind { Regression, BinaryClassification, MultiClass };

struct Task {
  TaskKind kind = TaskKind::Regression;
  std::size_t classes = 0;  // MultiClass only

  bool operator==(const Task&) const = default;

  GlmModel model(std::size_t dim, double lambda) const {
    switch (kind) {
      case TaskKind::Regression: return GlmModel::ridge(dim, lambda);
      case TaskKind::BinaryClassification: return GlmModel::logistic(dim, lambda);
      case TaskKind::MultiClass: return GlmModel::multinomial(dim, classes, lambda);
    }
    return GlmModel::ridge(dim, lambda);
  }
};

struct WorkerData {
  Shard train;
  Shard validation;
};

struct FederatedDataset {
  std::vector<WorkerData> shards;
  std::size_t dim = 0;
  Task task;
  std::string provenance;

  std::size_t workers() const { return shards.size(); }

  void validate() const {
    require(!shards.empty(), "dataset has no shards");
    require(dim >= 1, "dataset dimension must be >= 1");
    for (std::size_t i = 0; i < shards.size(); ++i) {
      require(!shards[i].train.empty(), "worker " + std::to_string(i) + " has no training samples");
      for (const Shard* part : {&shards[i].train, &shards[i].validation})
        for (const Sample& s : *part) require(s.features.size() == dim, "sample dimension differs from dataset dim");
    }
  }
};

/// Seeded shuffle, then the first floor(ratio * D) samples train.
inline std::pair<Shard, Shard> split_train_validation(const Shard& shard, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0, 1)");
  require(shard.size() >= 2, "cannot split a shard with fewer than 2 samples");
  std::vector<std::size_t> order(shard.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(shard.size())));
  std::pair<Shard, Shard> out;
  out.first.reserve(cut);
  out.second.reserve(shard.size() - cut);
  for (std::size_t i = 0; i < order.size(); ++i) (i < cut ? out.first : out.second).push_back(shard[order[i]]);
  return out;
}

inline constexpr double kTrainFraction = 0.75;

struct SyntheticSpec {
  int n = 32;
  std::size_t d = 40;
  double kappa = 10.0;
  std::size_t size_min = 540;
  std::size_t size_max = 5630;
  double noise_std = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    require(n >= 1, "synthetic: n must be >= 1");
    require(d >= 1, "synthetic: d must be >= 1");
    require(kappa >= 1.0 && std::isfinite(kappa), "synthetic: kappa must be >= 1");
    require(d >= 2 || kappa == 1.0, "synthetic: d = 1 leaves the covariance decay exponent undefined for kappa > 1");
    require(size_min >= 2 && size_min <= size_max, "synthetic: need 2 <= size_min <= size_max");
    require(noise_std >= 0.0, "synthetic: noise_std must be >= 0");
  }

  /// Decay exponent tau with Sigma_ii = i^-tau and d^tau = kappa.
  double tau() const { return d >= 2 ? std::log(kappa) / std::log(static_cast<double>(d)) : 0.0; }

  /// Diagonal of the feature covariance, entries 1 .. d^-tau = 1/kappa.
  Vector covariance_diagonal() const {
    Vector s(d);
    const double t = tau();
    for (std::size_t i = 0; i < d; ++i) s[i] = std::pow(static_cast<double>(i + 1), -t);
    return s;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "synthetic n=" << n << " d=" << d << " kappa=" << kappa << " sizes=[" << size_min << "," << size_max
       << "] noise_std=" << noise_std << " seed=" << seed;
    return os.str();
  }
};

/// y = <w*, a> + c with a ~ N(0, sigma_j Sigma), sigma_j ~ U(1, 30) per
/// sample, c ~ N(0, noise_std^2) and per-worker sizes uniform in the size
/// range. Returns the dataset and w*.
inline std::pair<FederatedDataset, Vector> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Vector sigma = spec.covariance_diagonal();
  Vector w_star(spec.d);
  for (double& v : w_star) v = rng.normal();

  FederatedDataset ds;
  ds.dim = spec.d;
  ds.task = {TaskKind::Regression, 0};
  ds.provenance = spec.describe();
  for (int i = 0; i < spec.n; ++i) {
    const auto size = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.size_min), static_cast<std::int64_t>(spec.size_max)));
    Shard shard(size);
    for (Sample& s : shard) {
      const double scale_j = rng.uniform(1.0, 30.0);
      s.features.resize(spec.d);
      for (std::size_t k = 0; k < spec.d; ++k) s.features[k] = std::sqrt(scale_j * sigma[k]) * rng.normal();
      s.label = dot(w_star, s.features) + spec.noise_std * rng.normal();
    }
    auto [train, val] = split_train_validation(shard, kTrainFraction, derive_seed(spec.seed, 1000 + i));
    ds.shards.push_back({std::move(train), std::move(val)});
  }
  return {std::move(ds), std::move(w_star)};
}

struct PartitionSpec {
  int n = 32;
  std::size_t labels_per_worker = 3;
  std::size_t size_min = 219;
  std::size_t size_max = 3536;
  std::uint64_t seed = 1;
};

/// The label set of worker i: labels (i*k + j) mod C for j < k, so
/// consecutive workers walk round-robin over all classes.
inline std::vector<std::size_t> worker_labels(int worker, std::size_t labels_per_worker, std::size_t classes) {
  std::vector<std::size_t> labels;
  for (std::size_t j = 0; j < labels_per_worker; ++j)
    labels.push_back((static_cast<std::size_t>(worker) * labels_per_worker + j) % classes);
  return labels;
}

/// Label-skew partition: each worker draws its size from the size range and
/// splits it evenly over its label set, taking samples from seeded per-label
/// pools without reuse. Samples beyond total demand stay unused.
inline FederatedDataset partition_by_label(const std::vector<Sample>& samples, const PartitionSpec& spec) {
  require(spec.n >= 1, "partition: n must be >= 1");
  require(!samples.empty(), "partition: no samples");
  require(spec.size_min >= 2 && spec.size_min <= spec.size_max, "partition: need 2 <= size_min <= size_max");
  const std::size_t dim = samples.front().features.size();
  std::size_t classes = 0;
  for (const Sample& s : samples) {
    require(s.label >= 0.0 && s.label == std::floor(s.label), "partition: labels must be class indices");
    require(s.features.size() == dim, "partition: samples differ in dimension");
    classes = std::max(classes, static_cast<std::size_t>(s.label) + 1);
  }
  require(spec.labels_per_worker >= 1 && spec.labels_per_worker <= classes,
          "partition: labels_per_worker must lie in [1, " + std::to_string(classes) + "]");

  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> pools(classes);
  for (std::size_t i = 0; i < samples.size(); ++i) pools[static_cast<std::size_t>(samples[i].label)].push_back(i);
  for (auto& pool : pools) rng.shuffle(pool);

  // Per-worker, per-label demand.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> demand(static_cast<std::size_t>(spec.n));
  std::vector<std::size_t> total(classes, 0);
  for (int i = 0; i < spec.n; ++i) {
    const auto size = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.size_min), static_cast<std::int64_t>(spec.size_max)));
    const auto labels = worker_labels(i, spec.labels_per_worker, classes);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const std::size_t take = size / labels.size() + (j < size % labels.size() ? 1 : 0);
      demand[static_cast<std::size_t>(i)].push_back({labels[j], take});
      total[labels[j]] += take;
    }
  }
  std::string deficit;
  for (std::size_t c = 0; c < classes; ++c)
    if (total[c] > pools[c].size())
      deficit += " label " + std::to_string(c) + " needs " + std::to_string(total[c]) + " has " +
                 std::to_string(pools[c].size()) + ";";
  if (!deficit.empty()) throw ContractError("partition: infeasible demand:" + deficit);

  FederatedDataset ds;
  ds.dim = dim;
  ds.task = {TaskKind::MultiClass, classes};
  std::vector<std::size_t> cursor(classes, 0);
  for (int i = 0; i < spec.n; ++i) {
    Shard shard;
    for (auto [label, take] : demand[static_cast<std::size_t>(i)])
      for (std::size_t k = 0; k < take; ++k) shard.push_back(samples[pools[label][cursor[label]++]]);
    auto [train, val] = split_train_validation(shard, kTrainFraction, derive_seed(spec.seed, 1000 + i));
    ds.shards.push_back({std::move(train), std::move(val)});
  }
  std::ostringstream os;
  os << "label-skew n=" << spec.n << " labels_per_worker=" << spec.labels_per_worker << " sizes=[" << spec.size_min
     << "," << spec.size_max << "] seed=" << spec.seed << " pool=" << samples.size();
  ds.provenance = os.str();
  return ds;
}

}  // namespace fednewton
