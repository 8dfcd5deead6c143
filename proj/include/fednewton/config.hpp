#pragma once

// Run configuration: a flat key=value grammar shared by config files and CLI
// flags (docs/config.md).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "fednewton/core.hpp"

namespace fednewton {

enum class Algorithm { Done, Gd, Newton };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Done: return "done";
    case Algorithm::Gd: return "gd";
    case Algorithm::Newton: return "newton";
  }
  return "?";
}

enum class DatasetSource { Synthetic, Idx, Libsvm, Shards };

struct RunConfig {
  Algorithm algo = Algorithm::Done;
  DatasetSource dataset = DatasetSource::Synthetic;

  double alpha = 0.05;
  int rounds_local = 20;   // R
  int rounds_global = 30;  // T
  std::optional<std::size_t> batch;
  std::optional<int> subset;  // none: all workers
  double lambda = 0.01;
  bool adaptive_step = true;
  double fixed_step = 1.0;
  std::optional<double> gd_eta;  // none: 2 / (lambda + L)
  std::uint64_t data_seed = 1;
  std::uint64_t run_seed = 1;
  int repeats = 1;
  std::string out_dir = "runs";
  std::string run_id;
  int threads = 1;
  double early_stop_tol = 0.0;  // 0: off
  int power_iters = 30;
  bool estimate_nu = false;

  // Dataset descriptor.
  int n = 32;
  std::size_t d = 40;
  double kappa = 10.0;
  std::optional<std::size_t> size_min, size_max;
  double noise_std = 1.0;
  std::string images, labels;
  std::size_t labels_per_worker = 3;
  std::string libsvm_path;
  std::size_t libsvm_dim = 0;
  std::string task = "multiclass";  // libsvm: regression | binary | multiclass
  std::string partition = "label";  // libsvm: label | even
  std::string shards_path;
  std::string save_shards;

  std::string effective_run_id() const;
};

/// Every recognised key, in documentation order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "algo",     "dataset",     "alpha",      "R",          "T",           "batch",       "subset",
      "lambda",   "stepsize",    "gd_eta",     "seed",       "run_seed",    "repeats",     "out",
      "run_id",   "threads",     "early_stop_tol", "power_iters", "estimate_nu", "n",        "d",
      "kappa",    "size_min",    "size_max",   "noise_std",  "images",      "labels",      "labels_per_worker",
      "libsvm",   "libsvm_dim",  "task",       "partition",  "shards",      "save_shards"};
  return keys;
}

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

/// `key = value` lines; '#' starts a comment; blank lines ignored.
inline ConfigMap parse_config_text(std::istream& in) {
  ConfigMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value", lineno);
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key", lineno);
    if (out.count(key)) throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'", lineno);
    out[key] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config_text(in);
}

/// Builds a validated RunConfig from file values overridden by flag values.
/// Unknown keys and every invalid value are reported together.
inline RunConfig build_config(const ConfigMap& file_values, const ConfigMap& overrides = {}) {
  ConfigMap kv = file_values;
  for (const auto& [k, v] : overrides) kv[k] = v;

  std::vector<std::string> errors;
  const auto& known = config_keys();
  for (const auto& [k, v] : kv)
    if (std::find(known.begin(), known.end(), k) == known.end()) errors.push_back(k + ": unknown key");

  RunConfig c;
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto num = [&](const std::string& key, auto& field) {
    const std::string* s = get(key);
    if (!s) return false;
    using T = std::decay_t<decltype(field)>;
    T v{};
    auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (res.ec != std::errc() || res.ptr != s->data() + s->size()) {
      errors.push_back(key + ": cannot parse '" + *s + "'");
      return false;
    }
    field = v;
    return true;
  };
  auto check = [&](bool ok, const std::string& key, const std::string& why) {
    if (!ok) errors.push_back(key + ": " + why);
  };
  auto boolean = [&](const std::string& key, bool& field) {
    const std::string* s = get(key);
    if (!s) return;
    if (*s == "true" || *s == "1")
      field = true;
    else if (*s == "false" || *s == "0")
      field = false;
    else
      errors.push_back(key + ": expected true or false");
  };

  if (const std::string* s = get("algo")) {
    if (*s == "done") c.algo = Algorithm::Done;
    else if (*s == "gd") c.algo = Algorithm::Gd;
    else if (*s == "newton") c.algo = Algorithm::Newton;
    else errors.push_back("algo: expected done, gd or newton");
  }
  if (const std::string* s = get("dataset")) {
    if (*s == "synthetic") c.dataset = DatasetSource::Synthetic;
    else if (*s == "idx") c.dataset = DatasetSource::Idx;
    else if (*s == "libsvm") c.dataset = DatasetSource::Libsvm;
    else if (*s == "shards") c.dataset = DatasetSource::Shards;
    else errors.push_back("dataset: expected synthetic, idx, libsvm or shards");
  }
  if (num("alpha", c.alpha)) check(c.alpha > 0.0, "alpha", "must be > 0");
  if (num("R", c.rounds_local)) check(c.rounds_local >= 1, "R", "must be >= 1");
  if (num("T", c.rounds_global)) check(c.rounds_global >= 0, "T", "must be >= 0");
  if (const std::string* s = get("batch"); s && *s != "full") {
    std::size_t b = 0;
    if (num("batch", b)) {
      check(b >= 1, "batch", "must be >= 1");
      c.batch = b;
    }
  }
  if (const std::string* s = get("subset"); s && *s != "all") {
    int v = 0;
    if (num("subset", v)) {
      check(v >= 1, "subset", "must be >= 1");
      c.subset = v;
    }
  }
  if (num("lambda", c.lambda)) check(c.lambda >= 0.0, "lambda", "must be >= 0");
  if (const std::string* s = get("stepsize")) {
    if (*s == "adaptive") {
      c.adaptive_step = true;
    } else if (s->rfind("fixed:", 0) == 0) {
      c.adaptive_step = false;
      const std::string v = s->substr(6);
      auto res = std::from_chars(v.data(), v.data() + v.size(), c.fixed_step);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !(c.fixed_step > 0.0))
        errors.push_back("stepsize: fixed step must be a positive number");
    } else {
      errors.push_back("stepsize: expected adaptive or fixed:<value>");
    }
  }
  {
    double eta = 0.0;
    if (num("gd_eta", eta)) {
      check(eta > 0.0, "gd_eta", "must be > 0");
      c.gd_eta = eta;
    }
  }
  num("seed", c.data_seed);
  c.run_seed = c.data_seed;
  num("run_seed", c.run_seed);
  if (num("repeats", c.repeats)) check(c.repeats >= 1, "repeats", "must be >= 1");
  if (const std::string* s = get("out")) c.out_dir = *s;
  check(!c.out_dir.empty(), "out", "must not be empty");
  if (const std::string* s = get("run_id")) {
    c.run_id = *s;
    check(c.run_id.find_first_of(",/\\ \t") == std::string::npos, "run_id", "must not contain commas, slashes or spaces");
  }
  if (num("threads", c.threads)) check(c.threads >= 1, "threads", "must be >= 1");
  if (num("early_stop_tol", c.early_stop_tol)) check(c.early_stop_tol >= 0.0, "early_stop_tol", "must be >= 0");
  if (num("power_iters", c.power_iters)) check(c.power_iters >= 1, "power_iters", "must be >= 1");
  boolean("estimate_nu", c.estimate_nu);

  if (num("n", c.n)) check(c.n >= 1, "n", "must be >= 1");
  if (num("d", c.d)) check(c.d >= 1, "d", "must be >= 1");
  if (num("kappa", c.kappa)) check(c.kappa >= 1.0, "kappa", "must be >= 1");
  {
    std::size_t v = 0;
    if (num("size_min", v)) c.size_min = v;
    if (num("size_max", v)) c.size_max = v;
  }
  if (c.size_min && c.size_max) check(*c.size_min <= *c.size_max, "size_min", "must not exceed size_max");
  if (c.size_min) check(*c.size_min >= 2, "size_min", "must be >= 2");
  if (num("noise_std", c.noise_std)) check(c.noise_std >= 0.0, "noise_std", "must be >= 0");
  if (const std::string* s = get("images")) c.images = *s;
  if (const std::string* s = get("labels")) c.labels = *s;
  if (num("labels_per_worker", c.labels_per_worker)) check(c.labels_per_worker >= 1, "labels_per_worker", "must be >= 1");
  if (const std::string* s = get("libsvm")) c.libsvm_path = *s;
  num("libsvm_dim", c.libsvm_dim);
  if (const std::string* s = get("task")) {
    c.task = *s;
    check(c.task == "regression" || c.task == "binary" || c.task == "multiclass", "task",
          "expected regression, binary or multiclass");
  }
  if (const std::string* s = get("partition")) {
    c.partition = *s;
    check(c.partition == "label" || c.partition == "even", "partition", "expected label or even");
  }
  if (const std::string* s = get("shards")) c.shards_path = *s;
  if (const std::string* s = get("save_shards")) c.save_shards = *s;

  // Cross-field checks.
  if (c.subset && c.dataset != DatasetSource::Shards)
    check(*c.subset <= c.n, "subset", "exceeds the number of workers n = " + std::to_string(c.n));
  if (c.dataset == DatasetSource::Synthetic) check(c.d >= 2 || c.kappa == 1.0, "d", "must be >= 2 when kappa > 1");
  if (c.dataset == DatasetSource::Idx) {
    check(!c.images.empty(), "images", "required for dataset=idx");
    check(!c.labels.empty(), "labels", "required for dataset=idx");
  }
  if (c.dataset == DatasetSource::Libsvm) {
    check(!c.libsvm_path.empty(), "libsvm", "required for dataset=libsvm");
    check(c.libsvm_dim >= 1, "libsvm_dim", "required for dataset=libsvm");
    check(c.partition == "even" || c.task == "multiclass", "partition", "label partitioning needs task=multiclass");
  }
  if (c.dataset == DatasetSource::Shards) check(!c.shards_path.empty(), "shards", "required for dataset=shards");

  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ContractError(msg);
  }
  return c;
}

inline std::string RunConfig::effective_run_id() const {
  if (!run_id.empty()) return run_id;
  static const char* sources[] = {"synthetic", "idx", "libsvm", "shards"};
  return std::string(algorithm_name(algo)) + "-" + sources[static_cast<int>(dataset)];
}

}  // namespace fednewton
