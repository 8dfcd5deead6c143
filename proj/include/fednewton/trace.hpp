#pragma once

// Per-round metrics rows and their CSV persistence.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "fednewton/core.hpp"

namespace fednewton {

enum class RoundStatus { Ok, Diverged };

/// What the val_accuracy column holds: top-1 accuracy for classification,
/// mean validation loss for regression.
enum class MetricKind { Accuracy, ValidationLoss };

inline const char* metric_name(MetricKind k) { return k == MetricKind::Accuracy ? "accuracy" : "val_loss"; }

struct TraceRecord {
  std::string run_id;
  int repeat = 0;
  int round = 0;
  double train_loss = NAN;
  double grad_norm = NAN;
  double val_accuracy = NAN;
  double eta = NAN;
  long comm_rounds = 0;
  double wall_ms = 0.0;
  RoundStatus status = RoundStatus::Ok;
};

inline constexpr const char* kCsvHeader =
    "run_id,repeat,round,train_loss,grad_norm,val_accuracy,eta,comm_rounds,wall_ms,status";
inline constexpr int kCsvSchemaVersion = 1;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_wall_ms(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", ms);
  return buf;
}

inline std::string to_csv_row(const TraceRecord& r) {
  std::string s = r.run_id;
  s += ',' + std::to_string(r.repeat);
  s += ',' + std::to_string(r.round);
  s += ',' + format_double(r.train_loss);
  s += ',' + format_double(r.grad_norm);
  s += ',' + format_double(r.val_accuracy);
  s += ',' + format_double(r.eta);
  s += ',' + std::to_string(r.comm_rounds);
  s += ',' + format_wall_ms(r.wall_ms);
  s += r.status == RoundStatus::Ok ? ",ok" : ",diverged";
  return s;
}

inline void write_csv(std::ostream& os, const std::vector<TraceRecord>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << to_csv_row(r) << '\n';
}

namespace detail {

inline double parse_double_field(const std::string& f, std::size_t line) {
  if (f == "nan") return NAN;
  if (f == "inf") return INFINITY;
  if (f == "-inf") return -INFINITY;
  double v = 0.0;
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size())
    throw FormatError("trace CSV: bad number '" + f + "' on line " + std::to_string(line), line);
  return v;
}

inline long parse_long_field(const std::string& f, std::size_t line) {
  long v = 0;
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size())
    throw FormatError("trace CSV: bad integer '" + f + "' on line " + std::to_string(line), line);
  return v;
}

}  // namespace detail

inline std::vector<TraceRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("trace CSV: missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw FormatError("trace CSV: unexpected header '" + line + "'", 1);
  std::vector<TraceRecord> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10)
      throw FormatError("trace CSV: expected 10 fields on line " + std::to_string(lineno), lineno);
    TraceRecord r;
    r.run_id = f[0];
    r.repeat = static_cast<int>(detail::parse_long_field(f[1], lineno));
    r.round = static_cast<int>(detail::parse_long_field(f[2], lineno));
    r.train_loss = detail::parse_double_field(f[3], lineno);
    r.grad_norm = detail::parse_double_field(f[4], lineno);
    r.val_accuracy = detail::parse_double_field(f[5], lineno);
    r.eta = detail::parse_double_field(f[6], lineno);
    r.comm_rounds = detail::parse_long_field(f[7], lineno);
    r.wall_ms = detail::parse_double_field(f[8], lineno);
    if (f[9] == "ok")
      r.status = RoundStatus::Ok;
    else if (f[9] == "diverged")
      r.status = RoundStatus::Diverged;
    else
      throw FormatError("trace CSV: bad status '" + f[9] + "' on line " + std::to_string(lineno), lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<TraceRecord> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  return read_csv(in);
}

/// Smallest round whose validation accuracy reaches `target`, or nullopt.
/// Rows are scanned in order; diverged marker rows never count.
inline std::optional<int> rounds_to_target(const std::vector<TraceRecord>& trace, MetricKind kind,
                                           double target) {
  if (kind != MetricKind::Accuracy)
    throw ContractError("rounds_to_target: trace has no accuracy column (regression run)");
  for (const TraceRecord& r : trace)
    if (r.status == RoundStatus::Ok && r.val_accuracy >= target) return r.round;
  return std::nullopt;
}

}  // namespace fednewton
