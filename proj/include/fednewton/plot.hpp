#pragma once

// SVG line charts of trace CSVs: one curve per trace (mean over repeats),
// metric against global rounds.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fednewton/core.hpp"
#include "fednewton/trace.hpp"

namespace fednewton {

enum class PlotColumn { TrainLoss, GradNorm, ValMetric, Eta };

inline const char* plot_column_name(PlotColumn c) {
  switch (c) {
    case PlotColumn::TrainLoss: return "train_loss";
    case PlotColumn::GradNorm: return "grad_norm";
    case PlotColumn::ValMetric: return "val_accuracy";
    case PlotColumn::Eta: return "eta";
  }
  return "?";
}

inline PlotColumn parse_plot_column(const std::string& s) {
  if (s == "train_loss") return PlotColumn::TrainLoss;
  if (s == "grad_norm") return PlotColumn::GradNorm;
  if (s == "val_accuracy" || s == "val_loss") return PlotColumn::ValMetric;
  if (s == "eta") return PlotColumn::Eta;
  throw ContractError("unknown plot metric '" + s + "' (train_loss, grad_norm, val_accuracy, eta)");
}

struct PlotSpec {
  PlotColumn column = PlotColumn::TrainLoss;
  bool log_y = false;
  std::string y_label;  // empty: column name
  std::string title;
  int width = 640;
  int height = 400;
};

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (round, value)
};

namespace detail {

inline double column_value(const TraceRecord& r, PlotColumn c) {
  switch (c) {
    case PlotColumn::TrainLoss: return r.train_loss;
    case PlotColumn::GradNorm: return r.grad_norm;
    case PlotColumn::ValMetric: return r.val_accuracy;
    case PlotColumn::Eta: return r.eta;
  }
  return NAN;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace detail

/// Mean of `column` per round over the repeats that reached it; diverged rows
/// are skipped.
inline PlotSeries series_from_trace(const std::vector<TraceRecord>& rows, PlotColumn column) {
  PlotSeries s;
  std::map<int, std::pair<double, int>> acc;
  for (const TraceRecord& r : rows) {
    if (s.label.empty()) s.label = r.run_id;
    if (r.status != RoundStatus::Ok) continue;
    const double v = detail::column_value(r, column);
    if (!std::isfinite(v)) continue;
    auto& [sum, count] = acc[r.round];
    sum += v;
    ++count;
  }
  for (const auto& [round, sc] : acc) s.points.emplace_back(round, sc.first / sc.second);
  return s;
}

inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  require(!series.empty(), "render_svg: no series");
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const PlotSeries& s : series)
    for (auto [x, y] : s.points) {
      if (spec.log_y && !(y > 0.0)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;

  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };
  using detail::fmt;

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"20\" text-anchor=\"middle\">" + detail::xml_escape(spec.title) +
         "</text>\n";
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    o += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + fmt(top + ph + 16) + "\" text-anchor=\"middle\">" +
         detail::tick_label(xv) + "</text>\n";
    o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(yv) + 4) + "\" text-anchor=\"end\">" +
         detail::tick_label(spec.log_y ? std::pow(10.0, yv) : yv) + "</text>\n";
  }
  o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(spec.height - 10.0) +
       "\" text-anchor=\"middle\">Global rounds</text>\n";
  const std::string ylab = spec.y_label.empty() ? plot_column_name(spec.column) : spec.y_label;
  o += "<text transform=\"translate(16," + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::xml_escape(ylab) + (spec.log_y ? " (log)" : "") + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % std::size(palette)];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if (spec.log_y && !(y > 0.0)) continue;
      if (!pts.empty()) pts += ' ';
      pts += fmt(px(x)) + ',' + fmt(py(ty(y)));
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
    const double ly = top + 14.0 + 18.0 * static_cast<double>(i);
    o += "<line x1=\"" + fmt(left + pw + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(left + pw + 30) + "\" y2=\"" +
         fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(left + pw + 36) + "\" y=\"" + fmt(ly + 4) + "\">" + detail::xml_escape(series[i].label) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

/// Metric recorded in the summary JSON next to a trace CSV, if present.
inline std::optional<MetricKind> read_trace_metric(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  std::ifstream in(p);
  if (!in) return std::nullopt;
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("metric") || !j["metric"].is_string()) return std::nullopt;
  const std::string m = j["metric"].get<std::string>();
  if (m == metric_name(MetricKind::Accuracy)) return MetricKind::Accuracy;
  if (m == metric_name(MetricKind::ValidationLoss)) return MetricKind::ValidationLoss;
  throw FormatError(p.string() + ": unknown metric '" + m + "'", 0);
}

/// Reads each trace CSV (schema-checked by read_csv_file) and renders one chart.
inline std::string emit_plot(const std::vector<std::string>& trace_paths, const PlotSpec& spec) {
  require(!trace_paths.empty(), "emit_plot: no trace files given");
  std::optional<MetricKind> shared;
  for (const std::string& p : trace_paths) {
    const auto m = read_trace_metric(p);
    if (!m) continue;
    if (shared && *shared != *m)
      throw FormatError("emit_plot: traces mix metrics (" + std::string(metric_name(*shared)) + " vs " + metric_name(*m) +
                            " in " + p + ")",
                        0);
    shared = m;
  }
  std::vector<PlotSeries> series;
  for (const std::string& p : trace_paths) {
    PlotSeries s = series_from_trace(read_csv_file(p), spec.column);
    if (s.label.empty()) s.label = p;
    series.push_back(std::move(s));
  }
  PlotSpec resolved = spec;
  if (resolved.y_label.empty() && spec.column == PlotColumn::ValMetric && shared) resolved.y_label = metric_name(*shared);
  return render_svg(series, resolved);
}

}  // namespace fednewton
