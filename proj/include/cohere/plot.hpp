#pragma once

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cohere/csv.hpp"
#include "cohere/error.hpp"

namespace cohere {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
};

namespace detail {

inline std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(t);
  return ticks;
}

inline std::string tick_label(double v) {
  std::string s = format_number(std::abs(v) < 1e-12 ? 0.0 : v);
  return s;
}

}  // namespace detail

/// Renders line plots with markers, axes, ticks and a legend to a PNG file.
inline void render_plot(const PlotSpec& spec, const std::filesystem::path& path) {
  if (spec.series.empty()) throw DataError("nothing to plot");
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : spec.series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw DataError("plot series '" + s.label + "' is empty");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log_x && !(s.x[i] > 0.0)) throw DataError("log-scale x values must be positive");
      const double x = spec.log_x ? std::log10(s.x[i]) : s.x[i];
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  const double ypad = y1 - y0 > 1e-12 ? 0.08 * (y1 - y0) : std::max(0.5, 0.1 * std::abs(y0));
  y0 -= ypad;
  y1 += ypad;
  const double xpad = 0.05 * (x1 - x0);
  x0 -= xpad;
  x1 += xpad;

  const int width = 900, height = 620, left = 110, right = 40, top = 60, bottom = 90;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar black(0, 0, 0), grey(210, 210, 210);
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (width - left - right))); };
  auto py = [&](double y) { return height - bottom - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (height - top - bottom))); };

  std::vector<std::pair<double, std::string>> xticks;
  if (spec.log_x) {
    for (int e = static_cast<int>(std::floor(x0)); e <= static_cast<int>(std::ceil(x1)); ++e) {
      for (double m : {1.0, 3.0}) {
        const double v = std::log10(m) + e;
        if (v >= x0 && v <= x1) xticks.emplace_back(v, detail::tick_label(m * std::pow(10.0, e)));
      }
    }
  } else {
    for (double t : detail::linear_ticks(x0, x1)) xticks.emplace_back(t, detail::tick_label(t));
  }
  for (const auto& [v, text] : xticks) {
    cv::line(img, {px(v), top}, {px(v), height - bottom}, grey, 1);
    int base = 0;
    const auto size = cv::getTextSize(text, font, 0.5, 1, &base);
    cv::putText(img, text, {px(v) - size.width / 2, height - bottom + 22}, font, 0.5, black, 1, cv::LINE_AA);
  }
  for (double t : detail::linear_ticks(y0, y1)) {
    cv::line(img, {left, py(t)}, {width - right, py(t)}, grey, 1);
    const std::string text = detail::tick_label(t);
    int base = 0;
    const auto size = cv::getTextSize(text, font, 0.5, 1, &base);
    cv::putText(img, text, {left - size.width - 8, py(t) + 5}, font, 0.5, black, 1, cv::LINE_AA);
  }
  cv::rectangle(img, {left, top}, {width - right, height - bottom}, black, 1);

  int base = 0;
  auto centered = [&](const std::string& text, int y, double scale) {
    const auto size = cv::getTextSize(text, font, scale, 1, &base);
    cv::putText(img, text, {(width - size.width) / 2, y}, font, scale, black, 1, cv::LINE_AA);
  };
  centered(spec.title, 35, 0.7);
  centered(spec.x_label, height - 35, 0.6);
  {
    const auto size = cv::getTextSize(spec.y_label, font, 0.6, 1, &base);
    cv::Mat label(size.height + 12, size.width + 4, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::putText(label, spec.y_label, {2, size.height + 4}, font, 0.6, black, 1, cv::LINE_AA);
    cv::Mat rotated;
    cv::rotate(label, rotated, cv::ROTATE_90_COUNTERCLOCKWISE);
    const int ry = std::max(0, (height - rotated.rows) / 2);
    if (ry + rotated.rows <= height && rotated.cols + 8 <= left) rotated.copyTo(img(cv::Rect(8, ry, rotated.cols, rotated.rows)));
  }

  static const cv::Scalar palette[] = {{180, 90, 20}, {30, 30, 200}, {40, 150, 40}, {150, 40, 150}, {20, 140, 200}};
  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const cv::Scalar color = palette[k % std::size(palette)];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts.emplace_back(px(spec.log_x ? std::log10(s.x[i]) : s.x[i]), py(s.y[i]));
    for (std::size_t i = 1; i < pts.size(); ++i) cv::line(img, pts[i - 1], pts[i], color, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(img, p, 5, color, cv::FILLED, cv::LINE_AA);
    const int ly = top + 22 + 24 * static_cast<int>(k);
    cv::line(img, {left + 14, ly - 5}, {left + 44, ly - 5}, color, 2, cv::LINE_AA);
    cv::circle(img, {left + 29, ly - 5}, 5, color, cv::FILLED, cv::LINE_AA);
    cv::putText(img, s.label, {left + 52, ly}, font, 0.55, black, 1, cv::LINE_AA);
  }

  if (!cv::imwrite(path.string(), img)) throw DataError("cannot write plot " + path.string());
}

/// Plot layout for a metric CSV: first column on x, every mean/value column as a series.
/// Coherence-length axes are logarithmic and shown in millimeters; lengths on y are shown in micrometers.
inline PlotSpec plot_spec_from_csv(const std::vector<std::pair<std::string, CsvTable>>& tables) {
  if (tables.empty()) throw DataError("no CSV files to plot");
  PlotSpec spec;
  const std::string& x_name = tables.front().second.header.front();
  double x_scale = 1.0;
  if (x_name.rfind("coherence_length", 0) == 0) {
    spec.log_x = true;
    x_scale = 1e3;
    spec.x_label = "coherence length l_c (mm)";
  } else if (x_name.rfind("depth", 0) == 0) {
    spec.x_label = "detector depth (m)";
  } else {
    spec.x_label = x_name;
  }
  for (const auto& [name, table] : tables) {
    if (table.header.front() != x_name) throw DataError(name + ": x column '" + table.header.front() + "' differs from '" + x_name + "'");
    if (table.rows.empty()) throw DataError(name + ": empty series");
    for (std::size_t c = 1; c < table.header.size(); ++c) {
      const std::string& col = table.header[c];
      if (col.find("std") != std::string::npos || col == "items" || col.find("contrast") != std::string::npos) continue;
      double y_scale = 1.0;
      std::string label = col;
      for (const char* suffix : {"_mean_bits", "_bits", "_m"}) {
        const std::string sfx = suffix;
        if (label.size() > sfx.size() && label.compare(label.size() - sfx.size(), sfx.size(), sfx) == 0) {
          if (sfx == "_m") y_scale = 1e6;
          label.resize(label.size() - sfx.size());
          break;
        }
      }
      std::replace(label.begin(), label.end(), '_', ' ');
      if (tables.size() > 1 && label.find("diffuser") == std::string::npos) label = name + ": " + label;
      PlotSeries s{label, {}, {}};
      for (const auto& row : table.rows) {
        s.x.push_back(row[0] * x_scale);
        s.y.push_back(row[c] * y_scale);
      }
      if (spec.y_label.empty()) {
        if (col.find("entropy") != std::string::npos || col.find("bits") != std::string::npos) {
          spec.y_label = "mean 2D entropy (bits)";
          spec.title = "Two-dimensional entropy";
        } else if (col.find("visibility") != std::string::npos) {
          spec.y_label = "fringe visibility";
          spec.title = "Degree of coherence";
        } else if (col.find("speckle") != std::string::npos) {
          spec.y_label = "mean speckle size (um)";
          spec.title = "Speckle size";
        } else if (col.find("accuracy") != std::string::npos) {
          spec.y_label = "test accuracy";
          spec.title = "Recognition accuracy";
        } else {
          spec.y_label = label;
          spec.title = label;
        }
      }
      spec.series.push_back(std::move(s));
    }
  }
  if (spec.series.empty()) throw DataError("no plottable columns");
  return spec;
}

}  // namespace cohere
