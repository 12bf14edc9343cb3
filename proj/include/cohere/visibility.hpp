#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"
#include "cohere/scene.hpp"

namespace cohere {

/// Rectangular analysis window in physical coordinates. Fringes vary along `axis`; the profile is
/// averaged over the transverse direction.
struct FringeWindow {
  double center_x = 0.0;
  double center_y = 0.0;
  double half_length = 0.5e-3;  // along the fringe axis
  double half_width = 0.25e-3;  // across it
  double period = 0.0;          // expected fringe period, lambda z / d
  Axis axis = Axis::horizontal;
};

struct VisibilityReport {
  double visibility = 0.0;
  double i_max = 0.0;
  double i_min = 0.0;
  FringeWindow window;
};

/// Fringe profile along the window axis: (offset from window center, transverse mean).
inline std::vector<std::pair<double, double>> fringe_profile(const IntensityImage& image, const FringeWindow& w) {
  const GridSpec& g = image.grid;
  const std::size_t n = g.n();
  std::vector<std::pair<double, double>> profile;
  for (std::size_t a = 0; a < n; ++a) {
    const double along = g.coordinate(a) - (w.axis == Axis::horizontal ? w.center_x : w.center_y);
    if (std::abs(along) > w.half_length) continue;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double across = g.coordinate(t) - (w.axis == Axis::horizontal ? w.center_y : w.center_x);
      if (std::abs(across) > w.half_width) continue;
      sum += w.axis == Axis::horizontal ? image.at(t, a) : image.at(a, t);
      ++count;
    }
    if (count == 0) throw ConfigError("fringe window is narrower than one pixel");
    profile.emplace_back(along, sum / static_cast<double>(count));
  }
  return profile;
}

/// Visibility (I_max - I_min) / (I_max + I_min) of the fringes at the window center.
///
/// The averaged profile is fitted by least squares with a(u) + Re[c(u) exp(i 2 pi u / period)], where the
/// background a and the complex fringe amplitude c are both linear in u. The envelopes a +- |c| at u = 0
/// give I_max and I_min, so ensemble noise and slow intensity falloff do not bias the extrema.
inline VisibilityReport fringe_visibility(const IntensityImage& image, const FringeWindow& window) {
  if (!(window.period > 0.0)) throw ConfigError("fringe period must be positive");
  if (!(2.0 * window.half_length >= 3.0 * window.period)) {
    throw ConfigError("fringe window must span at least three fringe periods");
  }
  if (!(window.half_width > 0.0)) throw ConfigError("fringe window width must be positive");
  const auto profile = fringe_profile(image, window);
  if (profile.size() < 6) throw ConfigError("fringe window holds too few samples for the envelope fit");

  double total = 0.0;
  for (const auto& [u, v] : profile) total += v;
  if (!(total > 0.0)) throw DataError("zero intensity in fringe window");

  const double k = 2.0 * kPi / window.period;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(profile.size()), 6);
  Eigen::VectorXd b(static_cast<Eigen::Index>(profile.size()));
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double u = profile[i].first;
    const double s = u / window.half_length;
    const auto r = static_cast<Eigen::Index>(i);
    a.row(r) << 1.0, s, std::cos(k * u), std::sin(k * u), s * std::cos(k * u), s * std::sin(k * u);
    b(r) = profile[i].second;
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  const double background = x(0);
  const double amplitude = std::hypot(x(2), x(3));

  VisibilityReport report;
  report.window = window;
  report.i_max = background + amplitude;
  report.i_min = std::max(0.0, background - amplitude);
  report.visibility = report.i_max + report.i_min > 0.0
                          ? std::clamp((report.i_max - report.i_min) / (report.i_max + report.i_min), 0.0, 1.0)
                          : 0.0;
  return report;
}

}  // namespace cohere
