#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/fft.hpp"
#include "cohere/field.hpp"

namespace cohere {

/// Pixel window: top-left corner and size.
struct SpeckleWindow {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  static SpeckleWindow centered(const GridSpec& grid, std::size_t size) {
    if (size == 0 || size > grid.n()) throw ConfigError("speckle window size must be in [1, n]");
    const std::size_t start = (grid.n() - size) / 2;
    return {start, start, size, size};
  }
};

struct SpeckleReport {
  double size = 0.0;    // meters, mean of the x and y 1/e half-widths
  double size_x = 0.0;  // meters
  double size_y = 0.0;  // meters
  double contrast = 0.0;
  SpeckleWindow window;
};

namespace detail {

// First lag where the normalized autocovariance falls below 1/e, linearly interpolated, in pixels.
inline double one_over_e_width(const std::vector<double>& c) {
  const double threshold = std::exp(-1.0);
  for (std::size_t lag = 1; lag < c.size(); ++lag) {
    if (c[lag] < threshold) {
      return static_cast<double>(lag - 1) + (c[lag - 1] - threshold) / (c[lag - 1] - c[lag]);
    }
  }
  throw DataError("speckle correlation does not decay within half the window");
}

}  // namespace detail

/// Speckle size and contrast in a window.
///
/// The mean-subtracted window is zero-padded to a power of two of at least twice its size so that the
/// FFT autocorrelation is linear, each lag is divided by its overlap count, and the result is normalized
/// to 1 at zero lag. The size along each axis is the 1/e half-width of that autocovariance.
inline SpeckleReport speckle_stats(const IntensityImage& image, const SpeckleWindow& window) {
  const std::size_t n = image.grid.n();
  const std::size_t h = window.height;
  const std::size_t w = window.width;
  if (h < 4 || w < 4 || window.row + h > n || window.col + w > n) {
    throw ConfigError("speckle window must be at least 4x4 and lie inside the image");
  }
  double mean = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) mean += image.at(window.row + r, window.col + c);
  }
  mean /= static_cast<double>(h * w);
  if (!(mean > 0.0)) throw DataError("speckle window has no light");

  std::size_t p = 1;
  while (p < 2 * std::max(h, w)) p *= 2;
  fft::Buffer buf(p * p);
  buf.zero();
  double var = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double d = image.at(window.row + r, window.col + c) - mean;
      buf[r * p + c] = {d, 0.0};
      var += d * d;
    }
  }
  var /= static_cast<double>(h * w);
  if (!(var > 1e-24 * mean * mean)) throw DataError("speckle size undefined for a constant window");

  fft::transform_2d(buf, p, p, fft::Direction::forward);
  for (std::size_t i = 0; i < p * p; ++i) buf[i] = {std::norm(buf[i]), 0.0};
  fft::transform_2d(buf, p, p, fft::Direction::inverse);

  const double zero_lag = buf[0].real() / static_cast<double>(h * w);
  std::vector<double> cx(w / 2 + 1);
  std::vector<double> cy(h / 2 + 1);
  for (std::size_t lag = 0; lag < cx.size(); ++lag) {
    cx[lag] = buf[lag].real() / static_cast<double>((w - lag) * h) / zero_lag;
  }
  for (std::size_t lag = 0; lag < cy.size(); ++lag) {
    cy[lag] = buf[lag * p].real() / static_cast<double>((h - lag) * w) / zero_lag;
  }

  SpeckleReport report;
  report.window = window;
  report.size_x = detail::one_over_e_width(cx) * image.grid.pitch();
  report.size_y = detail::one_over_e_width(cy) * image.grid.pitch();
  report.size = 0.5 * (report.size_x + report.size_y);
  report.contrast = std::sqrt(var) / mean;
  return report;
}

}  // namespace cohere
