#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/records.hpp"

namespace cohere {

inline constexpr std::size_t kGrayLevels = 256;

/// Two-dimensional gray-level entropy of an 8-bit image.
struct EntropyReport {
  double entropy = 0.0;  // bits, in [0, 16]
  std::uint64_t pixels = 0;
  /// f(i, j) at index i * 256 + j: i the pixel gray value, j its rounded 8-neighborhood mean.
  std::vector<std::uint64_t> histogram;
  std::string neighborhood = "8-connected 3x3 without center, edge replicated, mean rounded half up";

  std::uint64_t count(std::uint8_t i, std::uint8_t j) const { return histogram[std::size_t{i} * kGrayLevels + j]; }
};

/// -sum P log2 P over a joint histogram with P = f / total; empty cells contribute 0.
inline double entropy_from_histogram(std::span<const std::uint64_t> histogram, std::uint64_t total) {
  if (total == 0) throw DataError("entropy of an empty histogram");
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (std::uint64_t f : histogram) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / n;
    h -= p * std::log2(p);
  }
  return h;
}

inline EntropyReport entropy_2d(const Gray8Image& image) {
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  if (w == 0 || h == 0 || image.pixels.size() != w * h) throw DataError("entropy of an empty or malformed image");
  EntropyReport report;
  report.pixels = static_cast<std::uint64_t>(w) * h;
  report.histogram.assign(kGrayLevels * kGrayLevels, 0);

  auto clamp_index = [](std::size_t i, int d, std::size_t size) {
    if (d < 0 && i == 0) return std::size_t{0};
    if (d > 0 && i + 1 == size) return size - 1;
    return static_cast<std::size_t>(static_cast<long>(i) + d);
  };
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      unsigned sum = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          sum += image.at(clamp_index(r, dr, h), clamp_index(c, dc, w));
        }
      }
      const unsigned j = (sum + 4) / 8;
      ++report.histogram[std::size_t{image.at(r, c)} * kGrayLevels + j];
    }
  }
  report.entropy = entropy_from_histogram(report.histogram, report.pixels);
  return report;
}

/// Entropy of a raw intensity image quantized with an experiment-wide exposure scale.
inline EntropyReport entropy_2d(const IntensityImage& image, double exposure_scale) {
  return entropy_2d(quantize(image, exposure_scale));
}

inline double mean_entropy(std::span<const double> entropies) {
  if (entropies.empty()) throw DataError("no images to average entropy over");
  double sum = 0.0;
  for (double h : entropies) sum += h;
  return sum / static_cast<double>(entropies.size());
}

}  // namespace cohere
