#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "cohere/error.hpp"

namespace cohere {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultWavelength = 635e-9;

/// Square sampling grid with its origin at the geometric center:
/// x(i) = (i - n/2) * pitch.
class GridSpec {
 public:
  GridSpec(std::size_t n, double pitch) : n_(n), pitch_(pitch) {
    if (n == 0 || (n & (n - 1)) != 0) {
      throw ConfigError("grid size must be a positive power of two, got " + std::to_string(n));
    }
    if (!(pitch > 0.0) || !std::isfinite(pitch)) {
      throw ConfigError("grid pitch must be positive and finite");
    }
  }

  static GridSpec from_extent(std::size_t n, double extent) {
    if (!(extent > 0.0)) throw ConfigError("grid extent must be positive");
    return GridSpec(n, extent / static_cast<double>(n));
  }

  /// The 512 x 512, 6 mm imaging grid.
  static GridSpec imaging() { return from_extent(512, 6e-3); }
  /// The 2048 x 2048, 12 mm grid used for double-pinhole metrology.
  static GridSpec metrology() { return from_extent(2048, 12e-3); }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return n_ * n_; }
  double pitch() const noexcept { return pitch_; }
  double extent() const noexcept { return static_cast<double>(n_) * pitch_; }
  double coordinate(std::size_t i) const noexcept {
    return (static_cast<double>(i) - static_cast<double>(n_ / 2)) * pitch_;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  std::size_t n_;
  double pitch_;
};

}  // namespace cohere
