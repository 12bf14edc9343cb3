#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/grid.hpp"

namespace cohere {

using Complex = std::complex<double>;

/// Sampled monochromatic scalar field. Row-major, x fastest, origin at the grid center.
/// Immutable once constructed; operations build new fields.
class ComplexField {
 public:
  ComplexField(GridSpec grid, double wavelength, std::vector<Complex> samples)
      : grid_(grid), wavelength_(wavelength), samples_(std::move(samples)) {
    if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
      throw ConfigError("wavelength must be positive and finite");
    }
    if (samples_.size() != grid_.size()) {
      throw ContractError("sample count does not match grid");
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  double wavelength() const noexcept { return wavelength_; }
  std::span<const Complex> samples() const noexcept { return samples_; }
  const Complex& at(std::size_t row, std::size_t col) const { return samples_[row * grid_.n() + col]; }

  bool all_finite() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(),
                       [](const Complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
  }

  /// Moves the sample storage out, leaving this field empty. For building derived fields cheaply.
  std::vector<Complex> release_samples() && { return std::move(samples_); }

 private:
  GridSpec grid_;
  double wavelength_;
  std::vector<Complex> samples_;
};

struct ImageMetadata {
  std::optional<double> coherence_length;
  std::optional<double> depth;
  std::optional<std::int64_t> object_id;
  std::optional<std::uint64_t> seed;
  std::uint64_t realizations = 1;
  bool all_zero = false;
  bool converged = true;
  /// Relative L2 change of the mean image between M/2 and M realizations (negative if undefined).
  double convergence_change = -1.0;
  bool screen_under_resolved = false;
  bool screen_near_coherent = false;
};

/// Detector intensity. Values are stored unscaled; exposure_scale only maps them to 8-bit previews.
struct IntensityImage {
  GridSpec grid;
  std::vector<double> values;
  double exposure_scale = 1.0;
  ImageMetadata metadata;

  double at(std::size_t row, std::size_t col) const { return values[row * grid.n() + col]; }
};

inline ComplexField new_plane_wave(const GridSpec& grid, double wavelength, double amplitude) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ConfigError("plane wave amplitude must be finite and non-negative");
  }
  return ComplexField(grid, wavelength, std::vector<Complex>(grid.size(), Complex(amplitude, 0.0)));
}

/// Sum |u|^2 * pitch^2.
inline double total_power(const ComplexField& field) {
  double sum = 0.0;
  for (const Complex& c : field.samples()) sum += std::norm(c);
  return sum * field.grid().pitch() * field.grid().pitch();
}

inline double preview_exposure(std::span<const double> values, bool& all_zero) {
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  all_zero = !(peak > 0.0);
  return all_zero ? 1.0 : 255.0 / peak;
}

inline IntensityImage to_intensity(const ComplexField& field) {
  std::vector<double> values(field.samples().size());
  std::transform(field.samples().begin(), field.samples().end(), values.begin(),
                 [](const Complex& c) { return std::norm(c); });
  IntensityImage image{field.grid(), std::move(values), 1.0, {}};
  image.exposure_scale = preview_exposure(image.values, image.metadata.all_zero);
  return image;
}

}  // namespace cohere
