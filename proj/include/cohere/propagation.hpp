#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/fft.hpp"
#include "cohere/field.hpp"
#include "cohere/grid.hpp"

namespace cohere {

struct PropagationOptions {
  int pad_factor = 2;
  bool band_limit = true;

  friend bool operator==(const PropagationOptions&, const PropagationOptions&) = default;
};

/// Angular-spectrum transfer function for one (grid, wavelength, z) geometry.
///
/// The transfer function lives on the zero-padded grid of n * pad_factor samples per side in
/// standard FFT order. Evanescent frequencies are zero; with band limiting on, every frequency with
/// |fx| or |fy| above 1 / (lambda * sqrt((2 df z)^2 + 1)) is zero too, df = 1 / (n_pad * pitch).
/// Immutable and shareable between threads.
class PropagationPlan {
 public:
  PropagationPlan(const GridSpec& grid, double wavelength, double z, PropagationOptions options = {})
      : grid_(grid), wavelength_(wavelength), z_(z), options_(options) {
    if (options.pad_factor != 1 && options.pad_factor != 2 && options.pad_factor != 4) {
      throw ConfigError("pad factor must be 1, 2 or 4");
    }
    if (!(wavelength > 0.0) || !std::isfinite(wavelength)) throw ConfigError("wavelength must be positive");
    if (!std::isfinite(z)) throw ConfigError("propagation distance must be finite");

    const std::size_t np = padded_n();
    const double df = 1.0 / (static_cast<double>(np) * grid.pitch());
    const double inv_lambda_sq = 1.0 / (wavelength * wavelength);
    cutoff_ = options.band_limit ? 1.0 / (wavelength * std::sqrt(std::pow(2.0 * df * z, 2) + 1.0))
                                 : std::numeric_limits<double>::infinity();

    // Columns that carry any propagating, in-band sample; transfer stored column-major over those only.
    column_index_.assign(np, -1);
    for (std::size_t kx = 0; kx < np; ++kx) {
      const double fx = fft::frequency(kx, np, grid.pitch());
      if (std::abs(fx) > cutoff_ || !(inv_lambda_sq - fx * fx > 0.0)) continue;
      column_index_[kx] = static_cast<long>(active_columns_.size());
      active_columns_.push_back(kx);
    }
    transfer_.assign(active_columns_.size() * np, Complex{});
    for (std::size_t c = 0; c < active_columns_.size(); ++c) {
      const double fx = fft::frequency(active_columns_[c], np, grid.pitch());
      for (std::size_t ky = 0; ky < np; ++ky) {
        const double fy = fft::frequency(ky, np, grid.pitch());
        if (std::abs(fy) > cutoff_) continue;
        const double arg = inv_lambda_sq - fx * fx - fy * fy;
        if (!(arg > 0.0)) continue;
        transfer_[c * np + ky] = std::polar(1.0, 2.0 * kPi * z * std::sqrt(arg));
      }
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  double wavelength() const noexcept { return wavelength_; }
  double distance() const noexcept { return z_; }
  int pad_factor() const noexcept { return options_.pad_factor; }
  bool band_limited() const noexcept { return options_.band_limit; }
  const PropagationOptions& options() const noexcept { return options_; }
  std::size_t padded_n() const noexcept { return grid_.n() * static_cast<std::size_t>(options_.pad_factor); }
  /// Per-axis band-limit frequency (infinite when band limiting is off).
  double cutoff_frequency() const noexcept { return cutoff_; }

  /// Transfer sample at FFT-ordered bin (ky, kx) of the padded grid.
  Complex transfer(std::size_t ky, std::size_t kx) const {
    const long c = column_index_[kx];
    return c < 0 ? Complex{} : transfer_[static_cast<std::size_t>(c) * padded_n() + ky];
  }
  /// kx bins that can carry a non-zero transfer sample.
  std::span<const std::size_t> active_columns() const noexcept { return active_columns_; }
  /// Transfer samples of active column c (index into active_columns()), over all ky bins.
  std::span<const Complex> active_column(std::size_t c) const noexcept {
    return {transfer_.data() + c * padded_n(), padded_n()};
  }

 private:
  GridSpec grid_;
  double wavelength_;
  double z_;
  PropagationOptions options_;
  double cutoff_ = 0.0;
  std::vector<Complex> transfer_;
  std::vector<std::size_t> active_columns_;
  std::vector<long> column_index_;
};

inline PropagationPlan make_plan(const GridSpec& grid, double wavelength, double z, int pad_factor = 2,
                                 bool band_limit = true) {
  return PropagationPlan(grid, wavelength, z, PropagationOptions{pad_factor, band_limit});
}

namespace detail {

struct PropagationWorkspace {
  fft::Buffer rows;
  fft::Buffer columns;
  // Row-major spectrum for the inverse row pass. Columns outside spectrum_columns stay zero between calls.
  fft::Buffer spectrum;
  std::vector<std::size_t> spectrum_columns;
  std::size_t spectrum_rows = 0;
};

inline constexpr std::size_t kTile = 32;

inline void zero(Complex* p, std::size_t count) { std::memset(static_cast<void*>(p), 0, count * sizeof(Complex)); }

inline PropagationWorkspace& thread_workspace() {
  thread_local PropagationWorkspace workspace;
  return workspace;
}

}  // namespace detail

/// Zero-pad, transform, multiply by the transfer function, inverse transform, crop.
///
/// Only frequency columns with a non-zero transfer are carried through the column passes, so heavily
/// band-limited geometries skip most of the 2D transform. The result equals the plain padded FFT route.
/// The rvalue overload reuses the input storage for the result.
inline ComplexField propagate(ComplexField&& field, const PropagationPlan& plan) {
  if (!(field.grid() == plan.grid())) throw ContractError("field grid does not match propagation plan");
  if (field.wavelength() != plan.wavelength()) throw ContractError("field wavelength does not match propagation plan");
  const GridSpec grid = field.grid();
  const double wavelength = field.wavelength();

  const std::size_t n = plan.grid().n();
  const std::size_t np = plan.padded_n();
  const std::size_t offset = (np - n) / 2;
  const auto columns = plan.active_columns();
  const std::size_t nc = columns.size();
  std::vector<Complex> buffer = std::move(field).release_samples();
  const std::span<const Complex> in(buffer);
  auto& ws = detail::thread_workspace();

  // All-zero input rows transform to zero; only the span of non-zero rows is processed.
  auto row_is_zero = [&](std::size_t r) {
    return std::all_of(in.begin() + static_cast<long>(r * n), in.begin() + static_cast<long>((r + 1) * n),
                       [](const Complex& c) { return c == Complex{}; });
  };
  std::size_t r0 = 0;
  std::size_t r1 = n;
  while (r0 < n && row_is_zero(r0)) ++r0;
  while (r1 > r0 && row_is_zero(r1 - 1)) --r1;
  if (nc == 0 || r0 == r1) {
    std::fill(buffer.begin(), buffer.end(), Complex{});
    return ComplexField(grid, wavelength, std::move(buffer));
  }

  ws.rows.resize(n * np);
  for (std::size_t r = r0; r < r1; ++r) {
    Complex* row = ws.rows.data() + r * np;
    detail::zero(row, offset);
    std::copy_n(in.data() + r * n, n, row + offset);
    detail::zero(row + offset + n, np - offset - n);
  }
  fft::transform_batch(ws.rows.data() + r0 * np, np, r1 - r0, fft::Direction::forward);

  // Active columns, transposed so each padded column is contiguous.
  ws.columns.resize(nc * np);
  for (std::size_t c = 0; c < nc; ++c) {
    Complex* col = ws.columns.data() + c * np;
    detail::zero(col, offset + r0);
    detail::zero(col + offset + r1, np - offset - r1);
  }
  for (std::size_t rb = r0; rb < r1; rb += detail::kTile) {
    const std::size_t re = std::min(rb + detail::kTile, r1);
    for (std::size_t c = 0; c < nc; ++c) {
      Complex* col = ws.columns.data() + c * np + offset;
      const Complex* src = ws.rows.data() + columns[c];
      for (std::size_t r = rb; r < re; ++r) col[r] = src[r * np];
    }
  }
  fft::transform_batch(ws.columns.data(), np, nc, fft::Direction::forward);
  const double norm = 1.0 / (static_cast<double>(np) * static_cast<double>(np));
  for (std::size_t c = 0; c < nc; ++c) {
    Complex* col = ws.columns.data() + c * np;
    const Complex* h = plan.active_column(c).data();
    for (std::size_t ky = 0; ky < np; ++ky) col[ky] *= h[ky] * norm;
  }
  fft::transform_batch(ws.columns.data(), np, nc, fft::Direction::inverse);

  // Back to rows; only rows inside the crop window are needed.
  if (ws.spectrum_rows != n || ws.spectrum.size() != n * np ||
      !std::equal(columns.begin(), columns.end(), ws.spectrum_columns.begin(), ws.spectrum_columns.end())) {
    ws.spectrum.resize(n * np);
    ws.spectrum.zero();
    ws.spectrum_columns.assign(columns.begin(), columns.end());
    ws.spectrum_rows = n;
  }
  for (std::size_t rb = 0; rb < n; rb += detail::kTile) {
    const std::size_t re = std::min(rb + detail::kTile, n);
    for (std::size_t c = 0; c < nc; ++c) {
      const Complex* col = ws.columns.data() + c * np + offset;
      Complex* dst = ws.spectrum.data() + columns[c];
      for (std::size_t r = rb; r < re; ++r) dst[r * np] = col[r];
    }
  }
  fft::transform_batch(ws.spectrum.data(), ws.rows.data(), np, n, fft::Direction::inverse);

  for (std::size_t r = 0; r < n; ++r) std::copy_n(ws.rows.data() + r * np + offset, n, buffer.data() + r * n);
  return ComplexField(grid, wavelength, std::move(buffer));
}

inline ComplexField propagate(const ComplexField& field, const PropagationPlan& plan) {
  return propagate(ComplexField(field), plan);
}

inline ComplexField propagate(const ComplexField& field, double z, PropagationOptions options = {}) {
  return propagate(field, PropagationPlan(field.grid(), field.wavelength(), z, options));
}

/// propagate(+z) followed by propagate(-z). Test utility for the self-inverse property.
inline ComplexField propagate_round_trip(const ComplexField& field, double z, PropagationOptions options = {}) {
  return propagate(propagate(field, z, options), -z, options);
}

}  // namespace cohere
