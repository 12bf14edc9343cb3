#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "cohere/fft.hpp"
#include "cohere/grid.hpp"

namespace cohere {

/// Where a Gaussian random field was synthesized relative to the target grid.
struct SynthesisGrid {
  std::size_t n = 0;          // samples per side
  std::size_t decimation = 1;  // synthesis pitch / target pitch (power of two)
};

/// Synthesis grid for correlation length `ell` on `grid`: pitch is the coarsest power-of-two
/// multiple of the target pitch not exceeding ell / 8, and the periodic extent covers both the
/// target extent and 8 * ell, so wrap-around correlation is below exp(-64).
inline SynthesisGrid synthesis_grid_for(const GridSpec& grid, double ell) {
  SynthesisGrid s;
  while (grid.pitch() * static_cast<double>(s.decimation * 2) <= ell / 8.0) s.decimation *= 2;
  const double pitch = grid.pitch() * static_cast<double>(s.decimation);
  const double span = std::max(grid.extent(), 8.0 * ell);
  s.n = 1;
  while (static_cast<double>(s.n) * pitch < span * (1.0 - 1e-12)) s.n *= 2;
  return s;
}

namespace detail {

// Catmull-Rom weights for fractional offset t in [0, 1) over samples (-1, 0, 1, 2).
inline std::array<double, 4> cubic_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0), 0.5 * (-3.0 * t3 + 4.0 * t2 + t),
          0.5 * (t3 - t2)};
}

}  // namespace detail

/// Zero-mean Gaussian random field on `grid` with autocorrelation coefficient exp(-r^2 / ell^2).
///
/// White Gaussian noise is filtered in the Fourier domain by the square root of the Gaussian power
/// spectrum, exp(-pi^2 ell^2 f^2 / 2), on a periodic synthesis grid (see synthesis_grid_for). The
/// synthesized field is shifted to zero sample mean and scaled to sample standard deviation `rms`
/// exactly, then resampled onto the target grid with periodic Catmull-Rom interpolation.
inline std::vector<double> gaussian_random_field(const GridSpec& grid, double ell, double rms, std::uint64_t seed) {
  const std::size_t n = grid.n();
  std::vector<double> out(grid.size(), 0.0);
  if (rms == 0.0) return out;

  const SynthesisGrid sg = synthesis_grid_for(grid, ell);
  const std::size_t ns = sg.n;
  const double ps = grid.pitch() * static_cast<double>(sg.decimation);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  fft::Buffer buf(ns * ns);
  for (std::size_t i = 0; i < ns * ns; ++i) buf[i] = {normal(rng), 0.0};

  fft::transform_2d(buf, ns, ns, fft::Direction::forward);
  std::vector<double> filter(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    const double f = fft::frequency(k, ns, ps);
    filter[k] = std::exp(-0.5 * kPi * kPi * ell * ell * f * f);
  }
  for (std::size_t ky = 0; ky < ns; ++ky) {
    for (std::size_t kx = 0; kx < ns; ++kx) buf[ky * ns + kx] *= filter[ky] * filter[kx];
  }
  fft::transform_2d(buf, ns, ns, fft::Direction::inverse);

  std::vector<double> coarse(ns * ns);
  double mean = 0.0;
  for (std::size_t i = 0; i < ns * ns; ++i) {
    coarse[i] = buf[i].real();
    mean += coarse[i];
  }
  mean /= static_cast<double>(ns * ns);
  double var = 0.0;
  for (double& v : coarse) {
    v -= mean;
    var += v * v;
  }
  var /= static_cast<double>(ns * ns);
  if (!(var > 0.0)) return out;
  const double scale = rms / std::sqrt(var);
  for (double& v : coarse) v *= scale;

  // Target index i sits at coarse coordinate (i - n/2) / decimation + ns/2.
  if (sg.decimation == 1 && ns == n) return coarse;
  const auto dec = static_cast<double>(sg.decimation);
  std::vector<std::size_t> base(n);
  std::vector<std::array<double, 4>> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = (static_cast<double>(i) - static_cast<double>(n / 2)) / dec + static_cast<double>(ns / 2);
    const double fl = std::floor(c);
    base[i] = static_cast<std::size_t>(static_cast<long long>(fl) + static_cast<long long>(ns)) % ns;
    weights[i] = detail::cubic_weights(c - fl);
  }
  // Tap d in [0, 4) reads coarse sample base + d - 1.
  auto wrap = [ns](std::size_t b, int d) { return (b + ns + static_cast<std::size_t>(d) - 1) % ns; };

  // Separable pass: along x for every coarse row, then along y.
  std::vector<double> rows(ns * n);
  for (std::size_t r = 0; r < ns; ++r) {
    const double* src = coarse.data() + r * ns;
    double* dst = rows.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int d = 0; d < 4; ++d) acc += weights[i][static_cast<std::size_t>(d)] * src[wrap(base[i], d)];
      dst[i] = acc;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double* dst = out.data() + j * n;
    for (int d = 0; d < 4; ++d) {
      const double w = weights[j][static_cast<std::size_t>(d)];
      const double* src = rows.data() + wrap(base[j], d) * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

}  // namespace cohere
