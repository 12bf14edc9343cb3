#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"
#include "cohere/grid.hpp"
#include "cohere/random_field.hpp"
#include "cohere/seed.hpp"

namespace cohere {

inline constexpr double kDefaultSigmaPhi = 2.0 * kPi;

/// Dynamic random phase screen parameters.
///
/// The screen phase has RMS sigma_phi and Gaussian correlation length sigma_phi * l_c, so the
/// transmitted field exp(i phi) has autocorrelation exp(-sigma_phi^2 (1 - rho)) ~ exp(-dr^2 / l_c^2).
/// sigma_phi = 0 is the degenerate (fully coherent) screen.
struct PhaseScreenSpec {
  GridSpec grid;
  double coherence_length;
  double sigma_phi = kDefaultSigmaPhi;
  std::uint64_t seed = 0;

  double phase_correlation_length() const noexcept { return sigma_phi * coherence_length; }

  void validate() const {
    if (!(coherence_length > 0.0) || !std::isfinite(coherence_length)) {
      throw ConfigError("coherence length must be positive");
    }
    if (sigma_phi != 0.0 && !(sigma_phi >= kDefaultSigmaPhi)) {
      throw ConfigError("screen RMS phase must be 0 (coherent) or at least 2*pi");
    }
  }
};

struct PhaseScreen {
  GridSpec grid;
  std::vector<double> phase;
  /// phase correlation length below two pixels
  bool under_resolved = false;
  /// phase correlation length above half the grid extent: the screen is nearly flat
  bool near_coherent = false;
};

/// Realization k of the screen family described by spec. Pure in (spec, k).
inline PhaseScreen sample_phase_screen(const PhaseScreenSpec& spec, std::uint64_t realization) {
  spec.validate();
  const double ell = spec.phase_correlation_length();
  PhaseScreen screen{spec.grid, {}, false, false};
  if (spec.sigma_phi == 0.0) {
    screen.phase.assign(spec.grid.size(), 0.0);
    return screen;
  }
  screen.under_resolved = ell < 2.0 * spec.grid.pitch();
  screen.near_coherent = ell > 0.5 * spec.grid.extent();
  screen.phase = gaussian_random_field(spec.grid, ell, spec.sigma_phi, derive_seed(spec.seed, realization));
  return screen;
}

/// Multiplies the field by exp(i phi) pointwise.
inline ComplexField apply_phase(ComplexField field, const GridSpec& grid, std::span<const double> phase) {
  if (!(field.grid() == grid) || phase.size() != grid.size()) {
    throw ContractError("phase map grid does not match field grid");
  }
  const double wavelength = field.wavelength();
  std::vector<Complex> out = std::move(field).release_samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= Complex(std::cos(phase[i]), std::sin(phase[i]));
  return ComplexField(grid, wavelength, std::move(out));
}

inline ComplexField apply_screen(ComplexField field, const PhaseScreen& screen) {
  return apply_phase(std::move(field), screen.grid, screen.phase);
}

}  // namespace cohere
