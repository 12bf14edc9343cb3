#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"
#include "cohere/grid.hpp"
#include "cohere/phase_screen.hpp"
#include "cohere/propagation.hpp"
#include "cohere/random_field.hpp"
#include "cohere/seed.hpp"

namespace cohere {

inline constexpr std::size_t kObjectSide = 28;

/// Dataset image shown on an amplitude SLM. Transmittance t = 1 - g / 255 inside a centered square of
/// side `extent` (nearest-neighbor upsampling); the SLM blocks light outside that square.
struct SlmObject {
  std::vector<std::uint8_t> image;  // 28 x 28, row-major
  std::optional<double> extent;     // defaults to the full grid extent

  void validate() const {
    if (image.size() != kObjectSide * kObjectSide) {
      throw DataError("SLM object must be a 28x28 8-bit image, got " + std::to_string(image.size()) + " pixels");
    }
    if (extent && !(*extent > 0.0)) throw ConfigError("SLM object extent must be positive");
  }
};

/// Thin ground-glass phase screen with Gaussian-correlated phase.
struct DiffuserSpec {
  std::optional<double> correlation_length;  // defaults to 2 * pitch
  double phase_rms = 3.0 * kPi;
  std::uint64_t seed = 0;
  bool is_static = true;  // one frozen screen for every realization

  double resolved_correlation_length(const GridSpec& grid) const {
    return correlation_length.value_or(2.0 * grid.pitch());
  }
};

enum class Axis { horizontal, vertical };

struct PinholeMaskSpec {
  double diameter = 1e-3;
  double spacing = 5e-3;
  Axis orientation = Axis::horizontal;

  void validate(const GridSpec& grid) const {
    if (!(diameter >= 4.0 * grid.pitch())) throw ConfigError("pinhole diameter must be at least 4 pixels");
    if (!(spacing > diameter)) throw ConfigError("pinhole spacing must exceed the hole diameter");
    if (!(0.5 * (spacing + diameter) < 0.5 * grid.extent())) {
      throw ConfigError("pinholes are clipped by the grid boundary");
    }
  }
};

namespace stage {
struct Object {
  SlmObject object;
};
struct FreeSpace {
  double z;
};
struct Diffuser {
  DiffuserSpec spec;
};
struct Pinholes {
  PinholeMaskSpec spec;
};
struct Detector {};
}  // namespace stage

using Stage = std::variant<stage::Object, stage::FreeSpace, stage::Diffuser, stage::Pinholes, stage::Detector>;

/// Ordered optical chain from the source plane to the detector.
struct SceneConfig {
  GridSpec grid = GridSpec::imaging();
  double wavelength = kDefaultWavelength;
  std::vector<Stage> stages{stage::Detector{}};
  PropagationOptions propagation{};

  void validate() const {
    if (stages.empty() || !std::holds_alternative<stage::Detector>(stages.back())) {
      throw ConfigError("scene must end with a detector");
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string where = "stage " + std::to_string(i) + ": ";
      std::visit(
          [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, stage::Detector>) {
              if (i + 1 != stages.size()) throw ConfigError(where + "detector must be the last stage");
            } else if constexpr (std::is_same_v<T, stage::FreeSpace>) {
              if (!(s.z > 0.0) || !std::isfinite(s.z)) throw ConfigError(where + "free-space distance must be > 0");
            } else if constexpr (std::is_same_v<T, stage::Pinholes>) {
              try {
                s.spec.validate(grid);
              } catch (const ConfigError& e) {
                throw ConfigError(where + e.what());
              }
            } else if constexpr (std::is_same_v<T, stage::Diffuser>) {
              if (!(s.spec.resolved_correlation_length(grid) >= grid.pitch())) {
                throw ConfigError(where + "diffuser correlation length must be at least one pixel");
              }
              if (!(s.spec.phase_rms >= 0.0)) throw ConfigError(where + "diffuser phase RMS must be >= 0");
            } else if constexpr (std::is_same_v<T, stage::Object>) {
              s.object.validate();
            }
          },
          stages[i]);
    }
  }

  /// Sum of free-space distances.
  double total_path() const {
    double z = 0.0;
    for (const auto& s : stages) {
      if (const auto* fs = std::get_if<stage::FreeSpace>(&s)) z += fs->z;
    }
    return z;
  }
};

/// Real transmittance map of an SLM object on `grid`.
inline std::vector<double> slm_transmittance(const GridSpec& grid, const SlmObject& object) {
  object.validate();
  const std::size_t n = grid.n();
  const double extent = object.extent.value_or(grid.extent());
  std::vector<long> source(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (grid.coordinate(i) + 0.5 * extent) / extent;
    source[i] = (u >= 0.0 && u < 1.0) ? static_cast<long>(std::floor(u * static_cast<double>(kObjectSide))) : -1;
    if (source[i] >= static_cast<long>(kObjectSide)) source[i] = -1;
  }
  std::vector<double> t(grid.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (source[r] < 0) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (source[c] < 0) continue;
      const auto g = object.image[static_cast<std::size_t>(source[r]) * kObjectSide + static_cast<std::size_t>(source[c])];
      t[r * n + c] = 1.0 - static_cast<double>(g) / 255.0;
    }
  }
  return t;
}

/// Binary double-pinhole mask on `grid`.
inline std::vector<double> pinhole_mask(const GridSpec& grid, const PinholeMaskSpec& spec) {
  spec.validate(grid);
  const std::size_t n = grid.n();
  const double r2 = 0.25 * spec.diameter * spec.diameter;
  const double h = 0.5 * spec.spacing;
  std::vector<double> mask(grid.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double along = grid.coordinate(c);
      double across = grid.coordinate(r);
      if (spec.orientation == Axis::vertical) std::swap(along, across);
      const double a = (along - h) * (along - h) + across * across;
      const double b = (along + h) * (along + h) + across * across;
      if (a <= r2 || b <= r2) mask[r * n + c] = 1.0;
    }
  }
  return mask;
}

inline std::vector<double> diffuser_phase(const GridSpec& grid, const DiffuserSpec& spec, std::uint64_t realization = 0) {
  const std::uint64_t seed = spec.is_static ? derive_seed(spec.seed, 0) : derive_seed(spec.seed, realization + 1);
  return gaussian_random_field(grid, spec.resolved_correlation_length(grid), spec.phase_rms, seed);
}

namespace detail {

template <class T>
ComplexField multiply(ComplexField field, std::span<const T> factor) {
  if (factor.size() != field.samples().size()) throw ContractError("element map does not match field grid");
  const GridSpec grid = field.grid();
  const double wavelength = field.wavelength();
  std::vector<Complex> out = std::move(field).release_samples();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
  return ComplexField(grid, wavelength, std::move(out));
}

}  // namespace detail

inline ComplexField apply_slm(const ComplexField& field, const SlmObject& object) {
  return detail::multiply(field, std::span<const double>(slm_transmittance(field.grid(), object)));
}

inline ComplexField apply_diffuser(const ComplexField& field, const DiffuserSpec& spec) {
  const auto phase = diffuser_phase(field.grid(), spec);
  return apply_phase(field, field.grid(), phase);
}

inline ComplexField apply_pinholes(const ComplexField& field, const PinholeMaskSpec& spec) {
  return detail::multiply(field, std::span<const double>(pinhole_mask(field.grid(), spec)));
}

/// A validated scene with element maps and propagation plans precomputed, so that many
/// realizations can run through it. Immutable; safe to share across threads.
class CompiledScene {
 public:
  explicit CompiledScene(const SceneConfig& config) : config_(config) {
    config.validate();
    const GridSpec& grid = config.grid;
    for (const auto& s : config.stages) {
      std::visit(
          [&](const auto& st) {
            using T = std::decay_t<decltype(st)>;
            Step step;
            if constexpr (std::is_same_v<T, stage::Object>) {
              step.kind = Step::Kind::multiply;
              step.factor = slm_transmittance(grid, st.object);
            } else if constexpr (std::is_same_v<T, stage::Pinholes>) {
              step.kind = Step::Kind::multiply;
              step.factor = pinhole_mask(grid, st.spec);
            } else if constexpr (std::is_same_v<T, stage::Diffuser>) {
              step.kind = Step::Kind::phase;
              step.diffuser = st.spec;
              if (st.spec.is_static) {
                const auto phase = diffuser_phase(grid, st.spec);
                step.transmittance.resize(phase.size());
                for (std::size_t i = 0; i < phase.size(); ++i) {
                  step.transmittance[i] = Complex(std::cos(phase[i]), std::sin(phase[i]));
                }
              }
            } else if constexpr (std::is_same_v<T, stage::FreeSpace>) {
              step.kind = Step::Kind::propagate;
              step.plan = std::make_shared<const PropagationPlan>(grid, config.wavelength, st.z, config.propagation);
            } else {
              step.kind = Step::Kind::detector;
            }
            steps_.push_back(std::move(step));
          },
          s);
    }
  }

  const SceneConfig& config() const noexcept { return config_; }

  /// Copy with every object stage showing `object`; propagation plans and diffuser screens are shared.
  CompiledScene with_object(const SlmObject& object) const {
    CompiledScene out(*this);
    for (std::size_t i = 0; i < config_.stages.size(); ++i) {
      if (auto* o = std::get_if<stage::Object>(&out.config_.stages[i])) {
        SlmObject replaced = object;
        if (!replaced.extent) replaced.extent = o->object.extent;
        o->object = replaced;
        out.steps_[i].factor = slm_transmittance(config_.grid, replaced);
      }
    }
    return out;
  }

  /// Field at the detector. `realization` only matters for non-static diffusers.
  ComplexField run(ComplexField field, std::uint64_t realization = 0) const {
    if (!(field.grid() == config_.grid) || field.wavelength() != config_.wavelength) {
      throw ContractError("source field does not match the scene grid/wavelength");
    }
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const Step& step = steps_[i];
      try {
        switch (step.kind) {
          case Step::Kind::multiply:
            field = detail::multiply(std::move(field), std::span<const double>(step.factor));
            break;
          case Step::Kind::phase:
            if (step.diffuser.is_static) {
              field = detail::multiply(std::move(field), std::span<const Complex>(step.transmittance));
            } else {
              field = apply_phase(std::move(field), config_.grid, diffuser_phase(config_.grid, step.diffuser, realization));
            }
            break;
          case Step::Kind::propagate:
            field = propagate(std::move(field), *step.plan);
            break;
          case Step::Kind::detector:
            return field;
        }
      } catch (const ContractError& e) {
        throw ContractError("stage " + std::to_string(i) + ": " + e.what());
      }
    }
    return field;
  }

 private:
  struct Step {
    enum class Kind { multiply, phase, propagate, detector } kind = Kind::detector;
    std::vector<double> factor;
    std::vector<Complex> transmittance;
    DiffuserSpec diffuser;
    std::shared_ptr<const PropagationPlan> plan;
  };

  SceneConfig config_;
  std::vector<Step> steps_;
};

/// Folds the stages left to right and returns the detector-plane field.
inline ComplexField run_scene(const ComplexField& source, const SceneConfig& scene) {
  return CompiledScene(scene).run(source);
}

}  // namespace cohere
