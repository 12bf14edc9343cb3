#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field.hpp"
#include "cohere/parallel.hpp"
#include "cohere/phase_screen.hpp"
#include "cohere/scene.hpp"

namespace cohere {

/// Decoherence filter run: M screen realizations, each propagated through the scene and averaged.
/// Realization k uses screen seed derive_seed(screen.seed, k); screen.seed is the ensemble base seed.
struct EnsembleSpec {
  PhaseScreenSpec screen;
  std::uint64_t realizations = 100;

  std::uint64_t base_seed() const noexcept { return screen.seed; }
};

/// Relative change of the mean image between M/2 and M realizations below this marks convergence.
inline constexpr double kConvergenceThreshold = 0.02;

namespace detail {

/// Pairwise summation over a stream of equally sized vectors pushed in a fixed order.
/// The tree shape depends only on the number of pushed items.
class PairwiseAccumulator {
 public:
  void push(std::vector<double> v) {
    std::size_t level = 0;
    while (!stack_.empty() && stack_.back().first == level) {
      add_into(v, stack_.back().second);
      stack_.pop_back();
      ++level;
    }
    stack_.emplace_back(level, std::move(v));
  }

  /// Folds the remaining partial sums from the most recent one backwards.
  std::vector<double> total() && {
    if (stack_.empty()) return {};
    std::vector<double> acc = std::move(stack_.back().second);
    for (auto it = stack_.rbegin() + 1; it != stack_.rend(); ++it) add_into(acc, it->second);
    return acc;
  }

 private:
  static void add_into(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] + dst[i];
  }
  std::vector<std::pair<std::size_t, std::vector<double>>> stack_;
};

// Realizations evaluated concurrently per batch. Fixed so that results never depend on worker count.
inline constexpr std::size_t kRealizationBatch = 8;

template <class Realize>
std::vector<double> ensemble_sum(std::uint64_t first, std::uint64_t last, int workers, Realize&& realize) {
  PairwiseAccumulator acc;
  for (std::uint64_t start = first; start < last; start += kRealizationBatch) {
    const std::size_t count = static_cast<std::size_t>(std::min<std::uint64_t>(kRealizationBatch, last - start));
    std::vector<std::vector<double>> batch(count);
    parallel_for(count, workers, [&](std::size_t i) { batch[i] = realize(start + i); });
    for (auto& v : batch) acc.push(std::move(v));
  }
  return std::move(acc).total();
}

inline double relative_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace detail

/// Single coherent propagation through the scene, without any screen (the l_c -> infinity limit).
inline IntensityImage coherent_limit_intensity(const ComplexField& source, const CompiledScene& scene) {
  return to_intensity(scene.run(source));
}

inline IntensityImage coherent_limit_intensity(const ComplexField& source, const SceneConfig& scene) {
  return coherent_limit_intensity(source, CompiledScene(scene));
}

/// (1/M) sum_k |scene(source * exp(i phi_k))|^2.
///
/// Realizations run in fixed batches on up to `workers` threads and are combined by pairwise summation in
/// realization-index order, so the result is bit-identical for any worker count. A degenerate screen
/// (sigma_phi = 0) collapses to the coherent image.
inline IntensityImage ensemble_intensity(const ComplexField& source, const EnsembleSpec& ensemble,
                                         const CompiledScene& scene, int workers = 1) {
  ensemble.screen.validate();
  if (ensemble.realizations < 1) throw ConfigError("ensemble needs at least one realization");
  if (!(ensemble.screen.grid == source.grid())) throw ContractError("screen grid does not match source grid");

  const std::uint64_t m = ensemble.realizations;
  IntensityImage image{source.grid(), {}, 1.0, {}};
  if (ensemble.screen.sigma_phi == 0.0) {
    image = coherent_limit_intensity(source, scene);
  } else {
    auto realize = [&](std::uint64_t k) {
      PhaseScreen screen = sample_phase_screen(ensemble.screen, k);
      std::vector<Complex> screened;
      screened.reserve(source.samples().size());
      for (std::size_t i = 0; i < source.samples().size(); ++i) {
        screened.push_back(source.samples()[i] * Complex(std::cos(screen.phase[i]), std::sin(screen.phase[i])));
      }
      const ComplexField out = scene.run(ComplexField(source.grid(), source.wavelength(), std::move(screened)), k);
      std::vector<double> intensity = std::move(screen.phase);
      for (std::size_t i = 0; i < intensity.size(); ++i) {
        intensity[i] = std::norm(out.samples()[i]);
        if (!std::isfinite(intensity[i])) throw RealizationError(k);
      }
      return intensity;
    };
    const std::uint64_t half = m / 2;
    std::vector<double> first = detail::ensemble_sum(0, half, workers, realize);
    std::vector<double> second = detail::ensemble_sum(half, m, workers, realize);
    std::vector<double> mean(second.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean[i] = ((half > 0 ? first[i] : 0.0) + second[i]) / static_cast<double>(m);
    }
    if (half > 0) {
      for (double& v : first) v /= static_cast<double>(half);
      image.metadata.convergence_change = detail::relative_l2(first, mean);
      image.metadata.converged = image.metadata.convergence_change < kConvergenceThreshold;
    } else {
      image.metadata.converged = false;
    }
    image.values = std::move(mean);
    image.exposure_scale = preview_exposure(image.values, image.metadata.all_zero);
    const double ell = ensemble.screen.phase_correlation_length();
    image.metadata.screen_under_resolved = ell < 2.0 * source.grid().pitch();
    image.metadata.screen_near_coherent = ell > 0.5 * source.grid().extent();
  }
  image.metadata.coherence_length = ensemble.screen.coherence_length;
  image.metadata.realizations = m;
  image.metadata.seed = ensemble.base_seed();
  return image;
}

inline IntensityImage ensemble_intensity(const ComplexField& source, const EnsembleSpec& ensemble,
                                         const SceneConfig& scene, int workers = 1) {
  return ensemble_intensity(source, ensemble, CompiledScene(scene), workers);
}

}  // namespace cohere
