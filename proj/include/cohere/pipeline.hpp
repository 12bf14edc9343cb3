#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "cohere/csv.hpp"
#include "cohere/ensemble.hpp"
#include "cohere/entropy.hpp"
#include "cohere/experiment.hpp"
#include "cohere/idx.hpp"
#include "cohere/manifest.hpp"
#include "cohere/parallel.hpp"
#include "cohere/plot.hpp"
#include "cohere/records.hpp"
#include "cohere/speckle.hpp"
#include "cohere/stats.hpp"
#include "cohere/visibility.hpp"

namespace cohere {

struct RunOptions {
  int workers = 1;
  std::ostream* log = nullptr;
  bool resume = false;
  /// Stop (leaving an incomplete manifest) after this many new items. Used to exercise resume.
  std::optional<std::uint64_t> stop_after{};
};

namespace detail {

inline void log_line(const RunOptions& opt, const std::string& text) {
  if (opt.log) *opt.log << text << std::endl;
}

inline std::string lc_tag(double lc) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%gmm", lc * 1e3);
  return buf;
}

inline std::string item_name(std::uint64_t id, const char* ext) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%06llu.%s", static_cast<unsigned long long>(id), ext);
  return buf;
}

inline std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// calibrate

struct CalibrateResult {
  CsvTable table;
  std::vector<VisibilityReport> reports;
  std::vector<IntensityImage> images;
  std::vector<std::string> warnings;
};

/// Double-pinhole visibility for every coherence length of the sweep. Writes visibility.csv and one
/// fringe preview per l_c into cfg.output.
inline CalibrateResult cmd_calibrate(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.preset != Preset::pinhole) throw ConfigError("calibrate needs the pinhole preset");
  cfg.validate();
  CalibrateResult result;
  FringeWindow window = cfg.fringe_window;
  window.period = cfg.fringe_period();
  window.axis = cfg.pinholes.orientation;
  if (window.period < 2.0 * cfg.grid.pitch()) {
    result.warnings.push_back("fringe period " + format_number(window.period) + " m is below two pixels (" +
                              format_number(2.0 * cfg.grid.pitch()) + " m); fringes are not resolved");
  }
  const CompiledScene scene(build_scene(cfg));
  const ComplexField source = new_plane_wave(cfg.grid, cfg.wavelength, 1.0);
  std::filesystem::create_directories(cfg.output);
  result.table.header = {"coherence_length_m", "visibility"};
  for (double lc : cfg.coherence_lengths) {
    const EnsembleSpec ensemble{PhaseScreenSpec{cfg.grid, lc, cfg.sigma_phi, cfg.pinhole_seed()}, cfg.realizations};
    IntensityImage image = ensemble_intensity(source, ensemble, scene, opt.workers);
    const VisibilityReport v = fringe_visibility(image, window);
    detail::log_line(opt, "l_c " + format_number(lc) + " m: V = " + format_number(v.visibility));
    result.table.rows.push_back({lc, v.visibility});
    if (cfg.previews) write_pgm(cfg.output / ("fringes_" + detail::lc_tag(lc) + ".pgm"), quantize(image, image.exposure_scale));
    result.reports.push_back(v);
    result.images.push_back(std::move(image));
  }
  write_csv(cfg.output / "visibility.csv", result.table);
  for (const auto& w : result.warnings) detail::log_line(opt, "warning: " + w);
  return result;
}

// ---------------------------------------------------------------------------------------------
// generate

/// One planned dataset item.
struct PlannedItem {
  double coherence_length;
  std::optional<std::size_t> depth_index;
  std::size_t object;  // dataset index
};

/// Items in generation order: coherence length outermost, then depth, then object.
inline std::vector<PlannedItem> plan_items(const ExperimentConfig& cfg, const std::vector<std::size_t>& objects) {
  std::vector<PlannedItem> items;
  for (double lc : cfg.coherence_lengths) {
    if (is_depth_preset(cfg.preset)) {
      for (std::size_t d = 0; d < cfg.depths.size(); ++d) {
        for (std::size_t o : objects) items.push_back({lc, d, o});
      }
    } else {
      for (std::size_t o : objects) items.push_back({lc, std::nullopt, o});
    }
  }
  return items;
}

/// Compiled scene per scene variant (one per depth for depth presets).
inline std::vector<CompiledScene> compile_variants(const ExperimentConfig& cfg) {
  std::vector<CompiledScene> scenes;
  if (is_depth_preset(cfg.preset)) {
    for (double d : cfg.depths) scenes.emplace_back(build_scene(cfg, std::nullopt, d));
  } else {
    scenes.emplace_back(build_scene(cfg));
  }
  return scenes;
}

/// Experiment-wide preview exposure: 255 over the brightest pixel of the coherent-limit images of the
/// first calibration_count selected objects in every scene variant.
inline double calibrate_exposure(const ExperimentConfig& cfg, const IdxDataset& dataset,
                                 const std::vector<std::size_t>& objects, const std::vector<CompiledScene>& scenes,
                                 int workers) {
  const std::size_t count = std::min(cfg.calibration_count, objects.size());
  const ComplexField source = new_plane_wave(cfg.grid, cfg.wavelength, 1.0);
  std::vector<double> peaks(count * scenes.size(), 0.0);
  parallel_for(peaks.size(), workers, [&](std::size_t k) {
    const auto& scene = scenes[k / count];
    const IntensityImage img = coherent_limit_intensity(source, scene.with_object(dataset.object(objects[k % count])));
    peaks[k] = *std::max_element(img.values.begin(), img.values.end());
  });
  const double peak = *std::max_element(peaks.begin(), peaks.end());
  return peak > 0.0 ? 255.0 / peak : 1.0;
}

inline Json manifest_header(const ExperimentConfig& cfg, const IdxDataset& dataset, const std::vector<std::size_t>& objects,
                            double exposure_scale) {
  Json h;
  h["record"] = "header";
  h["format"] = kManifestFormat;
  h["version"] = kManifestVersion;
  h["experiment_id"] = experiment_id(cfg);
  h["preset"] = to_string(cfg.preset);
  h["label_kind"] = is_depth_preset(cfg.preset) ? "depth" : "digit";
  h["has_diffuser"] = scene_has_diffuser(build_scene(cfg, std::nullopt, is_depth_preset(cfg.preset)
                                                                             ? std::optional<double>(cfg.depths.front())
                                                                             : std::nullopt));
  h["scene_hash"] = scene_hash(cfg);
  h["grid"] = Json{{"n", cfg.grid.n()}, {"pitch", cfg.grid.pitch()}};
  h["wavelength"] = cfg.wavelength;
  h["realizations"] = cfg.realizations;
  h["sigma_phi"] = cfg.sigma_phi;
  h["exposure_scale"] = exposure_scale;
  h["coherence_lengths"] = cfg.coherence_lengths;
  if (is_depth_preset(cfg.preset)) h["depths"] = cfg.depths;
  const auto hist = dataset.class_histogram(objects);
  h["dataset"] = Json{{"name", cfg.dataset->name},
                      {"images", cfg.dataset->images.string()},
                      {"labels", cfg.dataset->labels.string()},
                      {"size", dataset.size()},
                      {"selection_seed", cfg.dataset->selection_seed},
                      {"objects", objects},
                      {"class_histogram", hist}};
  h["items"] = plan_items(cfg, objects).size();
  h["parameters"] = effective_parameters(cfg);
  return h;
}

struct GenerateResult {
  std::filesystem::path manifest;
  std::uint64_t items_total = 0;
  std::uint64_t items_written = 0;  // in this call
  bool complete = false;
};

/// Seconds for one ensemble realization of the first scene variant, measured on a blank object.
inline double time_one_realization(const ExperimentConfig& cfg) {
  const CompiledScene scene(build_scene(cfg, std::nullopt,
                                        is_depth_preset(cfg.preset) ? std::optional<double>(cfg.depths.back()) : std::nullopt));
  const ComplexField source = new_plane_wave(cfg.grid, cfg.wavelength, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  const EnsembleSpec one{PhaseScreenSpec{cfg.grid, cfg.coherence_lengths.front(), cfg.sigma_phi, cfg.seed}, 1};
  (void)ensemble_intensity(source, one, scene, 1);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Generates the labeled intensity dataset of an experiment into cfg.output.
///
/// Items run in plan order; each record is written atomically before its manifest line is appended,
/// so the manifest never references a partial file. On failure the footer records the resume cursor;
/// a resumed run checks the existing items and produces the same manifest an uninterrupted run would.
inline GenerateResult cmd_generate(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.preset == Preset::pinhole) throw ConfigError("the pinhole preset has no dataset; use calibrate");
  cfg.validate();
  const IdxDataset dataset = load_idx(cfg.dataset->images, cfg.dataset->labels);
  const auto objects = select_objects(dataset.size(), cfg.dataset->count, cfg.dataset->selection_seed);
  const auto plan = plan_items(cfg, objects);

  if (cfg.paper_scale) {
    const double per = time_one_realization(cfg);
    const double total = per * static_cast<double>(plan.size()) * static_cast<double>(cfg.realizations) /
                         static_cast<double>(std::max(1, opt.workers));
    detail::log_line(opt, "paper-scale run: " + std::to_string(plan.size()) + " images x " +
                              std::to_string(cfg.realizations) + " realizations, estimated " +
                              format_number(total / 3600.0) + " h on " + std::to_string(opt.workers) + " workers");
  }

  const auto out_dir = cfg.output;
  const auto manifest_path = out_dir / kManifestFile;
  std::filesystem::create_directories(out_dir / "records");
  if (cfg.previews) std::filesystem::create_directories(out_dir / "previews");

  const auto scenes = compile_variants(cfg);
  Manifest prefix;
  std::optional<Manifest> existing;
  if (std::filesystem::exists(manifest_path)) {
    if (!opt.resume) throw ConfigError(manifest_path.string() + " exists; pass --resume or choose a new output");
    existing = read_manifest(manifest_path);
  }
  double exposure = 0.0;
  if (existing) {
    exposure = existing->exposure_scale();
    Json expected = manifest_header(cfg, dataset, objects, exposure);
    if (expected != existing->header) throw ConfigError("existing manifest was produced by a different configuration");
    prefix.header = existing->header;
    for (const auto& it : existing->items) {
      const auto p = out_dir / it.file;
      const bool file_ok = std::filesystem::exists(p) && sha256_file(p) == it.sha256 &&
                           (!it.preview || (std::filesystem::exists(out_dir / *it.preview) &&
                                            sha256_file(out_dir / *it.preview) == *it.preview_sha256));
      if (!file_ok) break;
      prefix.items.push_back(it);
    }
    if (existing->complete && prefix.items.size() == plan.size()) {
      return {manifest_path, plan.size(), 0, true};
    }
  } else {
    exposure = calibrate_exposure(cfg, dataset, objects, scenes, opt.workers);
    prefix.header = manifest_header(cfg, dataset, objects, exposure);
  }

  ManifestWriter writer(manifest_path, prefix);
  const ComplexField source = new_plane_wave(cfg.grid, cfg.wavelength, 1.0);
  const bool depth_kind = is_depth_preset(cfg.preset);
  GenerateResult result{manifest_path, plan.size(), 0, false};
  std::uint64_t cursor = prefix.items.size();
  try {
    for (; cursor < plan.size(); ++cursor) {
      if (opt.stop_after && result.items_written >= *opt.stop_after) {
        writer.finish(false, cursor);
        return result;
      }
      const PlannedItem& p = plan[cursor];
      const CompiledScene& base = scenes[p.depth_index.value_or(0)];
      const std::uint64_t seed = cfg.object_seed(p.object);
      const EnsembleSpec ensemble{PhaseScreenSpec{cfg.grid, p.coherence_length, cfg.sigma_phi, seed}, cfg.realizations};
      IntensityImage image = ensemble_intensity(source, ensemble, base.with_object(dataset.object(p.object)), opt.workers);

      ManifestItem item;
      item.item_id = cursor;
      item.source_dataset = cfg.dataset->name;
      item.source_index = p.object;
      item.label = depth_kind ? static_cast<int>(*p.depth_index) : dataset.labels[p.object];
      item.coherence_length = p.coherence_length;
      if (depth_kind) item.depth = cfg.depths[*p.depth_index];
      item.base_seed = seed;
      item.file = "records/" + detail::item_name(cursor, "cint");
      const auto record = encode_cint(image);
      detail::write_file_atomic(out_dir / item.file, record);
      item.sha256 = sha256_hex(record);
      if (cfg.previews) {
        item.preview = "previews/" + detail::item_name(cursor, "pgm");
        const auto pgm = encode_pgm(quantize(image, exposure));
        detail::write_file_atomic(out_dir / *item.preview, pgm);
        item.preview_sha256 = sha256_hex(pgm);
      }
      item.exposure_scale = exposure;
      item.realizations = image.metadata.realizations;
      item.converged = image.metadata.converged;
      item.convergence_change = image.metadata.convergence_change;
      writer.append(item);
      ++result.items_written;
      detail::log_line(opt, "item " + std::to_string(cursor + 1) + "/" + std::to_string(plan.size()) +
                                " l_c " + format_number(p.coherence_length) + " object " + std::to_string(p.object));
    }
  } catch (...) {
    writer.finish(false, cursor);
    throw;
  }
  writer.finish(true, cursor);
  result.complete = true;
  const VerifyReport v = verify_manifest(manifest_path);
  if (!v.ok()) throw DataError("manifest verification failed: " + v.problems.front());
  return result;
}

// ---------------------------------------------------------------------------------------------
// entropy

/// A manifest whose items have been loaded and hash-checked.
struct LoadedItem {
  ManifestItem item;
  IntensityImage image;
};

inline IntensityImage load_item(const std::filesystem::path& root, const ManifestItem& item) {
  const auto bytes = detail::read_file(root / item.file);
  if (sha256_hex(bytes) != item.sha256) throw DataError("hash mismatch for " + item.file);
  try {
    return decode_cint(bytes);
  } catch (const ParseError& e) {
    throw DataError(item.file + ": " + e.what());
  }
}

inline Manifest require_complete(const std::filesystem::path& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  if (!m.complete) throw DataError(manifest_path.string() + " is incomplete; resume generation first");
  return m;
}

/// 2D entropy of every item, quantized with the manifest's exposure scale. Order follows item ids.
inline std::vector<double> item_entropies(const std::filesystem::path& manifest_path, const Manifest& m, int workers) {
  const auto root = manifest_path.parent_path();
  const double scale = m.exposure_scale();
  std::vector<double> h(m.items.size());
  parallel_for(m.items.size(), workers, [&](std::size_t i) {
    h[i] = entropy_2d(load_item(root, m.items[i]), scale).entropy;
  });
  return h;
}

/// Mean 2D entropy of the manifest items at coherence length lc.
inline double mean_entropy(const std::filesystem::path& manifest_path, double lc, int workers = 1) {
  const Manifest m = require_complete(manifest_path);
  const auto h = item_entropies(manifest_path, m, workers);
  std::vector<double> sel;
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    if (m.items[i].coherence_length == lc) sel.push_back(h[i]);
  }
  if (sel.empty()) throw DataError("no items at coherence length " + format_number(lc));
  return mean_entropy(sel);
}

namespace detail {

struct EntropyGroup {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

inline std::map<double, EntropyGroup> entropy_by_lc(const Manifest& m, const std::vector<double>& h) {
  std::map<double, std::vector<double>> groups;
  for (std::size_t i = 0; i < m.items.size(); ++i) groups[m.items[i].coherence_length].push_back(h[i]);
  std::map<double, EntropyGroup> out;
  for (const auto& [lc, v] : groups) {
    EntropyGroup g;
    g.count = v.size();
    g.mean = mean_entropy(v);
    double ss = 0.0;
    for (double x : v) ss += (x - g.mean) * (x - g.mean);
    g.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out[lc] = g;
  }
  return out;
}

}  // namespace detail

/// Mean and sample standard deviation of 2D entropy per coherence length. With two manifests, one row per
/// common l_c, with columns named after whether each manifest's scene holds a diffuser.
inline CsvTable cmd_entropy(const std::vector<std::filesystem::path>& manifests, const std::filesystem::path& out_csv,
                            int workers = 1) {
  if (manifests.empty() || manifests.size() > 2) throw ConfigError("entropy takes one or two manifests");
  std::vector<Manifest> ms;
  std::vector<std::map<double, detail::EntropyGroup>> groups;
  for (const auto& p : manifests) {
    ms.push_back(require_complete(p));
    groups.push_back(detail::entropy_by_lc(ms.back(), item_entropies(p, ms.back(), workers)));
    if (groups.back().empty()) throw DataError(p.string() + " has no items");
  }
  CsvTable table;
  if (ms.size() == 1) {
    table.header = {"coherence_length_m", "mean_entropy_bits", "std_entropy_bits", "items"};
    for (const auto& [lc, g] : groups[0]) table.rows.push_back({lc, g.mean, g.std, static_cast<double>(g.count)});
  } else {
    const bool d0 = ms[0].header.value("has_diffuser", false);
    const bool d1 = ms[1].header.value("has_diffuser", false);
    std::string n0 = d0 ? "with_diffuser" : "without_diffuser";
    std::string n1 = d1 ? "with_diffuser" : "without_diffuser";
    if (n0 == n1) {
      n0 = "first";
      n1 = "second";
    }
    table.header = {"coherence_length_m", n0 + "_mean_bits", n0 + "_std_bits", n1 + "_mean_bits", n1 + "_std_bits"};
    for (const auto& [lc, g] : groups[0]) {
      const auto it = groups[1].find(lc);
      if (it == groups[1].end()) continue;
      table.rows.push_back({lc, g.mean, g.std, it->second.mean, it->second.std});
    }
    if (table.rows.empty()) throw DataError("the two manifests share no coherence length");
  }
  if (!out_csv.empty()) write_csv(out_csv, table);
  return table;
}

// ---------------------------------------------------------------------------------------------
// speckle

struct SpeckleResult {
  CsvTable table;
  LinearFit fit;
  double coherence_length = 0.0;
};

inline Json fit_json(const LinearFit& fit, std::size_t points) {
  return Json{{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"points", points}};
}

/// Mean speckle size per detector depth of a depth manifest, plus a least-squares line through the
/// per-depth means. With several coherence lengths in the manifest one must be chosen.
inline SpeckleResult cmd_speckle(const std::filesystem::path& manifest_path, const std::filesystem::path& out_csv,
                                 std::optional<double> coherence_length = std::nullopt, int workers = 1) {
  const Manifest m = require_complete(manifest_path);
  if (m.label_kind() != LabelKind::depth) throw ConfigError("speckle needs a depth-preset manifest");
  std::set<double> lcs;
  for (const auto& it : m.items) lcs.insert(it.coherence_length);
  double lc = 0.0;
  if (coherence_length) {
    if (!lcs.count(*coherence_length)) throw ConfigError("manifest has no items at l_c " + format_number(*coherence_length));
    lc = *coherence_length;
  } else {
    if (lcs.size() != 1) throw ConfigError("manifest holds several coherence lengths; choose one");
    lc = *lcs.begin();
  }
  std::vector<std::size_t> sel;
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    if (m.items[i].coherence_length == lc) sel.push_back(i);
  }
  const auto root = manifest_path.parent_path();
  const std::size_t window = m.header.at("parameters").at("speckle_window").get<std::size_t>();
  std::vector<SpeckleReport> reports(sel.size());
  parallel_for(sel.size(), workers, [&](std::size_t k) {
    const IntensityImage img = load_item(root, m.items[sel[k]]);
    reports[k] = speckle_stats(img, SpeckleWindow::centered(img.grid, std::min(window, img.grid.n())));
  });

  std::map<double, std::vector<const SpeckleReport*>> by_depth;
  for (std::size_t k = 0; k < sel.size(); ++k) by_depth[*m.items[sel[k]].depth].push_back(&reports[k]);
  if (by_depth.size() < 2) throw DataError("speckle fit needs at least two distinct depths");

  SpeckleResult result;
  result.coherence_length = lc;
  result.table.header = {"depth_m", "mean_speckle_size_m", "std_speckle_size_m", "mean_contrast", "items"};
  std::vector<double> xs, ys;
  for (const auto& [depth, rs] : by_depth) {
    double mean = 0.0, contrast = 0.0;
    for (const auto* r : rs) {
      mean += r->size;
      contrast += r->contrast;
    }
    mean /= static_cast<double>(rs.size());
    contrast /= static_cast<double>(rs.size());
    double ss = 0.0;
    for (const auto* r : rs) ss += (r->size - mean) * (r->size - mean);
    const double sd = rs.size() > 1 ? std::sqrt(ss / static_cast<double>(rs.size() - 1)) : 0.0;
    result.table.rows.push_back({depth, mean, sd, contrast, static_cast<double>(rs.size())});
    xs.push_back(depth);
    ys.push_back(mean);
  }
  result.fit = linear_fit(xs, ys);
  if (!out_csv.empty()) {
    write_csv(out_csv, result.table);
    auto fit_path = out_csv;
    fit_path.replace_extension(".fit.json");
    Json j = fit_json(result.fit, xs.size());
    j["coherence_length"] = lc;
    detail::write_file_atomic(fit_path, detail::bytes_of(j.dump(2) + "\n"));
  }
  return result;
}

// ---------------------------------------------------------------------------------------------
// plot

inline PlotSpec cmd_plot(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out_png) {
  if (csvs.empty()) throw ConfigError("plot needs at least one CSV");
  std::vector<std::pair<std::string, CsvTable>> tables;
  for (const auto& p : csvs) tables.emplace_back(p.stem().string(), read_csv(p));
  PlotSpec spec = plot_spec_from_csv(tables);
  render_plot(spec, out_png);
  return spec;
}

}  // namespace cohere
