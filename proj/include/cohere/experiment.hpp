#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cohere/error.hpp"
#include "cohere/field_io.hpp"
#include "cohere/grid.hpp"
#include "cohere/phase_screen.hpp"
#include "cohere/records.hpp"
#include "cohere/scene.hpp"
#include "cohere/seed.hpp"
#include "cohere/speckle.hpp"
#include "cohere/visibility.hpp"

namespace cohere {

using Json = nlohmann::ordered_json;

enum class Preset { direct, diffuser, pinhole, depth_direct, depth_diffuser };

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::direct: return "direct";
    case Preset::diffuser: return "diffuser";
    case Preset::pinhole: return "pinhole";
    case Preset::depth_direct: return "depth-direct";
    case Preset::depth_diffuser: return "depth-diffuser";
  }
  return "direct";
}

inline Preset parse_preset(const std::string& name) {
  for (Preset p : {Preset::direct, Preset::diffuser, Preset::pinhole, Preset::depth_direct, Preset::depth_diffuser}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown scene preset '" + name + "'");
}

inline bool is_depth_preset(Preset p) { return p == Preset::depth_direct || p == Preset::depth_diffuser; }

inline std::vector<double> default_coherence_lengths() { return {0.1e-3, 0.3e-3, 0.8e-3, 1e-3, 3e-3, 8e-3, 10e-3}; }
inline std::vector<double> default_depths() { return {0.5, 1.0, 1.5, 2.0, 2.5}; }

/// Above this many objects a run counts as paper scale and needs an explicit opt-in.
inline constexpr std::size_t kDeskScaleLimit = 1000;

struct DatasetSource {
  std::filesystem::path images;
  std::filesystem::path labels;
  std::string name = "mnist";
  std::size_t count = 200;
  std::uint64_t selection_seed = 0;
};

/// One experiment: scene preset, sweep, ensemble and dataset parameters. All lengths in meters.
struct ExperimentConfig {
  Preset preset = Preset::direct;
  GridSpec grid = GridSpec::imaging();
  double wavelength = kDefaultWavelength;
  std::vector<double> coherence_lengths = default_coherence_lengths();
  std::uint64_t realizations = 100;
  double sigma_phi = kDefaultSigmaPhi;
  std::uint64_t seed = 1;
  std::optional<DatasetSource> dataset;
  double distance = 2.5;
  std::vector<double> depths;
  DiffuserSpec diffuser;
  PinholeMaskSpec pinholes;
  std::optional<double> object_extent;
  PropagationOptions propagation;
  FringeWindow fringe_window;
  std::size_t speckle_window = 256;
  std::size_t calibration_count = 100;
  bool previews = true;
  bool paper_scale = false;
  std::filesystem::path output = "out";
  std::string experiment_id;
  /// Explicit stage list replacing the preset scene (non-depth presets only).
  std::optional<std::vector<Stage>> scene;

  /// Per-object ensemble seed, shared by every l_c and depth of that object.
  std::uint64_t object_seed(std::size_t dataset_index) const {
    return derive_seed(derive_seed(seed, 3), dataset_index);
  }
  std::uint64_t pinhole_seed() const { return derive_seed(seed, 4); }

  /// Fringe period lambda z / d of the pinhole scene.
  double fringe_period() const { return wavelength * distance / pinholes.spacing; }

  void validate() const {
    if (coherence_lengths.empty()) throw ConfigError("coherence length sweep is empty");
    for (double lc : coherence_lengths) {
      if (!(lc > 0.0) || !std::isfinite(lc)) throw ConfigError("coherence lengths must be positive");
    }
    if (std::set<double>(coherence_lengths.begin(), coherence_lengths.end()).size() != coherence_lengths.size()) {
      throw ConfigError("coherence length sweep has duplicates");
    }
    if (realizations < 1) throw ConfigError("realizations must be at least 1");
    PhaseScreenSpec{grid, coherence_lengths.front(), sigma_phi, 0}.validate();
    if (!(distance > 0.0)) throw ConfigError("distance must be positive");
    if (is_depth_preset(preset)) {
      if (depths.empty()) throw ConfigError("depth presets need at least one depth");
      for (double d : depths) {
        if (!(d > 0.0)) throw ConfigError("depths must be positive");
      }
      if (std::set<double>(depths.begin(), depths.end()).size() != depths.size()) {
        throw ConfigError("depth list has duplicates");
      }
      if (scene) throw ConfigError("an explicit scene cannot be combined with a depth preset");
    }
    if (preset != Preset::pinhole) {
      if (!dataset) throw ConfigError("preset '" + to_string(preset) + "' needs a dataset");
      if (dataset->count < 1) throw ConfigError("dataset count must be at least 1");
      if (dataset->count > kDeskScaleLimit && !paper_scale) {
        throw ConfigError("more than " + std::to_string(kDeskScaleLimit) +
                          " objects is a paper-scale run; pass --paper-scale to confirm");
      }
    }
    if (calibration_count < 1) throw ConfigError("calibration count must be at least 1");
  }
};

// ---------------------------------------------------------------------------------------------
// Scenes

/// Scene for one preset variant. `depth` selects the detector plane of depth presets; `object` fills
/// the object stage (a blank SLM when absent).
inline SceneConfig build_scene(const ExperimentConfig& cfg, const std::optional<SlmObject>& object = std::nullopt,
                               std::optional<double> depth = std::nullopt) {
  SceneConfig scene;
  scene.grid = cfg.grid;
  scene.wavelength = cfg.wavelength;
  scene.propagation = cfg.propagation;
  SlmObject slm = object.value_or(SlmObject{std::vector<std::uint8_t>(kObjectSide * kObjectSide, 0), std::nullopt});
  slm.extent = cfg.object_extent;

  if (cfg.scene) {
    scene.stages = *cfg.scene;
    for (auto& s : scene.stages) {
      if (auto* o = std::get_if<stage::Object>(&s)) {
        const auto extent = o->object.extent;
        o->object = slm;
        if (extent) o->object.extent = extent;
      }
    }
    return scene;
  }
  const double z = depth.value_or(cfg.distance);
  switch (cfg.preset) {
    case Preset::direct:
    case Preset::depth_direct:
      scene.stages = {stage::Object{slm}, stage::FreeSpace{z}, stage::Detector{}};
      break;
    case Preset::diffuser:
    case Preset::depth_diffuser:
      scene.stages = {stage::Object{slm}, stage::FreeSpace{z / 2}, stage::Diffuser{cfg.diffuser}, stage::FreeSpace{z / 2},
                      stage::Detector{}};
      break;
    case Preset::pinhole:
      scene.stages = {stage::Pinholes{cfg.pinholes}, stage::FreeSpace{z}, stage::Detector{}};
      break;
  }
  return scene;
}

inline bool scene_has_diffuser(const SceneConfig& scene) {
  return std::any_of(scene.stages.begin(), scene.stages.end(),
                     [](const Stage& s) { return std::holds_alternative<stage::Diffuser>(s); });
}

namespace detail {

inline const char* axis_name(Axis a) { return a == Axis::horizontal ? "horizontal" : "vertical"; }

inline Axis parse_axis(const std::string& s) {
  if (s == "horizontal") return Axis::horizontal;
  if (s == "vertical") return Axis::vertical;
  throw ConfigError("orientation must be 'horizontal' or 'vertical', got '" + s + "'");
}

inline Json diffuser_json(const DiffuserSpec& d) {
  Json j;
  j["correlation_length"] = d.correlation_length ? Json(*d.correlation_length) : Json(nullptr);
  j["phase_rms"] = d.phase_rms;
  j["seed"] = d.seed;
  j["static"] = d.is_static;
  return j;
}

inline Json pinholes_json(const PinholeMaskSpec& p) {
  return Json{{"diameter", p.diameter}, {"spacing", p.spacing}, {"orientation", axis_name(p.orientation)}};
}

/// Rejects keys outside `allowed` so that typos in config files fail loudly.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline DiffuserSpec parse_diffuser(const Json& j, DiffuserSpec d) {
  check_keys(j, {"correlation_length", "phase_rms", "seed", "static", "type"}, "diffuser");
  if (j.contains("correlation_length")) {
    if (j["correlation_length"].is_null()) {
      d.correlation_length.reset();
    } else {
      d.correlation_length = get<double>(j, "correlation_length", "diffuser");
    }
  }
  if (j.contains("phase_rms")) d.phase_rms = get<double>(j, "phase_rms", "diffuser");
  if (j.contains("seed")) d.seed = get<std::uint64_t>(j, "seed", "diffuser");
  if (j.contains("static")) d.is_static = get<bool>(j, "static", "diffuser");
  return d;
}

inline PinholeMaskSpec parse_pinholes(const Json& j, PinholeMaskSpec p) {
  check_keys(j, {"diameter", "spacing", "orientation", "type"}, "pinholes");
  if (j.contains("diameter")) p.diameter = get<double>(j, "diameter", "pinholes");
  if (j.contains("spacing")) p.spacing = get<double>(j, "spacing", "pinholes");
  if (j.contains("orientation")) p.orientation = parse_axis(get<std::string>(j, "orientation", "pinholes"));
  return p;
}

inline GridSpec parse_grid(const Json& j) {
  check_keys(j, {"n", "shape", "extent", "pitch"}, "grid");
  std::optional<std::size_t> n;
  if (j.contains("shape")) {
    const auto shape = get<std::vector<std::size_t>>(j, "shape", "grid");
    if (shape.size() != 2) throw ConfigError("grid.shape must have two entries");
    if (shape[0] != shape[1]) throw ConfigError("rectangular grids are not supported; use a square shape");
    n = shape[0];
  }
  if (j.contains("n")) {
    const auto v = get<std::size_t>(j, "n", "grid");
    if (n && *n != v) throw ConfigError("grid.n and grid.shape disagree");
    n = v;
  }
  if (!n) throw ConfigError("grid needs 'n' or 'shape'");
  if (j.contains("extent") == j.contains("pitch")) throw ConfigError("grid needs exactly one of 'extent' and 'pitch'");
  return j.contains("extent") ? GridSpec::from_extent(*n, get<double>(j, "extent", "grid"))
                              : GridSpec(*n, get<double>(j, "pitch", "grid"));
}

}  // namespace detail

/// Stage list from JSON: [{"type": "object"}, {"type": "free_space", "z": 2.5}, ..., {"type": "detector"}].
inline std::vector<Stage> parse_stages(const Json& stages) {
  if (!stages.is_array()) throw ConfigError("scene.stages must be an array");
  std::vector<Stage> out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Json& s = stages[i];
    const std::string where = "scene.stages[" + std::to_string(i) + "]";
    if (!s.is_object() || !s.contains("type")) throw ConfigError(where + " needs a 'type'");
    const auto type = detail::get<std::string>(s, "type", where);
    if (type == "object") {
      detail::check_keys(s, {"type", "extent"}, where);
      SlmObject o{std::vector<std::uint8_t>(kObjectSide * kObjectSide, 0), std::nullopt};
      if (s.contains("extent")) o.extent = detail::get<double>(s, "extent", where);
      out.emplace_back(stage::Object{o});
    } else if (type == "free_space") {
      detail::check_keys(s, {"type", "z"}, where);
      out.emplace_back(stage::FreeSpace{detail::get<double>(s, "z", where)});
    } else if (type == "diffuser") {
      out.emplace_back(stage::Diffuser{detail::parse_diffuser(s, {})});
    } else if (type == "pinholes") {
      out.emplace_back(stage::Pinholes{detail::parse_pinholes(s, {})});
    } else if (type == "detector") {
      detail::check_keys(s, {"type"}, where);
      out.emplace_back(stage::Detector{});
    } else {
      throw ConfigError(where + ": unknown stage type '" + type + "'");
    }
  }
  return out;
}

inline Json stages_json(const std::vector<Stage>& stages) {
  Json arr = Json::array();
  for (const auto& s : stages) {
    std::visit(
        [&](const auto& st) {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, stage::Object>) {
            Json j{{"type", "object"}};
            if (st.object.extent) j["extent"] = *st.object.extent;
            arr.push_back(j);
          } else if constexpr (std::is_same_v<T, stage::FreeSpace>) {
            arr.push_back(Json{{"type", "free_space"}, {"z", st.z}});
          } else if constexpr (std::is_same_v<T, stage::Diffuser>) {
            Json j{{"type", "diffuser"}};
            j.update(detail::diffuser_json(st.spec));
            arr.push_back(j);
          } else if constexpr (std::is_same_v<T, stage::Pinholes>) {
            Json j{{"type", "pinholes"}};
            j.update(detail::pinholes_json(st.spec));
            arr.push_back(j);
          } else {
            arr.push_back(Json{{"type", "detector"}});
          }
        },
        s);
  }
  return arr;
}

/// Parses a config document on top of the preset defaults. Unknown keys are errors.
inline ExperimentConfig parse_experiment(const Json& j) {
  detail::check_keys(j,
                     {"preset", "grid", "wavelength", "coherence_lengths", "realizations", "sigma_phi", "seed", "dataset",
                      "distance", "depths", "diffuser", "pinholes", "object_extent", "propagation", "fringe_window",
                      "speckle_window", "calibration_count", "previews", "paper_scale", "output", "experiment_id", "scene"},
                     "config");
  ExperimentConfig cfg;
  const std::string where = "config";
  if (j.contains("preset")) cfg.preset = parse_preset(detail::get<std::string>(j, "preset", where));
  cfg.diffuser.seed = derive_seed(cfg.seed, 2);
  if (cfg.preset == Preset::pinhole) {
    cfg.grid = GridSpec::metrology();
    cfg.propagation.pad_factor = 1;
    cfg.distance = 0.25;
  }
  if (is_depth_preset(cfg.preset)) {
    cfg.depths = default_depths();
    cfg.coherence_lengths = {8e-3};
  }

  if (j.contains("seed")) {
    cfg.seed = detail::get<std::uint64_t>(j, "seed", where);
    cfg.diffuser.seed = derive_seed(cfg.seed, 2);
  }
  if (j.contains("grid")) cfg.grid = detail::parse_grid(j["grid"]);
  if (j.contains("wavelength")) cfg.wavelength = detail::get<double>(j, "wavelength", where);
  if (!(cfg.wavelength > 0.0)) throw ConfigError("wavelength must be positive");
  if (j.contains("coherence_lengths")) cfg.coherence_lengths = detail::get<std::vector<double>>(j, "coherence_lengths", where);
  if (j.contains("realizations")) cfg.realizations = detail::get<std::uint64_t>(j, "realizations", where);
  if (j.contains("sigma_phi")) cfg.sigma_phi = detail::get<double>(j, "sigma_phi", where);
  if (j.contains("distance")) cfg.distance = detail::get<double>(j, "distance", where);
  if (j.contains("depths")) cfg.depths = detail::get<std::vector<double>>(j, "depths", where);
  if (j.contains("diffuser")) cfg.diffuser = detail::parse_diffuser(j["diffuser"], cfg.diffuser);
  if (j.contains("pinholes")) cfg.pinholes = detail::parse_pinholes(j["pinholes"], cfg.pinholes);
  if (j.contains("object_extent")) cfg.object_extent = detail::get<double>(j, "object_extent", where);
  if (j.contains("propagation")) {
    const Json& p = j["propagation"];
    detail::check_keys(p, {"pad_factor", "band_limit"}, "propagation");
    if (p.contains("pad_factor")) cfg.propagation.pad_factor = detail::get<int>(p, "pad_factor", "propagation");
    if (p.contains("band_limit")) cfg.propagation.band_limit = detail::get<bool>(p, "band_limit", "propagation");
  }
  cfg.fringe_window.period = cfg.fringe_period();
  if (j.contains("fringe_window")) {
    const Json& f = j["fringe_window"];
    detail::check_keys(f, {"center_x", "center_y", "half_length", "half_width"}, "fringe_window");
    if (f.contains("center_x")) cfg.fringe_window.center_x = detail::get<double>(f, "center_x", "fringe_window");
    if (f.contains("center_y")) cfg.fringe_window.center_y = detail::get<double>(f, "center_y", "fringe_window");
    if (f.contains("half_length")) cfg.fringe_window.half_length = detail::get<double>(f, "half_length", "fringe_window");
    if (f.contains("half_width")) cfg.fringe_window.half_width = detail::get<double>(f, "half_width", "fringe_window");
  }
  cfg.fringe_window.axis = cfg.pinholes.orientation;
  if (j.contains("speckle_window")) cfg.speckle_window = detail::get<std::size_t>(j, "speckle_window", where);
  if (j.contains("calibration_count")) cfg.calibration_count = detail::get<std::size_t>(j, "calibration_count", where);
  if (j.contains("previews")) cfg.previews = detail::get<bool>(j, "previews", where);
  if (j.contains("paper_scale")) cfg.paper_scale = detail::get<bool>(j, "paper_scale", where);
  if (j.contains("output")) cfg.output = detail::get<std::string>(j, "output", where);
  if (j.contains("experiment_id")) cfg.experiment_id = detail::get<std::string>(j, "experiment_id", where);
  if (j.contains("scene")) {
    const Json& s = j["scene"];
    detail::check_keys(s, {"stages"}, "scene");
    cfg.scene = parse_stages(s.at("stages"));
  }
  if (j.contains("dataset")) {
    const Json& d = j["dataset"];
    detail::check_keys(d, {"images", "labels", "name", "count", "seed"}, "dataset");
    DatasetSource src;
    src.images = detail::get<std::string>(d, "images", "dataset");
    src.labels = detail::get<std::string>(d, "labels", "dataset");
    if (d.contains("name")) src.name = detail::get<std::string>(d, "name", "dataset");
    if (d.contains("count")) src.count = detail::get<std::size_t>(d, "count", "dataset");
    src.selection_seed = d.contains("seed") ? detail::get<std::uint64_t>(d, "seed", "dataset") : derive_seed(cfg.seed, 1);
    cfg.dataset = src;
  }
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

/// Every effective parameter, in a fixed key order. Recorded in manifests and hashed for ids.
inline Json effective_parameters(const ExperimentConfig& cfg) {
  Json j;
  j["preset"] = to_string(cfg.preset);
  j["grid"] = Json{{"n", cfg.grid.n()}, {"pitch", cfg.grid.pitch()}};
  j["wavelength"] = cfg.wavelength;
  j["coherence_lengths"] = cfg.coherence_lengths;
  j["realizations"] = cfg.realizations;
  j["sigma_phi"] = cfg.sigma_phi;
  j["seed"] = cfg.seed;
  if (cfg.dataset) {
    j["dataset"] = Json{{"images", cfg.dataset->images.string()},
                        {"labels", cfg.dataset->labels.string()},
                        {"name", cfg.dataset->name},
                        {"count", cfg.dataset->count},
                        {"seed", cfg.dataset->selection_seed}};
  }
  j["distance"] = cfg.distance;
  if (is_depth_preset(cfg.preset)) j["depths"] = cfg.depths;
  j["diffuser"] = detail::diffuser_json(cfg.diffuser);
  j["pinholes"] = detail::pinholes_json(cfg.pinholes);
  j["object_extent"] = cfg.object_extent ? Json(*cfg.object_extent) : Json(nullptr);
  j["propagation"] = Json{{"pad_factor", cfg.propagation.pad_factor}, {"band_limit", cfg.propagation.band_limit}};
  j["fringe_window"] = Json{{"center_x", cfg.fringe_window.center_x},
                            {"center_y", cfg.fringe_window.center_y},
                            {"half_length", cfg.fringe_window.half_length},
                            {"half_width", cfg.fringe_window.half_width}};
  j["speckle_window"] = cfg.speckle_window;
  j["calibration_count"] = cfg.calibration_count;
  j["previews"] = cfg.previews;
  j["paper_scale"] = cfg.paper_scale;
  if (cfg.scene) j["scene"] = Json{{"stages", stages_json(*cfg.scene)}};
  return j;
}

/// Hash of the optical scene(s) an experiment runs, independent of the object content.
inline std::string scene_hash(const ExperimentConfig& cfg) {
  Json scenes = Json::array();
  auto add = [&](const SceneConfig& s) {
    scenes.push_back(Json{{"grid", {{"n", s.grid.n()}, {"pitch", s.grid.pitch()}}},
                          {"wavelength", s.wavelength},
                          {"propagation", {{"pad_factor", s.propagation.pad_factor}, {"band_limit", s.propagation.band_limit}}},
                          {"stages", stages_json(s.stages)}});
  };
  if (is_depth_preset(cfg.preset)) {
    for (double d : cfg.depths) add(build_scene(cfg, std::nullopt, d));
  } else {
    add(build_scene(cfg));
  }
  return sha256_hex(scenes.dump());
}

inline std::string experiment_id(const ExperimentConfig& cfg) {
  if (!cfg.experiment_id.empty()) return cfg.experiment_id;
  return to_string(cfg.preset) + "-" + sha256_hex(effective_parameters(cfg).dump()).substr(0, 12);
}

}  // namespace cohere
