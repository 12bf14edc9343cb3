// cohere: partial-coherence imaging experiments from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cohere/pipeline.hpp"

namespace {

using cohere::Json;

struct ConfigFlags {
  std::string config;
  std::string preset;
  std::string output;
  std::string scene;
  std::string images;
  std::string labels;
  std::optional<std::uint64_t> realizations;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> count;
  std::optional<double> distance;
  std::vector<double> coherence_lengths_mm;
  std::vector<double> depths;
  bool no_bandlimit = false;
  bool paper_scale = false;
  bool no_previews = false;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "direct | diffuser | pinhole | depth-direct | depth-diffuser");
    app->add_option("-o,--output", output, "Output directory");
    app->add_option("--scene", scene, "Scene file (JSON stage list) replacing the preset scene")->check(CLI::ExistingFile);
    app->add_option("--images", images, "IDX image file");
    app->add_option("--labels", labels, "IDX label file");
    app->add_option("-M,--realizations", realizations, "Screen realizations per image");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("-n,--count", count, "Number of dataset objects");
    app->add_option("-z,--distance", distance, "Object-to-detector distance (m)");
    app->add_option("--lc", coherence_lengths_mm, "Coherence lengths (mm)")->delimiter(',');
    app->add_option("--depths", depths, "Detector depths (m)")->delimiter(',');
    app->add_flag("--no-bandlimit", no_bandlimit, "Disable angular-spectrum band limiting");
    app->add_flag("--paper-scale", paper_scale, "Allow more than 1000 objects");
    app->add_flag("--no-previews", no_previews, "Skip PGM previews");
  }

  /// Config document with command-line values layered on top.
  cohere::ExperimentConfig resolve() const {
    Json j = Json::object();
    if (!config.empty()) {
      const auto bytes = cohere::detail::read_file(config);
      try {
        j = Json::parse(bytes.begin(), bytes.end());
      } catch (const nlohmann::json::parse_error& e) {
        throw cohere::ConfigError(config + ": " + e.what());
      }
    }
    if (!preset.empty()) j["preset"] = preset;
    if (!output.empty()) j["output"] = output;
    if (!scene.empty()) {
      const auto bytes = cohere::detail::read_file(scene);
      try {
        j["scene"] = Json::parse(bytes.begin(), bytes.end());
      } catch (const nlohmann::json::parse_error& e) {
        throw cohere::ConfigError(scene + ": " + e.what());
      }
    }
    if (!images.empty()) j["dataset"]["images"] = images;
    if (!labels.empty()) j["dataset"]["labels"] = labels;
    if (count) j["dataset"]["count"] = *count;
    if (realizations) j["realizations"] = *realizations;
    if (seed) j["seed"] = *seed;
    if (distance) j["distance"] = *distance;
    if (!coherence_lengths_mm.empty()) {
      Json lcs = Json::array();
      for (double mm : coherence_lengths_mm) lcs.push_back(mm * 1e-3);
      j["coherence_lengths"] = lcs;
    }
    if (!depths.empty()) j["depths"] = depths;
    if (no_bandlimit) j["propagation"]["band_limit"] = false;
    if (paper_scale) j["paper_scale"] = true;
    if (no_previews) j["previews"] = false;
    return cohere::parse_experiment(j);
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Partially coherent imaging simulator"};
  app.require_subcommand(1);
  std::optional<int> workers_flag;
  app.add_option("-w,--workers", workers_flag, std::string("Worker threads (default: $") + cohere::kWorkersEnv + " or all cores)")
      ->check(CLI::Range(1, 1024));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress output");

  ConfigFlags cal_flags;
  auto* calibrate = app.add_subcommand("calibrate", "Double-pinhole fringe visibility versus coherence length");
  cal_flags.add_to(calibrate);

  ConfigFlags gen_flags;
  bool resume = false;
  auto* generate = app.add_subcommand("generate", "Generate a labeled intensity dataset and manifest");
  gen_flags.add_to(generate);
  generate->add_flag("--resume", resume, "Continue an interrupted run in the same output directory");

  std::vector<std::string> entropy_manifests;
  std::string entropy_out;
  auto* entropy = app.add_subcommand("entropy", "Mean 2D entropy per coherence length");
  entropy->add_option("manifests", entropy_manifests, "One manifest, or two to compare")->required()->check(CLI::ExistingFile);
  entropy->add_option("-o,--output", entropy_out, "CSV path")->required();

  std::string speckle_manifest, speckle_out;
  std::optional<double> speckle_lc_mm;
  auto* speckle = app.add_subcommand("speckle", "Mean speckle size per depth and its linear fit");
  speckle->add_option("manifest", speckle_manifest, "Depth-preset manifest")->required()->check(CLI::ExistingFile);
  speckle->add_option("-o,--output", speckle_out, "CSV path")->required();
  speckle->add_option("--lc", speckle_lc_mm, "Coherence length to analyse (mm)");

  std::vector<std::string> plot_csvs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render metric CSVs to a PNG chart");
  plot->add_option("csv", plot_csvs, "Metric CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", plot_out, "PNG path")->required();

  std::string verify_path;
  auto* verify = app.add_subcommand("verify-manifest", "Check files, hashes and completeness of a manifest");
  verify->add_option("manifest", verify_path, "Manifest path")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cohere::RunOptions opt;
  opt.workers = workers_flag ? *workers_flag : cohere::default_worker_count();
  if (!quiet) opt.log = &std::cerr;

  if (calibrate->parsed()) {
    const auto cfg = cal_flags.resolve();
    const auto result = cohere::cmd_calibrate(cfg, opt);
    std::cout << cohere::encode_csv(result.table);
  } else if (generate->parsed()) {
    auto cfg = gen_flags.resolve();
    opt.resume = resume;
    const auto result = cohere::cmd_generate(cfg, opt);
    std::cout << result.manifest.string() << "\n";
  } else if (entropy->parsed()) {
    std::vector<std::filesystem::path> paths(entropy_manifests.begin(), entropy_manifests.end());
    std::cout << cohere::encode_csv(cohere::cmd_entropy(paths, entropy_out, opt.workers));
  } else if (speckle->parsed()) {
    std::optional<double> lc;
    if (speckle_lc_mm) lc = *speckle_lc_mm * 1e-3;
    const auto result = cohere::cmd_speckle(speckle_manifest, speckle_out, lc, opt.workers);
    std::cout << cohere::encode_csv(result.table);
    std::cout << "slope " << cohere::format_number(result.fit.slope) << " intercept "
              << cohere::format_number(result.fit.intercept) << " r_squared " << cohere::format_number(result.fit.r_squared)
              << "\n";
  } else if (plot->parsed()) {
    std::vector<std::filesystem::path> paths(plot_csvs.begin(), plot_csvs.end());
    cohere::cmd_plot(paths, plot_out);
    std::cout << plot_out << "\n";
  } else if (verify->parsed()) {
    const auto report = cohere::verify_manifest(verify_path);
    for (const auto& p : report.problems) std::cout << p << "\n";
    if (!report.ok()) return 3;
    std::cout << "ok\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cohere::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cohere::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cohere::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
