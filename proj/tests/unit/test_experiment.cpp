#include "support.hpp"

#include "cohere/experiment.hpp"

namespace cohere {
namespace {

Json with_dataset(Json j) {
  j["dataset"] = Json{{"images", test::kImages.string()}, {"labels", test::kLabels.string()}};
  return j;
}

TEST(Config, PresetDefaults) {
  const auto direct = parse_experiment(with_dataset({{"preset", "direct"}}));
  EXPECT_EQ(direct.grid, GridSpec::imaging());
  EXPECT_EQ(direct.coherence_lengths, default_coherence_lengths());
  EXPECT_EQ(direct.distance, 2.5);
  EXPECT_EQ(direct.realizations, 100u);
  EXPECT_EQ(direct.dataset->selection_seed, derive_seed(direct.seed, 1));
  EXPECT_EQ(direct.diffuser.seed, derive_seed(direct.seed, 2));

  const auto pinhole = parse_experiment({{"preset", "pinhole"}});
  EXPECT_EQ(pinhole.grid, GridSpec::metrology());
  EXPECT_EQ(pinhole.propagation.pad_factor, 1);
  EXPECT_NEAR(pinhole.fringe_window.period, kDefaultWavelength * 0.25 / 5e-3, 1e-15);
  EXPECT_NO_THROW(pinhole.validate());

  const auto depth = parse_experiment(with_dataset({{"preset", "depth-diffuser"}}));
  EXPECT_EQ(depth.depths, default_depths());
  EXPECT_EQ(depth.coherence_lengths, std::vector<double>{8e-3});
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_experiment({{"presett", "direct"}}), ConfigError);
  EXPECT_THROW(parse_experiment({{"propagation", {{"pad", 2}}}}), ConfigError);
  EXPECT_THROW(parse_experiment({{"preset", "sideways"}}), ConfigError);
  EXPECT_THROW(parse_experiment({{"realizations", "many"}}), ConfigError);
}

TEST(Config, GridForms) {
  EXPECT_EQ(parse_experiment({{"grid", {{"n", 256}, {"extent", 3e-3}}}}).grid, GridSpec::from_extent(256, 3e-3));
  EXPECT_EQ(parse_experiment({{"grid", {{"shape", {128, 128}}, {"pitch", 1e-5}}}}).grid, GridSpec(128, 1e-5));
  EXPECT_THROW(parse_experiment({{"grid", {{"shape", {256, 128}}, {"pitch", 1e-5}}}}), ConfigError);
  EXPECT_THROW(parse_experiment({{"grid", {{"n", 256}}}}), ConfigError);
  EXPECT_THROW(parse_experiment({{"grid", {{"n", 300}, {"pitch", 1e-5}}}}), ConfigError);
}

TEST(Config, Validation) {
  auto cfg = parse_experiment(with_dataset({{"preset", "direct"}}));
  EXPECT_NO_THROW(cfg.validate());
  cfg.dataset->count = 1001;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.paper_scale = true;
  EXPECT_NO_THROW(cfg.validate());
  cfg.coherence_lengths = {1e-3, 1e-3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_experiment({{"preset", "direct"}}).validate(), ConfigError);
}

TEST(Config, PresetScenes) {
  auto cfg = parse_experiment(with_dataset({{"preset", "direct"}}));
  auto s = build_scene(cfg);
  ASSERT_EQ(s.stages.size(), 3u);
  EXPECT_EQ(std::get<stage::FreeSpace>(s.stages[1]).z, 2.5);
  EXPECT_FALSE(scene_has_diffuser(s));

  cfg = parse_experiment(with_dataset({{"preset", "diffuser"}}));
  s = build_scene(cfg);
  ASSERT_EQ(s.stages.size(), 5u);
  EXPECT_TRUE(scene_has_diffuser(s));
  EXPECT_EQ(s.total_path(), 2.5);

  cfg = parse_experiment(with_dataset({{"preset", "depth-diffuser"}}));
  s = build_scene(cfg, std::nullopt, 1.5);
  EXPECT_EQ(s.total_path(), 1.5);
  EXPECT_TRUE(scene_has_diffuser(s));

  cfg = parse_experiment({{"preset", "pinhole"}});
  s = build_scene(cfg);
  EXPECT_TRUE(std::holds_alternative<stage::Pinholes>(s.stages[0]));
}

TEST(Config, ExplicitSceneRoundTrips) {
  const Json stages = Json::parse(R"([{"type":"object"},{"type":"free_space","z":1.25},
      {"type":"diffuser","phase_rms":9.42477796,"seed":7},{"type":"free_space","z":1.25},{"type":"detector"}])");
  const auto parsed = parse_stages(stages);
  ASSERT_EQ(parsed.size(), 5u);
  EXPECT_EQ(std::get<stage::Diffuser>(parsed[2]).spec.seed, 7u);
  EXPECT_EQ(parse_stages(stages_json(parsed)).size(), 5u);
  EXPECT_EQ(stages_json(parse_stages(stages_json(parsed))), stages_json(parsed));
  EXPECT_THROW(parse_stages(Json::parse(R"([{"type":"lens"}])")), ConfigError);
  EXPECT_THROW(parse_stages(Json::parse(R"([{"type":"free_space","z":1,"f":2}])")), ConfigError);
}

TEST(Config, ExperimentIdTracksParameters) {
  const auto a = parse_experiment(with_dataset({{"preset", "direct"}}));
  auto b = a;
  EXPECT_EQ(experiment_id(a), experiment_id(b));
  EXPECT_EQ(experiment_id(a).rfind("direct-", 0), 0u);
  b.realizations = 50;
  EXPECT_NE(experiment_id(a), experiment_id(b));
  EXPECT_EQ(scene_hash(a), scene_hash(b));
  b.distance = 1.0;
  EXPECT_NE(scene_hash(a), scene_hash(b));
}

TEST(Config, ShippedConfigsParse) {
  const auto root = test::kData.parent_path().parent_path() / "configs";
  for (const char* name : {"direct.json", "diffuser.json", "depth-direct.json", "depth-diffuser.json", "pinhole.json"}) {
    EXPECT_NO_THROW(load_experiment(root / name).validate()) << name;
  }
}

}  // namespace
}  // namespace cohere
