#include <gtest/gtest.h>

#include "classlens/pipeline.hpp"
#include "support.hpp"

using namespace classlens;
namespace ts = testing_support;

TEST(Config, DefaultsRoundTrip) {
  const AnalysisConfig c;
  const json j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(j["tracking"]["max_cost"], c.tracking.max_cost);
}

TEST(Config, UnknownKeyRejectedWithPath) {
  try {
    (void)config_with_overrides({}, json{{"tracking", {{"max_costs", 0.5}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "unknown config key 'tracking.max_costs'");
  }
  EXPECT_THROW((void)config_with_overrides({}, json{{"nonsense", 1}}), ConfigError);
  EXPECT_THROW((void)config_with_overrides({}, json{{"tracking", {{"max_cost", "high"}}}}), ConfigError);
}

TEST(Config, AssignmentOverridesOneField) {
  const auto c = config_with_assignment({}, "tracking.max_cost=0.6");
  EXPECT_EQ(c.tracking.max_cost, 0.6);
  const AnalysisConfig d;
  EXPECT_EQ(c.tracking.gate_radius, d.tracking.gate_radius);
  EXPECT_EQ(c.speech.hop, d.speech.hop);
  EXPECT_THROW((void)config_with_assignment({}, "tracking.max_cost"), ConfigError);
  EXPECT_THROW((void)config_with_assignment({}, "tracking.bogus=1"), ConfigError);
}

TEST(Config, PartialOverrideLeavesRestAtDefaults) {
  const AnalysisConfig d;
  const auto c = config_with_overrides(d, json{{"speech", {{"vad_delta_db", 9.0}}}});
  json a = config_to_json(c), b = config_to_json(d);
  EXPECT_EQ(a["speech"]["vad_delta_db"], 9.0);
  a["speech"].erase("vad_delta_db");
  b["speech"].erase("vad_delta_db");
  EXPECT_EQ(a, b);
}

TEST(Config, PrecedenceManifestThenFileThenAssignment) {
  const auto dir = ts::temp_dir("config_precedence");
  SessionManifest m;
  m.config = json{{"tracking", {{"max_cost", 0.5}, {"gate_radius", 0.2}}}, {"actions", {{"merge_gap", 1.0}}}};
  write_file(dir / "cfg.json", R"({"tracking": {"max_cost": 0.55, "history": 7}})");
  AnalyzeOptions opt;
  opt.config_file = dir / "cfg.json";
  opt.assignments = {"tracking.history=9"};
  const auto c = effective_config(m, opt);
  EXPECT_EQ(c.tracking.gate_radius, 0.2);  // manifest only
  EXPECT_EQ(c.merge_gap, 1.0);
  EXPECT_EQ(c.tracking.max_cost, 0.55);  // file beats manifest
  EXPECT_EQ(c.tracking.history, 9u);     // assignment beats file
  fs::remove_all(dir);
}

TEST(Config, BadConfigFileIsConfigError) {
  const auto dir = ts::temp_dir("config_bad");
  write_file(dir / "cfg.json", "{ not json");
  EXPECT_THROW((void)load_config_file(dir / "cfg.json"), ConfigError);
  fs::remove_all(dir);
}
