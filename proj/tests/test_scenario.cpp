#include <gtest/gtest.h>

#include "atmarl/scenario.hpp"

using namespace atmarl::emulator;

namespace {

const char* kThree = R"(
bandwidth_mbps = 10
distribution = uniform
noise_pct = 5
seed = 3

[service]
kind = CV
demand_mbps = 2.5
ue_count = 20

[service]
kind = URLLC   # low latency
demand_mbps = 0.2
ue_count = 12
kpi_target = 1.5

[service]
kind = mIoT
demand_mbps = 0.08
ue_count = 20
)";

}  // namespace

TEST(ScenarioParse, ReadsServicesAndDefaults) {
  const auto sc = parse_scenario_string(kThree);
  ASSERT_EQ(sc.services.size(), 3u);
  EXPECT_EQ(sc.seed, 3u);
  EXPECT_EQ(sc.services[0].kind, ServiceKind::kCV);
  EXPECT_DOUBLE_EQ(sc.services[0].kpi_target, 4.0);
  EXPECT_DOUBLE_EQ(sc.services[1].kpi_target, 1.5);
  EXPECT_DOUBLE_EQ(sc.services[2].kpi_target, 2.0);
  EXPECT_EQ(sc.services[1].label, "urllc");
  EXPECT_EQ(sc.distribution.kind, DistributionKind::kUniform);
  EXPECT_FALSE(sc.initial_controls.has_value());
}

TEST(ScenarioParse, RepeatedKindsGetNumberedLabels) {
  const auto sc = parse_scenario_string(R"(
[service]
kind = CV
demand_mbps = 1
ue_count = 4
[service]
kind = URLLC
demand_mbps = 1
ue_count = 4
[service]
kind = URLLC
demand_mbps = 1
ue_count = 4
)");
  EXPECT_EQ(sc.services[0].label, "cv");
  EXPECT_EQ(sc.services[1].label, "urllc1");
  EXPECT_EQ(sc.services[2].label, "urllc2");
  EXPECT_EQ(sc.services[2].instance_id, 1);
}

TEST(ScenarioParse, NamedDistributionUsesPreset) {
  const auto sc = parse_scenario_string("distribution = gamma\n[service]\nkind = CV\ndemand_mbps = 1\nue_count = 1\n");
  EXPECT_EQ(sc.distribution.weights, DistributionSpec::gamma().weights);
}

TEST(ScenarioParse, InitialControls) {
  const auto sc = parse_scenario_string(R"(
[service]
kind = CV
demand_mbps = 1
ue_count = 4
init_mbr = 0.5
[service]
kind = mIoT
demand_mbps = 1
ue_count = 4
init_priority = 1
)");
  ASSERT_TRUE(sc.initial_controls.has_value());
  EXPECT_EQ(sc.initial_controls->mbr_level, (std::vector<int>{0, kDefaultMbrLevel}));
  EXPECT_EQ(sc.initial_controls->priority, (std::vector<int>{kDefaultPriority, 1}));
  const auto state = init_scenario(sc);
  EXPECT_EQ(state.controls, *sc.initial_controls);
}

TEST(ScenarioParse, Errors) {
  EXPECT_THROW(parse_scenario_string("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario_string("[service]\nkind = CV\n"), ConfigError);
  EXPECT_THROW(parse_scenario_string("[service]\nkind = video\ndemand_mbps = 1\nue_count = 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario_string("[service]\nkind = CV\ndemand_mbps = x\nue_count = 1\n"), ConfigError);
  EXPECT_THROW(parse_scenario_string("[service]\nkind = CV\ndemand_mbps = 1\nue_count = 1\ninit_mbr = 3\n"),
               ConfigError);
  EXPECT_THROW(parse_scenario_string("dist_weights = 0.5, 0.5\n[service]\nkind = CV\ndemand_mbps = 1\nue_count = 1\n"),
               ConfigError);
  EXPECT_THROW(parse_scenario_string("[section]\n"), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.cfg"), ConfigError);
}

TEST(ScenarioParse, FormatRoundTrips) {
  const auto sc = parse_scenario_string(kThree);
  const auto back = parse_scenario_string(format_scenario(sc));
  ASSERT_EQ(back.services.size(), sc.services.size());
  for (std::size_t i = 0; i < sc.services.size(); ++i) {
    EXPECT_EQ(back.services[i].kind, sc.services[i].kind);
    EXPECT_DOUBLE_EQ(back.services[i].demand_per_ue, sc.services[i].demand_per_ue);
    EXPECT_EQ(back.services[i].ue_count, sc.services[i].ue_count);
    EXPECT_DOUBLE_EQ(back.services[i].kpi_target, sc.services[i].kpi_target);
  }
  EXPECT_EQ(back.distribution, sc.distribution);
  EXPECT_EQ(back.seed, sc.seed);
}

TEST(ScenarioFiles, ShippedScenariosLoad) {
  const auto def = load_scenario(ATMARL_SCENARIO_DIR "/default_3intent.cfg");
  EXPECT_EQ(def.services.size(), 3u);
  const auto scale = load_scenario(ATMARL_SCENARIO_DIR "/scale_5intent.cfg");
  ASSERT_EQ(scale.services.size(), 5u);
  int cv = 0, urllc = 0, miot = 0;
  for (const auto& s : scale.services) {
    cv += s.kind == ServiceKind::kCV;
    urllc += s.kind == ServiceKind::kURLLC;
    miot += s.kind == ServiceKind::kMIoT;
  }
  EXPECT_EQ(cv, 1);
  EXPECT_EQ(urllc, 2);
  EXPECT_EQ(miot, 2);
}
