#include <gtest/gtest.h>

#include "atmarl/baselines.hpp"
#include "atmarl/scenario.hpp"

using namespace atmarl;
using namespace atmarl::baselines;

TEST(RuleBased, AlternatesEveryPeriod) {
  for (int t = 0; t < 5; ++t) EXPECT_EQ(rule_based_select(t), agents::System::kPriority);
  for (int t = 5; t < 10; ++t) EXPECT_EQ(rule_based_select(t), agents::System::kMbr);
  EXPECT_EQ(rule_based_select(10), agents::System::kPriority);
  EXPECT_EQ(rule_based_select(3, 2), agents::System::kMbr);
  EXPECT_THROW(rule_based_select(0, 0), std::invalid_argument);
  EXPECT_THROW(rule_based_select(-1), std::invalid_argument);
}

TEST(RuleBased, ExactlyOneSystemActive) {
  for (int t = 0; t < 40; ++t) {
    const auto a = rule_based_active(t);
    EXPECT_NE(a.priority, a.mbr);
  }
}

TEST(NaiveParallel, EveryAgentGetsItsIntentTarget) {
  const auto sc = emulator::parse_scenario_string(
      "[service]\nkind = CV\ndemand_mbps = 1\nue_count = 2\nkpi_target = 4.5\n"
      "[service]\nkind = mIoT\ndemand_mbps = 1\nue_count = 2\nkpi_target = 1.5\n");
  const auto g = naive_parallel_goals(sc.services);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g.value, (std::vector<double>{4.5, 1.5, 4.5, 1.5}));
}

TEST(GoalHalving, HalvesSumToIntermediate) {
  const std::vector<double> inter{4.0, 2.0, 3.0};
  const auto g = goal_halving(inter);
  ASSERT_EQ(g.size(), 6u);
  for (std::size_t k = 0; k < inter.size(); ++k) {
    EXPECT_DOUBLE_EQ(g.value[k], g.value[k + 3]);
    EXPECT_DOUBLE_EQ(g.value[k] + g.value[k + 3], inter[k]);
  }
}
