#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "atmarl/agents.hpp"

namespace atmarl::baselines {

enum class BaselineKind { kRuleBased, kNaiveParallel, kGoalHalving };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kRuleBased;
  int switch_period = 5;  // rule-based only
};

// Sequential switching: Priority runs while floor(t / period) is even, MBR
// while it is odd.
agents::System rule_based_select(int t, int period = 5);
agents::ActiveSystems rule_based_active(int t, int period = 5);

// Every agent receives its intent's global target.
agents::GoalAssignment naive_parallel_goals(const std::vector<emulator::ServiceSpec>& services);

// Splits each intent's intermediate goal into two equal halves, one for the
// Priority-side agent and one for the MBR-side agent.
agents::GoalAssignment goal_halving(std::span<const double> intermediate);

}  // namespace atmarl::baselines
