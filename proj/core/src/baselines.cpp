#include "atmarl/baselines.hpp"

namespace atmarl::baselines {

agents::System rule_based_select(int t, int period) {
  if (period < 1) throw std::invalid_argument("switch period must be >= 1");
  if (t < 0) throw std::invalid_argument("timestep must be >= 0");
  return (t / period) % 2 == 0 ? agents::System::kPriority : agents::System::kMbr;
}

agents::ActiveSystems rule_based_active(int t, int period) {
  const auto s = rule_based_select(t, period);
  return {s == agents::System::kPriority, s == agents::System::kMbr};
}

agents::GoalAssignment naive_parallel_goals(const std::vector<emulator::ServiceSpec>& services) {
  agents::GoalAssignment goals;
  for (std::size_t rep = 0; rep < agents::kSystems.size(); ++rep) {
    for (const auto& s : services) {
      goals.value.push_back(s.kpi_target);
      goals.level.push_back(-1);
    }
  }
  return goals;
}

agents::GoalAssignment goal_halving(std::span<const double> intermediate) {
  agents::GoalAssignment goals;
  for (std::size_t rep = 0; rep < agents::kSystems.size(); ++rep) {
    for (double g : intermediate) {
      goals.value.push_back(0.5 * g);
      goals.level.push_back(-1);
    }
  }
  return goals;
}

}  // namespace atmarl::baselines
