#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atmarl/agents.hpp"
#include "atmarl/baselines.hpp"
#include "atmarl/metrics.hpp"
#include "atmarl/supervisor.hpp"

namespace atmarl::harness {

enum class Approach { kATMARL, kRuleBased, kNaiveParallel, kGoalHalving, kOracle };

std::string_view to_string(Approach approach);
Approach parse_approach(std::string_view text);  // throws emulator::ConfigError

struct ShiftEvent {
  int timestep = 0;
  emulator::DistributionSpec distribution;
};

struct TraceRow {
  int t = 0;
  std::vector<double> kpi;
  std::vector<double> goal;
  std::vector<int> knob;
  double reward = 0.0;
  bool active_priority = false;
  bool active_mbr = false;
  emulator::DistributionKind distribution = emulator::DistributionKind::kUniform;
};

struct EpisodeTrace {
  std::vector<std::string> kpi_names;    // per intent
  std::vector<std::string> agent_names;  // per roster slot
  std::vector<TraceRow> rows;

  metrics::KpiSeries series(std::size_t intent, const std::vector<supervisor::GlobalIntent>& intents) const;
};

// Decides goals and which systems may act, one step at a time.
class Controller {
 public:
  struct Decision {
    agents::GoalAssignment goals;
    agents::ActiveSystems active;
  };

  virtual ~Controller() = default;
  virtual void reset(const agents::TeamEnv& env) = 0;
  virtual Decision decide(const agents::TeamEnv& env, int t) = 0;
  virtual void observe(const agents::TeamEnv& env, const Decision& decision, const agents::TeamStep& step);
};

std::unique_ptr<Controller> make_rule_based(int switch_period = 5);
std::unique_ptr<Controller> make_naive_parallel();
// Greedy evaluation of a trained policy; capability vectors stay frozen.
std::unique_ptr<Controller> make_supervised(const supervisor::SupervisorPolicy& policy,
                                            std::vector<agents::CapabilityVector> capabilities,
                                            supervisor::GoalMode mode);

// Runs one episode from reset. Shifts take effect at the step they name, so
// row t already reflects a shift scheduled at t. Every step's allocation is
// checked for capacity conservation; a violation throws std::logic_error.
EpisodeTrace run_episode(agents::TeamEnv& env, Controller& controller, int length,
                         const std::vector<ShiftEvent>& shifts, std::uint64_t seed);

struct KpiMetrics {
  std::optional<double> iae;
  std::optional<std::size_t> convergence;
  double oscillation = 0.0;
};

// The oscillation window starts half way through the episode.
KpiMetrics kpi_metrics(const EpisodeTrace& trace, std::size_t intent,
                       const std::vector<supervisor::GlobalIntent>& intents);

}  // namespace atmarl::harness
