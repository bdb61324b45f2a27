#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atmarl/emulator.hpp"
#include "atmarl/rng.hpp"

namespace atmarl::agents {

using emulator::ControlVector;
using emulator::KpiKind;
using emulator::KpiReport;
using emulator::NetworkState;
using emulator::ScenarioConfig;

// Number of discrete goal levels per KPI.
inline constexpr int kGoalLevels = 8;
// Packet loss is observed and targeted on [0, kPlScale] percent.
inline constexpr double kPlScale = 7.0;
inline constexpr double kObservationCap = 1.5;

enum class System { kPriority = 0, kMbr = 1 };
inline constexpr std::array<System, 2> kSystems{System::kPriority, System::kMbr};

std::string_view to_string(System system);

struct AgentId {
  System system = System::kPriority;
  int intent_index = 0;

  friend bool operator==(const AgentId&, const AgentId&) = default;
};

// All Priority agents (one per intent) followed by all MBR agents.
std::vector<AgentId> roster(std::size_t num_intents);
std::size_t agent_slot(AgentId id, std::size_t num_intents);
std::string agent_label(AgentId id, const std::vector<emulator::ServiceSpec>& services);

// KPI scales. Goal levels quantize the KPI range uniformly.
double normalize_kpi(double kpi, KpiKind kind);
double goal_value(int level, KpiKind kind);
double normalize_goal(double goal, KpiKind kind);
int nearest_goal_level(double goal, KpiKind kind);
double goal_bin_width(KpiKind kind);

struct AgentObservation {
  double kpi = 0.0;
  double knob = 0.0;
  double goal = 0.0;
  double congestion = 0.0;
};

enum class KnobAction { kDecrement = 0, kHold = 1, kIncrement = 2 };
inline constexpr int kNumActions = 3;

int knob_level(AgentId id, const ControlVector& controls);
int knob_level_count(System system);
double normalized_knob(AgentId id, const ControlVector& controls);

// Moves the agent's own knob one rung, saturating at the ends of its ladder.
void apply_action(AgentId id, KnobAction action, ControlVector& controls);

class UnknownAgentError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

AgentObservation observe(const NetworkState& state, const KpiReport& report, AgentId agent,
                         double goal);

// Goal-conditioned incentive: distance to goal on the normalized scale for
// QoE, one-sided excess for packet loss.
double agent_reward(double kpi, double goal, KpiKind kind);

// QoE counts as achieved within one goal-level of the target; packet loss
// when at or below it.
bool goal_achieved(double kpi, double goal, KpiKind kind);

class QTable {
 public:
  static constexpr int kBins = 8;
  static constexpr int kFields = 4;
  static constexpr int kStates = kBins * kBins * kBins * kBins;

  QTable();

  static int state_index(const AgentObservation& obs);

  std::span<const double, kNumActions> values(int state) const {
    return std::span<const double, kNumActions>(values_.data() + state * kNumActions, kNumActions);
  }

  // Greedy action; exact ties go to hold.
  KnobAction greedy(const AgentObservation& obs) const;
  KnobAction select(const AgentObservation& obs, bool explore, Rng& rng) const;
  void update(const AgentObservation& obs, KnobAction action, double reward,
              const AgentObservation& next);

  double learning_rate = 0.1;
  double discount = 0.9;
  double exploration = 1.0;

  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::vector<double> values_;
};

// One pre-trained MARL system: a Q-table per intent, all acting on the same
// kind of knob.
struct MarlSystem {
  System system = System::kPriority;
  std::vector<QTable> tables;

  friend bool operator==(const MarlSystem&, const MarlSystem&) = default;
};

struct PretrainConfig {
  int episodes = 3000;
  int episode_length = 16;
  int horizon = 5;
  double learning_rate = 0.1;
  double discount = 0.9;
  double exploration_start = 1.0;
  double exploration_end = 0.05;
  // Mean per-step reward over the last tenth of training must reach this.
  double min_mean_reward = -0.2;
  std::uint64_t seed = 7;
};

struct PretrainLogRow {
  System system = System::kPriority;
  int intent_index = 0;
  int goal_level = 0;
  bool achieved = false;
  int episode = 0;
  int steps_taken = -1;  // first step at which the goal held, -1 if never
};

struct PretrainResult {
  MarlSystem system;
  std::vector<PretrainLogRow> logs;
  double final_mean_reward = 0.0;
  bool converged = false;
};

PretrainResult pretrain_system(System system, const ScenarioConfig& scenario,
                               const PretrainConfig& config);

void write_pretrain_log(std::ostream& out, std::span<const PretrainLogRow> rows);
std::vector<PretrainLogRow> read_pretrain_log(std::istream& in);

struct CapabilityVector {
  std::vector<double> rho;  // one probability per goal level
  std::vector<bool> missing;  // level had no pretraining data
};

inline constexpr double kCapabilityEma = 0.05;
inline constexpr double kCapabilityPrior = 0.5;

// Success rate per (agent, goal level), one vector per roster slot.
std::vector<CapabilityVector> estimate_capabilities(std::span<const PretrainLogRow> logs,
                                                    std::size_t num_intents, int levels,
                                                    int horizon);

void ema_update(CapabilityVector& capability, int level, bool success,
                double factor = kCapabilityEma);

// Per-agent goals for one timestep. Values live in KPI space; `level` is the
// goal-ladder index when the value came from the ladder, -1 otherwise.
struct GoalAssignment {
  std::vector<double> value;
  std::vector<int> level;

  std::size_t size() const { return value.size(); }
};

// Which systems may move their knobs this step.
struct ActiveSystems {
  bool priority = true;
  bool mbr = true;

  bool operator[](System s) const { return s == System::kPriority ? priority : mbr; }
};

struct TeamStep {
  KpiReport report;
  std::vector<KnobAction> actions;  // per roster slot, hold when inactive
};

// The slice plus both frozen MARL systems. The supervisor acts on it only
// through goal assignments.
class TeamEnv {
 public:
  TeamEnv(const ScenarioConfig& scenario, const MarlSystem& priority, const MarlSystem& mbr);

  // Resets to default controls (or the given ones) and measures once.
  void reset(std::uint64_t seed, const std::optional<ControlVector>& controls = std::nullopt);

  TeamStep step(const GoalAssignment& goals, ActiveSystems active);

  void set_distribution(const emulator::DistributionSpec& spec);

  const NetworkState& state() const { return state_; }
  const KpiReport& last_report() const { return report_; }
  const std::vector<AgentId>& agents() const { return roster_; }
  std::size_t num_intents() const { return state_.services.size(); }
  const MarlSystem& system(System s) const { return s == System::kPriority ? priority_ : mbr_; }

  AgentObservation observation(AgentId id, double goal) const;

 private:
  NetworkState initial_;
  NetworkState state_;
  KpiReport report_;
  const MarlSystem& priority_;
  const MarlSystem& mbr_;
  std::vector<AgentId> roster_;
  Rng rng_;
};

}  // namespace atmarl::agents
