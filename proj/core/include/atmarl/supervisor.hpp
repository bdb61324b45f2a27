#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atmarl/agents.hpp"
#include "atmarl/nn.hpp"

namespace atmarl::supervisor {

using nn::Mat;
using nn::Vec;

struct GlobalIntent {
  emulator::KpiKind kind = emulator::KpiKind::kQoE;
  double target = 0.0;
};

std::vector<GlobalIntent> intents_of(const std::vector<emulator::ServiceSpec>& services);
Vec normalized_targets(std::span<const GlobalIntent> intents);

// Relative shortfall (QoE) or excess (packet loss) of one KPI.
double intent_deviation(double kpi, const GlobalIntent& intent);
bool all_met(const emulator::KpiReport& report, std::span<const GlobalIntent> intents);

// -sum of deviations, or +1 when every intent is met.
double supervisor_reward(const emulator::KpiReport& report, std::span<const GlobalIntent> intents);

// What the supervisor sees of one agent at one step.
struct AgentTuple {
  Vec capability;  // one rho per goal level
  agents::AgentObservation observation;
  agents::KnobAction action = agents::KnobAction::kHold;
  double goal = 0.0;  // normalized
};

inline constexpr int kObservationSize = 4;

struct PolicyShape {
  int agents = 6;
  int heads = 6;  // one per agent, or one per intent for service-level goals
  int intents = 3;
  int levels = agents::kGoalLevels;
  int encoder = 32;
  int merger = 32;
  int fusion = 64;
  int hidden = 64;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

struct Hidden {
  Vec h1;
  Vec h2;
};

class SupervisorPolicy {
 public:
  struct AgentCache {
    nn::Dense::Cache enc1, enc2, merger;
  };
  struct StepCache {
    std::vector<AgentCache> agents;
    nn::Dense::Cache fuse1, fuse2, fuse3;
    nn::GruCell::Cache gru1, gru2;
    std::vector<nn::Dense::Cache> heads;
    nn::Dense::Cache critic1, critic2;
  };
  struct StepOutput {
    std::vector<Vec> logits;  // per head
    double value = 0.0;
    Vec context;
  };

  SupervisorPolicy() = default;
  SupervisorPolicy(const PolicyShape& shape, std::uint64_t seed);

  const PolicyShape& shape() const { return shape_; }
  Hidden initial_hidden() const;

  Vec encode(int agent, const Vec& capability, AgentCache* cache = nullptr) const;
  Vec merge(int agent, const Vec& latent, const AgentTuple& tuple, AgentCache* cache = nullptr) const;
  Vec fuse(std::span<const Vec> embeddings, const Vec& targets, StepCache* cache = nullptr) const;

  // Context -> GRU -> heads, plus the critic on the same context.
  StepOutput forward(std::span<const AgentTuple> tuples, const Vec& targets, Hidden& hidden,
                     StepCache* cache = nullptr) const;

  nn::ParameterList parameters();

  // Parameter blocks in a fixed order, for checkpoints.
  std::vector<const nn::Parameter*> blocks() const;

  struct StepGrad {
    std::vector<Vec> logits;
    double value = 0.0;
  };
  // BPTT over an episode given per-step gradients on logits and value.
  void backward(std::span<const StepCache> caches, std::span<const StepGrad> grads);

 private:
  PolicyShape shape_;
  std::vector<nn::Dense> enc1_, enc2_, merger_;
  nn::Dense fuse1_, fuse2_, fuse3_;
  nn::GruCell gru1_, gru2_;
  std::vector<nn::Dense> heads_;
  nn::Dense critic1_, critic2_;
};

Vec merger_input(const Vec& latent, const AgentTuple& tuple);

struct LossConfig {
  double entropy_coef = 0.01;
  double value_coef = 0.5;
};

struct LossTerms {
  double actor = 0.0;
  double entropy = 0.0;
  double critic = 0.0;
  double total = 0.0;
};

// One recorded step of an episode.
struct StepInput {
  std::vector<AgentTuple> tuples;
  std::vector<int> actions;  // chosen level per head
};

// Forward + backward through an episode with fixed actions, advantages and
// returns. Accumulates gradients into the policy and returns the loss.
LossTerms episode_loss(SupervisorPolicy& policy, std::span<const StepInput> steps, const Vec& targets,
                       std::span<const double> advantages, std::span<const double> returns,
                       const LossConfig& config, bool accumulate_grads = true);

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// Online supervisor state: capability vectors and the previous step's
// goals/actions needed to build agent tuples.
struct SupervisorMemory {
  std::vector<agents::CapabilityVector> capabilities;
  agents::GoalAssignment goals;
  std::vector<agents::KnobAction> actions;
};

// kAgentLevel: one head per agent. kServiceLevel: one head per intent,
// broadcast to both systems. kHalving: service-level goal split in two equal
// halves, one per system.
enum class GoalMode { kAgentLevel, kServiceLevel, kHalving };

int head_count(GoalMode mode, std::size_t num_intents);

// Maps chosen levels per head to one goal per agent.
agents::GoalAssignment decode_goals(std::span<const int> levels, const agents::TeamEnv& env,
                                    GoalMode mode);

std::vector<AgentTuple> build_tuples(const agents::TeamEnv& env, const SupervisorMemory& memory);

SupervisorMemory initial_memory(const agents::TeamEnv& env,
                                const std::vector<agents::CapabilityVector>& capabilities);

// Tracks per-agent goal attempts so capabilities can be refreshed online.
class CapabilityTracker {
 public:
  CapabilityTracker(std::size_t agents, int horizon);
  void observe(const agents::TeamEnv& env, const agents::GoalAssignment& goals,
               std::vector<agents::CapabilityVector>& capabilities);

 private:
  struct Attempt {
    int level = -1;
    int age = 0;
    bool done = false;
  };
  std::vector<Attempt> attempts_;
  int horizon_;
};

struct TrainConfig {
  int episodes = 400;
  int episode_length = 40;
  double gamma = 0.95;
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  LossConfig loss;
  double max_grad_norm = 5.0;
  int patience = 100;
  GoalMode mode = GoalMode::kAgentLevel;
  std::uint64_t seed = 11;
  std::optional<emulator::ControlVector> initial_controls;
};

struct TrainReport {
  std::vector<double> episode_rewards;
  int first_solved_episode = -1;  // first episode with >= 5 consecutive all-met steps
  bool diverged = false;
  std::string diagnostics;
};

// Episodic advantage actor-critic. Both MARL systems stay frozen.
TrainReport train_supervisor(SupervisorPolicy& policy, agents::TeamEnv& env,
                             std::vector<agents::CapabilityVector>& capabilities,
                             const TrainConfig& config);

// Longest run of consecutive steps with every intent met.
int longest_met_run(std::span<const std::uint8_t> met);

}  // namespace atmarl::supervisor
