#include "atmarl/harness.hpp"

#include <algorithm>
#include <stdexcept>

namespace atmarl::harness {
namespace {

constexpr std::array<std::pair<Approach, std::string_view>, 5> kApproachNames{{
    {Approach::kATMARL, "atmarl"},
    {Approach::kRuleBased, "rule_based"},
    {Approach::kNaiveParallel, "naive_parallel"},
    {Approach::kGoalHalving, "goal_halving"},
    {Approach::kOracle, "oracle"},
}};

class RuleBased final : public Controller {
 public:
  explicit RuleBased(int period) : period_(period) {
    if (period < 1) throw std::invalid_argument("switch period must be >= 1");
  }
  void reset(const agents::TeamEnv& env) override {
    goals_ = baselines::naive_parallel_goals(env.state().services);
  }
  Decision decide(const agents::TeamEnv&, int t) override {
    return {goals_, baselines::rule_based_active(t, period_)};
  }

 private:
  int period_;
  agents::GoalAssignment goals_;
};

class NaiveParallel final : public Controller {
 public:
  void reset(const agents::TeamEnv& env) override {
    goals_ = baselines::naive_parallel_goals(env.state().services);
  }
  Decision decide(const agents::TeamEnv&, int) override { return {goals_, {true, true}}; }

 private:
  agents::GoalAssignment goals_;
};

class Supervised final : public Controller {
 public:
  Supervised(const supervisor::SupervisorPolicy& policy, std::vector<agents::CapabilityVector> caps,
             supervisor::GoalMode mode)
      : policy_(policy), capabilities_(std::move(caps)), mode_(mode) {}

  void reset(const agents::TeamEnv& env) override {
    memory_ = supervisor::initial_memory(env, capabilities_);
    hidden_ = policy_.initial_hidden();
    targets_ = supervisor::normalized_targets(supervisor::intents_of(env.state().services));
  }

  Decision decide(const agents::TeamEnv& env, int) override {
    const auto tuples = supervisor::build_tuples(env, memory_);
    const auto out = policy_.forward(tuples, targets_, hidden_);
    std::vector<int> levels(out.logits.size());
    for (std::size_t h = 0; h < levels.size(); ++h) levels[h] = nn::argmax(out.logits[h]);
    return {supervisor::decode_goals(levels, env, mode_), {true, true}};
  }

  void observe(const agents::TeamEnv&, const Decision& decision, const agents::TeamStep& step) override {
    memory_.goals = decision.goals;
    memory_.actions = step.actions;
  }

 private:
  const supervisor::SupervisorPolicy& policy_;
  std::vector<agents::CapabilityVector> capabilities_;
  supervisor::GoalMode mode_;
  supervisor::SupervisorMemory memory_;
  supervisor::Hidden hidden_;
  nn::Vec targets_;
};

}  // namespace

std::string_view to_string(Approach approach) {
  for (const auto& [a, name] : kApproachNames) {
    if (a == approach) return name;
  }
  return "unknown";
}

Approach parse_approach(std::string_view text) {
  for (const auto& [a, name] : kApproachNames) {
    if (name == text) return a;
  }
  throw emulator::ConfigError("unknown approach '" + std::string(text) + "'");
}

metrics::KpiSeries EpisodeTrace::series(std::size_t intent,
                                        const std::vector<supervisor::GlobalIntent>& intents) const {
  metrics::KpiSeries s;
  s.target = intents.at(intent).target;
  s.direction = intents[intent].kind == emulator::KpiKind::kQoE ? metrics::Direction::kMaximize
                                                                : metrics::Direction::kMinimize;
  s.values.reserve(rows.size());
  for (const auto& r : rows) s.values.push_back(r.kpi.at(intent));
  return s;
}

void Controller::observe(const agents::TeamEnv&, const Decision&, const agents::TeamStep&) {}

std::unique_ptr<Controller> make_rule_based(int switch_period) {
  return std::make_unique<RuleBased>(switch_period);
}

std::unique_ptr<Controller> make_naive_parallel() { return std::make_unique<NaiveParallel>(); }

std::unique_ptr<Controller> make_supervised(const supervisor::SupervisorPolicy& policy,
                                            std::vector<agents::CapabilityVector> capabilities,
                                            supervisor::GoalMode mode) {
  return std::make_unique<Supervised>(policy, std::move(capabilities), mode);
}

EpisodeTrace run_episode(agents::TeamEnv& env, Controller& controller, int length,
                         const std::vector<ShiftEvent>& shifts, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("episode length must be >= 1");
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (shifts[i].timestep < 0 || shifts[i].timestep >= length ||
        (i > 0 && shifts[i].timestep <= shifts[i - 1].timestep)) {
      throw std::invalid_argument("shift timesteps must be strictly increasing and inside the episode");
    }
  }
  env.reset(seed);
  controller.reset(env);
  const auto& services = env.state().services;
  const auto intents = supervisor::intents_of(services);

  EpisodeTrace trace;
  for (const auto& s : services) trace.kpi_names.push_back(s.label);
  for (const auto& id : env.agents()) trace.agent_names.push_back(agents::agent_label(id, services));
  trace.rows.reserve(static_cast<std::size_t>(length));

  std::size_t next_shift = 0;
  for (int t = 0; t < length; ++t) {
    const auto decision = controller.decide(env, t);
    if (next_shift < shifts.size() && shifts[next_shift].timestep == t) {
      env.set_distribution(shifts[next_shift++].distribution);
    }
    const auto step = env.step(decision.goals, decision.active);
    const auto& state = env.state();
    if (!emulator::conserves_capacity(step.report, state.controls, state.airlink_bandwidth)) {
      throw std::logic_error("capacity conservation violated at step " + std::to_string(t));
    }
    controller.observe(env, decision, step);

    TraceRow row;
    row.t = t;
    row.kpi = step.report.kpi;
    row.goal = decision.goals.value;
    for (const auto& id : env.agents()) row.knob.push_back(agents::knob_level(id, state.controls));
    row.reward = supervisor::supervisor_reward(step.report, intents);
    row.active_priority = decision.active.priority;
    row.active_mbr = decision.active.mbr;
    row.distribution = state.distribution.kind;
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

KpiMetrics kpi_metrics(const EpisodeTrace& trace, std::size_t intent,
                       const std::vector<supervisor::GlobalIntent>& intents) {
  const auto series = trace.series(intent, intents);
  KpiMetrics m;
  m.iae = metrics::iae(series);
  m.convergence = metrics::convergence_time(series);
  m.oscillation = metrics::oscillation_amplitude(series, series.values.size() / 2);
  return m;
}

}  // namespace atmarl::harness
