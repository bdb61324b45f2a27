#include "atmarl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace atmarl::agents {

using emulator::kMaxPriority;
using emulator::kMbrLadder;
using emulator::kMinPriority;
using emulator::kQoeMax;
using emulator::kQoeMin;

std::string_view to_string(System system) {
  return system == System::kPriority ? "priority" : "mbr";
}

std::vector<AgentId> roster(std::size_t num_intents) {
  std::vector<AgentId> out;
  out.reserve(2 * num_intents);
  for (System s : kSystems) {
    for (std::size_t k = 0; k < num_intents; ++k) out.push_back({s, static_cast<int>(k)});
  }
  return out;
}

std::size_t agent_slot(AgentId id, std::size_t num_intents) {
  return static_cast<std::size_t>(id.system) * num_intents + static_cast<std::size_t>(id.intent_index);
}

std::string agent_label(AgentId id, const std::vector<emulator::ServiceSpec>& services) {
  if (id.intent_index < 0 || static_cast<std::size_t>(id.intent_index) >= services.size()) {
    throw UnknownAgentError("agent intent index out of range");
  }
  return std::string(id.system == System::kPriority ? "prio_" : "mbr_") +
         services[id.intent_index].label;
}

double normalize_kpi(double kpi, KpiKind kind) {
  const double v = kind == KpiKind::kQoE ? (kpi - kQoeMin) / (kQoeMax - kQoeMin) : kpi / kPlScale;
  return std::clamp(v, 0.0, kObservationCap);
}

double goal_value(int level, KpiKind kind) {
  const double frac = static_cast<double>(level) / (kGoalLevels - 1);
  return kind == KpiKind::kQoE ? kQoeMin + (kQoeMax - kQoeMin) * frac : kPlScale * frac;
}

double normalize_goal(double goal, KpiKind kind) { return normalize_kpi(goal, kind); }

int nearest_goal_level(double goal, KpiKind kind) {
  const double frac = kind == KpiKind::kQoE ? (goal - kQoeMin) / (kQoeMax - kQoeMin) : goal / kPlScale;
  return std::clamp(static_cast<int>(std::lround(frac * (kGoalLevels - 1))), 0, kGoalLevels - 1);
}

double goal_bin_width(KpiKind kind) {
  return (kind == KpiKind::kQoE ? kQoeMax - kQoeMin : kPlScale) / (kGoalLevels - 1);
}

int knob_level(AgentId id, const ControlVector& controls) {
  const auto k = static_cast<std::size_t>(id.intent_index);
  return id.system == System::kPriority ? controls.priority.at(k) - kMinPriority
                                        : controls.mbr_level.at(k);
}

int knob_level_count(System system) {
  return system == System::kPriority ? kMaxPriority - kMinPriority + 1
                                     : static_cast<int>(kMbrLadder.size());
}

double normalized_knob(AgentId id, const ControlVector& controls) {
  return static_cast<double>(knob_level(id, controls)) / (knob_level_count(id.system) - 1);
}

void apply_action(AgentId id, KnobAction action, ControlVector& controls) {
  const int delta = static_cast<int>(action) - 1;
  const auto k = static_cast<std::size_t>(id.intent_index);
  if (id.system == System::kPriority) {
    controls.priority.at(k) = std::clamp(controls.priority[k] + delta, kMinPriority, kMaxPriority);
  } else {
    controls.mbr_level.at(k) =
        std::clamp(controls.mbr_level[k] + delta, 0, static_cast<int>(kMbrLadder.size()) - 1);
  }
}

AgentObservation observe(const NetworkState& state, const KpiReport& report, AgentId agent,
                         double goal) {
  if (agent.intent_index < 0 || static_cast<std::size_t>(agent.intent_index) >= state.services.size() ||
      report.kpi.size() != state.services.size()) {
    throw UnknownAgentError("no intent " + std::to_string(agent.intent_index) + " in scenario");
  }
  const auto& service = state.services[agent.intent_index];
  AgentObservation obs;
  obs.kpi = normalize_kpi(report.kpi[agent.intent_index], service.kpi_kind());
  obs.knob = normalized_knob(agent, state.controls);
  obs.goal = normalize_goal(goal, service.kpi_kind());
  obs.congestion = std::clamp(report.congestion(), 0.0, kObservationCap);
  return obs;
}

double agent_reward(double kpi, double goal, KpiKind kind) {
  if (kind == KpiKind::kQoE) {
    return -std::abs((kpi - goal) / (kQoeMax - kQoeMin));
  }
  return kpi <= goal ? 0.0 : -(kpi - goal) / kPlScale;
}

bool goal_achieved(double kpi, double goal, KpiKind kind) {
  if (kind == KpiKind::kQoE) return std::abs(kpi - goal) <= goal_bin_width(kind);
  return kpi <= goal;
}

QTable::QTable() : values_(static_cast<std::size_t>(kStates) * kNumActions, 0.0) {}

int QTable::state_index(const AgentObservation& obs) {
  auto bin = [](double v) { return std::clamp(static_cast<int>(std::floor(v * kBins)), 0, kBins - 1); };
  return ((bin(obs.kpi) * kBins + bin(obs.knob)) * kBins + bin(obs.goal)) * kBins + bin(obs.congestion);
}

KnobAction QTable::greedy(const AgentObservation& obs) const {
  const auto q = values(state_index(obs));
  const double best = *std::max_element(q.begin(), q.end());
  if (q[static_cast<int>(KnobAction::kHold)] == best) return KnobAction::kHold;
  return q[0] == best ? KnobAction::kDecrement : KnobAction::kIncrement;
}

KnobAction QTable::select(const AgentObservation& obs, bool explore, Rng& rng) const {
  if (explore && rng.uniform() < exploration) {
    return static_cast<KnobAction>(rng.below(kNumActions));
  }
  return greedy(obs);
}

void QTable::update(const AgentObservation& obs, KnobAction action, double reward,
                    const AgentObservation& next) {
  const auto nq = values(state_index(next));
  const double target = reward + discount * *std::max_element(nq.begin(), nq.end());
  double& q = values_[state_index(obs) * kNumActions + static_cast<int>(action)];
  q += learning_rate * (target - q);
}

PretrainResult pretrain_system(System system, const ScenarioConfig& scenario,
                               const PretrainConfig& config) {
  const std::size_t k = scenario.num_services();
  PretrainResult result;
  result.system.system = system;
  result.system.tables.resize(k);
  for (auto& t : result.system.tables) {
    t.learning_rate = config.learning_rate;
    t.discount = config.discount;
  }

  Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(system)));
  const NetworkState initial = emulator::init_scenario(scenario);
  const ControlVector frozen_defaults = initial.controls;

  std::vector<AgentId> ids;
  for (std::size_t i = 0; i < k; ++i) ids.push_back({system, static_cast<int>(i)});

  double tail_reward = 0.0;
  long tail_samples = 0;
  const int tail_start = config.episodes - std::max(1, config.episodes / 10);

  for (int episode = 0; episode < config.episodes; ++episode) {
    const double progress =
        config.episodes > 1 ? static_cast<double>(episode) / (config.episodes - 1) : 1.0;
    const double eps = config.exploration_start +
                       (config.exploration_end - config.exploration_start) * progress;
    for (auto& t : result.system.tables) t.exploration = eps;

    NetworkState state = initial;
    // Own knobs start anywhere on the ladder; the other system stays at its
    // defaults for the whole run.
    for (const auto& id : ids) {
      const int level = static_cast<int>(rng.below(static_cast<std::uint64_t>(knob_level_count(system))));
      if (system == System::kPriority) {
        state.controls.priority[id.intent_index] = kMinPriority + level;
      } else {
        state.controls.mbr_level[id.intent_index] = level;
      }
    }
    std::vector<int> goal_levels(k);
    std::vector<double> goals(k);
    for (std::size_t i = 0; i < k; ++i) {
      goal_levels[i] = static_cast<int>(rng.below(kGoalLevels));
      goals[i] = goal_value(goal_levels[i], scenario.services[i].kpi_kind());
    }

    KpiReport report = emulator::advance(state, rng);
    std::vector<int> first_hit(k, -1);
    for (std::size_t i = 0; i < k; ++i) {
      if (goal_achieved(report.kpi[i], goals[i], scenario.services[i].kpi_kind())) first_hit[i] = 0;
    }

    for (int t = 1; t <= config.episode_length; ++t) {
      std::vector<AgentObservation> obs(k);
      std::vector<KnobAction> actions(k);
      for (std::size_t i = 0; i < k; ++i) {
        obs[i] = observe(state, report, ids[i], goals[i]);
        actions[i] = result.system.tables[i].select(obs[i], true, rng);
      }
      for (std::size_t i = 0; i < k; ++i) apply_action(ids[i], actions[i], state.controls);
      report = emulator::advance(state, rng);
      for (std::size_t i = 0; i < k; ++i) {
        const auto kind = scenario.services[i].kpi_kind();
        const double r = agent_reward(report.kpi[i], goals[i], kind);
        const AgentObservation next = observe(state, report, ids[i], goals[i]);
        result.system.tables[i].update(obs[i], actions[i], r, next);
        if (first_hit[i] < 0 && goal_achieved(report.kpi[i], goals[i], kind)) first_hit[i] = t;
        if (episode >= tail_start) {
          tail_reward += r;
          ++tail_samples;
        }
      }
    }
    // The other system's knobs must come back untouched.
    for (std::size_t i = 0; i < k; ++i) {
      const bool untouched = system == System::kPriority
                                 ? state.controls.mbr_level[i] == frozen_defaults.mbr_level[i]
                                 : state.controls.priority[i] == frozen_defaults.priority[i];
      if (!untouched) throw std::logic_error("pretraining moved the frozen system's knobs");
    }
    for (std::size_t i = 0; i < k; ++i) {
      result.logs.push_back({system, static_cast<int>(i), goal_levels[i],
                             first_hit[i] >= 0 && first_hit[i] <= config.horizon, episode,
                             first_hit[i]});
    }
  }
  for (auto& t : result.system.tables) t.exploration = config.exploration_end;
  result.final_mean_reward = tail_samples > 0 ? tail_reward / tail_samples : 0.0;
  result.converged = result.final_mean_reward >= config.min_mean_reward;
  return result;
}

void write_pretrain_log(std::ostream& out, std::span<const PretrainLogRow> rows) {
  out << "agent_system,intent_index,goal_level,achieved,episode,steps_taken\n";
  for (const auto& r : rows) {
    out << to_string(r.system) << ',' << r.intent_index << ',' << r.goal_level << ','
        << (r.achieved ? 1 : 0) << ',' << r.episode << ',' << r.steps_taken << '\n';
  }
}

std::vector<PretrainLogRow> read_pretrain_log(std::istream& in) {
  std::vector<PretrainLogRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) throw std::runtime_error("malformed pretraining log row: " + line);
    PretrainLogRow r;
    if (f[0] == "priority") {
      r.system = System::kPriority;
    } else if (f[0] == "mbr") {
      r.system = System::kMbr;
    } else {
      throw std::runtime_error("unknown agent_system '" + f[0] + "'");
    }
    r.intent_index = std::stoi(f[1]);
    r.goal_level = std::stoi(f[2]);
    r.achieved = f[3] == "1";
    r.episode = std::stoi(f[4]);
    r.steps_taken = std::stoi(f[5]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<CapabilityVector> estimate_capabilities(std::span<const PretrainLogRow> logs,
                                                    std::size_t num_intents, int levels,
                                                    int horizon) {
  const std::size_t agents = 2 * num_intents;
  std::vector<std::vector<int>> successes(agents, std::vector<int>(levels, 0));
  std::vector<std::vector<int>> attempts(agents, std::vector<int>(levels, 0));
  for (const auto& row : logs) {
    if (row.intent_index < 0 || static_cast<std::size_t>(row.intent_index) >= num_intents ||
        row.goal_level < 0 || row.goal_level >= levels) {
      continue;
    }
    const std::size_t slot = agent_slot({row.system, row.intent_index}, num_intents);
    ++attempts[slot][row.goal_level];
    if (row.achieved && row.steps_taken >= 0 && row.steps_taken <= horizon) {
      ++successes[slot][row.goal_level];
    }
  }
  std::vector<CapabilityVector> out(agents);
  for (std::size_t a = 0; a < agents; ++a) {
    out[a].rho.resize(levels);
    out[a].missing.resize(levels);
    for (int p = 0; p < levels; ++p) {
      if (attempts[a][p] == 0) {
        out[a].rho[p] = kCapabilityPrior;
        out[a].missing[p] = true;
      } else {
        out[a].rho[p] = static_cast<double>(successes[a][p]) / attempts[a][p];
      }
    }
  }
  return out;
}

void ema_update(CapabilityVector& capability, int level, bool success, double factor) {
  double& rho = capability.rho.at(static_cast<std::size_t>(level));
  rho = std::clamp((1.0 - factor) * rho + factor * (success ? 1.0 : 0.0), 0.0, 1.0);
  capability.missing[static_cast<std::size_t>(level)] = false;
}

TeamEnv::TeamEnv(const ScenarioConfig& scenario, const MarlSystem& priority, const MarlSystem& mbr)
    : initial_(emulator::init_scenario(scenario)),
      state_(initial_),
      priority_(priority),
      mbr_(mbr),
      roster_(roster(scenario.num_services())) {
  if (priority.tables.size() != scenario.num_services() ||
      mbr.tables.size() != scenario.num_services()) {
    throw std::invalid_argument("MARL system size does not match the scenario's intents");
  }
}

void TeamEnv::reset(std::uint64_t seed, const std::optional<ControlVector>& controls) {
  state_ = initial_;
  if (controls) {
    controls->validate(state_.services.size());
    state_.controls = *controls;
  }
  rng_.reseed(seed);
  report_ = emulator::advance(state_, rng_);
}

AgentObservation TeamEnv::observation(AgentId id, double goal) const {
  return observe(state_, report_, id, goal);
}

TeamStep TeamEnv::step(const GoalAssignment& goals, ActiveSystems active) {
  if (goals.size() != roster_.size()) {
    throw std::invalid_argument("goal assignment must hold one goal per agent");
  }
  TeamStep out;
  out.actions.assign(roster_.size(), KnobAction::kHold);
  // Every agent decides on the same observation before any knob moves.
  for (std::size_t a = 0; a < roster_.size(); ++a) {
    const AgentId id = roster_[a];
    if (!active[id.system]) continue;
    const QTable& table = system(id.system).tables[id.intent_index];
    out.actions[a] = table.greedy(observation(id, goals.value[a]));
  }
  for (std::size_t a = 0; a < roster_.size(); ++a) {
    apply_action(roster_[a], out.actions[a], state_.controls);
  }
  report_ = emulator::advance(state_, rng_);
  out.report = report_;
  return out;
}

void TeamEnv::set_distribution(const emulator::DistributionSpec& spec) {
  state_ = emulator::set_distribution(state_, spec);
}

}  // namespace atmarl::agents
