#include "atmarl/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace atmarl::supervisor {

using agents::KnobAction;
using emulator::KpiKind;

std::vector<GlobalIntent> intents_of(const std::vector<emulator::ServiceSpec>& services) {
  std::vector<GlobalIntent> out;
  out.reserve(services.size());
  for (const auto& s : services) out.push_back({s.kpi_kind(), s.kpi_target});
  return out;
}

Vec normalized_targets(std::span<const GlobalIntent> intents) {
  Vec v(static_cast<Eigen::Index>(intents.size()));
  for (std::size_t k = 0; k < intents.size(); ++k) {
    v(static_cast<Eigen::Index>(k)) = agents::normalize_goal(intents[k].target, intents[k].kind);
  }
  return v;
}

double intent_deviation(double kpi, const GlobalIntent& intent) {
  const double d = intent.kind == KpiKind::kQoE ? (intent.target - kpi) : (kpi - intent.target);
  return std::max(0.0, d / intent.target);
}

bool all_met(const emulator::KpiReport& report, std::span<const GlobalIntent> intents) {
  for (std::size_t k = 0; k < intents.size(); ++k) {
    if (intent_deviation(report.kpi.at(k), intents[k]) > 0.0) return false;
  }
  return true;
}

double supervisor_reward(const emulator::KpiReport& report, std::span<const GlobalIntent> intents) {
  double total = 0.0;
  for (std::size_t k = 0; k < intents.size(); ++k) total += intent_deviation(report.kpi.at(k), intents[k]);
  return total == 0.0 ? 1.0 : -total;
}

Vec merger_input(const Vec& latent, const AgentTuple& tuple) {
  Vec in(latent.size() + kObservationSize + agents::kNumActions + 1);
  in.head(latent.size()) = latent;
  Eigen::Index i = latent.size();
  in(i++) = tuple.observation.kpi;
  in(i++) = tuple.observation.knob;
  in(i++) = tuple.observation.goal;
  in(i++) = tuple.observation.congestion;
  for (int a = 0; a < agents::kNumActions; ++a) in(i++) = static_cast<int>(tuple.action) == a ? 1.0 : 0.0;
  in(i) = tuple.goal;
  return in;
}

SupervisorPolicy::SupervisorPolicy(const PolicyShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.agents < 1 || shape.heads < 1 || shape.intents < 1 || shape.levels < 2) {
    throw nn::ShapeError("invalid policy shape");
  }
  Rng rng(seed);
  using nn::Activation;
  const int merger_in = shape.encoder + kObservationSize + agents::kNumActions + 1;
  for (int i = 0; i < shape.agents; ++i) {
    const std::string p = "agent" + std::to_string(i);
    enc1_.emplace_back(p + ".enc1", shape.levels, shape.encoder, Activation::kTanh, rng);
    enc2_.emplace_back(p + ".enc2", shape.encoder, shape.encoder, Activation::kTanh, rng);
    merger_.emplace_back(p + ".merger", merger_in, shape.merger, Activation::kTanh, rng);
  }
  fuse1_ = nn::Dense("fuse1", shape.agents * shape.merger + shape.intents, shape.fusion, Activation::kTanh, rng);
  fuse2_ = nn::Dense("fuse2", shape.fusion, shape.fusion, Activation::kTanh, rng);
  fuse3_ = nn::Dense("fuse3", shape.fusion, shape.fusion, Activation::kTanh, rng);
  gru1_ = nn::GruCell("gru1", shape.fusion, shape.hidden, rng);
  gru2_ = nn::GruCell("gru2", shape.hidden, shape.hidden, rng);
  for (int h = 0; h < shape.heads; ++h) {
    heads_.emplace_back("head" + std::to_string(h), shape.hidden, shape.levels, Activation::kIdentity, rng);
  }
  critic1_ = nn::Dense("critic1", shape.fusion, shape.fusion, Activation::kTanh, rng);
  critic2_ = nn::Dense("critic2", shape.fusion, 1, Activation::kIdentity, rng);
}

Hidden SupervisorPolicy::initial_hidden() const {
  return {Vec::Zero(shape_.hidden), Vec::Zero(shape_.hidden)};
}

Vec SupervisorPolicy::encode(int agent, const Vec& capability, AgentCache* cache) const {
  if (agent < 0 || agent >= shape_.agents) throw nn::ShapeError("agent index out of range");
  if (capability.size() != shape_.levels) throw nn::ShapeError("capability vector has wrong length");
  const Vec h = enc1_[agent].forward(capability, cache ? &cache->enc1 : nullptr);
  return enc2_[agent].forward(h, cache ? &cache->enc2 : nullptr);
}

Vec SupervisorPolicy::merge(int agent, const Vec& latent, const AgentTuple& tuple, AgentCache* cache) const {
  if (agent < 0 || agent >= shape_.agents) throw nn::ShapeError("agent index out of range");
  return merger_[agent].forward(merger_input(latent, tuple), cache ? &cache->merger : nullptr);
}

Vec SupervisorPolicy::fuse(std::span<const Vec> embeddings, const Vec& targets, StepCache* cache) const {
  if (static_cast<int>(embeddings.size()) != shape_.agents) {
    throw nn::ShapeError("expected " + std::to_string(shape_.agents) + " embeddings, got " +
                         std::to_string(embeddings.size()));
  }
  if (targets.size() != shape_.intents) throw nn::ShapeError("target vector has wrong length");
  Vec in(shape_.agents * shape_.merger + shape_.intents);
  for (int i = 0; i < shape_.agents; ++i) {
    if (embeddings[i].size() != shape_.merger) throw nn::ShapeError("embedding has wrong length");
    in.segment(i * shape_.merger, shape_.merger) = embeddings[i];
  }
  in.tail(shape_.intents) = targets;
  Vec c = fuse1_.forward(in, cache ? &cache->fuse1 : nullptr);
  c = fuse2_.forward(c, cache ? &cache->fuse2 : nullptr);
  return fuse3_.forward(c, cache ? &cache->fuse3 : nullptr);
}

SupervisorPolicy::StepOutput SupervisorPolicy::forward(std::span<const AgentTuple> tuples, const Vec& targets,
                                                       Hidden& hidden, StepCache* cache) const {
  if (static_cast<int>(tuples.size()) != shape_.agents) throw nn::ShapeError("wrong number of agent tuples");
  if (cache) {
    cache->agents.resize(shape_.agents);
    cache->heads.resize(shape_.heads);
  }
  std::vector<Vec> embeddings(shape_.agents);
  for (int i = 0; i < shape_.agents; ++i) {
    AgentCache* ac = cache ? &cache->agents[i] : nullptr;
    embeddings[i] = merge(i, encode(i, tuples[i].capability, ac), tuples[i], ac);
  }
  StepOutput out;
  out.context = fuse(embeddings, targets, cache);
  hidden.h1 = gru1_.forward(out.context, hidden.h1, cache ? &cache->gru1 : nullptr);
  hidden.h2 = gru2_.forward(hidden.h1, hidden.h2, cache ? &cache->gru2 : nullptr);
  out.logits.resize(shape_.heads);
  for (int h = 0; h < shape_.heads; ++h) {
    out.logits[h] = heads_[h].forward(hidden.h2, cache ? &cache->heads[h] : nullptr);
  }
  const Vec v = critic1_.forward(out.context, cache ? &cache->critic1 : nullptr);
  out.value = critic2_.forward(v, cache ? &cache->critic2 : nullptr)(0);
  return out;
}

nn::ParameterList SupervisorPolicy::parameters() {
  nn::ParameterList out;
  for (int i = 0; i < shape_.agents; ++i) {
    enc1_[i].collect(out);
    enc2_[i].collect(out);
    merger_[i].collect(out);
  }
  fuse1_.collect(out);
  fuse2_.collect(out);
  fuse3_.collect(out);
  gru1_.collect(out);
  gru2_.collect(out);
  for (auto& h : heads_) h.collect(out);
  critic1_.collect(out);
  critic2_.collect(out);
  return out;
}

std::vector<const nn::Parameter*> SupervisorPolicy::blocks() const {
  auto list = const_cast<SupervisorPolicy*>(this)->parameters();
  return {list.begin(), list.end()};
}

void SupervisorPolicy::backward(std::span<const StepCache> caches, std::span<const StepGrad> grads) {
  if (caches.size() != grads.size()) throw nn::ShapeError("one gradient per cached step required");
  Vec carry1 = Vec::Zero(shape_.hidden);
  Vec carry2 = Vec::Zero(shape_.hidden);
  for (std::size_t t = caches.size(); t-- > 0;) {
    const StepCache& c = caches[t];
    const StepGrad& g = grads[t];
    Vec d_h2 = carry2;
    for (int h = 0; h < shape_.heads; ++h) d_h2 += heads_[h].backward(c.heads[h], g.logits[h]);
    const auto s2 = gru2_.backward(c.gru2, d_h2);
    carry2 = s2.hidden;
    const auto s1 = gru1_.backward(c.gru1, s2.input + carry1);
    carry1 = s1.hidden;

    Vec d_ctx = s1.input;
    Vec dv(1);
    dv(0) = g.value;
    d_ctx += critic1_.backward(c.critic1, critic2_.backward(c.critic2, dv));

    Vec d_in = fuse1_.backward(c.fuse1, fuse2_.backward(c.fuse2, fuse3_.backward(c.fuse3, d_ctx)));
    for (int i = 0; i < shape_.agents; ++i) {
      const Vec d_merge = merger_[i].backward(c.agents[i].merger, d_in.segment(i * shape_.merger, shape_.merger));
      enc1_[i].backward(c.agents[i].enc1, enc2_[i].backward(c.agents[i].enc2, d_merge.head(shape_.encoder)));
    }
  }
}

LossTerms episode_loss(SupervisorPolicy& policy, std::span<const StepInput> steps, const Vec& targets,
                       std::span<const double> advantages, std::span<const double> returns,
                       const LossConfig& config, bool accumulate_grads) {
  const std::size_t n = steps.size();
  if (advantages.size() != n || returns.size() != n) throw nn::ShapeError("episode arrays differ in length");
  const int heads = policy.shape().heads;
  std::vector<SupervisorPolicy::StepCache> caches(n);
  std::vector<SupervisorPolicy::StepGrad> grads(n);
  Hidden hidden = policy.initial_hidden();
  LossTerms loss;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto out = policy.forward(steps[t].tuples, targets, hidden, &caches[t]);
    if (static_cast<int>(steps[t].actions.size()) != heads) throw nn::ShapeError("one action per head required");
    grads[t].logits.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const Vec p = nn::softmax(out.logits[h]);
      const int a = steps[t].actions[h];
      const Vec logp = (p.array() + 0.0).log();
      const double ent = nn::entropy(p);
      loss.actor -= scale * advantages[t] * logp(a);
      loss.entropy += scale * ent;
      // d(-A log p_a)/dz = -A (onehot - p); d(-c H)/dz = c p (log p + H)
      Vec d = scale * advantages[t] * p;
      d(a) -= scale * advantages[t];
      d.array() += scale * config.entropy_coef * p.array() * (logp.array() + ent);
      grads[t].logits[h] = d;
    }
    const double err = out.value - returns[t];
    loss.critic += scale * err * err;
    grads[t].value = scale * config.value_coef * 2.0 * err;
  }
  loss.total = loss.actor - config.entropy_coef * loss.entropy + config.value_coef * loss.critic;
  if (accumulate_grads) policy.backward(caches, grads);
  return loss;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

int head_count(GoalMode mode, std::size_t num_intents) {
  return static_cast<int>(mode == GoalMode::kAgentLevel ? 2 * num_intents : num_intents);
}

agents::GoalAssignment decode_goals(std::span<const int> levels, const agents::TeamEnv& env, GoalMode mode) {
  const auto& services = env.state().services;
  const std::size_t k = services.size();
  if (static_cast<int>(levels.size()) != head_count(mode, k)) {
    throw nn::ShapeError("wrong number of goal levels for the goal mode");
  }
  agents::GoalAssignment goals;
  for (const auto& id : env.agents()) {
    const std::size_t head = mode == GoalMode::kAgentLevel ? agents::agent_slot(id, k)
                                                           : static_cast<std::size_t>(id.intent_index);
    const int level = levels[head];
    if (level < 0 || level >= agents::kGoalLevels) throw nn::ShapeError("goal level out of range");
    const double value = agents::goal_value(level, services[id.intent_index].kpi_kind());
    if (mode == GoalMode::kHalving) {
      goals.value.push_back(0.5 * value);
      goals.level.push_back(-1);
    } else {
      goals.value.push_back(value);
      goals.level.push_back(level);
    }
  }
  return goals;
}

std::vector<AgentTuple> build_tuples(const agents::TeamEnv& env, const SupervisorMemory& memory) {
  const auto& roster = env.agents();
  std::vector<AgentTuple> out(roster.size());
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const auto& cap = memory.capabilities.at(i).rho;
    out[i].capability = Eigen::Map<const Vec>(cap.data(), static_cast<Eigen::Index>(cap.size()));
    out[i].observation = env.observation(roster[i], memory.goals.value.at(i));
    out[i].action = memory.actions.at(i);
    out[i].goal = out[i].observation.goal;
  }
  return out;
}

SupervisorMemory initial_memory(const agents::TeamEnv& env,
                                const std::vector<agents::CapabilityVector>& capabilities) {
  SupervisorMemory m;
  m.capabilities = capabilities;
  const auto& services = env.state().services;
  for (const auto& id : env.agents()) {
    const auto& s = services[id.intent_index];
    m.goals.value.push_back(s.kpi_target);
    m.goals.level.push_back(agents::nearest_goal_level(s.kpi_target, s.kpi_kind()));
  }
  m.actions.assign(env.agents().size(), KnobAction::kHold);
  return m;
}

CapabilityTracker::CapabilityTracker(std::size_t agents, int horizon) : attempts_(agents), horizon_(horizon) {}

void CapabilityTracker::observe(const agents::TeamEnv& env, const agents::GoalAssignment& goals,
                                std::vector<agents::CapabilityVector>& capabilities) {
  const auto& roster = env.agents();
  const auto& services = env.state().services;
  const auto& report = env.last_report();
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const int level = goals.level.at(i);
    Attempt& a = attempts_[i];
    if (level != a.level) a = {level, 0, false};
    if (level < 0 || a.done) continue;
    ++a.age;
    const int k = roster[i].intent_index;
    if (agents::goal_achieved(report.kpi.at(k), goals.value.at(i), services[k].kpi_kind())) {
      agents::ema_update(capabilities.at(i), level, true);
      a.done = true;
    } else if (a.age >= horizon_) {
      agents::ema_update(capabilities.at(i), level, false);
      a.done = true;
    }
  }
}

int longest_met_run(std::span<const std::uint8_t> met) {
  int best = 0;
  int run = 0;
  for (auto m : met) {
    run = m ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

TrainReport train_supervisor(SupervisorPolicy& policy, agents::TeamEnv& env,
                             std::vector<agents::CapabilityVector>& capabilities,
                             const TrainConfig& config) {
  const auto intents = intents_of(env.state().services);
  const Vec targets = normalized_targets(intents);
  auto params = policy.parameters();
  auto optimizer = nn::make_optimizer(params, config.adam);
  Rng rng(mix_seed(config.seed, 0x5eed));
  CapabilityTracker tracker(env.agents().size(), agents::PretrainConfig{}.horizon);
  TrainReport report;
  const int heads = policy.shape().heads;
  if (heads != head_count(config.mode, env.num_intents())) {
    throw nn::ShapeError("policy head count does not match the goal mode");
  }
  std::deque<double> window;
  double best_window_mean = -1e300;
  int since_best = 0;

  for (int ep = 0; ep < config.episodes; ++ep) {
    env.reset(mix_seed(config.seed, static_cast<std::uint64_t>(ep) + 1), config.initial_controls);
    SupervisorMemory memory = initial_memory(env, capabilities);
    std::vector<StepInput> steps(config.episode_length);
    std::vector<double> rewards(config.episode_length), values(config.episode_length);
    std::vector<std::uint8_t> met(config.episode_length);
    Hidden hidden = policy.initial_hidden();
    for (int t = 0; t < config.episode_length; ++t) {
      steps[t].tuples = build_tuples(env, memory);
      const auto out = policy.forward(steps[t].tuples, targets, hidden);
      values[t] = out.value;
      steps[t].actions.resize(heads);
      for (int h = 0; h < heads; ++h) steps[t].actions[h] = nn::softmax_sample(out.logits[h], rng).index;
      const auto goals = decode_goals(steps[t].actions, env, config.mode);
      const auto step = env.step(goals, {true, true});
      rewards[t] = supervisor_reward(step.report, intents);
      met[t] = all_met(step.report, intents) ? 1 : 0;
      tracker.observe(env, goals, capabilities);
      memory.goals = goals;
      memory.actions = step.actions;
      memory.capabilities = capabilities;
    }
    const auto returns = discounted_returns(rewards, config.gamma);
    std::vector<double> adv(returns.size());
    for (std::size_t t = 0; t < adv.size(); ++t) adv[t] = returns[t] - values[t];

    nn::zero_grads(params);
    const auto loss = episode_loss(policy, steps, targets, adv, returns, config.loss);
    const double norm = nn::grad_norm(params);
    if (!std::isfinite(norm) || !std::isfinite(loss.total)) {
      std::ostringstream msg;
      msg << "non-finite loss or gradient at episode " << ep << " (loss " << loss.total << ", grad norm " << norm
          << ")";
      report.diverged = true;
      report.diagnostics = msg.str();
      throw nn::NumericError(report.diagnostics);
    }
    if (norm > config.max_grad_norm) nn::scale_grads(params, config.max_grad_norm / norm);
    nn::adam_step(params, optimizer);

    const double total = std::accumulate(rewards.begin(), rewards.end(), 0.0);
    report.episode_rewards.push_back(total);
    if (report.first_solved_episode < 0 && longest_met_run(met) >= 5) report.first_solved_episode = ep;

    window.push_back(total);
    if (static_cast<int>(window.size()) > config.patience) window.pop_front();
    const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
    if (static_cast<int>(window.size()) == config.patience) {
      if (mean > best_window_mean) {
        best_window_mean = mean;
        since_best = 0;
      } else if (++since_best >= config.patience && !report.diverged &&
                 mean < best_window_mean - 0.1 * std::abs(best_window_mean)) {
        std::ostringstream msg;
        msg << "moving-average reward fell for " << config.patience << " episodes (best "
            << best_window_mean << ", now " << mean << ", episode " << ep << ")";
        report.diverged = true;
        report.diagnostics = msg.str();
      }
    }
  }
  return report;
}

}  // namespace atmarl::supervisor
