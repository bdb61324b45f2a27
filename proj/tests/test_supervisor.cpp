#include <gtest/gtest.h>

#include <cmath>

#include "atmarl/scenario.hpp"
#include "atmarl/supervisor.hpp"
#include "oracles.hpp"

using namespace atmarl;
using namespace atmarl::supervisor;
using atmarl::oracle::max_param_rel_error;
using atmarl::oracle::random_vec;

namespace {

emulator::ScenarioConfig small_scenario() {
  return emulator::parse_scenario_string(R"(
[service]
kind = CV
demand_mbps = 2.0
ue_count = 16
[service]
kind = URLLC
demand_mbps = 0.3
ue_count = 12
)");
}

AgentTuple random_tuple(Rng& rng) {
  AgentTuple t;
  t.capability = (random_vec(agents::kGoalLevels, rng).array() + 1.0) / 2.0;
  t.observation = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
  t.action = static_cast<agents::KnobAction>(rng.below(3));
  t.goal = rng.uniform();
  return t;
}

PolicyShape toy_shape() {
  PolicyShape s;
  s.agents = 2;
  s.heads = 2;
  s.intents = 1;
  s.encoder = 4;
  s.merger = 5;
  s.fusion = 6;
  s.hidden = 5;
  return s;
}

struct Pretrained {
  agents::MarlSystem priority, mbr;
  std::vector<agents::CapabilityVector> caps;
};

Pretrained pretrain(const emulator::ScenarioConfig& sc, int episodes) {
  agents::PretrainConfig cfg;
  cfg.episodes = episodes;
  auto pr = agents::pretrain_system(agents::System::kPriority, sc, cfg);
  auto mb = agents::pretrain_system(agents::System::kMbr, sc, cfg);
  auto logs = pr.logs;
  logs.insert(logs.end(), mb.logs.begin(), mb.logs.end());
  return {pr.system, mb.system, agents::estimate_capabilities(logs, sc.num_services(), agents::kGoalLevels, 5)};
}

}  // namespace

TEST(Intent, DeviationAndReward) {
  const GlobalIntent qoe{emulator::KpiKind::kQoE, 4.0};
  const GlobalIntent pl{emulator::KpiKind::kPacketLoss, 2.0};
  EXPECT_DOUBLE_EQ(intent_deviation(3.0, qoe), 0.25);
  EXPECT_DOUBLE_EQ(intent_deviation(4.5, qoe), 0.0);
  EXPECT_DOUBLE_EQ(intent_deviation(3.0, pl), 0.5);
  EXPECT_DOUBLE_EQ(intent_deviation(1.0, pl), 0.0);

  emulator::KpiReport r;
  const std::vector<GlobalIntent> intents{qoe, pl};
  r.kpi = {4.2, 1.0};
  EXPECT_TRUE(all_met(r, intents));
  EXPECT_DOUBLE_EQ(supervisor_reward(r, intents), 1.0);
  r.kpi = {3.0, 3.0};
  EXPECT_FALSE(all_met(r, intents));
  EXPECT_DOUBLE_EQ(supervisor_reward(r, intents), -0.75);
}

TEST(Policy, ForwardShapes) {
  PolicyShape shape;
  SupervisorPolicy policy(shape, 1);
  Rng rng(1);
  std::vector<AgentTuple> tuples;
  for (int i = 0; i < shape.agents; ++i) tuples.push_back(random_tuple(rng));
  Hidden h = policy.initial_hidden();
  const auto out = policy.forward(tuples, Vec::Constant(3, 0.5), h);
  ASSERT_EQ(out.logits.size(), 6u);
  for (const auto& l : out.logits) EXPECT_EQ(l.size(), agents::kGoalLevels);
  EXPECT_TRUE(std::isfinite(out.value));
  EXPECT_EQ(h.h2.size(), shape.hidden);

  std::vector<Vec> too_few(5, Vec::Zero(shape.merger));
  EXPECT_THROW(policy.fuse(too_few, Vec::Zero(3)), nn::ShapeError);
}

TEST(Policy, SameSeedSameParameters) {
  SupervisorPolicy a(PolicyShape{}, 9), b(PolicyShape{}, 9), c(PolicyShape{}, 10);
  const auto pa = a.blocks(), pb = b.blocks(), pc = c.blocks();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
  EXPECT_NE(pa[0]->value, pc[0]->value);
}

TEST(Policy, EndToEndActorCriticFiniteDifference) {
  SupervisorPolicy policy(toy_shape(), 4);
  Rng rng(4);
  const int length = 3;
  std::vector<StepInput> steps(length);
  for (auto& s : steps) {
    s.tuples = {random_tuple(rng), random_tuple(rng)};
    s.actions = {static_cast<int>(rng.below(agents::kGoalLevels)), static_cast<int>(rng.below(agents::kGoalLevels))};
  }
  const Vec targets = Vec::Constant(1, 0.75);
  const std::vector<double> advantages{0.7, -1.2, 0.4};
  const std::vector<double> returns{-0.5, 0.3, 1.0};
  const LossConfig cfg;

  auto params = policy.parameters();
  nn::zero_grads(params);
  episode_loss(policy, steps, targets, advantages, returns, cfg, true);
  auto loss = [&] { return episode_loss(policy, steps, targets, advantages, returns, cfg, false).total; };
  EXPECT_LT(max_param_rel_error(params, loss), 1e-3);
}

TEST(Policy, LossTermsCombine) {
  SupervisorPolicy policy(toy_shape(), 5);
  Rng rng(5);
  std::vector<StepInput> steps(2);
  for (auto& s : steps) {
    s.tuples = {random_tuple(rng), random_tuple(rng)};
    s.actions = {1, 2};
  }
  const std::vector<double> adv{1.0, 1.0}, ret{0.0, 0.0};
  const auto l = episode_loss(policy, steps, Vec::Constant(1, 0.5), adv, ret, {}, false);
  EXPECT_NEAR(l.total, l.actor - 0.01 * l.entropy + 0.5 * l.critic, 1e-12);
  EXPECT_GT(l.entropy, 0.0);
  const std::vector<double> short_adv{1.0};
  EXPECT_THROW(episode_loss(policy, steps, Vec::Constant(1, 0.5), short_adv, ret, {}, false), nn::ShapeError);
}

TEST(Returns, Discounting) {
  const std::vector<double> r{1.0, 0.0, 2.0};
  const auto g = discounted_returns(r, 0.5);
  EXPECT_DOUBLE_EQ(g[2], 2.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
  EXPECT_DOUBLE_EQ(g[0], 1.5);
}

TEST(Runs, LongestMetRun) {
  const std::vector<std::uint8_t> met{1, 1, 0, 1, 1, 1, 0};
  EXPECT_EQ(longest_met_run(met), 3);
  EXPECT_EQ(longest_met_run(std::vector<std::uint8_t>{}), 0);
}

TEST(Goals, DecodeModes) {
  const auto sc = small_scenario();
  const auto p = pretrain(sc, 20);
  agents::TeamEnv env(sc, p.priority, p.mbr);
  env.reset(1);
  EXPECT_EQ(head_count(GoalMode::kAgentLevel, 2), 4);
  EXPECT_EQ(head_count(GoalMode::kHalving, 2), 2);

  const std::vector<int> agent_levels{7, 2, 5, 0};
  const auto g = decode_goals(agent_levels, env, GoalMode::kAgentLevel);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g.value[0], 5.0);
  EXPECT_DOUBLE_EQ(g.value[1], 2.0);
  EXPECT_EQ(g.level[2], 5);

  const std::vector<int> service_levels{7, 2};
  const auto s = decode_goals(service_levels, env, GoalMode::kServiceLevel);
  EXPECT_DOUBLE_EQ(s.value[0], 5.0);
  EXPECT_DOUBLE_EQ(s.value[2], 5.0);
  EXPECT_DOUBLE_EQ(s.value[1], s.value[3]);

  const auto h = decode_goals(service_levels, env, GoalMode::kHalving);
  EXPECT_DOUBLE_EQ(h.value[0], 2.5);
  EXPECT_DOUBLE_EQ(h.value[2], 2.5);
  EXPECT_DOUBLE_EQ(h.value[1], 1.0);
  EXPECT_DOUBLE_EQ(h.value[0] + h.value[2], 5.0);

  EXPECT_THROW(decode_goals(service_levels, env, GoalMode::kAgentLevel), nn::ShapeError);
  const std::vector<int> bad{9, 0, 0, 0};
  EXPECT_THROW(decode_goals(bad, env, GoalMode::kAgentLevel), nn::ShapeError);
}

TEST(Tracker, UpdatesCapabilityOnSuccessOrHorizon) {
  const auto sc = small_scenario();
  const auto p = pretrain(sc, 20);
  agents::TeamEnv env(sc, p.priority, p.mbr);
  env.reset(1);
  std::vector<agents::CapabilityVector> caps(4, {std::vector<double>(8, 0.5), std::vector<bool>(8, false)});
  CapabilityTracker tracker(4, 2);
  // PL goal 7% on the URLLC agents is met at once; CV at QoE 1 is not (QoE > 1.57).
  agents::GoalAssignment goals;
  goals.value = {1.0, 7.0, 1.0, 7.0};
  goals.level = {0, 7, 0, 7};
  tracker.observe(env, goals, caps);
  EXPECT_GT(caps[1].rho[7], 0.5);
  EXPECT_DOUBLE_EQ(caps[0].rho[0], 0.5);
  tracker.observe(env, goals, caps);
  EXPECT_LT(caps[0].rho[0], 0.5);
  const double after = caps[1].rho[7];
  tracker.observe(env, goals, caps);
  EXPECT_DOUBLE_EQ(caps[1].rho[7], after);
}

TEST(Memory, InitialGoalsAreTargets) {
  const auto sc = small_scenario();
  const auto p = pretrain(sc, 20);
  agents::TeamEnv env(sc, p.priority, p.mbr);
  env.reset(1);
  const auto m = initial_memory(env, p.caps);
  EXPECT_DOUBLE_EQ(m.goals.value[0], 4.0);
  EXPECT_DOUBLE_EQ(m.goals.value[3], 2.0);
  const auto tuples = build_tuples(env, m);
  ASSERT_EQ(tuples.size(), 4u);
  EXPECT_EQ(tuples[0].capability.size(), agents::kGoalLevels);
  EXPECT_DOUBLE_EQ(tuples[0].goal, 0.75);
}

TEST(Training, KeepsMarlSystemsFrozenAndRecordsRewards) {
  const auto sc = small_scenario();
  auto p = pretrain(sc, 300);
  const auto prio_before = p.priority;
  const auto mbr_before = p.mbr;
  agents::TeamEnv env(sc, p.priority, p.mbr);

  PolicyShape shape;
  shape.agents = 4;
  shape.heads = 4;
  shape.intents = 2;
  SupervisorPolicy policy(shape, 2);
  TrainConfig cfg;
  cfg.episodes = 20;
  auto caps = p.caps;
  const auto report = train_supervisor(policy, env, caps, cfg);
  EXPECT_EQ(report.episode_rewards.size(), 20u);
  for (double r : report.episode_rewards) EXPECT_TRUE(std::isfinite(r));
  EXPECT_EQ(p.priority, prio_before);
  EXPECT_EQ(p.mbr, mbr_before);

  cfg.mode = GoalMode::kHalving;
  EXPECT_THROW(train_supervisor(policy, env, caps, cfg), nn::ShapeError);
}

TEST(Training, DeterministicForSeed) {
  const auto sc = small_scenario();
  auto p = pretrain(sc, 200);
  agents::TeamEnv env(sc, p.priority, p.mbr);
  PolicyShape shape;
  shape.agents = 4;
  shape.heads = 2;
  shape.intents = 2;
  TrainConfig cfg;
  cfg.episodes = 5;
  cfg.mode = GoalMode::kHalving;
  SupervisorPolicy a(shape, 3), b(shape, 3);
  auto ca = p.caps, cb = p.caps;
  const auto ra = train_supervisor(a, env, ca, cfg);
  const auto rb = train_supervisor(b, env, cb, cfg);
  EXPECT_EQ(ra.episode_rewards, rb.episode_rewards);
  const auto pa = a.blocks(), pb = b.blocks();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}
