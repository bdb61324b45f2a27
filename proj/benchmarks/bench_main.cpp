#include <benchmark/benchmark.h>

#include "atmarl/emulator.hpp"
#include "atmarl/scenario.hpp"
#include "atmarl/supervisor.hpp"

using namespace atmarl;
using nn::Vec;

namespace {

const char* kScenario = R"(
[service]
kind = CV
demand_mbps = 2.54
ue_count = 20
[service]
kind = URLLC
demand_mbps = 0.2
ue_count = 12
[service]
kind = mIoT
demand_mbps = 0.08
ue_count = 20
)";

supervisor::AgentTuple tuple(Rng& rng) {
  supervisor::AgentTuple t;
  t.capability = Vec::Constant(agents::kGoalLevels, 0.5);
  t.observation = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
  t.action = agents::KnobAction::kHold;
  t.goal = rng.uniform();
  return t;
}

}  // namespace

static void BM_AllocateCapacity(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<double> offered(n);
  auto c = emulator::ControlVector::defaults(n);
  for (std::size_t s = 0; s < n; ++s) {
    offered[s] = 1.0 + static_cast<double>(s);
    c.priority[s] = 1 + static_cast<int>(s % 5);
  }
  for (auto _ : st) benchmark::DoNotOptimize(emulator::allocate_capacity(offered, c, 10.0));
}
BENCHMARK(BM_AllocateCapacity)->Arg(3)->Arg(5)->Arg(16);

static void BM_EmulatorAdvance(benchmark::State& st) {
  auto state = emulator::init_scenario(emulator::parse_scenario_string(kScenario));
  Rng rng(1);
  for (auto _ : st) benchmark::DoNotOptimize(emulator::advance(state, rng));
}
BENCHMARK(BM_EmulatorAdvance);

static void BM_PolicyForward(benchmark::State& st) {
  supervisor::PolicyShape shape;
  supervisor::SupervisorPolicy policy(shape, 1);
  Rng rng(2);
  std::vector<supervisor::AgentTuple> tuples;
  for (int a = 0; a < shape.agents; ++a) tuples.push_back(tuple(rng));
  const Vec targets = Vec::Constant(shape.intents, 0.5);
  auto hidden = policy.initial_hidden();
  for (auto _ : st) benchmark::DoNotOptimize(policy.forward(tuples, targets, hidden));
}
BENCHMARK(BM_PolicyForward);

static void BM_EpisodeLoss(benchmark::State& st) {
  supervisor::PolicyShape shape;
  supervisor::SupervisorPolicy policy(shape, 3);
  Rng rng(4);
  const auto length = static_cast<std::size_t>(st.range(0));
  std::vector<supervisor::StepInput> steps(length);
  for (auto& s : steps) {
    for (int a = 0; a < shape.agents; ++a) {
      s.tuples.push_back(tuple(rng));
      s.actions.push_back(static_cast<int>(rng.below(agents::kGoalLevels)));
    }
  }
  const std::vector<double> adv(length, 0.1), ret(length, -0.5);
  const Vec targets = Vec::Constant(shape.intents, 0.5);
  auto params = policy.parameters();
  for (auto _ : st) {
    nn::zero_grads(params);
    benchmark::DoNotOptimize(supervisor::episode_loss(policy, steps, targets, adv, ret, {}, true));
  }
}
BENCHMARK(BM_EpisodeLoss)->Arg(40);
BENCHMARK_MAIN();
