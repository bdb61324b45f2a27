#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "atmarl/pipeline.hpp"
#include "atmarl/scenario.hpp"

namespace fs = std::filesystem;
using namespace atmarl;
using harness::Approach;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Options {
  std::string scenario;
  std::vector<std::string> approaches;
  std::vector<std::uint64_t> seeds;
  int episodes = 400;
  int pretrain_episodes = 3000;
  int length = 40;
  std::string checkpoint;
  std::string out = "out";
  std::string eval_dist;
  std::vector<std::string> shifts;  // "20:gaussian"
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--scenario", o.scenario, "scenario config file")->required();
  cmd->add_option("--approach", o.approaches,
                  "atmarl, rule_based, naive_parallel, goal_halving, oracle (repeatable)");
  cmd->add_option("--seed", o.seeds, "evaluation seed (repeatable, default 1..5)");
  cmd->add_option("--episodes", o.episodes, "supervisor training episodes")->check(CLI::PositiveNumber);
  cmd->add_option("--pretrain-episodes", o.pretrain_episodes, "MARL pretraining episodes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--length", o.length, "episode length")->check(CLI::PositiveNumber);
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file (default <out>/checkpoint.ckpt)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--eval-dist", o.eval_dist, "evaluation distribution: uniform, gaussian, gamma");
  cmd->add_option("--shift", o.shifts, "mid-episode shift as <step>:<distribution> (repeatable)");
}

harness::ExperimentPlan make_plan(const Options& o) {
  harness::ExperimentPlan plan;
  plan.scenario_path = o.scenario;
  if (!o.approaches.empty()) {
    plan.approaches.clear();
    for (const auto& a : o.approaches) plan.approaches.push_back(harness::parse_approach(a));
  }
  if (!o.seeds.empty()) plan.seeds = o.seeds;
  plan.supervisor_episodes = o.episodes;
  plan.pretrain.episodes = o.pretrain_episodes;
  plan.episode_length = o.length;
  if (!o.eval_dist.empty()) {
    plan.evaluation_distribution =
        emulator::DistributionSpec::preset(emulator::parse_distribution_kind(o.eval_dist));
  }
  for (const auto& s : o.shifts) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw emulator::ConfigError("shift must look like <step>:<distribution>");
    harness::ShiftEvent ev;
    try {
      ev.timestep = std::stoi(s.substr(0, colon));
    } catch (const std::exception&) {
      throw emulator::ConfigError("bad shift step in '" + s + "'");
    }
    ev.distribution = emulator::DistributionSpec::preset(emulator::parse_distribution_kind(s.substr(colon + 1)));
    plan.shifts.push_back(ev);
  }
  plan.validate();
  return plan;
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "checkpoint.ckpt" : fs::path(o.checkpoint);
}

void print_warnings(const harness::Artifacts& a) {
  for (const auto& w : a.warnings) std::cerr << "warning: " << w << "\n";
}

void print_summary(const std::vector<harness::SummaryRow>& rows) {
  for (const auto& r : rows) {
    std::printf("%-15s %-8s iae %-9s conv %5.1f osc %.3f\n", std::string(harness::to_string(r.approach)).c_str(),
                r.kpi.c_str(), r.iae_mean ? std::to_string(*r.iae_mean).c_str() : "NR", r.conv_time_mean,
                r.oscillation_mean);
  }
}

int run_pretrain(const Options& o) {
  const auto plan = make_plan(o);
  const auto scenario = emulator::load_scenario(plan.scenario_path);
  const auto artifacts = harness::pretrain_stage(scenario, plan.pretrain);
  print_warnings(artifacts);
  fs::create_directories(o.out);
  const auto ckpt = checkpoint_path(o);
  harness::to_store(artifacts).save(ckpt);
  std::ofstream log(fs::path(o.out) / "pretrain_log.csv", std::ios::trunc);
  agents::write_pretrain_log(log, artifacts.logs);
  std::printf("pretrained %zu agents -> %s\n", artifacts.capabilities.size(), ckpt.string().c_str());
  return 0;
}

harness::Artifacts load_artifacts(const Options& o, const emulator::ScenarioConfig& scenario, const char* stage) {
  const auto ckpt = checkpoint_path(o);
  if (!fs::exists(ckpt)) throw harness::StageError(stage, "missing checkpoint " + ckpt.string());
  try {
    return harness::from_store(checkpoint::Store::load(ckpt), scenario);
  } catch (const checkpoint::CheckpointError& e) {
    throw harness::StageError(stage, e.what());
  }
}

int run_train(const Options& o) {
  auto plan = make_plan(o);
  if (o.approaches.empty()) plan.approaches = {Approach::kATMARL};
  const auto scenario = emulator::load_scenario(plan.scenario_path);
  auto artifacts = load_artifacts(o, scenario, "train-supervisor");
  for (Approach a : plan.approaches) {
    if (!harness::needs_training(a)) continue;
    harness::train_stage(artifacts, a, plan);
    const auto* p = artifacts.find(harness::policy_tag(a));
    std::printf("trained %s: %zu episodes, first solved %d%s\n", harness::policy_tag(a).c_str(),
                p->report.episode_rewards.size(), p->report.first_solved_episode,
                p->report.diverged ? (", " + p->report.diagnostics).c_str() : "");
  }
  harness::to_store(artifacts).save(checkpoint_path(o));
  return 0;
}

int run_evaluate(const Options& o) {
  const auto plan = make_plan(o);
  const auto scenario = emulator::load_scenario(plan.scenario_path);
  const auto artifacts = load_artifacts(o, scenario, "evaluate");
  const auto runs = harness::evaluate_stage(artifacts, plan);
  harness::write_traces(o.out, runs);
  std::printf("wrote %zu traces under %s\n", runs.size(), (fs::path(o.out) / "traces").string().c_str());
  return 0;
}

int run_report(const Options& o) {
  const auto scenario = emulator::load_scenario(o.scenario);
  const auto runs = harness::read_traces(o.out);
  print_summary(harness::emit_report(o.out, runs, scenario));
  return 0;
}

int run_full(const Options& o) {
  const auto plan = make_plan(o);
  const auto result = harness::run_pipeline(plan, o.out);
  print_warnings(result.artifacts);
  print_summary(result.summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atmarl: supervisor-coordinated MARL slice management"};
  app.require_subcommand(1);
  Options o;
  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Verb verbs[] = {
      {"pretrain", "pretrain the Priority and MBR systems", run_pretrain},
      {"train-supervisor", "train supervisors on a pretrained checkpoint", run_train},
      {"evaluate", "run approaches x seeds and write traces", run_evaluate},
      {"report", "summarize traces into summary.csv and a plotting script", run_report},
      {"full", "pretrain, train, evaluate and report", run_full},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> cmds;
  for (const auto& v : verbs) {
    auto* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, o);
    cmds.emplace_back(cmd, &v);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  try {
    for (const auto& [cmd, verb] : cmds) {
      if (*cmd) return verb->run(o);
    }
  } catch (const emulator::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const emulator::InvalidServiceError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const harness::StageError& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitConfig;
}
