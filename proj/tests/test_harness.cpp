#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "atmarl/pipeline.hpp"
#include "atmarl/scenario.hpp"

using namespace atmarl;
using namespace atmarl::harness;
namespace fs = std::filesystem;

namespace {

const char* kScenario = R"(
bandwidth_mbps = 10
distribution = uniform
noise_pct = 5
seed = 1
[service]
kind = CV
demand_mbps = 2.2
ue_count = 16
[service]
kind = URLLC
demand_mbps = 0.4
ue_count = 12
[service]
kind = mIoT
demand_mbps = 0.1
ue_count = 20
)";

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("atmarl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentPlan small_plan(const fs::path& scenario_path) {
  ExperimentPlan plan;
  plan.scenario_path = scenario_path;
  plan.seeds = {1, 2};
  plan.pretrain.episodes = 300;
  plan.supervisor_episodes = 6;
  return plan;
}

// Pretrained and trained once, shared by the tests below.
class HarnessTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(temp_dir("harness"));
    scenario_path_ = new fs::path(*dir_ / "s.cfg");
    std::ofstream(*scenario_path_) << kScenario;
    const auto plan = small_plan(*scenario_path_);
    artifacts_ = new Artifacts(pretrain_stage(emulator::load_scenario(*scenario_path_), plan.pretrain));
    train_stage(*artifacts_, Approach::kATMARL, plan);
    train_stage(*artifacts_, Approach::kGoalHalving, plan);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete artifacts_;
    delete scenario_path_;
    delete dir_;
  }

  static fs::path* dir_;
  static fs::path* scenario_path_;
  static Artifacts* artifacts_;
};

fs::path* HarnessTest::dir_ = nullptr;
fs::path* HarnessTest::scenario_path_ = nullptr;
Artifacts* HarnessTest::artifacts_ = nullptr;

}  // namespace

TEST_F(HarnessTest, TraceHasOneRowPerStep) {
  agents::TeamEnv env(artifacts_->scenario, artifacts_->priority, artifacts_->mbr);
  auto c = make_naive_parallel();
  const auto tr = run_episode(env, *c, 40, {}, 1);
  EXPECT_EQ(tr.rows.size(), 40u);
  EXPECT_EQ(tr.kpi_names, (std::vector<std::string>{"cv", "urllc", "miot"}));
  EXPECT_EQ(tr.agent_names.size(), 6u);
}

TEST_F(HarnessTest, ShiftsLandOnTheirRows) {
  agents::TeamEnv env(artifacts_->scenario, artifacts_->priority, artifacts_->mbr);
  const auto* p = artifacts_->find("atmarl");
  ASSERT_NE(p, nullptr);
  auto c = make_supervised(p->policy, p->capabilities, supervisor::GoalMode::kAgentLevel);
  const std::vector<ShiftEvent> shifts{{20, emulator::DistributionSpec::gaussian()},
                                       {30, emulator::DistributionSpec::gamma()}};
  const auto tr = run_episode(env, *c, 40, shifts, 2);
  for (const auto& r : tr.rows) {
    const auto expected = r.t < 20   ? emulator::DistributionKind::kUniform
                          : r.t < 30 ? emulator::DistributionKind::kGaussian
                                     : emulator::DistributionKind::kGamma;
    EXPECT_EQ(r.distribution, expected) << "row " << r.t;
    EXPECT_EQ(r.goal.size(), 6u);
  }
  const std::vector<ShiftEvent> bad{{30, emulator::DistributionSpec::gamma()}, {20, emulator::DistributionSpec::gaussian()}};
  EXPECT_THROW(run_episode(env, *c, 40, bad, 2), std::invalid_argument);
  const std::vector<ShiftEvent> late{{40, emulator::DistributionSpec::gamma()}};
  EXPECT_THROW(run_episode(env, *c, 40, late, 2), std::invalid_argument);
}

TEST_F(HarnessTest, RuleBasedMovesOneSystemPerStep) {
  agents::TeamEnv env(artifacts_->scenario, artifacts_->priority, artifacts_->mbr);
  auto c = make_rule_based();
  const auto tr = run_episode(env, *c, 40, {}, 3);
  auto prev = env.agents().size();
  (void)prev;
  std::vector<int> before;
  const auto defaults = emulator::ControlVector::defaults(3);
  for (const auto& id : env.agents()) before.push_back(agents::knob_level(id, defaults));
  for (const auto& r : tr.rows) {
    EXPECT_NE(r.active_priority, r.active_mbr);
    for (std::size_t a = 0; a < 6; ++a) {
      const bool priority_knob = a < 3;
      if (priority_knob != r.active_priority) EXPECT_EQ(r.knob[a], before[a]) << "row " << r.t << " knob " << a;
    }
    before = r.knob;
  }
}

TEST_F(HarnessTest, NaiveParallelGoalsAreTargets) {
  agents::TeamEnv env(artifacts_->scenario, artifacts_->priority, artifacts_->mbr);
  auto c = make_naive_parallel();
  const auto tr = run_episode(env, *c, 40, {}, 4);
  for (const auto& r : tr.rows) {
    EXPECT_EQ(r.goal, (std::vector<double>{4.0, 2.0, 2.0, 4.0, 2.0, 2.0}));
    EXPECT_TRUE(r.active_priority && r.active_mbr);
  }
}

TEST_F(HarnessTest, CheckpointRoundTripGivesIdenticalTraces) {
  const auto path = *dir_ / "rt.ckpt";
  to_store(*artifacts_).save(path);
  const auto back = from_store(checkpoint::Store::load(path), artifacts_->scenario);
  EXPECT_EQ(back.priority, artifacts_->priority);
  EXPECT_EQ(back.mbr, artifacts_->mbr);
  ASSERT_EQ(back.policies.size(), 2u);

  auto plan = small_plan(*scenario_path_);
  plan.approaches = {Approach::kATMARL, Approach::kGoalHalving};
  const auto a = evaluate_stage(*artifacts_, plan);
  const auto b = evaluate_stage(back, plan);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::ostringstream sa, sb;
    write_trace_csv(sa, a[i].trace);
    write_trace_csv(sb, b[i].trace);
    EXPECT_EQ(sa.str(), sb.str());
  }
}

TEST_F(HarnessTest, CheckpointValuesRoundTripBitExactly) {
  checkpoint::Store s;
  const std::vector<double> v{0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0};
  s.put("x", 1, 5, v);
  std::stringstream ss;
  s.write(ss);
  const auto back = checkpoint::Store::read(ss);
  EXPECT_EQ(back.get("x", 1, 5).values, v);
}

TEST_F(HarnessTest, CheckpointErrorsAreDistinct) {
  std::stringstream good;
  to_store(*artifacts_).write(good);
  const std::string text = good.str();

  std::stringstream header("ATMARL-CKPT v2\n" + text.substr(text.find('\n') + 1));
  EXPECT_THROW(checkpoint::Store::read(header), checkpoint::VersionMismatchError);

  std::stringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(checkpoint::Store::read(truncated), checkpoint::TruncatedError);

  checkpoint::Store missing = checkpoint::Store::read(good);
  checkpoint::Store partial;
  for (const auto& name : missing.names_with_prefix("")) {
    if (name == "atmarl.gru1.wz") continue;
    const auto& b = missing.get(name);
    partial.put(name, b.rows, b.cols, b.values);
  }
  try {
    from_store(partial, artifacts_->scenario);
    FAIL() << "expected a shape-mismatch error";
  } catch (const checkpoint::ShapeMismatchError& e) {
    EXPECT_NE(std::string(e.what()).find("atmarl.gru1.wz"), std::string::npos) << e.what();
  }

  auto five = artifacts_->scenario;
  five.services.push_back(five.services[1]);
  five.services.push_back(five.services[2]);
  emulator::assign_labels(five.services);
  EXPECT_THROW(from_store(missing, five), checkpoint::ShapeMismatchError);
}

TEST_F(HarnessTest, EvaluationLeavesCheckpointUntouched) {
  const auto path = *dir_ / "frozen.ckpt";
  to_store(*artifacts_).save(path);
  const auto bytes = slurp(path);
  const auto stamp = fs::last_write_time(path);
  auto plan = small_plan(*scenario_path_);
  plan.evaluation_distribution = emulator::DistributionSpec::gaussian();
  const auto loaded = from_store(checkpoint::Store::load(path), artifacts_->scenario);
  const auto runs = evaluate_stage(loaded, plan);
  EXPECT_EQ(runs.size(), 8u);
  EXPECT_EQ(fs::last_write_time(path), stamp);
  EXPECT_EQ(slurp(path), bytes);
  for (const auto& r : runs) EXPECT_EQ(r.trace.rows[0].distribution, emulator::DistributionKind::kGaussian);
}

TEST_F(HarnessTest, EvaluateWithoutTrainedPolicyFails) {
  Artifacts bare = *artifacts_;
  bare.policies.clear();
  auto plan = small_plan(*scenario_path_);
  plan.approaches = {Approach::kOracle};
  EXPECT_THROW(evaluate_stage(bare, plan), StageError);
}

TEST_F(HarnessTest, SummaryShapeAndOrder) {
  auto plan = small_plan(*scenario_path_);
  plan.approaches = {Approach::kRuleBased, Approach::kATMARL, Approach::kNaiveParallel};
  const auto runs = evaluate_stage(*artifacts_, plan);
  const auto rows = summarize_runs(runs, supervisor::intents_of(artifacts_->scenario.services));
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto a = std::make_pair(rows[i - 1].kpi, std::string(to_string(rows[i - 1].approach)));
    const auto b = std::make_pair(rows[i].kpi, std::string(to_string(rows[i].approach)));
    EXPECT_LT(a, b);
  }
  for (const auto& r : rows) EXPECT_EQ(r.seeds, 2u);

  std::ostringstream out;
  write_summary_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "approach,kpi,iae_mean,iae_std,conv_time_mean,oscillation_mean");
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 9);
}

TEST_F(HarnessTest, TraceCsvLayoutAndRoundTrip) {
  agents::TeamEnv env(artifacts_->scenario, artifacts_->priority, artifacts_->mbr);
  auto c = make_rule_based();
  const auto tr = run_episode(env, *c, 40, {{25, emulator::DistributionSpec::gamma()}}, 5);
  std::ostringstream out;
  write_trace_csv(out, tr);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "t,kpi_cv,kpi_urllc,kpi_miot,goal_prio_cv,goal_prio_urllc,goal_prio_miot,goal_mbr_cv,"
            "goal_mbr_urllc,goal_mbr_miot,knob_prio_cv,knob_prio_urllc,knob_prio_miot,knob_mbr_cv,"
            "knob_mbr_urllc,knob_mbr_miot,reward,active_priority,active_mbr,dist_kind");
  std::istringstream again(out.str());
  const auto back = read_trace_csv(again);
  ASSERT_EQ(back.rows.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(back.rows[i].kpi, tr.rows[i].kpi);
    EXPECT_EQ(back.rows[i].knob, tr.rows[i].knob);
    EXPECT_EQ(back.rows[i].reward, tr.rows[i].reward);
    EXPECT_EQ(back.rows[i].distribution, tr.rows[i].distribution);
  }
}

TEST_F(HarnessTest, ReportWritesSummaryAndPlotScript) {
  auto plan = small_plan(*scenario_path_);
  plan.approaches = {Approach::kRuleBased, Approach::kNaiveParallel};
  const auto runs = evaluate_stage(*artifacts_, plan);
  const auto out = *dir_ / "report";
  write_traces(out, runs);
  const auto read = read_traces(out);
  ASSERT_EQ(read.size(), runs.size());
  const auto rows = emit_report(out, read, artifacts_->scenario);
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  const auto script = slurp(out / "plot_kpis.py");
  EXPECT_NE(script.find("kpi_"), std::string::npos);
  EXPECT_NE(script.find("\"cv\""), std::string::npos);
}

TEST(Plan, Validation) {
  ExperimentPlan plan;
  EXPECT_NO_THROW(plan.validate());
  plan.seeds.clear();
  EXPECT_THROW(plan.validate(), emulator::ConfigError);
  plan = {};
  plan.shifts = {{20, emulator::DistributionSpec::gaussian()}, {20, emulator::DistributionSpec::gamma()}};
  EXPECT_THROW(plan.validate(), emulator::ConfigError);
  plan.shifts = {{45, emulator::DistributionSpec::gaussian()}};
  EXPECT_THROW(plan.validate(), emulator::ConfigError);
}

TEST(Approaches, NamesRoundTrip) {
  for (auto a : {Approach::kATMARL, Approach::kRuleBased, Approach::kNaiveParallel, Approach::kGoalHalving,
                 Approach::kOracle}) {
    EXPECT_EQ(parse_approach(to_string(a)), a);
  }
  EXPECT_THROW(parse_approach("greedy"), emulator::ConfigError);
}

TEST(Pipeline, RepeatedRunsAreByteIdentical) {
  const auto dir = temp_dir("determinism");
  std::ofstream(dir / "s.cfg") << kScenario;
  auto plan = small_plan(dir / "s.cfg");
  plan.approaches = {Approach::kATMARL, Approach::kRuleBased};
  run_pipeline(plan, dir / "a");
  run_pipeline(plan, dir / "b");
  for (const auto* f : {"summary.csv", "traces/atmarl_seed1.csv", "traces/rule_based_seed2.csv", "checkpoint.ckpt"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_FALSE(slurp(dir / "a" / f).empty()) << f;
  }
  fs::remove_all(dir);
}

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ATMARL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  std::ofstream(dir / "s.cfg") << kScenario;
  std::ofstream(dir / "bad.cfg") << "[service]\nkind = hologram\n";
  const std::string s = (dir / "s.cfg").string();
  const std::string out = (dir / "out").string();

  EXPECT_EQ(run_cli("full --scenario " + (dir / "bad.cfg").string() + " --out " + out), 2);
  EXPECT_EQ(run_cli("full --scenario " + s + " --approach nope --out " + out), 2);
  EXPECT_EQ(run_cli("full --scenario " + s + " --shift 50:gamma --out " + out), 2);
  EXPECT_EQ(run_cli("evaluate --scenario " + s + " --out " + out), 3);
  EXPECT_EQ(run_cli("bogus-verb"), 2);

  const std::string small = " --pretrain-episodes 200 --episodes 4 --seed 1";
  EXPECT_EQ(run_cli("pretrain --scenario " + s + " --out " + out + small), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "pretrain_log.csv"));
  EXPECT_EQ(run_cli("evaluate --scenario " + s + " --approach atmarl --out " + out + small), 3);
  EXPECT_EQ(run_cli("train-supervisor --scenario " + s + " --approach atmarl --out " + out + small), 0);
  EXPECT_EQ(run_cli("evaluate --scenario " + s + " --approach atmarl --approach rule_based --out " + out + small), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "traces" / "atmarl_seed1.csv"));
  EXPECT_EQ(run_cli("report --scenario " + s + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.csv"));

  std::ofstream(dir / "out" / "checkpoint.ckpt", std::ios::trunc) << "ATMARL-CKPT v0\n";
  EXPECT_EQ(run_cli("evaluate --scenario " + s + " --approach atmarl --out " + out + small), 3);
  fs::remove_all(dir);
}
