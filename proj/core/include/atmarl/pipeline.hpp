#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "atmarl/checkpoint.hpp"
#include "atmarl/harness.hpp"

namespace atmarl::harness {

// A stage (pretrain, train-supervisor, evaluate, report) failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentPlan {
  std::filesystem::path scenario_path;
  std::vector<Approach> approaches{Approach::kATMARL, Approach::kGoalHalving, Approach::kRuleBased,
                                   Approach::kNaiveParallel};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int episode_length = 40;
  std::vector<ShiftEvent> shifts;
  // Evaluation distribution; the scenario's own when absent. Supervisors other
  // than the Oracle are always trained on the scenario's distribution.
  std::optional<emulator::DistributionSpec> evaluation_distribution;
  agents::PretrainConfig pretrain;
  int supervisor_episodes = 400;
  std::uint64_t training_seed = 11;

  void validate() const;  // throws emulator::ConfigError
};

// Everything a run produces before evaluation.
struct Artifacts {
  emulator::ScenarioConfig scenario;
  agents::MarlSystem priority;
  agents::MarlSystem mbr;
  std::vector<agents::PretrainLogRow> logs;
  std::vector<agents::CapabilityVector> capabilities;  // from pretraining logs
  // Non-converged pretraining is kept but reported here. Infeasible goal
  // levels drag the mean reward down on tight scenarios.
  std::vector<std::string> warnings;

  struct TrainedPolicy {
    std::string tag;  // "atmarl", "goal_halving", "oracle"
    supervisor::SupervisorPolicy policy;
    std::vector<agents::CapabilityVector> capabilities;  // after online refresh
    supervisor::TrainReport report;
  };
  std::vector<TrainedPolicy> policies;

  const TrainedPolicy* find(const std::string& tag) const;
};

checkpoint::Store to_store(const Artifacts& artifacts);
// Restores systems, capabilities and whichever policies the store holds.
Artifacts from_store(const checkpoint::Store& store, const emulator::ScenarioConfig& scenario);

Artifacts pretrain_stage(const emulator::ScenarioConfig& scenario, const agents::PretrainConfig& config);

// atmarl and goal_halving train on the scenario distribution, oracle on the
// evaluation distribution. Rule-based and naive-parallel need no training.
void train_stage(Artifacts& artifacts, Approach approach, const ExperimentPlan& plan);

bool needs_training(Approach approach);
std::string policy_tag(Approach approach);

struct RunResult {
  Approach approach = Approach::kATMARL;
  std::uint64_t seed = 0;
  EpisodeTrace trace;
};

std::vector<RunResult> evaluate_stage(const Artifacts& artifacts, const ExperimentPlan& plan);

struct SummaryRow {
  Approach approach = Approach::kATMARL;
  std::string kpi;
  std::optional<double> iae_mean;  // empty when any seed never reached the band
  std::optional<double> iae_std;
  double conv_time_mean = 0.0;     // non-converging seeds count as the episode length
  double oscillation_mean = 0.0;
  std::size_t seeds = 0;
  std::size_t not_reached = 0;
  std::size_t not_converged = 0;
};

// One row per (approach, kpi), sorted by kpi then approach name.
std::vector<SummaryRow> summarize_runs(const std::vector<RunResult>& runs,
                                       const std::vector<supervisor::GlobalIntent>& intents);

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);
EpisodeTrace read_trace_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_plot_script(std::ostream& out, const emulator::ScenarioConfig& scenario);

std::string trace_file_name(Approach approach, std::uint64_t seed);

// Writes traces/<approach>_seed<n>.csv under `out_dir`.
void write_traces(const std::filesystem::path& out_dir, const std::vector<RunResult>& runs);
// Reads every trace file under out_dir/traces back into run results.
std::vector<RunResult> read_traces(const std::filesystem::path& out_dir);

// Writes summary.csv and plot_kpis.py; returns the summary.
std::vector<SummaryRow> emit_report(const std::filesystem::path& out_dir, const std::vector<RunResult>& runs,
                                    const emulator::ScenarioConfig& scenario);

struct PipelineResult {
  Artifacts artifacts;
  std::vector<RunResult> runs;
  std::vector<SummaryRow> summary;
};

// pretrain -> train supervisors -> evaluate every approach x seed -> report.
// Writes checkpoint.ckpt, pretrain_log.csv, traces and the report under out_dir
// when it is non-empty.
PipelineResult run_pipeline(const ExperimentPlan& plan, const std::filesystem::path& out_dir);

}  // namespace atmarl::harness
