#include "atmarl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "atmarl/scenario.hpp"

namespace atmarl::harness {
namespace {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw emulator::ConfigError("bad number '" + s + "' in trace");
  }
  return v;
}

supervisor::GoalMode mode_of(Approach approach) {
  return approach == Approach::kGoalHalving ? supervisor::GoalMode::kHalving
                                            : supervisor::GoalMode::kAgentLevel;
}

emulator::ScenarioConfig evaluation_scenario(const emulator::ScenarioConfig& scenario,
                                             const ExperimentPlan& plan) {
  auto out = scenario;
  if (plan.evaluation_distribution) out.distribution = *plan.evaluation_distribution;
  return out;
}

template <typename F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const emulator::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

void ExperimentPlan::validate() const {
  if (seeds.empty()) throw emulator::ConfigError("plan needs at least one seed");
  if (approaches.empty()) throw emulator::ConfigError("plan needs at least one approach");
  if (episode_length < 1) throw emulator::ConfigError("episode length must be >= 1");
  if (supervisor_episodes < 1) throw emulator::ConfigError("supervisor episodes must be >= 1");
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (shifts[i].timestep < 0 || shifts[i].timestep >= episode_length ||
        (i > 0 && shifts[i].timestep <= shifts[i - 1].timestep)) {
      throw emulator::ConfigError("shift timesteps must be strictly increasing and below the episode length");
    }
    shifts[i].distribution.validate();
  }
  if (evaluation_distribution) evaluation_distribution->validate();
}

const Artifacts::TrainedPolicy* Artifacts::find(const std::string& tag) const {
  for (const auto& p : policies) {
    if (p.tag == tag) return &p;
  }
  return nullptr;
}

bool needs_training(Approach approach) {
  return approach == Approach::kATMARL || approach == Approach::kGoalHalving || approach == Approach::kOracle;
}

std::string policy_tag(Approach approach) { return std::string(to_string(approach)); }

checkpoint::Store to_store(const Artifacts& artifacts) {
  checkpoint::Store store;
  checkpoint::put_system(store, artifacts.priority);
  checkpoint::put_system(store, artifacts.mbr);
  checkpoint::put_capabilities(store, artifacts.capabilities);
  for (const auto& p : artifacts.policies) {
    checkpoint::put_policy(store, p.tag, p.policy);
    checkpoint::put_capabilities(store, p.capabilities, p.tag + ".");
  }
  return store;
}

Artifacts from_store(const checkpoint::Store& store, const emulator::ScenarioConfig& scenario) {
  Artifacts a;
  a.scenario = scenario;
  const std::size_t k = scenario.num_services();
  a.priority = checkpoint::get_system(store, agents::System::kPriority, k);
  a.mbr = checkpoint::get_system(store, agents::System::kMbr, k);
  a.capabilities = checkpoint::get_capabilities(store, 2 * k);
  for (Approach ap : {Approach::kATMARL, Approach::kGoalHalving, Approach::kOracle}) {
    const auto tag = policy_tag(ap);
    if (!checkpoint::has_policy(store, tag)) continue;
    Artifacts::TrainedPolicy p;
    p.tag = tag;
    p.policy = checkpoint::get_policy(store, tag);
    if (p.policy.shape().agents != static_cast<int>(2 * k) ||
        p.policy.shape().heads != supervisor::head_count(mode_of(ap), k)) {
      throw checkpoint::ShapeMismatchError("policy " + tag + " does not match the scenario's intents");
    }
    p.capabilities = checkpoint::get_capabilities(store, 2 * k, tag + ".");
    a.policies.push_back(std::move(p));
  }
  return a;
}

Artifacts pretrain_stage(const emulator::ScenarioConfig& scenario, const agents::PretrainConfig& config) {
  return in_stage("pretrain", [&] {
    Artifacts a;
    a.scenario = scenario;
    auto pr = agents::pretrain_system(agents::System::kPriority, scenario, config);
    auto mb = agents::pretrain_system(agents::System::kMbr, scenario, config);
    for (const auto* r : {&pr, &mb}) {
      if (!r->converged) {
        a.warnings.push_back(std::string(agents::to_string(r->system.system)) +
                             " system below the convergence threshold (final mean reward " +
                             format_double(r->final_mean_reward) + ")");
      }
    }
    a.priority = std::move(pr.system);
    a.mbr = std::move(mb.system);
    a.logs = std::move(pr.logs);
    a.logs.insert(a.logs.end(), mb.logs.begin(), mb.logs.end());
    a.capabilities = agents::estimate_capabilities(a.logs, scenario.num_services(), agents::kGoalLevels,
                                                   config.horizon);
    return a;
  });
}

void train_stage(Artifacts& artifacts, Approach approach, const ExperimentPlan& plan) {
  if (!needs_training(approach)) return;
  in_stage("train-supervisor", [&] {
    const std::size_t k = artifacts.scenario.num_services();
    auto scenario = artifacts.scenario;
    if (approach == Approach::kOracle) scenario = evaluation_scenario(artifacts.scenario, plan);
    agents::TeamEnv env(scenario, artifacts.priority, artifacts.mbr);

    const auto mode = mode_of(approach);
    supervisor::PolicyShape shape;
    shape.agents = static_cast<int>(2 * k);
    shape.intents = static_cast<int>(k);
    shape.heads = supervisor::head_count(mode, k);

    Artifacts::TrainedPolicy trained;
    trained.tag = policy_tag(approach);
    trained.policy = supervisor::SupervisorPolicy(
        shape, mix_seed(plan.training_seed, static_cast<std::uint64_t>(approach)));
    trained.capabilities = artifacts.capabilities;

    supervisor::TrainConfig config;
    config.episodes = plan.supervisor_episodes;
    config.episode_length = plan.episode_length;
    config.mode = mode;
    config.seed = plan.training_seed;
    trained.report = supervisor::train_supervisor(trained.policy, env, trained.capabilities, config);

    auto& policies = artifacts.policies;
    policies.erase(std::remove_if(policies.begin(), policies.end(),
                                  [&](const auto& p) { return p.tag == trained.tag; }),
                   policies.end());
    policies.push_back(std::move(trained));
    return 0;
  });
}

std::vector<RunResult> evaluate_stage(const Artifacts& artifacts, const ExperimentPlan& plan) {
  return in_stage("evaluate", [&] {
    const auto scenario = evaluation_scenario(artifacts.scenario, plan);
    agents::TeamEnv env(scenario, artifacts.priority, artifacts.mbr);
    std::vector<RunResult> runs;
    for (Approach approach : plan.approaches) {
      std::unique_ptr<Controller> controller;
      switch (approach) {
        case Approach::kRuleBased:
          controller = make_rule_based();
          break;
        case Approach::kNaiveParallel:
          controller = make_naive_parallel();
          break;
        default: {
          const auto* p = artifacts.find(policy_tag(approach));
          if (!p) throw StageError("evaluate", "checkpoint has no trained " + policy_tag(approach) + " supervisor");
          controller = make_supervised(p->policy, p->capabilities, mode_of(approach));
        }
      }
      for (std::uint64_t seed : plan.seeds) {
        runs.push_back({approach, seed, run_episode(env, *controller, plan.episode_length, plan.shifts, seed)});
      }
    }
    return runs;
  });
}

std::vector<SummaryRow> summarize_runs(const std::vector<RunResult>& runs,
                                       const std::vector<supervisor::GlobalIntent>& intents) {
  struct Acc {
    std::vector<double> iae, conv, osc;
    std::size_t nr = 0, nc = 0;
  };
  std::map<std::pair<std::string, std::string>, std::pair<Approach, Acc>> acc;
  for (const auto& run : runs) {
    const auto& names = run.trace.kpi_names;
    if (names.size() != intents.size()) throw std::invalid_argument("trace does not match the scenario's intents");
    for (std::size_t k = 0; k < intents.size(); ++k) {
      const auto m = kpi_metrics(run.trace, k, intents);
      auto& [ap, a] = acc[{names[k], std::string(to_string(run.approach))}];
      ap = run.approach;
      if (m.iae) {
        a.iae.push_back(*m.iae);
      } else {
        ++a.nr;
      }
      if (m.convergence) {
        a.conv.push_back(static_cast<double>(*m.convergence));
      } else {
        a.conv.push_back(static_cast<double>(run.trace.rows.size()));
        ++a.nc;
      }
      a.osc.push_back(m.oscillation);
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, value] : acc) {
    const auto& [ap, a] = value;
    SummaryRow r;
    r.approach = ap;
    r.kpi = key.first;
    r.seeds = a.conv.size();
    r.not_reached = a.nr;
    r.not_converged = a.nc;
    if (a.nr == 0) {
      const auto s = metrics::summarize(a.iae);
      r.iae_mean = s.mean;
      r.iae_std = s.stddev;
    }
    r.conv_time_mean = metrics::summarize(a.conv).mean;
    r.oscillation_mean = metrics::summarize(a.osc).mean;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  out << "t";
  for (const auto& n : trace.kpi_names) out << ",kpi_" << n;
  for (const auto& n : trace.agent_names) out << ",goal_" << n;
  for (const auto& n : trace.agent_names) out << ",knob_" << n;
  out << ",reward,active_priority,active_mbr,dist_kind\n";
  for (const auto& r : trace.rows) {
    out << r.t;
    for (double v : r.kpi) out << ',' << format_double(v);
    for (double v : r.goal) out << ',' << format_double(v);
    for (int v : r.knob) out << ',' << v;
    out << ',' << format_double(r.reward) << ',' << (r.active_priority ? 1 : 0) << ','
        << (r.active_mbr ? 1 : 0) << ',' << emulator::to_string(r.distribution) << '\n';
  }
}

EpisodeTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw emulator::ConfigError("empty trace file");
  const auto header = split_csv(line);
  EpisodeTrace trace;
  std::vector<std::string> knob_names;
  for (const auto& h : header) {
    if (h.rfind("kpi_", 0) == 0) trace.kpi_names.push_back(h.substr(4));
    if (h.rfind("goal_", 0) == 0) trace.agent_names.push_back(h.substr(5));
    if (h.rfind("knob_", 0) == 0) knob_names.push_back(h.substr(5));
  }
  const std::size_t k = trace.kpi_names.size();
  const std::size_t n = trace.agent_names.size();
  if (header.empty() || header[0] != "t" || knob_names != trace.agent_names || header.size() != 1 + k + 2 * n + 4) {
    throw emulator::ConfigError("unexpected trace header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw emulator::ConfigError("trace row has wrong column count");
    TraceRow r;
    std::size_t c = 0;
    r.t = static_cast<int>(to_double(cells[c++]));
    for (std::size_t i = 0; i < k; ++i) r.kpi.push_back(to_double(cells[c++]));
    for (std::size_t i = 0; i < n; ++i) r.goal.push_back(to_double(cells[c++]));
    for (std::size_t i = 0; i < n; ++i) r.knob.push_back(static_cast<int>(to_double(cells[c++])));
    r.reward = to_double(cells[c++]);
    r.active_priority = cells[c++] == "1";
    r.active_mbr = cells[c++] == "1";
    r.distribution = emulator::parse_distribution_kind(cells[c++]);
    trace.rows.push_back(std::move(r));
  }
  return trace;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "approach,kpi,iae_mean,iae_std,conv_time_mean,oscillation_mean\n";
  for (const auto& r : rows) {
    out << to_string(r.approach) << ',' << r.kpi << ',' << (r.iae_mean ? fixed6(*r.iae_mean) : "NR") << ','
        << (r.iae_std ? fixed6(*r.iae_std) : "NR") << ',' << fixed6(r.conv_time_mean) << ','
        << fixed6(r.oscillation_mean) << '\n';
  }
}

void write_plot_script(std::ostream& out, const emulator::ScenarioConfig& scenario) {
  out << "#!/usr/bin/env python3\n"
         "# KPI vs timestep, one panel per KPI, seed-mean per approach.\n"
         "# usage: python3 plot_kpis.py [run_dir]\n"
         "import csv\n"
         "import glob\n"
         "import os\n"
         "import sys\n"
         "from collections import defaultdict\n"
         "\n"
         "import matplotlib\n"
         "matplotlib.use(\"Agg\")\n"
         "import matplotlib.pyplot as plt\n"
         "\n"
         "TARGETS = {";
  for (std::size_t i = 0; i < scenario.services.size(); ++i) {
    const auto& s = scenario.services[i];
    if (i) out << ", ";
    out << '"' << s.label << "\": (" << format_double(s.kpi_target) << ", \""
        << (s.kpi_kind() == emulator::KpiKind::kQoE ? "QoE" : "packet loss %") << "\")";
  }
  out << "}\n"
         "\n"
         "\n"
         "def main():\n"
         "    run_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))\n"
         "    series = defaultdict(lambda: defaultdict(list))\n"
         "    shifts = set()\n"
         "    for path in sorted(glob.glob(os.path.join(run_dir, \"traces\", \"*_seed*.csv\"))):\n"
         "        approach = os.path.basename(path).rsplit(\"_seed\", 1)[0]\n"
         "        with open(path, newline=\"\") as f:\n"
         "            rows = list(csv.DictReader(f))\n"
         "        for i in range(1, len(rows)):\n"
         "            if rows[i][\"dist_kind\"] != rows[i - 1][\"dist_kind\"]:\n"
         "                shifts.add(int(rows[i][\"t\"]))\n"
         "        for name in TARGETS:\n"
         "            series[name][approach].append([float(r[\"kpi_\" + name]) for r in rows])\n"
         "\n"
         "    fig, axes = plt.subplots(len(TARGETS), 1, figsize=(7, 2.6 * len(TARGETS)), sharex=True)\n"
         "    if len(TARGETS) == 1:\n"
         "        axes = [axes]\n"
         "    for ax, (name, (target, unit)) in zip(axes, TARGETS.items()):\n"
         "        for approach, runs in sorted(series[name].items()):\n"
         "            n = min(len(r) for r in runs)\n"
         "            mean = [sum(r[t] for r in runs) / len(runs) for t in range(n)]\n"
         "            ax.plot(range(n), mean, label=approach)\n"
         "        ax.axhline(target, color=\"k\", linestyle=\"--\", linewidth=0.8)\n"
         "        for t in sorted(shifts):\n"
         "            ax.axvline(t, color=\"grey\", linestyle=\":\", linewidth=0.8)\n"
         "        ax.set_ylabel(name + \" \" + unit)\n"
         "    axes[0].legend(fontsize=8)\n"
         "    axes[-1].set_xlabel(\"timestep\")\n"
         "    fig.tight_layout()\n"
         "    out = os.path.join(run_dir, \"kpis.png\")\n"
         "    fig.savefig(out, dpi=120)\n"
         "    print(out)\n"
         "\n"
         "\n"
         "if __name__ == \"__main__\":\n"
         "    main()\n";
}

std::string trace_file_name(Approach approach, std::uint64_t seed) {
  return std::string(to_string(approach)) + "_seed" + std::to_string(seed) + ".csv";
}

void write_traces(const fs::path& out_dir, const std::vector<RunResult>& runs) {
  const auto dir = out_dir / "traces";
  fs::create_directories(dir);
  for (const auto& run : runs) {
    std::ofstream out(dir / trace_file_name(run.approach, run.seed), std::ios::trunc);
    if (!out) throw StageError("report", "cannot write trace under " + dir.string());
    write_trace_csv(out, run.trace);
  }
}

std::vector<RunResult> read_traces(const fs::path& out_dir) {
  const auto dir = out_dir / "traces";
  if (!fs::is_directory(dir)) throw StageError("report", "no traces under " + out_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunResult> runs;
  for (const auto& f : files) {
    const auto stem = f.stem().string();
    const auto pos = stem.rfind("_seed");
    if (pos == std::string::npos) continue;
    RunResult r;
    r.approach = parse_approach(stem.substr(0, pos));
    r.seed = std::stoull(stem.substr(pos + 5));
    std::ifstream in(f);
    r.trace = read_trace_csv(in);
    runs.push_back(std::move(r));
  }
  if (runs.empty()) throw StageError("report", "no traces under " + dir.string());
  return runs;
}

std::vector<SummaryRow> emit_report(const fs::path& out_dir, const std::vector<RunResult>& runs,
                                    const emulator::ScenarioConfig& scenario) {
  if (runs.empty()) throw StageError("report", "no completed traces");
  return in_stage("report", [&] {
    const auto rows = summarize_runs(runs, supervisor::intents_of(scenario.services));
    fs::create_directories(out_dir);
    {
      std::ofstream out(out_dir / "summary.csv", std::ios::trunc);
      write_summary_csv(out, rows);
    }
    std::ofstream plot(out_dir / "plot_kpis.py", std::ios::trunc);
    write_plot_script(plot, scenario);
    return rows;
  });
}

PipelineResult run_pipeline(const ExperimentPlan& plan, const fs::path& out_dir) {
  plan.validate();
  const auto scenario = emulator::load_scenario(plan.scenario_path);
  PipelineResult result;
  result.artifacts = pretrain_stage(scenario, plan.pretrain);
  for (Approach a : {Approach::kATMARL, Approach::kGoalHalving, Approach::kOracle}) {
    if (std::find(plan.approaches.begin(), plan.approaches.end(), a) != plan.approaches.end()) {
      train_stage(result.artifacts, a, plan);
    }
  }
  if (!out_dir.empty()) {
    in_stage("train-supervisor", [&] {
      fs::create_directories(out_dir);
      to_store(result.artifacts).save(out_dir / "checkpoint.ckpt");
      std::ofstream log(out_dir / "pretrain_log.csv", std::ios::trunc);
      agents::write_pretrain_log(log, result.artifacts.logs);
      return 0;
    });
  }
  result.runs = evaluate_stage(result.artifacts, plan);
  if (out_dir.empty()) {
    result.summary = summarize_runs(result.runs, supervisor::intents_of(scenario.services));
  } else {
    in_stage("report", [&] {
      write_traces(out_dir, result.runs);
      return 0;
    });
    result.summary = emit_report(out_dir, result.runs, scenario);
  }
  return result;
}

}  // namespace atmarl::harness
