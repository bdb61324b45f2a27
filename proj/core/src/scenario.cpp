#include "atmarl/scenario.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace atmarl::emulator {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& value, const std::string& key, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects a number, got '" +
                      value + "'");
  }
}

long long parse_int(const std::string& value, const std::string& key, int line) {
  long long v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects an integer, got '" +
                      value + "'");
  }
  return v;
}

struct PendingService {
  ServiceSpec spec;
  bool has_kind = false;
  bool has_demand = false;
  bool has_ues = false;
  bool has_target = false;
  std::optional<int> init_priority;
  std::optional<int> init_mbr_level;
  int line = 0;
};

}  // namespace

void assign_labels(std::vector<ServiceSpec>& services) {
  std::map<ServiceKind, int> totals;
  for (const auto& s : services) ++totals[s.kind];
  std::map<ServiceKind, int> seen;
  for (auto& s : services) {
    s.instance_id = seen[s.kind]++;
    std::string base(to_string(s.kind));
    std::transform(base.begin(), base.end(), base.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    s.label = totals[s.kind] > 1 ? base + std::to_string(s.instance_id + 1) : base;
  }
}

ScenarioConfig parse_scenario(std::istream& in) {
  ScenarioConfig config;
  std::optional<std::array<double, kNumGnbs>> weights;
  std::vector<PendingService> pending;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line != "[service]") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section " + line);
      }
      pending.push_back({});
      pending.back().line = line_no;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));

    if (pending.empty()) {
      if (key == "bandwidth_mbps") {
        config.bandwidth_mbps = parse_double(value, key, line_no);
      } else if (key == "distribution") {
        config.distribution.kind = parse_distribution_kind(value);
      } else if (key == "dist_weights") {
        std::array<double, kNumGnbs> w{};
        std::stringstream ss(value);
        std::string item;
        std::size_t i = 0;
        while (std::getline(ss, item, ',')) {
          if (i >= kNumGnbs) throw ConfigError("dist_weights expects exactly 4 values");
          w[i++] = parse_double(trim(item), key, line_no);
        }
        if (i != kNumGnbs) throw ConfigError("dist_weights expects exactly 4 values");
        weights = w;
      } else if (key == "noise_pct") {
        config.noise_pct = parse_double(value, key, line_no);
      } else if (key == "seed") {
        const long long seed = parse_int(value, key, line_no);
        if (seed < 0) throw ConfigError("seed must be non-negative");
        config.seed = static_cast<std::uint64_t>(seed);
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
      continue;
    }

    auto& svc = pending.back();
    if (key == "kind") {
      svc.spec.kind = parse_service_kind(value);
      svc.has_kind = true;
    } else if (key == "demand_mbps") {
      svc.spec.demand_per_ue = parse_double(value, key, line_no);
      svc.has_demand = true;
    } else if (key == "ue_count") {
      const long long n = parse_int(value, key, line_no);
      if (n < 0) throw ConfigError("ue_count must be >= 0");
      svc.spec.ue_count = static_cast<int>(n);
      svc.has_ues = true;
    } else if (key == "kpi_target") {
      svc.spec.kpi_target = parse_double(value, key, line_no);
      svc.has_target = true;
    } else if (key == "init_priority") {
      const long long p = parse_int(value, key, line_no);
      if (p < kMinPriority || p > kMaxPriority) {
        throw ConfigError("line " + std::to_string(line_no) + ": init_priority must be within [1, 5]");
      }
      svc.init_priority = static_cast<int>(p);
    } else if (key == "init_mbr") {
      const double mbr = parse_double(value, key, line_no);
      const auto it = std::find(kMbrLadder.begin(), kMbrLadder.end(), mbr);
      if (it == kMbrLadder.end()) {
        throw ConfigError("line " + std::to_string(line_no) + ": init_mbr must be one of the MBR ladder rungs");
      }
      svc.init_mbr_level = static_cast<int>(it - kMbrLadder.begin());
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown service key '" + key + "'");
    }
  }

  config.distribution.weights =
      weights ? *weights : DistributionSpec::preset(config.distribution.kind).weights;

  for (auto& svc : pending) {
    if (!svc.has_kind || !svc.has_demand || !svc.has_ues) {
      throw ConfigError("service block at line " + std::to_string(svc.line) +
                        " needs kind, demand_mbps and ue_count");
    }
    if (!svc.has_target) {
      svc.spec.kpi_target =
          svc.spec.kpi_kind() == KpiKind::kQoE ? kDefaultQoeTarget : kDefaultPlTarget;
    }
    config.services.push_back(svc.spec);
  }
  const bool custom_init = std::any_of(pending.begin(), pending.end(), [](const PendingService& p) {
    return p.init_priority.has_value() || p.init_mbr_level.has_value();
  });
  if (custom_init) {
    auto controls = ControlVector::defaults(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (pending[i].init_priority) controls.priority[i] = *pending[i].init_priority;
      if (pending[i].init_mbr_level) controls.mbr_level[i] = *pending[i].init_mbr_level;
    }
    config.initial_controls = controls;
  }
  assign_labels(config.services);
  config.validate();
  return config;
}

ScenarioConfig parse_scenario_string(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  return parse_scenario(in);
}

std::string format_scenario(const ScenarioConfig& config) {
  std::ostringstream out;
  out.precision(17);
  out << "bandwidth_mbps = " << config.bandwidth_mbps << "\n";
  out << "distribution = " << to_string(config.distribution.kind) << "\n";
  out << "dist_weights = ";
  for (std::size_t g = 0; g < kNumGnbs; ++g) {
    out << (g ? ", " : "") << config.distribution.weights[g];
  }
  out << "\nnoise_pct = " << config.noise_pct << "\n";
  out << "seed = " << config.seed << "\n";
  for (std::size_t i = 0; i < config.services.size(); ++i) {
    const auto& s = config.services[i];
    out << "\n[service]\n";
    out << "kind = " << to_string(s.kind) << "\n";
    out << "demand_mbps = " << s.demand_per_ue << "\n";
    out << "ue_count = " << s.ue_count << "\n";
    out << "kpi_target = " << s.kpi_target << "\n";
    if (config.initial_controls) {
      out << "init_priority = " << config.initial_controls->priority[i] << "\n";
      out << "init_mbr = " << config.initial_controls->mbr(i) << "\n";
    }
  }
  return out.str();
}

}  // namespace atmarl::emulator
