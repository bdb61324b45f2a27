#include "atmarl/emulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace atmarl::emulator {
namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::kCV:
      return "CV";
    case ServiceKind::kURLLC:
      return "URLLC";
    case ServiceKind::kMIoT:
      return "mIoT";
  }
  return "?";
}

ServiceKind parse_service_kind(std::string_view text) {
  const std::string key = lower(text);
  if (key == "cv") return ServiceKind::kCV;
  if (key == "urllc") return ServiceKind::kURLLC;
  if (key == "miot") return ServiceKind::kMIoT;
  throw ConfigError("unknown service kind '" + std::string(text) + "'");
}

KpiKind kpi_kind_for(ServiceKind kind) {
  return kind == ServiceKind::kCV ? KpiKind::kQoE : KpiKind::kPacketLoss;
}

std::string_view to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::kUniform:
      return "uniform";
    case DistributionKind::kGaussian:
      return "gaussian";
    case DistributionKind::kGamma:
      return "gamma";
  }
  return "?";
}

DistributionKind parse_distribution_kind(std::string_view text) {
  const std::string key = lower(text);
  if (key == "uniform") return DistributionKind::kUniform;
  if (key == "gaussian") return DistributionKind::kGaussian;
  if (key == "gamma") return DistributionKind::kGamma;
  throw ConfigError("unknown distribution '" + std::string(text) + "'");
}

DistributionSpec DistributionSpec::uniform() {
  return {DistributionKind::kUniform, {0.25, 0.25, 0.25, 0.25}};
}

// Four-bin readings of the UE histograms: a bell centred on the two middle
// cells and a right-skewed mass concentrated on the first cell.
DistributionSpec DistributionSpec::gaussian() {
  return {DistributionKind::kGaussian, {0.15, 0.35, 0.35, 0.15}};
}

DistributionSpec DistributionSpec::gamma() {
  return {DistributionKind::kGamma, {0.45, 0.30, 0.15, 0.10}};
}

DistributionSpec DistributionSpec::preset(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::kUniform:
      return uniform();
    case DistributionKind::kGaussian:
      return gaussian();
    case DistributionKind::kGamma:
      return gamma();
  }
  return uniform();
}

void DistributionSpec::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("distribution weight must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("distribution weights must sum to 1");
  if (kind == DistributionKind::kUniform) {
    for (double w : weights) {
      if (std::abs(w - 0.25) > 1e-12) throw ConfigError("uniform weights must all be 0.25");
    }
  }
}

ControlVector ControlVector::defaults(std::size_t num_services) {
  return {std::vector<int>(num_services, kDefaultPriority),
          std::vector<int>(num_services, kDefaultMbrLevel)};
}

void ControlVector::validate(std::size_t num_services) const {
  if (priority.size() != num_services || mbr_level.size() != num_services) {
    throw std::invalid_argument("control vector size does not match service count");
  }
  for (std::size_t s = 0; s < num_services; ++s) {
    if (priority[s] < kMinPriority || priority[s] > kMaxPriority) {
      throw std::invalid_argument("priority out of range");
    }
    if (mbr_level[s] < 0 || mbr_level[s] >= static_cast<int>(kMbrLadder.size())) {
      throw std::invalid_argument("mbr level out of range");
    }
  }
}

void ScenarioConfig::validate() const {
  if (services.empty()) throw ConfigError("scenario has no services");
  if (!(bandwidth_mbps > 0.0)) throw ConfigError("bandwidth_mbps must be positive");
  if (!(noise_pct >= 0.0) || noise_pct >= 100.0) throw ConfigError("noise_pct must be in [0, 100)");
  distribution.validate();
  if (initial_controls) initial_controls->validate(services.size());
  for (const auto& s : services) {
    if (!(s.demand_per_ue > 0.0)) throw ConfigError("demand_mbps must be positive");
    if (s.ue_count < 0) throw ConfigError("ue_count must be >= 0");
    if (s.kpi_kind() == KpiKind::kQoE && (s.kpi_target < kQoeMin || s.kpi_target > kQoeMax)) {
      throw ConfigError("QoE target must be within [1, 5]");
    }
    if (s.kpi_kind() == KpiKind::kPacketLoss && (s.kpi_target <= 0.0 || s.kpi_target > 100.0)) {
      throw ConfigError("packet-loss target must be within (0, 100]");
    }
  }
}

double KpiReport::congestion() const {
  if (capacity <= 0.0) return 0.0;
  return std::accumulate(offered.begin(), offered.end(), 0.0) / capacity;
}

NetworkState init_scenario(const ScenarioConfig& config) {
  config.validate();
  NetworkState state;
  state.services = config.services;
  state.distribution = config.distribution;
  state.controls = config.initial_controls.value_or(ControlVector::defaults(config.services.size()));
  state.airlink_bandwidth = config.bandwidth_mbps;
  state.noise_pct = config.noise_pct;
  state.timestep = 0;
  state.rng_seed = config.seed;
  return state;
}

std::vector<double> allocate_capacity(std::span<const double> offered,
                                      const ControlVector& controls, double bandwidth) {
  const std::size_t n = offered.size();
  std::vector<double> demand(n);
  for (std::size_t s = 0; s < n; ++s) demand[s] = std::min(std::max(offered[s], 0.0), controls.mbr(s));

  std::vector<double> served(n, 0.0);
  std::vector<bool> active(n);
  for (std::size_t s = 0; s < n; ++s) active[s] = demand[s] > 0.0;
  double remaining = bandwidth;

  for (;;) {
    double total = 0.0;
    double weight = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s]) continue;
      total += demand[s];
      weight += controls.priority[s] * demand[s];
    }
    if (weight <= 0.0) break;
    if (total <= remaining) {
      for (std::size_t s = 0; s < n; ++s) {
        if (active[s]) served[s] = demand[s];
      }
      break;
    }
    bool released = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s]) continue;
      const double share = remaining * controls.priority[s] * demand[s] / weight;
      if (share >= demand[s]) {
        served[s] = demand[s];
        active[s] = false;
        released = true;
      }
    }
    if (!released) {
      for (std::size_t s = 0; s < n; ++s) {
        if (active[s]) served[s] = remaining * controls.priority[s] * demand[s] / weight;
      }
      break;
    }
    remaining = bandwidth;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s]) remaining -= served[s];
    }
    remaining = std::max(remaining, 0.0);
  }
  return served;
}

double compute_qoe(double served, double demand) {
  if (!(demand > 0.0)) throw InvalidServiceError("QoE undefined for zero demand");
  const double ratio = std::clamp(served / demand, 0.0, 1.0);
  return std::clamp(kQoeMin + (kQoeMax - kQoeMin) * ratio, kQoeMin, kQoeMax);
}

double compute_packet_loss(double offered, double served) {
  if (offered <= 0.0) return 0.0;
  return std::clamp(100.0 * (offered - served) / offered, 0.0, 100.0);
}

std::array<std::vector<double>, kNumGnbs> nominal_offered(const NetworkState& state) {
  std::array<std::vector<double>, kNumGnbs> out;
  for (std::size_t g = 0; g < kNumGnbs; ++g) {
    out[g].resize(state.services.size());
    for (std::size_t s = 0; s < state.services.size(); ++s) {
      out[g][s] = state.services[s].total_demand() * state.distribution.weights[g];
    }
  }
  return out;
}

KpiReport advance(NetworkState& state, Rng& rng) {
  const std::size_t n = state.services.size();
  const double amplitude = state.noise_pct / 100.0;

  KpiReport report;
  report.kpi.assign(n, 0.0);
  report.served.assign(n, 0.0);
  report.offered.assign(n, 0.0);
  report.capacity = state.airlink_bandwidth * static_cast<double>(kNumGnbs);

  auto offered = nominal_offered(state);
  for (std::size_t g = 0; g < kNumGnbs; ++g) {
    for (std::size_t s = 0; s < n; ++s) {
      // Draw noise for every cell, even empty ones, so the random stream
      // does not depend on the distribution.
      const double eps = rng.uniform(-amplitude, amplitude);
      offered[g][s] *= 1.0 + eps;
    }
    report.served_per_gnb[g] = allocate_capacity(offered[g], state.controls, state.airlink_bandwidth);
    report.offered_per_gnb[g] = offered[g];
  }

  for (std::size_t s = 0; s < n; ++s) {
    double kpi = 0.0;
    double mass = 0.0;
    for (std::size_t g = 0; g < kNumGnbs; ++g) {
      const double w = state.distribution.weights[g];
      report.served[s] += report.served_per_gnb[g][s];
      report.offered[s] += offered[g][s];
      if (w <= 0.0) continue;
      const double cell_kpi =
          state.services[s].kpi_kind() == KpiKind::kQoE
              ? (offered[g][s] > 0.0 ? compute_qoe(report.served_per_gnb[g][s], offered[g][s]) : kQoeMax)
              : compute_packet_loss(offered[g][s], report.served_per_gnb[g][s]);
      kpi += w * cell_kpi;
      mass += w;
    }
    report.kpi[s] = mass > 0.0 ? kpi / mass : 0.0;
  }
  ++state.timestep;
  return report;
}

StepResult step(const NetworkState& state, Rng& rng) {
  StepResult result{state, {}};
  result.report = advance(result.state, rng);
  return result;
}

NetworkState set_distribution(const NetworkState& state, const DistributionSpec& spec) {
  spec.validate();
  NetworkState next = state;
  next.distribution = spec;
  return next;
}

bool conserves_capacity(const KpiReport& report, const ControlVector& controls, double bandwidth,
                        double tolerance) {
  for (std::size_t g = 0; g < kNumGnbs; ++g) {
    const auto& served = report.served_per_gnb[g];
    const auto& offered = report.offered_per_gnb[g];
    double total = 0.0;
    for (std::size_t s = 0; s < served.size(); ++s) {
      if (served[s] < -tolerance) return false;
      if (served[s] > std::min(offered[s], controls.mbr(s)) + tolerance) return false;
      total += served[s];
    }
    if (total > bandwidth + tolerance) return false;
  }
  return true;
}

}  // namespace atmarl::emulator
