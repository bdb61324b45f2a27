#pragma once

#include <array>
#include <optional>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "atmarl/rng.hpp"

namespace atmarl::emulator {

inline constexpr std::size_t kNumGnbs = 4;
inline constexpr int kMinPriority = 1;
inline constexpr int kMaxPriority = 5;
inline constexpr int kDefaultPriority = 3;
inline constexpr std::array<double, 7> kMbrLadder{0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0};
inline constexpr int kDefaultMbrLevel = 6;

inline constexpr double kQoeMin = 1.0;
inline constexpr double kQoeMax = 5.0;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidServiceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ServiceKind { kCV, kURLLC, kMIoT };
enum class KpiKind { kQoE, kPacketLoss };

std::string_view to_string(ServiceKind kind);
ServiceKind parse_service_kind(std::string_view text);  // throws ConfigError
KpiKind kpi_kind_for(ServiceKind kind);

struct ServiceSpec {
  ServiceKind kind = ServiceKind::kCV;
  int instance_id = 0;
  double demand_per_ue = 1.0;  // Mbps
  int ue_count = 0;
  double kpi_target = 0.0;
  std::string label;  // "cv", "urllc", "urllc2", ...

  KpiKind kpi_kind() const { return kpi_kind_for(kind); }
  double total_demand() const { return demand_per_ue * ue_count; }
};

enum class DistributionKind { kUniform, kGaussian, kGamma };

std::string_view to_string(DistributionKind kind);
DistributionKind parse_distribution_kind(std::string_view text);

// Fraction of the slice's UEs attached to each gNodeB.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::kUniform;
  std::array<double, kNumGnbs> weights{0.25, 0.25, 0.25, 0.25};

  static DistributionSpec uniform();
  static DistributionSpec gaussian();
  static DistributionSpec gamma();
  static DistributionSpec preset(DistributionKind kind);

  void validate() const;  // throws ConfigError

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

// Per-service knobs. MBR is stored as an index into kMbrLadder so that a
// control vector can never hold an off-ladder cap.
struct ControlVector {
  std::vector<int> priority;
  std::vector<int> mbr_level;

  static ControlVector defaults(std::size_t num_services);

  double mbr(std::size_t service) const { return kMbrLadder[mbr_level[service]]; }
  std::size_t size() const { return priority.size(); }
  void validate(std::size_t num_services) const;

  friend bool operator==(const ControlVector&, const ControlVector&) = default;
};

struct ScenarioConfig {
  std::vector<ServiceSpec> services;
  DistributionSpec distribution;
  double bandwidth_mbps = 10.0;  // per gNodeB
  double noise_pct = 5.0;
  std::uint64_t seed = 1;
  // Knob settings at reset; defaults when absent.
  std::optional<ControlVector> initial_controls;

  void validate() const;  // throws ConfigError
  std::size_t num_services() const { return services.size(); }
};

struct NetworkState {
  std::vector<ServiceSpec> services;
  DistributionSpec distribution;
  ControlVector controls;
  double airlink_bandwidth = 10.0;
  double noise_pct = 5.0;
  int timestep = 0;
  std::uint64_t rng_seed = 1;
};

struct KpiReport {
  std::vector<double> kpi;      // QoE in [1,5] or packet loss in [0,100]
  std::vector<double> served;   // slice total, Mbps
  std::vector<double> offered;  // slice total, Mbps
  std::array<std::vector<double>, kNumGnbs> served_per_gnb;
  std::array<std::vector<double>, kNumGnbs> offered_per_gnb;
  double capacity = 0.0;  // bandwidth summed over gNodeBs

  // Offered load over total capacity.
  double congestion() const;
};

NetworkState init_scenario(const ScenarioConfig& config);

// Shares one gNodeB's bandwidth. Each service is clipped to its MBR, then the
// link is split in proportion to priority x clipped demand; services whose
// share exceeds their demand release the surplus, which is re-split among
// the rest until nothing changes.
std::vector<double> allocate_capacity(std::span<const double> offered,
                                      const ControlVector& controls, double bandwidth);

double compute_qoe(double served, double demand);
double compute_packet_loss(double offered, double served);

// Offered load per gNodeB for the current distribution, before noise.
std::array<std::vector<double>, kNumGnbs> nominal_offered(const NetworkState& state);

// Advances the state in place and returns the KPIs observed for the step.
KpiReport advance(NetworkState& state, Rng& rng);

struct StepResult {
  NetworkState state;
  KpiReport report;
};
StepResult step(const NetworkState& state, Rng& rng);

NetworkState set_distribution(const NetworkState& state, const DistributionSpec& spec);

// True when every gNodeB in the report respects bandwidth and MBR limits.
bool conserves_capacity(const KpiReport& report, const ControlVector& controls,
                        double bandwidth, double tolerance = 1e-9);

}  // namespace atmarl::emulator
