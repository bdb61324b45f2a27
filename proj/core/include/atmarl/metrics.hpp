#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace atmarl::metrics {

enum class Direction { kMaximize, kMinimize };

struct KpiSeries {
  std::vector<double> values;
  double target = 1.0;
  Direction direction = Direction::kMaximize;
};

// Index of the first sample inside the 10% band (>= 0.9T when maximizing,
// <= 1.1T when minimizing).
std::optional<std::size_t> onset(const KpiSeries& series, double tolerance = 0.10);

// Mean relative absolute error from the onset sample on. Empty when the KPI
// never enters the band. Throws std::invalid_argument for T <= 0.
std::optional<double> iae(const KpiSeries& series);

// First timestep from which the KPI stays inside the band until the end.
std::optional<std::size_t> convergence_time(const KpiSeries& series, double tolerance = 0.10);

// (max - min) / T over values[from..].
double oscillation_amplitude(const KpiSeries& series, std::size_t from);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

}  // namespace atmarl::metrics
