#include "atmarl/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace atmarl::metrics {
namespace {

bool in_band(double v, const KpiSeries& s, double tolerance) {
  return s.direction == Direction::kMaximize ? v >= (1.0 - tolerance) * s.target
                                             : v <= (1.0 + tolerance) * s.target;
}

void check(const KpiSeries& s) {
  if (!(s.target > 0.0)) throw std::invalid_argument("KPI target must be positive");
  if (s.values.empty()) throw std::invalid_argument("KPI series is empty");
}

}  // namespace

std::optional<std::size_t> onset(const KpiSeries& series, double tolerance) {
  check(series);
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (in_band(series.values[i], series, tolerance)) return i;
  }
  return std::nullopt;
}

std::optional<double> iae(const KpiSeries& series) {
  const auto start = onset(series);
  if (!start) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = *start; i < series.values.size(); ++i) {
    sum += std::abs(series.values[i] - series.target) / series.target;
  }
  return sum / static_cast<double>(series.values.size() - *start);
}

std::optional<std::size_t> convergence_time(const KpiSeries& series, double tolerance) {
  check(series);
  std::optional<std::size_t> start;
  for (std::size_t i = series.values.size(); i-- > 0;) {
    if (!in_band(series.values[i], series, tolerance)) break;
    start = i;
  }
  return start;
}

double oscillation_amplitude(const KpiSeries& series, std::size_t from) {
  check(series);
  if (from >= series.values.size()) throw std::invalid_argument("suffix start past end of series");
  const auto [lo, hi] = std::minmax_element(series.values.begin() + static_cast<long>(from),
                                            series.values.end());
  return (*hi - *lo) / series.target;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace atmarl::metrics
