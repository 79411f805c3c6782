#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace xlg {

struct PowerSample {
  double t_s = 0.0;
  double watts = 0.0;
};

/// Timestamped GPU power draw; timestamps strictly increasing, power finite
/// and non-negative.
struct PowerTrace {
  std::vector<PowerSample> samples;
  /// Indices i where samples[i].t_s - samples[i-1].t_s exceeded the gap limit.
  std::vector<std::size_t> gaps;

  void validate() const;
  double duration_s() const;
};

inline constexpr double kNominalPeriodS = 0.1;  // 10 Hz sampling
inline constexpr double kGapFactor = 10.0;

/// Parses `t_s,power_w` CSV. Lines starting with '#' (phase markers) are
/// skipped. Intervals longer than kGapFactor x nominal_period are recorded in
/// `gaps`. Errors carry the 1-based line number.
PowerTrace parse_power_csv(std::istream& in, double nominal_period_s = kNominalPeriodS);
PowerTrace parse_power_csv(const std::filesystem::path& path,
                           double nominal_period_s = kNominalPeriodS);

/// Trapezoidal integral of power over the trace, in watt-hours.
double integrate_energy(const PowerTrace& trace);

/// Watt-hours per 1,000 queries.
double e_per_1k(double total_wh, std::size_t n_queries);

struct EnergyReport {
  double total_wh = 0.0;
  double mean_watts = 0.0;
  double duration_s = 0.0;
  std::size_t n_queries = 0;
  double e_per_1k = 0.0;
  std::optional<double> baseline_watts;
  std::size_t gap_count = 0;
  std::string label;
};

/// Aggregates a trace. When `baseline_watts` is set, baseline * duration is
/// subtracted from the gross energy (off by default; gross draw is reported).
EnergyReport make_energy_report(const PowerTrace& trace, std::size_t n_queries,
                                std::optional<double> baseline_watts = std::nullopt);

std::string energy_report_to_json(const EnergyReport& r, int indent = 2);
EnergyReport energy_report_from_json(std::string_view text);

}  // namespace xlg
