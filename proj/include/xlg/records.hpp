#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xlg/agreement.hpp"

namespace xlg {

enum class Metric { iou_cluster, iou_p90, iou_p95, iou_p99, spearman, peak_ratio };

inline constexpr std::array<Metric, 6> kAllMetrics{Metric::iou_cluster, Metric::iou_p90,
                                                   Metric::iou_p95,     Metric::iou_p99,
                                                   Metric::spearman,    Metric::peak_ratio};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);

/// Value of `m` in `r`, or nullopt when undefined for that record.
std::optional<double> metric_value(const MetricRecord& r, Metric m);

inline constexpr std::string_view kRecordCsvHeader =
    "backbone,image_id,concept,language,iou_cluster,iou_p90,iou_p95,iou_p99,spearman,"
    "peak_ratio,flags";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

void write_records_csv(std::ostream& out, const std::vector<MetricRecord>& records);
void write_records_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_records_csv(std::istream& in);
std::vector<MetricRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace xlg
