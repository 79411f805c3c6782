#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xlg/energy.hpp"
#include "xlg/manifest.hpp"
#include "xlg/records.hpp"

namespace xlg {

struct MetricSummary {
  std::optional<double> mean;
  std::optional<double> median;
  std::size_t count_defined = 0;
};

struct LanguageSummary {
  std::string language;
  ResourceClass resource_class = ResourceClass::high;
  std::size_t total = 0;
  std::map<Metric, MetricSummary> metrics;
  std::map<Flag, std::size_t> count_flagged;
};

struct GroupComparison {
  std::optional<double> hr_mean;
  std::optional<double> lr_mean;
  std::optional<double> gap;  ///< hr_mean - lr_mean
};

struct Summary {
  std::string backbone;
  std::vector<LanguageSummary> languages;  ///< manifest order, reference excluded
  std::map<Metric, GroupComparison> groups;
  std::size_t record_count = 0;
};

/// Per-language and pooled HR/LR means over defined values. Throws
/// InvalidArgument on an empty record set.
Summary summarize(const std::vector<MetricRecord>& records, const Manifest& manifest);

struct ScaleShift {
  std::string language;
  double iou_base = 0.0;
  double iou_large = 0.0;
  double delta_iou = 0.0;
};

/// Per-language change in mean cluster IoU between two backbones, for the
/// languages both record sets cover.
std::vector<ScaleShift> scale_shift(const std::vector<MetricRecord>& base,
                                    const std::vector<MetricRecord>& large);

struct ConceptCell {
  std::optional<double> mean_iou;  ///< nullopt: no defined value for this cell
  std::size_t count_defined = 0;
  std::size_t count_flagged = 0;
};

struct ConceptTable {
  std::vector<std::string> concepts;
  std::vector<std::string> languages;
  /// concepts x languages
  std::vector<std::vector<ConceptCell>> cells;

  const ConceptCell& at(std::string_view concept_id, std::string_view language) const;
};

ConceptTable per_concept_table(const std::vector<MetricRecord>& records);

struct MechanismPoint {
  std::string language;
  std::optional<double> mean_peak_ratio;
  std::optional<double> mean_iou_cluster;
};

std::vector<MechanismPoint> mechanism_scatter(const std::vector<MetricRecord>& records);

std::string summary_to_json(const Summary& s, int indent = 2);
void write_language_csv(std::ostream& out, const Summary& s);
void write_concept_csv(std::ostream& out, const ConceptTable& t);
void write_mechanism_csv(std::ostream& out, const std::vector<MechanismPoint>& pts);
void write_scale_shift_csv(std::ostream& out, const std::vector<ScaleShift>& shifts);
void write_energy_csv(std::ostream& out, const std::vector<EnergyReport>& reports);

}  // namespace xlg
