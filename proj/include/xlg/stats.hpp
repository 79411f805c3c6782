#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xlg/manifest.hpp"
#include "xlg/records.hpp"

namespace xlg {

enum class TestMethod { exact, normal_approx, chi2_approx };
std::string_view to_string(TestMethod m);

enum class Alternative { greater, less };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double log10_p = 0.0;  ///< carried separately so p far below DBL_MIN survives
  std::size_t n_used = 0;
  TestMethod method = TestMethod::exact;
  std::size_t dropped_rows = 0;
};

struct StatsOptions {
  std::size_t wilcoxon_exact_max_n = 20;
  std::size_t mann_whitney_exact_max_nm = 400;
};

/// Average (mid) ranks, 1-based. Tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Sum of t^3 - t over tie groups of `values`.
double tie_term(std::span<const double> values);

/// Paired signed-rank test on d = x - y. Zero differences are dropped; W+ is
/// the sum of ranks of positive differences. Exact null distribution for
/// n <= wilcoxon_exact_max_n, otherwise a tie-corrected normal approximation
/// with 0.5 continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                Alternative alt = Alternative::greater,
                                const StatsOptions& opts = {});

/// Friedman test; `values` is blocks x treatments, row-major.
TestResult friedman(const Grid<double>& values);

/// U = #{x_i > y_j} + 0.5 #{x_i == y_j}. Exact over all labelings of the
/// pooled sample when n*m <= mann_whitney_exact_max_nm.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                          Alternative alt = Alternative::greater, const StatsOptions& opts = {});

struct BlockKey {
  std::string image_id;
  std::string concept_id;
  friend auto operator<=>(const BlockKey&, const BlockKey&) = default;
};

struct PairedSeries {
  std::vector<BlockKey> keys;
  Grid<double> values;  ///< blocks x treatments
  std::vector<std::string> treatments;
  std::size_t dropped_rows = 0;
};

/// Per-block mean over high-resource and low-resource languages (columns 0
/// and 1). Blocks where either group has no defined value are dropped.
PairedSeries hr_lr_pairing(const std::vector<MetricRecord>& records, const Manifest& manifest,
                           Metric metric);

/// Blocks x probe-languages matrix; blocks missing any language are dropped.
PairedSeries language_blocks(const std::vector<MetricRecord>& records, const Manifest& manifest,
                             Metric metric);

struct ProtocolReport {
  Metric metric = Metric::iou_cluster;
  TestResult friedman;
  std::vector<std::string> friedman_treatments;
  TestResult wilcoxon_hr_gt_lr;
  std::map<std::string, TestResult> mann_whitney;  ///< keyed by low-resource language
};

/// Friedman across probe languages, Wilcoxon HR > LR on block means and a
/// Mann-Whitney HR-pooled > LR test for each low-resource language.
ProtocolReport run_protocol(const std::vector<MetricRecord>& records, const Manifest& manifest,
                            Metric metric, const StatsOptions& opts = {});

std::string protocol_to_json(const std::vector<ProtocolReport>& reports, int indent = 2);

}  // namespace xlg
