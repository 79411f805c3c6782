#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xlg/grid.hpp"
#include "xlg/simmap.hpp"

namespace xlg {

enum class ThresholdMode {
  per_seed,   ///< grow while value >= rel_threshold * seed value
  global_max  ///< grow while value >= rel_threshold * map maximum
};

struct ClusterParams {
  double rel_threshold = 0.8;
  std::size_t min_size = 3;
  ThresholdMode mode = ThresholdMode::per_seed;

  void validate() const;
};

struct Cluster {
  std::size_t seed = 0;  ///< row-major index
  double seed_value = 0.0;
  std::vector<std::size_t> cells;  ///< row-major indices, BFS order
};

struct ClusterMask {
  Mask grid;
  std::size_t cluster_count = 0;
  ClusterParams params;
};

/// Region growing from local maxima:
///  1. a cell is a seed if its value is >= every existing 8-neighbour and > 0;
///  2. seeds are visited in descending value order, ties by row-major index;
///  3. each unclaimed seed grows breadth-first over 4-connected unclaimed cells
///     at or above its threshold, claiming every cell it reaches;
///  4. clusters smaller than min_size are discarded (their cells stay claimed).
/// Returns the surviving clusters in processing order.
std::vector<Cluster> extract_clusters(const RealGrid& map, const ClusterParams& params);

ClusterMask extract_cluster_mask(const RealGrid& map, const ClusterParams& params = {});
inline ClusterMask extract_cluster_mask(const SimilarityMap& map, const ClusterParams& params = {}) {
  return extract_cluster_mask(map.grid(), params);
}

/// |a & b| / |a | b|; nullopt when both masks are empty.
std::optional<double> mask_iou(const Mask& a, const Mask& b);
inline std::optional<double> mask_iou(const ClusterMask& a, const ClusterMask& b) {
  return mask_iou(a.grid, b.grid);
}

/// Nearest-rank percentile mask: keeps every cell >= the k-th largest value,
/// k = max(1, floor((1 - p/100) n)). p must lie in (0, 100).
Mask top_percentile_mask(const RealGrid& map, double p);
double top_percentile_iou(const RealGrid& a, const RealGrid& b, double p);

/// Pixel-wise Spearman correlation with average ranks for ties; nullopt if
/// either map is constant.
std::optional<double> spearman_rho(const RealGrid& a, const RealGrid& b);

inline constexpr double kPeakGuard = 1e-6;
/// max(probe) / max(reference); nullopt when the reference peak is <= 1e-6.
std::optional<double> peak_ratio(const RealGrid& probe, const RealGrid& reference);

bool is_constant(const RealGrid& map);

enum class Flag : std::uint8_t {
  both_masks_empty = 1u << 0,
  ref_peak_nonpositive = 1u << 1,
  constant_map = 1u << 2,
};

struct FlagSet {
  std::uint8_t bits = 0;
  void set(Flag f) { bits |= static_cast<std::uint8_t>(f); }
  bool has(Flag f) const { return (bits & static_cast<std::uint8_t>(f)) != 0; }
  bool empty() const { return bits == 0; }
  friend bool operator==(const FlagSet&, const FlagSet&) = default;
};

inline constexpr std::array<Flag, 3> kAllFlags{Flag::both_masks_empty, Flag::ref_peak_nonpositive,
                                               Flag::constant_map};
std::string_view to_string(Flag f);
Flag parse_flag(std::string_view s);

inline constexpr std::array<int, 3> kPercentiles{90, 95, 99};

/// Agreement of one probe-language map with the reference map.
struct MetricRecord {
  std::string backbone;
  std::string image_id;
  std::string concept_id;
  std::string language;
  std::optional<double> iou_cluster;
  std::map<int, double> iou_top;
  std::optional<double> spearman;
  std::optional<double> peak_ratio;
  FlagSet flags;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

enum class Resolution {
  patch,     ///< everything on the native patch grid
  upsampled  ///< percentile masks and Spearman on the 224x224 bilinear upsampling
};

std::string_view to_string(Resolution r);
Resolution parse_resolution(std::string_view s);

struct ScoreOptions {
  ClusterParams cluster;
  std::vector<int> percentiles{kPercentiles.begin(), kPercentiles.end()};
  Resolution resolution = Resolution::patch;
};

/// All four agreement metrics of `probe` against `reference`.
MetricRecord score_maps(const SimilarityMap& probe, const SimilarityMap& reference,
                        const ScoreOptions& options = {});

MetricRecord score_pair(const FeatureMap& features, const TextEmbedding& probe_text,
                        const TextEmbedding& reference_text, const ScoreOptions& options = {});

}  // namespace xlg
