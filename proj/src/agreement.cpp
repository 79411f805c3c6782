#include "xlg/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "xlg/error.hpp"
#include "xlg/stats.hpp"

namespace xlg {

void ClusterParams::validate() const {
  if (!(rel_threshold > 0.0 && rel_threshold <= 1.0)) {
    throw InvalidArgument("rel_threshold must lie in (0, 1]");
  }
  if (min_size < 1) throw InvalidArgument("min_size must be >= 1");
}

namespace {

void require_finite(const RealGrid& map) {
  for (double v : map.values()) {
    if (!std::isfinite(v)) throw InvalidArgument("map has non-finite entry");
  }
}

bool is_local_max(const RealGrid& map, std::size_t r, std::size_t c) {
  const double v = map(r, c);
  const std::size_t r0 = r == 0 ? 0 : r - 1, r1 = std::min(r + 1, map.rows() - 1);
  const std::size_t c0 = c == 0 ? 0 : c - 1, c1 = std::min(c + 1, map.cols() - 1);
  for (std::size_t i = r0; i <= r1; ++i) {
    for (std::size_t j = c0; j <= c1; ++j) {
      if (map(i, j) > v) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Cluster> extract_clusters(const RealGrid& map, const ClusterParams& params) {
  params.validate();
  require_finite(map);
  const std::size_t rows = map.rows(), cols = map.cols();

  std::vector<std::size_t> seeds;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (map(r, c) > 0.0 && is_local_max(map, r, c)) seeds.push_back(r * cols + c);
    }
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [&](std::size_t a, std::size_t b) { return map[a] > map[b]; });

  const double global_max =
      map.empty() ? 0.0 : *std::max_element(map.values().begin(), map.values().end());

  std::vector<std::uint8_t> claimed(map.size(), 0);
  std::vector<Cluster> out;
  std::deque<std::size_t> frontier;
  for (std::size_t seed : seeds) {
    if (claimed[seed]) continue;
    const double level = params.mode == ThresholdMode::per_seed ? map[seed] : global_max;
    const double threshold = params.rel_threshold * level;
    if (map[seed] < threshold) continue;

    Cluster cluster{seed, map[seed], {}};
    claimed[seed] = 1;
    frontier.assign(1, seed);
    while (!frontier.empty()) {
      const std::size_t cell = frontier.front();
      frontier.pop_front();
      cluster.cells.push_back(cell);
      const std::size_t r = cell / cols, c = cell % cols;
      auto visit = [&](std::size_t n) {
        if (!claimed[n] && map[n] >= threshold) {
          claimed[n] = 1;
          frontier.push_back(n);
        }
      };
      if (r > 0) visit(cell - cols);
      if (r + 1 < rows) visit(cell + cols);
      if (c > 0) visit(cell - 1);
      if (c + 1 < cols) visit(cell + 1);
    }
    if (cluster.cells.size() >= params.min_size) out.push_back(std::move(cluster));
  }
  return out;
}

ClusterMask extract_cluster_mask(const RealGrid& map, const ClusterParams& params) {
  ClusterMask mask{Mask(map.rows(), map.cols(), 0), 0, params};
  const auto clusters = extract_clusters(map, params);
  for (const auto& cl : clusters) {
    for (std::size_t cell : cl.cells) mask.grid[cell] = 1;
  }
  mask.cluster_count = clusters.size();
  return mask;
}

std::optional<double> mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw InvalidArgument("mask_iou: dimension mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Mask top_percentile_mask(const RealGrid& map, double p) {
  if (!(p > 0.0 && p < 100.0)) throw InvalidArgument("percentile must lie in (0, 100)");
  if (map.empty()) throw InvalidArgument("top_percentile_mask: empty map");
  const std::size_t n = map.size();
  // (100 - p) * n / 100 keeps integer inputs exact; the epsilon absorbs
  // representation error for fractional p.
  const double raw = (100.0 - p) * static_cast<double>(n) / 100.0;
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw + 1e-9)));
  std::vector<double> sorted(map.values().begin(), map.values().end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  const double threshold = sorted[k - 1];
  Mask out(map.rows(), map.cols(), 0);
  for (std::size_t i = 0; i < n; ++i) out[i] = map[i] >= threshold ? 1 : 0;
  return out;
}

double top_percentile_iou(const RealGrid& a, const RealGrid& b, double p) {
  if (!a.same_shape(b)) throw InvalidArgument("top_percentile_iou: dimension mismatch");
  return *mask_iou(top_percentile_mask(a, p), top_percentile_mask(b, p));
}

bool is_constant(const RealGrid& map) {
  const auto v = map.values();
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::optional<double> spearman_rho(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("spearman_rho: dimension mismatch");
  if (a.size() < 2) throw InvalidArgument("spearman_rho: need at least 2 cells");
  if (is_constant(a) || is_constant(b)) return std::nullopt;
  const auto ra = average_ranks(a.values());
  const auto rb = average_ranks(b.values());
  const double n = static_cast<double>(ra.size());
  const double mean = (n + 1.0) / 2.0;  // average ranks always sum to n(n+1)/2
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> peak_ratio(const RealGrid& probe, const RealGrid& reference) {
  if (!probe.same_shape(reference)) throw InvalidArgument("peak_ratio: dimension mismatch");
  if (probe.empty()) throw InvalidArgument("peak_ratio: empty map");
  const double ref_peak = *std::max_element(reference.values().begin(), reference.values().end());
  if (ref_peak <= kPeakGuard) return std::nullopt;
  return *std::max_element(probe.values().begin(), probe.values().end()) / ref_peak;
}

std::string_view to_string(Flag f) {
  switch (f) {
    case Flag::both_masks_empty: return "both_masks_empty";
    case Flag::ref_peak_nonpositive: return "ref_peak_nonpositive";
    case Flag::constant_map: return "constant_map";
  }
  return "?";
}

Flag parse_flag(std::string_view s) {
  for (Flag f : kAllFlags) {
    if (to_string(f) == s) return f;
  }
  throw FormatError("unknown flag: " + std::string(s));
}

std::string_view to_string(Resolution r) {
  return r == Resolution::patch ? "patch" : "upsampled";
}

Resolution parse_resolution(std::string_view s) {
  if (s == "patch") return Resolution::patch;
  if (s == "upsampled") return Resolution::upsampled;
  throw InvalidArgument("unknown resolution: " + std::string(s));
}

MetricRecord score_maps(const SimilarityMap& probe, const SimilarityMap& reference,
                        const ScoreOptions& options) {
  const RealGrid& pg = probe.grid();
  const RealGrid& rg = reference.grid();
  if (!pg.same_shape(rg)) throw InvalidArgument("score_maps: map dimension mismatch");

  MetricRecord rec;
  rec.image_id = reference.image_id.empty() ? probe.image_id : reference.image_id;
  rec.concept_id = reference.concept_id.empty() ? probe.concept_id : reference.concept_id;
  rec.language = probe.language;

  rec.iou_cluster = mask_iou(extract_cluster_mask(pg, options.cluster),
                             extract_cluster_mask(rg, options.cluster));
  if (!rec.iou_cluster) rec.flags.set(Flag::both_masks_empty);

  if (is_constant(pg) || is_constant(rg)) rec.flags.set(Flag::constant_map);

  const bool up = options.resolution == Resolution::upsampled;
  const RealGrid pu = up ? bilinear_upsample(pg, kComparisonSize, kComparisonSize) : RealGrid{};
  const RealGrid ru = up ? bilinear_upsample(rg, kComparisonSize, kComparisonSize) : RealGrid{};
  const RealGrid& pc = up ? pu : pg;
  const RealGrid& rc = up ? ru : rg;

  for (int p : options.percentiles) rec.iou_top[p] = top_percentile_iou(pc, rc, p);
  if (pc.size() >= 2) rec.spearman = spearman_rho(pc, rc);

  rec.peak_ratio = peak_ratio(pg, rg);
  if (!rec.peak_ratio) rec.flags.set(Flag::ref_peak_nonpositive);
  return rec;
}

MetricRecord score_pair(const FeatureMap& features, const TextEmbedding& probe_text,
                        const TextEmbedding& reference_text, const ScoreOptions& options) {
  const SimilarityMap probe = cosine_similarity_map(features, probe_text);
  const SimilarityMap reference = cosine_similarity_map(features, reference_text);
  return score_maps(probe, reference, options);
}

}  // namespace xlg
