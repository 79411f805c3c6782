#pragma once

#include <cstddef>
#include <string>

#include "xlg/grid.hpp"
#include "xlg/manifest.hpp"

namespace xlg {

inline constexpr double kSimilaritySlack = 1e-6;
/// Side length of the pixel grid used for the upsampled comparison mode.
inline constexpr std::size_t kComparisonSize = 224;

/// Cosine-similarity map over the patch grid. Entries are clamped to [-1, 1]
/// on construction; entries outside [-1-eps, 1+eps] or non-finite are rejected.
class SimilarityMap {
 public:
  SimilarityMap() = default;
  explicit SimilarityMap(RealGrid grid, std::string image_id = {}, std::string language = {},
                         std::string concept_id = {});

  const RealGrid& grid() const { return grid_; }
  std::size_t rows() const { return grid_.rows(); }
  std::size_t cols() const { return grid_.cols(); }
  double max() const;

  std::string image_id;
  std::string language;
  std::string concept_id;
  /// Patches whose feature vector had zero norm (similarity forced to 0).
  std::size_t dead_patches = 0;

 private:
  RealGrid grid_;
};

SimilarityMap cosine_similarity_map(const FeatureMap& features, const TextEmbedding& text);

RealGrid bilinear_upsample(const RealGrid& grid, std::size_t target_h, std::size_t target_w);

Mask nearest_upsample_mask(const Mask& mask, std::size_t target_h, std::size_t target_w);

}  // namespace xlg
