#include "xlg/simmap.hpp"

#include <algorithm>
#include <cmath>

#include "xlg/error.hpp"

namespace xlg {

SimilarityMap::SimilarityMap(RealGrid grid, std::string image, std::string lang, std::string con)
    : image_id(std::move(image)), language(std::move(lang)), concept_id(std::move(con)),
      grid_(std::move(grid)) {
  if (grid_.empty()) throw InvalidArgument("similarity map must have at least one cell");
  for (double& v : grid_.values()) {
    if (!std::isfinite(v)) throw InvalidArgument("similarity map has non-finite entry");
    if (v < -1.0 - kSimilaritySlack || v > 1.0 + kSimilaritySlack) {
      throw InvalidArgument("similarity entry outside [-1, 1]");
    }
    v = std::clamp(v, -1.0, 1.0);
  }
}

double SimilarityMap::max() const {
  return *std::max_element(grid_.values().begin(), grid_.values().end());
}

SimilarityMap cosine_similarity_map(const FeatureMap& features, const TextEmbedding& text) {
  if (features.d != text.vector.size()) {
    throw InvalidArgument("feature dim " + std::to_string(features.d) +
                          " does not match text dim " + std::to_string(text.vector.size()));
  }
  if (features.data.size() != features.h * features.w * features.d || features.h == 0 ||
      features.w == 0) {
    throw InvalidArgument("feature map payload size mismatch");
  }
  double text_norm2 = 0.0;
  for (double v : text.vector) text_norm2 += v * v;
  if (!(text_norm2 > 0.0)) throw InvalidArgument("text embedding has zero norm");
  const double text_norm = std::sqrt(text_norm2);

  RealGrid grid(features.h, features.w, 0.0);
  std::size_t dead = 0;
  for (std::size_t r = 0; r < features.h; ++r) {
    for (std::size_t c = 0; c < features.w; ++c) {
      const auto patch = features.patch(r, c);
      double dot = 0.0, norm2 = 0.0;
      for (std::size_t k = 0; k < patch.size(); ++k) {
        dot += patch[k] * text.vector[k];
        norm2 += patch[k] * patch[k];
      }
      if (norm2 == 0.0) {
        ++dead;
        continue;
      }
      grid(r, c) = dot / (std::sqrt(norm2) * text_norm);
    }
  }
  SimilarityMap map(std::move(grid), features.image_id, text.language, text.concept_id);
  map.dead_patches = dead;
  return map;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

// Half-pixel-center sample position for output index i, clamped to the input.
Tap tap(std::size_t i, std::size_t in, std::size_t out) {
  double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
  pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, in - 1);
  return {lo, hi, pos - static_cast<double>(lo)};
}

}  // namespace

RealGrid bilinear_upsample(const RealGrid& grid, std::size_t target_h, std::size_t target_w) {
  if (grid.rows() < 1 || grid.cols() < 1) throw InvalidArgument("bilinear_upsample: empty grid");
  if (target_h < 1 || target_w < 1) throw InvalidArgument("bilinear_upsample: empty target");
  std::vector<Tap> cols(target_w);
  for (std::size_t j = 0; j < target_w; ++j) cols[j] = tap(j, grid.cols(), target_w);

  RealGrid out(target_h, target_w);
  for (std::size_t i = 0; i < target_h; ++i) {
    const Tap ty = tap(i, grid.rows(), target_h);
    for (std::size_t j = 0; j < target_w; ++j) {
      const Tap& tx = cols[j];
      // std::lerp is exact at the endpoints and monotone, so outputs stay
      // inside the input range.
      const double top = std::lerp(grid(ty.lo, tx.lo), grid(ty.lo, tx.hi), tx.frac);
      const double bot = std::lerp(grid(ty.hi, tx.lo), grid(ty.hi, tx.hi), tx.frac);
      out(i, j) = std::lerp(top, bot, ty.frac);
    }
  }
  return out;
}

Mask nearest_upsample_mask(const Mask& mask, std::size_t target_h, std::size_t target_w) {
  if (mask.rows() < 1 || mask.cols() < 1) throw InvalidArgument("nearest_upsample_mask: empty mask");
  if (target_h < 1 || target_w < 1 || target_h % mask.rows() != 0 || target_w % mask.cols() != 0) {
    throw InvalidArgument("nearest_upsample_mask: target must be an integer multiple of the mask");
  }
  const std::size_t fy = target_h / mask.rows();
  const std::size_t fx = target_w / mask.cols();
  Mask out(target_h, target_w, 0);
  for (std::size_t i = 0; i < target_h; ++i) {
    for (std::size_t j = 0; j < target_w; ++j) out(i, j) = mask(i / fy, j / fx);
  }
  return out;
}

}  // namespace xlg
