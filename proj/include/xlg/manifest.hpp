#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xlg/grid.hpp"

namespace xlg {

enum class ResourceClass { high, low, reference };

std::string_view to_string(ResourceClass rc);
ResourceClass parse_resource_class(std::string_view s);

struct LanguageEntry {
  std::string code;
  ResourceClass resource_class = ResourceClass::high;
};

struct BackboneInfo {
  std::string name;
  double visual_params_m = 0.0;
};

/// Corpus description: the image set, concept vocabulary and languages that a
/// run is evaluated on.
struct Manifest {
  std::vector<std::string> images;
  std::vector<std::string> concepts;
  std::vector<LanguageEntry> languages;
  std::string reference_language;
  BackboneInfo backbone;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t embed_dim = 0;

  /// Number of (image, concept) blocks compared per language.
  std::size_t paired_observations() const { return images.size() * concepts.size(); }

  const LanguageEntry* find_language(std::string_view code) const;
  std::vector<std::string> codes_with(ResourceClass rc) const;
  /// All languages except the reference, in manifest order.
  std::vector<std::string> probe_languages() const;

  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const;
};

Manifest manifest_from_json(std::string_view text);
std::string manifest_to_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& m);

/// The thirteen-language, eleven-concept vocabulary with {ar, eu, lb} tagged
/// low-resource and English as reference.
std::vector<LanguageEntry> default_languages();
std::vector<std::string> default_concepts();

// Corpus layout.
std::filesystem::path feature_path(const std::filesystem::path& root, std::string_view backbone,
                                   std::string_view image_id);
std::filesystem::path text_path(const std::filesystem::path& root, std::string_view backbone,
                                std::string_view language, std::string_view concept_id);
std::filesystem::path simmap_path(const std::filesystem::path& root, std::string_view backbone,
                                  std::string_view language, std::string_view concept_id,
                                  std::string_view image_id);

/// Dense visual features for one image, H x W x d, promoted to double.
struct FeatureMap {
  std::string image_id;
  std::size_t h = 0, w = 0, d = 0;
  std::vector<double> data;

  std::span<const double> patch(std::size_t r, std::size_t c) const {
    return {data.data() + (r * w + c) * d, d};
  }
  void validate() const;
};

struct TextEmbedding {
  std::string language;
  std::string concept_id;
  std::vector<double> vector;

  void validate() const;
};

FeatureMap load_feature_map(const std::filesystem::path& root, const Manifest& m,
                            std::string_view image_id);
TextEmbedding load_text_embedding(const std::filesystem::path& root, const Manifest& m,
                                  std::string_view language, std::string_view concept_id);
void save_feature_map(const std::filesystem::path& root, std::string_view backbone,
                      const FeatureMap& f);
void save_text_embedding(const std::filesystem::path& root, std::string_view backbone,
                         const TextEmbedding& t);

}  // namespace xlg
