#include "xlg/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xlg/error.hpp"
#include "xlg/tensor_io.hpp"

namespace xlg {

using nlohmann::json;

std::string_view to_string(ResourceClass rc) {
  switch (rc) {
    case ResourceClass::high: return "high";
    case ResourceClass::low: return "low";
    case ResourceClass::reference: return "reference";
  }
  return "?";
}

ResourceClass parse_resource_class(std::string_view s) {
  if (s == "high") return ResourceClass::high;
  if (s == "low") return ResourceClass::low;
  if (s == "reference") return ResourceClass::reference;
  throw InvalidArgument("unknown resource_class: " + std::string(s));
}

const LanguageEntry* Manifest::find_language(std::string_view code) const {
  for (const auto& l : languages) {
    if (l.code == code) return &l;
  }
  return nullptr;
}

std::vector<std::string> Manifest::codes_with(ResourceClass rc) const {
  std::vector<std::string> out;
  for (const auto& l : languages) {
    if (l.resource_class == rc) out.push_back(l.code);
  }
  return out;
}

std::vector<std::string> Manifest::probe_languages() const {
  std::vector<std::string> out;
  for (const auto& l : languages) {
    if (l.code != reference_language) out.push_back(l.code);
  }
  return out;
}

namespace {

template <typename Range, typename Key>
void require_unique(const Range& items, Key key, const char* what) {
  std::set<std::string> seen;
  for (const auto& item : items) {
    const std::string& k = key(item);
    if (k.empty()) throw InvalidArgument(std::string("manifest: empty ") + what);
    if (!seen.insert(k).second) {
      throw InvalidArgument(std::string("manifest: duplicate ") + what + " '" + k + "'");
    }
  }
}

}  // namespace

void Manifest::validate() const {
  require_unique(images, [](const std::string& s) -> const std::string& { return s; }, "image");
  require_unique(concepts, [](const std::string& s) -> const std::string& { return s; }, "concept");
  require_unique(languages, [](const LanguageEntry& l) -> const std::string& { return l.code; },
                 "language");
  if (reference_language.empty()) throw InvalidArgument("manifest: missing reference_language");
  std::size_t ref_hits = 0;
  for (const auto& l : languages) {
    const bool is_ref = l.code == reference_language;
    ref_hits += is_ref ? 1 : 0;
    if (is_ref != (l.resource_class == ResourceClass::reference)) {
      throw InvalidArgument("manifest: language '" + l.code +
                            "' must be tagged reference iff it is the reference language");
    }
  }
  if (ref_hits != 1) {
    throw InvalidArgument("manifest: reference language '" + reference_language +
                          "' not listed in languages");
  }
  if (grid_h < 1 || grid_w < 1) throw InvalidArgument("manifest: grid dims must be >= 1");
  if (embed_dim < 1) throw InvalidArgument("manifest: embed_dim must be >= 1");
  if (backbone.name.empty()) throw InvalidArgument("manifest: backbone name is empty");
}

namespace {

std::size_t positive_size(const json& j, const char* what) {
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw InvalidArgument(std::string("manifest: ") + what + " must be an integer >= 1");
  }
  return j.get<std::size_t>();
}

}  // namespace

Manifest manifest_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    m.images = j.at("images").get<std::vector<std::string>>();
    m.concepts = j.at("concepts").get<std::vector<std::string>>();
    for (const auto& l : j.at("languages")) {
      m.languages.push_back({l.at("code").get<std::string>(),
                             parse_resource_class(l.at("resource_class").get<std::string>())});
    }
    m.reference_language = j.at("reference_language").get<std::string>();
    const auto& bb = j.at("backbone");
    m.backbone.name = bb.at("name").get<std::string>();
    if (bb.contains("visual_params_m")) m.backbone.visual_params_m = bb.at("visual_params_m").get<double>();
    m.grid_h = positive_size(j.at("grid").at("h"), "grid.h");
    m.grid_w = positive_size(j.at("grid").at("w"), "grid.w");
    m.embed_dim = positive_size(j.at("embed_dim"), "embed_dim");
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::string manifest_to_json(const Manifest& m) {
  json langs = json::array();
  for (const auto& l : m.languages) {
    langs.push_back({{"code", l.code}, {"resource_class", to_string(l.resource_class)}});
  }
  json j = {
      {"images", m.images},
      {"concepts", m.concepts},
      {"languages", langs},
      {"reference_language", m.reference_language},
      {"backbone", {{"name", m.backbone.name}, {"visual_params_m", m.backbone.visual_params_m}}},
      {"grid", {{"h", m.grid_h}, {"w", m.grid_w}}},
      {"embed_dim", m.embed_dim},
  };
  return j.dump(2);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  m.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << manifest_to_json(m) << '\n';
}

std::vector<LanguageEntry> default_languages() {
  using RC = ResourceClass;
  return {{"ar", RC::low},  {"eu", RC::low},    {"ca", RC::high},      {"fr", RC::high},
          {"it", RC::high}, {"pt", RC::high},   {"es", RC::high},      {"de", RC::high},
          {"en", RC::reference}, {"lb", RC::low}, {"ru", RC::high},   {"zh-Hans", RC::high},
          {"zh-Hant", RC::high}};
}

std::vector<std::string> default_concepts() {
  return {"car",           "truck",         "bus",     "person",     "pedestrian", "traffic_light",
          "traffic_sign",  "bicycle",       "motorcycle", "road",    "building"};
}

std::filesystem::path feature_path(const std::filesystem::path& root, std::string_view backbone,
                                   std::string_view image_id) {
  return root / "features" / backbone / (std::string(image_id) + ".tns");
}

std::filesystem::path text_path(const std::filesystem::path& root, std::string_view backbone,
                                std::string_view language, std::string_view concept_id) {
  return root / "text" / backbone / language / (std::string(concept_id) + ".tns");
}

std::filesystem::path simmap_path(const std::filesystem::path& root, std::string_view backbone,
                                  std::string_view language, std::string_view concept_id,
                                  std::string_view image_id) {
  return root / "simmaps" / backbone / language / concept_id / (std::string(image_id) + ".tns");
}

void FeatureMap::validate() const {
  if (h < 1 || w < 1 || d < 1) throw InvalidArgument("feature map dims must be >= 1");
  if (data.size() != h * w * d) throw InvalidArgument("feature map payload size mismatch");
  bool any_nonzero = false;
  for (double v : data) {
    if (!std::isfinite(v)) throw InvalidArgument("feature map has non-finite entry");
    any_nonzero = any_nonzero || v != 0.0;
  }
  if (!any_nonzero) throw InvalidArgument("feature map " + image_id + " has no nonzero patch vector");
}

void TextEmbedding::validate() const {
  if (vector.empty()) throw InvalidArgument("text embedding is empty");
  double norm2 = 0.0;
  for (double v : vector) {
    if (!std::isfinite(v)) throw InvalidArgument("text embedding has non-finite entry");
    norm2 += v * v;
  }
  if (norm2 == 0.0) {
    throw InvalidArgument("text embedding " + language + "/" + concept_id + " has zero norm");
  }
}

FeatureMap load_feature_map(const std::filesystem::path& root, const Manifest& m,
                            std::string_view image_id) {
  const Tensor t = read_tensor(feature_path(root, m.backbone.name, image_id));
  if (t.rank != 3 || t.dims[0] != m.grid_h || t.dims[1] != m.grid_w || t.dims[2] != m.embed_dim) {
    throw FormatError("feature tensor for " + std::string(image_id) +
                      " does not match manifest grid/embed_dim");
  }
  FeatureMap f{std::string(image_id), m.grid_h, m.grid_w, m.embed_dim,
               std::vector<double>(t.data.begin(), t.data.end())};
  f.validate();
  return f;
}

TextEmbedding load_text_embedding(const std::filesystem::path& root, const Manifest& m,
                                  std::string_view language, std::string_view concept_id) {
  const Tensor t = read_tensor(text_path(root, m.backbone.name, language, concept_id));
  if (t.rank != 1 || t.dims[0] != m.embed_dim) {
    throw FormatError("text tensor " + std::string(language) + "/" + std::string(concept_id) +
                      " does not match embed_dim");
  }
  TextEmbedding e{std::string(language), std::string(concept_id),
                  std::vector<double>(t.data.begin(), t.data.end())};
  e.validate();
  return e;
}

void save_feature_map(const std::filesystem::path& root, std::string_view backbone,
                      const FeatureMap& f) {
  f.validate();
  write_tensor(feature_path(root, backbone, f.image_id),
               Tensor::cube(static_cast<std::uint32_t>(f.h), static_cast<std::uint32_t>(f.w),
                            static_cast<std::uint32_t>(f.d),
                            std::vector<float>(f.data.begin(), f.data.end())));
}

void save_text_embedding(const std::filesystem::path& root, std::string_view backbone,
                         const TextEmbedding& t) {
  t.validate();
  write_tensor(text_path(root, backbone, t.language, t.concept_id),
               Tensor::vector(std::vector<float>(t.vector.begin(), t.vector.end())));
}

}  // namespace xlg
