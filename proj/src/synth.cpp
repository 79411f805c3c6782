#include "xlg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <json.hpp>

#include "xlg/error.hpp"
#include "xlg/tensor_io.hpp"

namespace xlg {

double SynthRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SynthRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined state
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SynthSpec::validate() const {
  if (grid_h < 1 || grid_w < 1) throw InvalidArgument("synth: grid dims must be >= 1");
  if (!(blob_sigma > 0.0)) throw InvalidArgument("synth: blob_sigma must be positive");
  if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw InvalidArgument("synth: amplitude must lie in [0, 1]");
  if (!(amplitude + background <= 1.0) || !(background >= -1.0)) {
    throw InvalidArgument("synth: amplitude + background must be <= 1 and background >= -1");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("synth: noise_sigma must be >= 0");
  if (!(center_row >= 0.0 && center_row <= static_cast<double>(grid_h - 1) && center_col >= 0.0 &&
        center_col <= static_cast<double>(grid_w - 1))) {
    throw InvalidArgument("synth: blob center outside the grid");
  }
}

SynthSpec synth_spec_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SynthSpec s;
    s.grid_h = j.value("grid_h", s.grid_h);
    s.grid_w = j.value("grid_w", s.grid_w);
    if (j.contains("blob_center")) {
      s.center_row = j["blob_center"].at(0).get<double>();
      s.center_col = j["blob_center"].at(1).get<double>();
    }
    s.blob_sigma = j.value("blob_sigma", s.blob_sigma);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.background = j.value("background", s.background);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth spec: ") + e.what());
  }
}

std::string synth_spec_to_json(const SynthSpec& s) {
  nlohmann::json j = {{"grid_h", s.grid_h},         {"grid_w", s.grid_w},
                      {"blob_center", {s.center_row, s.center_col}},
                      {"blob_sigma", s.blob_sigma}, {"amplitude", s.amplitude},
                      {"background", s.background}, {"noise_sigma", s.noise_sigma},
                      {"seed", s.seed},             {"generator", kSynthGenerator}};
  return j.dump(2);
}

namespace {

// Noise is drawn in row-major order from `rng`, only when noise_sigma > 0.
RealGrid render_blob(const SynthSpec& s, SynthRng& rng) {
  RealGrid g(s.grid_h, s.grid_w);
  const double inv = 1.0 / (2.0 * s.blob_sigma * s.blob_sigma);
  for (std::size_t r = 0; r < s.grid_h; ++r) {
    for (std::size_t c = 0; c < s.grid_w; ++c) {
      const double dr = static_cast<double>(r) - s.center_row;
      const double dc = static_cast<double>(c) - s.center_col;
      double v = s.background + s.amplitude * std::exp(-(dr * dr + dc * dc) * inv);
      if (s.noise_sigma > 0.0) v += s.noise_sigma * rng.normal();
      g(r, c) = std::clamp(v, -1.0, 1.0);
    }
  }
  return g;
}

}  // namespace

SimilarityMap gaussian_map(const SynthSpec& spec) {
  spec.validate();
  SynthRng rng(spec.seed);
  return SimilarityMap(render_blob(spec, rng));
}

std::pair<SimilarityMap, SimilarityMap> misalignment_pair(const SynthSpec& spec, Offset offset) {
  spec.validate();
  SynthSpec probe = spec;
  probe.center_row += offset.rows;
  probe.center_col += offset.cols;
  probe.seed = derive_seed(spec.seed, 1);
  probe.validate();
  auto ref = gaussian_map(spec);
  auto moved = gaussian_map(probe);
  ref.language = "reference";
  moved.language = "probe";
  return {std::move(ref), std::move(moved)};
}

std::pair<SimilarityMap, SimilarityMap> misalignment_pair(const SynthSpec& spec,
                                                          double offset_cells) {
  return misalignment_pair(spec, Offset{0.0, offset_cells});
}

std::pair<SimilarityMap, SimilarityMap> collapse_pair(const SynthSpec& spec, double amp_ratio) {
  if (!(amp_ratio > 0.0 && amp_ratio < 1.0)) {
    throw InvalidArgument("collapse_pair: amp_ratio must lie in (0, 1)");
  }
  spec.validate();
  SynthSpec probe = spec;
  probe.amplitude *= amp_ratio;
  probe.seed = derive_seed(spec.seed, 1);
  auto ref = gaussian_map(spec);
  auto weak = gaussian_map(probe);
  ref.language = "reference";
  weak.language = "probe";
  return {std::move(ref), std::move(weak)};
}

Manifest SynthCorpusConfig::manifest() const {
  Manifest m;
  for (std::size_t i = 0; i < n_images; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%05zu", i);
    m.images.emplace_back(buf);
  }
  m.concepts = concepts;
  m.languages = languages;
  m.reference_language = reference_language;
  m.backbone = {backbone, 0.0};
  m.grid_h = grid_h;
  m.grid_w = grid_w;
  m.embed_dim = 1;  // similarity-level corpus; no feature tensors
  m.validate();
  return m;
}

namespace {

SynthSpec base_spec(const SynthCorpusConfig& cfg) {
  SynthSpec s;
  s.grid_h = cfg.grid_h;
  s.grid_w = cfg.grid_w;
  s.blob_sigma = cfg.blob_sigma;
  s.amplitude = cfg.amplitude;
  s.background = cfg.background;
  s.noise_sigma = cfg.noise_sigma;
  s.validate();
  return s;
}

void draw_center(SynthRng& rng, SynthSpec& s) {
  s.center_row = rng.uniform() * static_cast<double>(s.grid_h - 1);
  s.center_col = rng.uniform() * static_cast<double>(s.grid_w - 1);
}

// Displaces `ref` by `distance` in a uniformly random direction, redrawing the
// direction until the new center lies inside the grid.
SynthSpec displaced(const SynthSpec& ref, double distance, SynthRng& rng) {
  SynthSpec s = ref;
  const double max_r = static_cast<double>(ref.grid_h - 1);
  const double max_c = static_cast<double>(ref.grid_w - 1);
  for (int attempt = 0; attempt < 4096; ++attempt) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double r = ref.center_row + distance * std::sin(theta);
    const double c = ref.center_col + distance * std::cos(theta);
    if (r >= 0.0 && r <= max_r && c >= 0.0 && c <= max_c) {
      s.center_row = r;
      s.center_col = c;
      return s;
    }
  }
  throw InvalidArgument("synth: displacement " + std::to_string(distance) +
                        " does not fit the grid");
}

}  // namespace

std::vector<CalibrationPoint> calibrate_offsets(const SynthCorpusConfig& cfg, double max_offset,
                                                double step, std::size_t samples,
                                                std::uint64_t seed) {
  if (!(step > 0.0) || !(max_offset >= 0.0) || samples == 0) {
    throw InvalidArgument("calibrate_offsets: bad sweep parameters");
  }
  const SynthSpec base = base_spec(cfg);
  std::vector<CalibrationPoint> curve;
  const auto steps = static_cast<std::size_t>(std::floor(max_offset / step + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double offset = static_cast<double>(k) * step;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      // Same stream per sample index at every offset (common random numbers).
      SynthRng rng(derive_seed(seed, s));
      SynthSpec ref = base;
      draw_center(rng, ref);
      const RealGrid ref_map = render_blob(ref, rng);
      const SynthSpec probe = displaced(ref, offset, rng);
      const RealGrid probe_map = render_blob(probe, rng);
      if (auto iou = mask_iou(extract_cluster_mask(probe_map), extract_cluster_mask(ref_map))) {
        sum += *iou;
        ++defined;
      }
    }
    curve.push_back({offset, defined ? sum / static_cast<double>(defined) : 0.0});
  }
  return curve;
}

double offset_for_iou(const std::vector<CalibrationPoint>& curve, double target_iou) {
  if (curve.empty()) throw InvalidArgument("offset_for_iou: empty calibration curve");
  if (target_iou >= curve.front().mean_iou) {
    if (target_iou - curve.front().mean_iou < 1e-12) return curve.front().offset;
    throw InvalidArgument("synth: target IoU " + std::to_string(target_iou) +
                          " exceeds the zero-offset IoU");
  }
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    if (b.mean_iou <= target_iou) {
      const double t = (a.mean_iou - target_iou) / (a.mean_iou - b.mean_iou);
      return a.offset + t * (b.offset - a.offset);
    }
  }
  throw InvalidArgument("synth: target IoU " + std::to_string(target_iou) +
                        " is not reachable on this grid (infeasible gap)");
}

namespace {

const std::vector<CalibrationPoint>& cached_curve(const SynthCorpusConfig& cfg) {
  using Key = std::tuple<std::size_t, std::size_t, double, double, double, double>;
  static std::mutex mu;
  static std::map<Key, std::vector<CalibrationPoint>> cache;
  const Key key{cfg.grid_h, cfg.grid_w, cfg.blob_sigma, cfg.amplitude, cfg.background,
                cfg.noise_sigma};
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, calibrate_offsets(cfg, calibration_max_offset(cfg), kCalibrationStep,
                                              kCalibrationSamples, kCalibrationSeed))
             .first;
  }
  return it->second;
}

}  // namespace

double calibration_max_offset(const SynthCorpusConfig& cfg) {
  return 0.5 * static_cast<double>(std::min(cfg.grid_h, cfg.grid_w) - 1);
}

std::vector<CalibrationPoint> calibration_curve(const SynthCorpusConfig& cfg) {
  return cached_curve(cfg);
}

PlantedOffsets planted_offsets(const SynthCorpusConfig& cfg) {
  if (!(cfg.planted_gap >= 0.0)) throw InvalidArgument("synth: planted_gap must be >= 0");
  const auto& curve = cached_curve(cfg);
  PlantedOffsets out;
  out.high = offset_for_iou(curve, cfg.hr_target_iou);
  out.low = cfg.planted_gap == 0.0 ? out.high
                                   : offset_for_iou(curve, cfg.hr_target_iou - cfg.planted_gap);
  return out;
}

void generate_synth_maps(const SynthCorpusConfig& cfg,
                         const std::function<void(const SimilarityMap&)>& fn) {
  const Manifest manifest = cfg.manifest();
  const SynthSpec base = base_spec(cfg);
  const PlantedOffsets offsets = planted_offsets(cfg);
  const auto& concepts = manifest.concepts;
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    for (std::size_t j = 0; j < concepts.size(); ++j) {
      SynthRng rng(derive_seed(cfg.seed, i * concepts.size() + j));
      SynthSpec ref = base;
      draw_center(rng, ref);
      fn(SimilarityMap(render_blob(ref, rng), manifest.images[i], cfg.reference_language,
                       concepts[j]));
      for (const auto& lang : manifest.languages) {
        if (lang.code == cfg.reference_language) continue;
        const double distance =
            lang.resource_class == ResourceClass::low ? offsets.low : offsets.high;
        const SynthSpec probe = displaced(ref, distance, rng);
        fn(SimilarityMap(render_blob(probe, rng), manifest.images[i], lang.code, concepts[j]));
      }
    }
  }
}

std::vector<MetricRecord> synth_corpus(const SynthCorpusConfig& cfg, const ScoreOptions& options) {
  std::vector<MetricRecord> out;
  std::optional<SimilarityMap> reference;
  generate_synth_maps(cfg, [&](const SimilarityMap& map) {
    if (map.language == cfg.reference_language) {
      reference = map;
      return;
    }
    MetricRecord rec = score_maps(map, *reference, options);
    rec.backbone = cfg.backbone;
    out.push_back(std::move(rec));
  });
  return out;
}

Manifest write_synth_corpus(const std::filesystem::path& root, const SynthCorpusConfig& cfg) {
  const Manifest manifest = cfg.manifest();
  save_manifest(root / "manifest.json", manifest);
  generate_synth_maps(cfg, [&](const SimilarityMap& map) {
    const auto values = map.grid().values();
    write_tensor(simmap_path(root, cfg.backbone, map.language, map.concept_id, map.image_id),
                 Tensor::matrix(static_cast<std::uint32_t>(map.rows()),
                                static_cast<std::uint32_t>(map.cols()),
                                std::vector<float>(values.begin(), values.end())));
  });
  return manifest;
}

}  // namespace xlg
