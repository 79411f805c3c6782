#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xlg/agreement.hpp"
#include "xlg/manifest.hpp"
#include "xlg/simmap.hpp"

namespace xlg {

/// Identifies the generator so runs agree bit-for-bit across implementations:
/// std::mt19937_64 draws, 53-bit uniforms, Box-Muller normals.
inline constexpr std::string_view kSynthGenerator = "mt19937_64/box-muller/v1";

/// Deterministic normal/uniform stream over std::mt19937_64.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct SynthSpec {
  std::size_t grid_h = 16;
  std::size_t grid_w = 16;
  double center_row = 7.5;
  double center_col = 7.5;
  double blob_sigma = 1.5;
  double amplitude = 1.0;
  double background = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthSpec synth_spec_from_json(std::string_view text);
std::string synth_spec_to_json(const SynthSpec& s);

/// background + amplitude * exp(-d^2 / (2 sigma^2)) + N(0, noise_sigma^2), clamped.
SimilarityMap gaussian_map(const SynthSpec& spec);

struct Offset {
  double rows = 0.0;
  double cols = 0.0;
};

/// (reference, probe): the probe blob is displaced by `offset`. The probe's
/// noise comes from an independent stream derived from spec.seed.
std::pair<SimilarityMap, SimilarityMap> misalignment_pair(const SynthSpec& spec, Offset offset);
/// Horizontal displacement by `offset_cells`.
std::pair<SimilarityMap, SimilarityMap> misalignment_pair(const SynthSpec& spec,
                                                          double offset_cells);

/// (reference, probe): the probe amplitude is scaled by amp_ratio in (0, 1).
std::pair<SimilarityMap, SimilarityMap> collapse_pair(const SynthSpec& spec, double amp_ratio);

/// Generative settings for a synthetic multilingual corpus. Every block gets a
/// reference blob at a random center; each probe language sees the same blob
/// displaced by a fixed per-group distance in a random direction.
struct SynthCorpusConfig {
  std::size_t n_images = 210;
  std::vector<std::string> concepts = default_concepts();
  std::vector<LanguageEntry> languages = default_languages();
  std::string reference_language = "en";
  double planted_gap = 0.0;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  std::size_t grid_h = 16;
  std::size_t grid_w = 16;
  double blob_sigma = 3.0;
  double amplitude = 0.9;
  /// Negative so that background noise never seeds spurious clusters.
  double background = -0.2;
  /// Expected high-resource cluster IoU; low-resource target is this minus the gap.
  double hr_target_iou = 0.45;
  std::string backbone = "synthetic";

  Manifest manifest() const;
};

/// One point of the displacement -> mean cluster-IoU calibration curve.
struct CalibrationPoint {
  double offset = 0.0;
  double mean_iou = 0.0;
};

/// Pilot sweep: mean cluster IoU at each displacement in [0, max_offset] with
/// `step`, over `samples` random draws of the corpus generator.
std::vector<CalibrationPoint> calibrate_offsets(const SynthCorpusConfig& cfg, double max_offset,
                                                double step, std::size_t samples,
                                                std::uint64_t seed);

/// Smallest displacement whose interpolated mean IoU reaches `target_iou`.
/// Throws InvalidArgument when the target is outside the curve's range.
double offset_for_iou(const std::vector<CalibrationPoint>& curve, double target_iou);

inline constexpr std::uint64_t kCalibrationSeed = 0x5EEDCA11B0A7ull;
inline constexpr std::size_t kCalibrationSamples = 400;
inline constexpr double kCalibrationStep = 0.25;

/// Half the shorter grid side minus one cell: the largest displacement that
/// keeps a centred blob in-grid.
double calibration_max_offset(const SynthCorpusConfig& cfg);

/// The pilot sweep used by planted_offsets (computed once per generator
/// setting and cached).
std::vector<CalibrationPoint> calibration_curve(const SynthCorpusConfig& cfg);

struct PlantedOffsets {
  double high = 0.0;
  double low = 0.0;
};

PlantedOffsets planted_offsets(const SynthCorpusConfig& cfg);

/// Visits every generated map: fn(image_id, concept, language, map). The
/// reference language is emitted first within each block.
void generate_synth_maps(const SynthCorpusConfig& cfg,
                         const std::function<void(const SimilarityMap&)>& fn);

/// Scores the generated corpus through score_maps.
std::vector<MetricRecord> synth_corpus(const SynthCorpusConfig& cfg,
                                       const ScoreOptions& options = {});

/// Writes manifest.json and the simmaps/ tree under `root`.
Manifest write_synth_corpus(const std::filesystem::path& root, const SynthCorpusConfig& cfg);

}  // namespace xlg
