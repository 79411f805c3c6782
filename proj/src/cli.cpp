#include "xlg/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xlg/agreement.hpp"
#include "xlg/energy.hpp"
#include "xlg/error.hpp"
#include "xlg/manifest.hpp"
#include "xlg/records.hpp"
#include "xlg/report.hpp"
#include "xlg/simmap.hpp"
#include "xlg/stats.hpp"
#include "xlg/synth.hpp"
#include "xlg/tensor_io.hpp"

namespace xlg {

namespace fs = std::filesystem;

namespace {

/// Settings shared by every subcommand; loaded from --config, then overridden
/// by flags.
struct RunConfig {
  fs::path corpus_root;
  std::vector<std::string> backbones;
  ScoreOptions score;
  StatsOptions stats;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load_config(const fs::path& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
    if (j.contains("corpus_root")) cfg.corpus_root = j["corpus_root"].get<std::string>();
    if (j.contains("backbones")) cfg.backbones = j["backbones"].get<std::vector<std::string>>();
    if (j.contains("cluster")) {
      const auto& c = j["cluster"];
      cfg.score.cluster.rel_threshold = c.value("rel_threshold", cfg.score.cluster.rel_threshold);
      cfg.score.cluster.min_size = c.value("min_size", cfg.score.cluster.min_size);
      const auto mode = c.value("threshold_mode", std::string("per_seed"));
      if (mode == "global_max") cfg.score.cluster.mode = ThresholdMode::global_max;
      else if (mode != "per_seed") throw InvalidArgument("config: unknown threshold_mode " + mode);
    }
    if (j.contains("percentiles")) {
      cfg.score.percentiles = j["percentiles"].get<std::vector<int>>();
      for (int p : cfg.score.percentiles) {
        if (std::find(kPercentiles.begin(), kPercentiles.end(), p) == kPercentiles.end()) {
          throw InvalidArgument("config: percentiles must be drawn from {90, 95, 99}");
        }
      }
    }
    if (j.contains("resolution")) {
      cfg.score.resolution = parse_resolution(j["resolution"].get<std::string>());
    }
    if (j.contains("stats")) {
      const auto& s = j["stats"];
      cfg.stats.wilcoxon_exact_max_n = s.value("wilcoxon_exact_max_n", cfg.stats.wilcoxon_exact_max_n);
      cfg.stats.mann_whitney_exact_max_nm =
          s.value("mann_whitney_exact_max_nm", cfg.stats.mann_whitney_exact_max_nm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.score.cluster.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  fn(out);
}

RealGrid grid_from_tensor(const Tensor& t, const fs::path& path) {
  if (t.rank != 2) throw FormatError(path.string() + ": expected a rank-2 similarity map");
  return RealGrid(t.dims[0], t.dims[1], std::vector<double>(t.data.begin(), t.data.end()));
}

struct Options {
  fs::path config;
  std::uint64_t seed = 0;
  std::string backbone;
  std::string metric = "all";
  std::string resolution;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Run configuration JSON")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--backbone", o.backbone, "Backbone name (overrides manifest/config)");
  sub->add_option("--metric", o.metric, "Metric name or 'all'");
  sub->add_option("--resolution", o.resolution, "Comparison resolution: patch or upsampled")
      ->check(CLI::IsMember({"patch", "upsampled"}));
}

RunConfig effective_config(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (!o.resolution.empty()) cfg.score.resolution = parse_resolution(o.resolution);
  return cfg;
}

fs::path manifest_path_for(const fs::path& explicit_path, const fs::path& corpus) {
  if (!explicit_path.empty()) return explicit_path;
  if (corpus.empty()) throw InvalidArgument("either --manifest or --corpus is required");
  return corpus / "manifest.json";
}

Manifest manifest_with_backbone(const fs::path& path, const Options& o, const RunConfig& cfg) {
  Manifest m = load_manifest(path);
  if (!o.backbone.empty()) m.backbone.name = o.backbone;
  else if (!cfg.backbones.empty()) m.backbone.name = cfg.backbones.front();
  return m;
}

std::vector<Metric> selected_metrics(const std::string& name) {
  if (name == "all") return {kAllMetrics.begin(), kAllMetrics.end()};
  return {parse_metric(name)};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-language dense-grounding agreement analyzer", "xlg"};
  app.require_subcommand(1);
  Options opt;

  // simmap
  fs::path corpus, manifest_file, out_path;
  auto* simmap_cmd = app.add_subcommand("simmap", "Compute similarity maps from features and text");
  simmap_cmd->add_option("--corpus", corpus, "Corpus root")->required();
  simmap_cmd->add_option("--manifest", manifest_file, "Manifest (default <corpus>/manifest.json)");
  add_common(simmap_cmd, opt);

  // cluster
  fs::path map_file;
  double rel_threshold = 0.8;
  std::size_t min_size = 3;
  bool global_max = false;
  auto* cluster_cmd = app.add_subcommand("cluster", "Extract the cluster mask of one similarity map");
  cluster_cmd->add_option("--map", map_file, "Similarity map tensor")->required()->check(CLI::ExistingFile);
  cluster_cmd->add_option("--out", out_path, "Output mask tensor")->required();
  cluster_cmd->add_option("--rel-threshold", rel_threshold, "Relative growth threshold");
  cluster_cmd->add_option("--min-size", min_size, "Minimum cluster size in cells");
  cluster_cmd->add_flag("--global-max", global_max, "Threshold relative to the map maximum");
  add_common(cluster_cmd, opt);

  // score
  std::string source = "simmaps";
  auto* score_cmd = app.add_subcommand("score", "Score every probe language against the reference");
  score_cmd->add_option("--corpus", corpus, "Corpus root");
  score_cmd->add_option("--manifest", manifest_file, "Manifest (default <corpus>/manifest.json)");
  score_cmd->add_option("--out", out_path, "Records CSV")->required();
  score_cmd->add_option("--source", source, "Read simmaps or compute from features")
      ->check(CLI::IsMember({"simmaps", "features"}));
  add_common(score_cmd, opt);

  // stats
  fs::path records_file;
  auto* stats_cmd = app.add_subcommand("stats", "Run the Friedman / Wilcoxon / Mann-Whitney protocol");
  stats_cmd->add_option("--records", records_file, "Records CSV")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--manifest", manifest_file, "Manifest")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", out_path, "Protocol report JSON");
  add_common(stats_cmd, opt);

  // energy
  fs::path trace_file;
  std::size_t queries = 0;
  std::optional<double> baseline;
  std::string label;
  double period = kNominalPeriodS;
  auto* energy_cmd = app.add_subcommand("energy", "Integrate a power trace into Wh and Wh/1k queries");
  energy_cmd->add_option("--trace", trace_file, "Power CSV (t_s,power_w)")->required()->check(CLI::ExistingFile);
  energy_cmd->add_option("--queries", queries, "Number of inferences in the window")->required();
  energy_cmd->add_option("--baseline-w", baseline, "Idle baseline to subtract (off by default)");
  energy_cmd->add_option("--period", period, "Nominal sample period in seconds for gap detection");
  energy_cmd->add_option("--label", label, "Label stored in the report");
  energy_cmd->add_option("--out", out_path, "Energy report JSON");
  add_common(energy_cmd, opt);

  // synth
  std::size_t images = 210;
  std::size_t n_concepts = 11;
  double gap = 0.0, noise = 0.05;
  std::size_t grid = 16;
  fs::path spec_file;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic similarity-map corpus");
  synth_cmd->add_option("--out", out_path, "Corpus root (or map tensor with --map-spec)")->required();
  synth_cmd->add_option("--images", images, "Number of images");
  synth_cmd->add_option("--concepts", n_concepts, "Number of concepts (first N of the default list)")
      ->check(CLI::Range(1, 11));
  synth_cmd->add_option("--gap", gap, "Planted HR-LR cluster-IoU gap");
  synth_cmd->add_option("--noise", noise, "Map noise sigma");
  synth_cmd->add_option("--grid", grid, "Grid side length");
  synth_cmd->add_option("--map-spec", spec_file, "Emit a single Gaussian map from a spec JSON")
      ->check(CLI::ExistingFile);
  bool calibration_only = false;
  synth_cmd->add_flag("--calibration", calibration_only,
                      "Write the offset -> cluster-IoU pilot sweep as CSV instead of a corpus");
  add_common(synth_cmd, opt);

  // report
  fs::path large_file;
  std::vector<fs::path> energy_files;
  auto* report_cmd = app.add_subcommand("report", "Aggregate records into summary tables");
  report_cmd->add_option("--records", records_file, "Records CSV")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--records-large", large_file, "Records of a second backbone for scale shift")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--manifest", manifest_file, "Manifest")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--energy", energy_files, "Energy report JSON files")->check(CLI::ExistingFile);
  report_cmd->add_option("--out", out_path, "Output directory")->required();
  add_common(report_cmd, opt);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const RunConfig cfg = effective_config(opt);
    if (corpus.empty() && !cfg.corpus_root.empty()) corpus = cfg.corpus_root;

    if (simmap_cmd->parsed()) {
      const Manifest m = manifest_with_backbone(manifest_path_for(manifest_file, corpus), opt, cfg);
      std::map<std::pair<std::string, std::string>, TextEmbedding> texts;
      for (const auto& l : m.languages) {
        for (const auto& c : m.concepts) texts[{l.code, c}] = load_text_embedding(corpus, m, l.code, c);
      }
      std::size_t written = 0, dead = 0;
      for (const auto& img : m.images) {
        const FeatureMap f = load_feature_map(corpus, m, img);
        for (const auto& [key, text] : texts) {
          const SimilarityMap s = cosine_similarity_map(f, text);
          dead += s.dead_patches;
          const auto v = s.grid().values();
          write_tensor(simmap_path(corpus, m.backbone.name, key.first, key.second, img),
                       Tensor::matrix(static_cast<std::uint32_t>(s.rows()),
                                      static_cast<std::uint32_t>(s.cols()),
                                      std::vector<float>(v.begin(), v.end())));
          ++written;
        }
      }
      out << "wrote " << written << " similarity maps";
      if (dead) out << " (" << dead << " zero-norm patches mapped to 0)";
      out << '\n';
      return 0;
    }

    if (cluster_cmd->parsed()) {
      ClusterParams params = cfg.score.cluster;
      if (cluster_cmd->count("--rel-threshold")) params.rel_threshold = rel_threshold;
      if (cluster_cmd->count("--min-size")) params.min_size = min_size;
      if (global_max) params.mode = ThresholdMode::global_max;
      const RealGrid g = grid_from_tensor(read_tensor(map_file), map_file);
      const ClusterMask mask = extract_cluster_mask(g, params);
      std::vector<float> cells(mask.grid.values().begin(), mask.grid.values().end());
      write_tensor(out_path, Tensor::matrix(static_cast<std::uint32_t>(g.rows()),
                                            static_cast<std::uint32_t>(g.cols()), std::move(cells)));
      out << nlohmann::json{{"cluster_count", mask.cluster_count},
                            {"mask_cells", mask_count(mask.grid)}}
                 .dump()
          << '\n';
      return 0;
    }

    if (score_cmd->parsed()) {
      const Manifest m = manifest_with_backbone(manifest_path_for(manifest_file, corpus), opt, cfg);
      if (corpus.empty()) corpus = manifest_path_for(manifest_file, corpus).parent_path();
      const bool from_features = source == "features";
      auto load_map = [&](const std::string& lang, const std::string& concept_id,
                          const std::string& img, const FeatureMap* f) {
        if (from_features) {
          return cosine_similarity_map(*f, load_text_embedding(corpus, m, lang, concept_id));
        }
        const auto path = simmap_path(corpus, m.backbone.name, lang, concept_id, img);
        RealGrid g = grid_from_tensor(read_tensor(path), path);
        if (g.rows() != m.grid_h || g.cols() != m.grid_w) {
          throw FormatError(path.string() + ": grid does not match manifest");
        }
        return SimilarityMap(std::move(g), img, lang, concept_id);
      };
      const auto probes = m.probe_languages();
      std::vector<MetricRecord> records;
      records.reserve(m.paired_observations() * probes.size());
      for (const auto& img : m.images) {
        std::optional<FeatureMap> f;
        if (from_features) f = load_feature_map(corpus, m, img);
        for (const auto& concept_id : m.concepts) {
          const SimilarityMap ref = load_map(m.reference_language, concept_id, img, f ? &*f : nullptr);
          for (const auto& lang : probes) {
            MetricRecord r = score_maps(load_map(lang, concept_id, img, f ? &*f : nullptr), ref, cfg.score);
            r.backbone = m.backbone.name;
            records.push_back(std::move(r));
          }
        }
      }
      write_records_csv(out_path, records);
      out << "scored " << records.size() << " records (" << m.paired_observations()
          << " per language, resolution " << to_string(cfg.score.resolution) << ")\n";
      return 0;
    }

    if (stats_cmd->parsed()) {
      const Manifest m = load_manifest(manifest_file);
      auto records = read_records_csv(records_file);
      if (records.empty()) throw InvalidArgument("no records in " + records_file.string());
      if (!opt.backbone.empty()) {
        std::erase_if(records, [&](const MetricRecord& r) { return r.backbone != opt.backbone; });
      }
      std::vector<ProtocolReport> reports;
      for (Metric metric : selected_metrics(opt.metric)) {
        reports.push_back(run_protocol(records, m, metric, cfg.stats));
      }
      const std::string json = protocol_to_json(reports);
      if (!out_path.empty()) write_text(out_path, json);
      else out << json << '\n';
      return 0;
    }

    if (energy_cmd->parsed()) {
      const PowerTrace trace = parse_power_csv(trace_file, period);
      EnergyReport r = make_energy_report(trace, queries, baseline);
      r.label = label.empty() ? trace_file.stem().string() : label;
      if (r.gap_count) err << "warning: " << r.gap_count << " sampling gap(s) in " << trace_file << '\n';
      const std::string json = energy_report_to_json(r);
      if (!out_path.empty()) write_text(out_path, json);
      out << json << '\n';
      return 0;
    }

    if (synth_cmd->parsed()) {
      if (!spec_file.empty()) {
        SynthSpec spec = synth_spec_from_json(slurp(spec_file));
        if (synth_cmd->count("--seed")) spec.seed = opt.seed;
        const SimilarityMap map = gaussian_map(spec);
        const auto v = map.grid().values();
        write_tensor(out_path, Tensor::matrix(static_cast<std::uint32_t>(map.rows()),
                                              static_cast<std::uint32_t>(map.cols()),
                                              std::vector<float>(v.begin(), v.end())));
        out << "wrote " << out_path.string() << '\n';
        return 0;
      }
      SynthCorpusConfig sc;
      sc.n_images = images;
      sc.concepts.resize(n_concepts);
      sc.planted_gap = gap;
      sc.noise_sigma = noise;
      sc.seed = opt.seed;
      sc.grid_h = sc.grid_w = grid;
      if (!opt.backbone.empty()) sc.backbone = opt.backbone;
      if (calibration_only) {
        std::ostringstream csv;
        csv << "offset,mean_iou\n";
        for (const auto& p : calibration_curve(sc)) {
          csv << format_double(p.offset) << ',' << format_double(p.mean_iou) << '\n';
        }
        write_text(out_path, csv.str());
        out << "wrote " << out_path.string() << '\n';
        return 0;
      }
      const Manifest m = write_synth_corpus(out_path, sc);
      const auto offsets = planted_offsets(sc);
      out << "wrote synthetic corpus: " << m.images.size() << " images x " << m.concepts.size()
          << " concepts x " << m.languages.size() << " languages (HR offset "
          << format_double(offsets.high) << ", LR offset " << format_double(offsets.low)
          << ", generator " << kSynthGenerator << ")\n";
      return 0;
    }

    if (report_cmd->parsed()) {
      const Manifest m = load_manifest(manifest_file);
      auto records = read_records_csv(records_file);
      if (!opt.backbone.empty()) {
        std::erase_if(records, [&](const MetricRecord& r) { return r.backbone != opt.backbone; });
      }
      if (records.empty()) {
        err << "error: no records in " << records_file.string() << '\n';
        return 2;
      }
      fs::create_directories(out_path);
      const Summary s = summarize(records, m);
      write_text(out_path / "summary.json", summary_to_json(s));
      write_stream(out_path / "languages.csv", [&](std::ostream& o) { write_language_csv(o, s); });
      write_stream(out_path / "per_concept.csv",
                   [&](std::ostream& o) { write_concept_csv(o, per_concept_table(records)); });
      write_stream(out_path / "mechanism.csv",
                   [&](std::ostream& o) { write_mechanism_csv(o, mechanism_scatter(records)); });
      if (!large_file.empty()) {
        const auto large = read_records_csv(large_file);
        write_stream(out_path / "scale_shift.csv",
                     [&](std::ostream& o) { write_scale_shift_csv(o, scale_shift(records, large)); });
      }
      if (!energy_files.empty()) {
        std::vector<EnergyReport> reports;
        for (const auto& f : energy_files) reports.push_back(energy_report_from_json(slurp(f)));
        write_stream(out_path / "energy.csv", [&](std::ostream& o) { write_energy_csv(o, reports); });
      }
      const auto& iou = s.groups.at(Metric::iou_cluster);
      out << "summarized " << s.record_count << " records";
      if (iou.gap) out << "; HR-LR cluster IoU gap " << format_double(*iou.gap);
      out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace xlg
