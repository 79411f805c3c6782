#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "xlg/cli.hpp"
#include "xlg/manifest.hpp"
#include "xlg/records.hpp"
#include "xlg/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace xlg;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "xlg_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string fixtures = XLG_FIXTURES_DIR;

}  // namespace

TEST_CASE("energy on the constant fixture") {
  const auto r = run({"energy", "--trace", fixtures + "/const100w.csv", "--queries", "1000",
                      "--period", "1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("e_per_1k").get<double>() == 100.0);
  CHECK(j.at("total_wh").get<double>() == 100.0);
  CHECK(r.err.empty());

  // against a 20 Hz nominal rate every 1 s step exceeds the gap limit
  const auto g = run({"energy", "--trace", fixtures + "/const100w.csv", "--queries", "1000",
                      "--period", "0.05"});
  CHECK(g.code == 0);
  CHECK(g.err.find("gap") != std::string::npos);
}

TEST_CASE("report with no records fails with a diagnostic") {
  const fs::path dir = scratch("empty_report");
  {
    std::ofstream(dir / "records.csv") << kRecordCsvHeader << '\n';
  }
  Manifest m;
  m.images = {"a"};
  m.concepts = {"car"};
  m.languages = default_languages();
  m.reference_language = "en";
  m.backbone = {"vit", 0};
  m.grid_h = m.grid_w = 2;
  m.embed_dim = 1;
  save_manifest(dir / "manifest.json", m);
  const auto r = run({"report", "--records", (dir / "records.csv").string(), "--manifest",
                      (dir / "manifest.json").string(), "--out", (dir / "out").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("no records") != std::string::npos);
}

TEST_CASE("argument errors") {
  CHECK(run({"energy", "--bogus"}).code != 0);
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"stats", "--records", "/nonexistent.csv", "--manifest", "/nonexistent.json"}).code != 0);
  CHECK(run({"score", "--corpus", "/nonexistent", "--out", "/tmp/x.csv", "--resolution", "huge"})
            .code != 0);
  const auto missing = run({"score", "--corpus", "/nonexistent_corpus", "--out", "/tmp/x.csv"});
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("error:", 0) == 0);
}

TEST_CASE("synth, score, stats and report on a small corpus") {
  const fs::path dir = scratch("pipeline");
  const std::string corpus = (dir / "corpus").string();
  auto r = run({"synth", "--out", corpus, "--images", "12", "--concepts", "3", "--gap", "0.15",
                "--seed", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::string records = (dir / "records.csv").string();
  r = run({"score", "--corpus", corpus, "--out", records});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto recs = read_records_csv(fs::path(records));
  std::map<std::string, std::size_t> per_lang;
  for (const auto& rec : recs) ++per_lang[rec.language];
  CHECK(per_lang.size() == 12);
  for (const auto& [lang, n] : per_lang) CHECK(n == 36);

  const std::string protocol = (dir / "protocol.json").string();
  r = run({"stats", "--records", records, "--manifest", corpus + "/manifest.json", "--out", protocol});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(slurp(protocol));
  for (const char* metric : {"iou_cluster", "iou_p90", "iou_p95", "iou_p99", "spearman", "peak_ratio"}) {
    REQUIRE(j.contains(metric));
    CHECK(j[metric].contains("friedman"));
    CHECK(j[metric].contains("wilcoxon_hr_gt_lr"));
    CHECK(j[metric]["mann_whitney"].size() == 3);
  }
  CHECK(j["iou_cluster"]["wilcoxon_hr_gt_lr"]["p"].get<double>() < 0.01);

  const fs::path out = dir / "report";
  r = run({"report", "--records", records, "--manifest", corpus + "/manifest.json", "--out",
           out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"summary.json", "languages.csv", "per_concept.csv", "mechanism.csv"}) {
    CHECK(fs::exists(out / f));
  }

  // upsampled resolution changes percentile/Spearman values but not the record count
  const std::string up = (dir / "records_up.csv").string();
  r = run({"score", "--corpus", corpus, "--out", up, "--resolution", "upsampled", "--metric", "spearman"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_records_csv(fs::path(up)).size() == recs.size());

  // a single metric keeps the protocol report to that metric
  r = run({"stats", "--records", records, "--manifest", corpus + "/manifest.json", "--metric",
           "peak_ratio"});
  REQUIRE(r.code == 0);
  const auto single = nlohmann::json::parse(r.out);
  CHECK(single.size() == 1);
  CHECK(single.contains("peak_ratio"));
}

TEST_CASE("cluster subcommand on a single synthetic map") {
  const fs::path dir = scratch("cluster");
  {
    std::ofstream(dir / "spec.json") << R"({"grid_h": 9, "grid_w": 9, "blob_center": [4, 4],
      "blob_sigma": 1.5, "amplitude": 1, "background": 0, "noise_sigma": 0, "seed": 1})";
  }
  auto r = run({"synth", "--map-spec", (dir / "spec.json").string(), "--out", (dir / "map.tns").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run({"cluster", "--map", (dir / "map.tns").string(), "--out", (dir / "mask.tns").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("cluster_count").get<int>() == 1);
  const Tensor mask = read_tensor(dir / "mask.tns");
  CHECK(mask.rank == 2);
  CHECK(mask.data[4 * 9 + 4] == 1.0f);
  CHECK(static_cast<int>(std::count(mask.data.begin(), mask.data.end(), 1.0f)) ==
        j.at("mask_cells").get<int>());
}

TEST_CASE("simmap and feature-based scoring agree") {
  const fs::path dir = scratch("features");
  Manifest m;
  m.images = {"a", "b"};
  m.concepts = {"car", "bus"};
  m.languages = {{"en", ResourceClass::reference}, {"fr", ResourceClass::high},
                 {"de", ResourceClass::high}, {"eu", ResourceClass::low}};
  m.reference_language = "en";
  m.backbone = {"toy", 1.0};
  m.grid_h = 3;
  m.grid_w = 4;
  m.embed_dim = 5;
  save_manifest(dir / "manifest.json", m);
  std::uint64_t state = 7;
  auto next = [&] {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(state >> 40) / static_cast<double>(1ull << 24) - 0.5;
  };
  for (const auto& img : m.images) {
    FeatureMap f{img, 3, 4, 5, {}};
    for (int i = 0; i < 60; ++i) f.data.push_back(static_cast<float>(next()));
    save_feature_map(dir, "toy", f);
  }
  for (const auto& l : m.languages) {
    for (const auto& c : m.concepts) {
      TextEmbedding t{l.code, c, {}};
      for (int i = 0; i < 5; ++i) t.vector.push_back(static_cast<float>(next()));
      save_text_embedding(dir, "toy", t);
    }
  }
  auto r = run({"simmap", "--corpus", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("wrote 16 similarity maps") != std::string::npos);
  CHECK(fs::exists(simmap_path(dir, "toy", "eu", "bus", "b")));

  r = run({"score", "--corpus", dir.string(), "--out", (dir / "from_maps.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  r = run({"score", "--corpus", dir.string(), "--source", "features", "--out",
           (dir / "from_features.csv").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto a = read_records_csv(dir / "from_maps.csv");
  const auto b = read_records_csv(dir / "from_features.csv");
  REQUIRE(a.size() == 12);
  REQUIRE(b.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    // maps are stored as float32, so allow for that rounding
    CHECK(a[i].language == b[i].language);
    CHECK(*a[i].spearman == doctest::Approx(*b[i].spearman).epsilon(1e-5));
  }
}

TEST_CASE("config file supplies cluster params and stats cutoffs") {
  const fs::path dir = scratch("config");
  {
    std::ofstream(dir / "map_spec.json") << R"({"grid_h": 6, "grid_w": 6, "blob_center": [2, 2],
      "blob_sigma": 1.0, "amplitude": 1, "background": 0, "noise_sigma": 0, "seed": 3})";
    std::ofstream(dir / "config.json") << R"({"cluster": {"rel_threshold": 0.5, "min_size": 1,
      "threshold_mode": "per_seed"}, "stats": {"wilcoxon_exact_max_n": 5}})";
    std::ofstream(dir / "bad.json") << R"({"cluster": {"rel_threshold": 7}})";
  }
  run({"synth", "--map-spec", (dir / "map_spec.json").string(), "--out", (dir / "m.tns").string()});
  const auto loose = run({"cluster", "--map", (dir / "m.tns").string(), "--out",
                          (dir / "mask.tns").string(), "--config", (dir / "config.json").string()});
  const auto strict = run({"cluster", "--map", (dir / "m.tns").string(), "--out",
                           (dir / "mask.tns").string()});
  REQUIRE(loose.code == 0);
  REQUIRE(strict.code == 0);
  CHECK(nlohmann::json::parse(loose.out)["mask_cells"].get<int>() >
        nlohmann::json::parse(strict.out)["mask_cells"].get<int>());
  CHECK(run({"cluster", "--map", (dir / "m.tns").string(), "--out", (dir / "mask.tns").string(),
             "--config", (dir / "bad.json").string()})
            .code == 1);
}

TEST_CASE("the installed binary runs") {
  const std::string cmd = std::string("\"") + XLG_BINARY + "\" energy --trace \"" + fixtures +
                          "/const100w.csv\" --queries 1000 --period 1 > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const std::string bad = std::string("\"") + XLG_BINARY + "\" --nope > /dev/null 2>&1";
  CHECK(std::system(bad.c_str()) != 0);
}
