#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "xlg/error.hpp"
#include "xlg/report.hpp"
#include "xlg/synth.hpp"

using namespace xlg;

namespace {

MetricRecord rec(std::string image, std::string concept_id, std::string lang,
                 std::optional<double> iou, std::optional<double> eta = 1.0) {
  MetricRecord r;
  r.backbone = "vit";
  r.image_id = std::move(image);
  r.concept_id = std::move(concept_id);
  r.language = std::move(lang);
  r.iou_cluster = iou;
  r.peak_ratio = eta;
  if (!iou) r.flags.set(Flag::both_masks_empty);
  return r;
}

Manifest manifest_for(std::vector<LanguageEntry> langs) {
  Manifest m;
  m.images = {"i0", "i1", "i2"};
  m.concepts = {"car", "bus"};
  m.languages = std::move(langs);
  m.languages.push_back({"en", ResourceClass::reference});
  m.reference_language = "en";
  m.backbone = {"vit", 0};
  m.grid_h = m.grid_w = 4;
  m.embed_dim = 1;
  return m;
}

void check_same_summary(const Summary& a, const Summary& b) {
  CHECK(a.record_count == b.record_count);
  REQUIRE(a.languages.size() == b.languages.size());
  for (std::size_t i = 0; i < a.languages.size(); ++i) {
    const auto& la = a.languages[i];
    const auto& lb = b.languages[i];
    CHECK(la.language == lb.language);
    CHECK(la.total == lb.total);
    CHECK(la.count_flagged == lb.count_flagged);
    for (Metric m : kAllMetrics) {
      CHECK(la.metrics.at(m).mean == lb.metrics.at(m).mean);
      CHECK(la.metrics.at(m).median == lb.metrics.at(m).median);
      CHECK(la.metrics.at(m).count_defined == lb.metrics.at(m).count_defined);
    }
  }
  for (Metric m : kAllMetrics) {
    CHECK(a.groups.at(m).hr_mean == b.groups.at(m).hr_mean);
    CHECK(a.groups.at(m).lr_mean == b.groups.at(m).lr_mean);
  }
}

}  // namespace

TEST_CASE("single record summary") {
  const Manifest m = manifest_for({{"fr", ResourceClass::high}});
  const auto s = summarize({rec("i0", "car", "fr", 0.5)}, m);
  REQUIRE(s.languages.size() == 1);
  CHECK(*s.languages[0].metrics.at(Metric::iou_cluster).mean == 0.5);
  CHECK(*s.languages[0].metrics.at(Metric::iou_cluster).median == 0.5);
  CHECK_FALSE(s.languages[0].metrics.at(Metric::spearman).mean);
  CHECK_FALSE(s.groups.at(Metric::iou_cluster).gap);
  CHECK_THROWS_AS(summarize({}, m), InvalidArgument);
}

TEST_CASE("flagged records are excluded from the metrics they flag and counted") {
  const Manifest m = manifest_for({{"fr", ResourceClass::high}, {"eu", ResourceClass::low}});
  const std::vector<MetricRecord> recs{rec("i0", "car", "fr", 0.6), rec("i1", "car", "fr", std::nullopt),
                                       rec("i2", "car", "fr", 0.8), rec("i0", "car", "eu", 0.5)};
  const auto s = summarize(recs, m);
  const auto& fr = s.languages[0];
  CHECK(fr.total == 3);
  CHECK(fr.metrics.at(Metric::iou_cluster).count_defined == 2);
  CHECK(*fr.metrics.at(Metric::iou_cluster).mean == doctest::Approx(0.7));
  CHECK(fr.metrics.at(Metric::peak_ratio).count_defined == 3);
  CHECK(fr.count_flagged.at(Flag::both_masks_empty) == 1);
  CHECK(fr.count_flagged.at(Flag::constant_map) == 0);
  CHECK(*s.groups.at(Metric::iou_cluster).gap == doctest::Approx(0.2));
}

TEST_CASE("summary does not depend on record order") {
  const Manifest m = manifest_for({{"fr", ResourceClass::high}, {"de", ResourceClass::high},
                                   {"eu", ResourceClass::low}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(0, 1);
  std::vector<MetricRecord> recs;
  for (const char* img : {"i0", "i1", "i2"}) {
    for (const char* c : {"car", "bus"}) {
      for (const char* l : {"fr", "de", "eu"}) {
        auto r = rec(img, c, l, ud(rng) < 0.2 ? std::nullopt : std::optional(ud(rng)), ud(rng));
        r.spearman = ud(rng) * 2 - 1;
        r.iou_top = {{90, ud(rng)}, {95, ud(rng)}, {99, ud(rng)}};
        recs.push_back(r);
      }
    }
  }
  const auto base = summarize(recs, m);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    check_same_summary(summarize(recs, m), base);
  }
}

TEST_CASE("records re-read from CSV reproduce the summary") {
  SynthCorpusConfig cfg;
  cfg.n_images = 6;
  cfg.concepts.resize(3);
  cfg.planted_gap = 0.1;
  cfg.seed = 2;
  const auto recs = synth_corpus(cfg);
  std::stringstream ss;
  write_records_csv(ss, recs);
  const auto back = read_records_csv(ss);
  check_same_summary(summarize(back, cfg.manifest()), summarize(recs, cfg.manifest()));
  CHECK(summary_to_json(summarize(back, cfg.manifest())) ==
        summary_to_json(summarize(recs, cfg.manifest())));
}

TEST_CASE("synthetic planted gap is recovered by the summary") {
  SynthCorpusConfig cfg;
  cfg.n_images = 40;
  cfg.concepts.resize(5);
  cfg.planted_gap = 0.15;
  cfg.seed = 8;
  const auto s = summarize(synth_corpus(cfg), cfg.manifest());
  CHECK(*s.groups.at(Metric::iou_cluster).gap == doctest::Approx(0.15).epsilon(0.2));
}

TEST_CASE("scale shift") {
  std::vector<MetricRecord> base{rec("i0", "car", "eu", 0.4), rec("i1", "car", "eu", 0.6),
                                 rec("i0", "car", "ar", 0.3)};
  auto shifted = base;
  for (auto& r : shifted) *r.iou_cluster += 0.05;
  for (const auto& s : scale_shift(base, base)) CHECK(s.delta_iou == 0.0);
  const auto d = scale_shift(base, shifted);
  REQUIRE(d.size() == 2);
  for (const auto& s : d) CHECK(s.delta_iou == doctest::Approx(0.05));

  std::vector<MetricRecord> other{rec("i0", "car", "fr", 0.4)};
  CHECK_THROWS_AS(scale_shift(base, other), InvalidArgument);

  // only languages present in both sets appear
  std::vector<MetricRecord> partial{rec("i0", "car", "eu", 0.1)};
  const auto p = scale_shift(base, partial);
  REQUIRE(p.size() == 1);
  CHECK(p[0].language == "eu");
}

TEST_CASE("per concept table") {
  const std::vector<MetricRecord> recs{rec("i0", "car", "eu", 0.4), rec("i0", "bus", "eu", 0.7),
                                       rec("i0", "car", "ar", 0.2),
                                       rec("i1", "car", "ar", std::nullopt)};
  const auto t = per_concept_table(recs);
  CHECK(*t.at("car", "eu").mean_iou == 0.4);
  CHECK(*t.at("bus", "eu").mean_iou == 0.7);
  CHECK(*t.at("car", "ar").mean_iou == 0.2);
  CHECK(t.at("car", "ar").count_flagged == 1);
  CHECK_FALSE(t.at("bus", "ar").mean_iou);
  std::ostringstream csv;
  write_concept_csv(csv, t);
  CHECK(csv.str() == "concept,ar,eu\nbus,NA,0.7\ncar,0.2,0.4\n");
}

TEST_CASE("mechanism scatter") {
  SynthSpec spec;
  spec.center_row = 7.0;
  spec.center_col = 7.0;
  std::vector<MetricRecord> identical;
  for (int i = 0; i < 5; ++i) {
    spec.seed = static_cast<std::uint64_t>(i);
    spec.noise_sigma = 0.02;
    const auto map = gaussian_map(spec);
    auto r = score_maps(map, map);
    r.language = "fr";
    identical.push_back(r);
  }
  const auto pts = mechanism_scatter(identical);
  REQUIRE(pts.size() == 1);
  CHECK(*pts[0].mean_peak_ratio == 1.0);
  CHECK(*pts[0].mean_iou_cluster == 1.0);
}

TEST_CASE("csv writers") {
  const Manifest m = manifest_for({{"fr", ResourceClass::high}, {"eu", ResourceClass::low}});
  const auto s = summarize({rec("i0", "car", "fr", 0.5), rec("i0", "car", "eu", 0.25)}, m);
  std::ostringstream lang;
  write_language_csv(lang, s);
  std::istringstream in(lang.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.rfind("language,resource_class,total,iou_cluster_mean,iou_cluster_median", 0) == 0);
  CHECK(row.rfind("fr,high,1,0.5,0.5", 0) == 0);

  EnergyReport e;
  e.label = "base";
  e.total_wh = 116.15;
  e.n_queries = 30030;
  e.e_per_1k = e_per_1k(116.15, 30030);
  std::ostringstream en;
  write_energy_csv(en, {e});
  CHECK(en.str().find("base,116.15,") != std::string::npos);
}
