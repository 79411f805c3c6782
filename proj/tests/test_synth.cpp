#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "xlg/error.hpp"
#include "xlg/records.hpp"
#include "xlg/stats.hpp"
#include "xlg/synth.hpp"

using namespace xlg;

namespace {

std::vector<CalibrationPoint> load_curve_fixture() {
  std::ifstream in(std::filesystem::path(XLG_FIXTURES_DIR) / "calibration_default.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "offset,mean_iou");
  std::vector<CalibrationPoint> out;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    out.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return out;
}

}  // namespace

TEST_CASE("noise-free blob peaks at the nearest cell") {
  SynthSpec s;
  s.center_row = 4.2;
  s.center_col = 9.0;
  const auto m = gaussian_map(s);
  CHECK(m.grid()(4, 9) == doctest::Approx(std::exp(-0.04 / (2 * 2.25))));
  s.center_row = 4.0;
  const auto exact = gaussian_map(s);
  CHECK(exact.grid()(4, 9) == 1.0);
  CHECK(exact.max() == 1.0);
}

TEST_CASE("generators are deterministic given the seed") {
  SynthSpec s;
  s.noise_sigma = 0.1;
  s.seed = 1234;
  CHECK(gaussian_map(s).grid() == gaussian_map(s).grid());
  SynthSpec t = s;
  t.seed = 1235;
  CHECK_FALSE(gaussian_map(s).grid() == gaussian_map(t).grid());

  SynthRng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  SynthRng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("normal stream has unit moments") {
  SynthRng rng(77);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.01);
}

TEST_CASE("default blob yields a cluster mask containing the peak") {
  SynthSpec s;
  s.center_row = 6.3;
  s.center_col = 8.8;
  const auto m = gaussian_map(s);
  const auto cm = extract_cluster_mask(m);
  CHECK(cm.cluster_count >= 1);
  CHECK(cm.grid(6, 9) == 1);
}

TEST_CASE("misalignment extremes") {
  SynthSpec s;
  s.center_row = 7.5;
  s.center_col = 4.5;
  const auto [ref, same] = misalignment_pair(s, 0.0);
  const auto r0 = score_maps(same, ref);
  CHECK(*r0.iou_cluster == 1.0);
  CHECK(*r0.peak_ratio == 1.0);
  CHECK(*r0.spearman == doctest::Approx(1.0));
  for (int p : kPercentiles) CHECK(r0.iou_top.at(p) == 1.0);

  const auto [ref4, far] = misalignment_pair(s, 4 * s.blob_sigma);
  const auto r4 = score_maps(far, ref4);
  CHECK(*r4.peak_ratio == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(*r4.iou_cluster == 0.0);

  CHECK_THROWS_AS(misalignment_pair(s, 20.0), InvalidArgument);
}

TEST_CASE("collapse scales the peak") {
  SynthSpec s;
  s.center_row = 8.0;
  s.center_col = 8.0;
  const auto [ref, weak] = collapse_pair(s, 0.3);
  CHECK(*peak_ratio(weak.grid(), ref.grid()) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(collapse_pair(s, 1.0), InvalidArgument);
  CHECK_THROWS_AS(collapse_pair(s, 0.0), InvalidArgument);
}

TEST_CASE("spec validation and json") {
  SynthSpec s;
  s.background = 0.5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.background = 0.0;
  s.center_row = 16.5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.center_row = 3.25;
  s.seed = 0xFFFFFFFFFFFFFFFFull;
  s.noise_sigma = 0.02;
  const SynthSpec back = synth_spec_from_json(synth_spec_to_json(s));
  CHECK(back.center_row == 3.25);
  CHECK(back.seed == s.seed);
  CHECK(back.noise_sigma == 0.02);
  CHECK(gaussian_map(back).grid() == gaussian_map(s).grid());
}

TEST_CASE("calibration curve matches the checked-in pilot sweep") {
  const SynthCorpusConfig cfg;
  const auto fixture = load_curve_fixture();
  const auto curve = calibration_curve(cfg);
  REQUIRE(curve.size() == fixture.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].offset == fixture[i].offset);
    CHECK(curve[i].mean_iou == doctest::Approx(fixture[i].mean_iou).epsilon(1e-9));
  }
  // IoU falls as the displacement grows
  CHECK(curve.front().mean_iou > cfg.hr_target_iou);
  CHECK(curve.back().mean_iou < 0.1);
}

TEST_CASE("offset lookup interpolates and rejects unreachable targets") {
  const std::vector<CalibrationPoint> curve{{0, 0.6}, {1, 0.4}, {2, 0.1}};
  CHECK(offset_for_iou(curve, 0.5) == doctest::Approx(0.5));
  CHECK(offset_for_iou(curve, 0.25) == doctest::Approx(1.5));
  CHECK(offset_for_iou(curve, 0.6) == 0.0);
  CHECK_THROWS_AS(offset_for_iou(curve, 0.7), InvalidArgument);
  CHECK_THROWS_AS(offset_for_iou(curve, 0.05), InvalidArgument);

  SynthCorpusConfig cfg;
  cfg.planted_gap = 0.15;
  const auto off = planted_offsets(cfg);
  CHECK(off.low > off.high);
  cfg.planted_gap = 0.6;
  CHECK_THROWS_WITH_AS(planted_offsets(cfg), doctest::Contains("infeasible"), InvalidArgument);
}

TEST_CASE("full-size corpus has 2310 records per language") {
  SynthCorpusConfig cfg;
  cfg.seed = 3;
  const auto recs = synth_corpus(cfg);
  std::map<std::string, std::size_t> per_lang;
  for (const auto& r : recs) ++per_lang[r.language];
  CHECK(per_lang.size() == 12);
  for (const auto& [lang, n] : per_lang) CHECK(n == 2310);
  CHECK(per_lang.count("en") == 0);
}

TEST_CASE("corpus generation is reproducible and the planted gap shows up") {
  SynthCorpusConfig cfg;
  cfg.n_images = 20;
  cfg.concepts.resize(10);
  cfg.planted_gap = 0.15;
  cfg.seed = 11;
  const auto a = synth_corpus(cfg);
  const auto b = synth_corpus(cfg);
  CHECK(a == b);
  const auto series = hr_lr_pairing(a, cfg.manifest(), Metric::iou_cluster);
  double gap = 0;
  for (std::size_t i = 0; i < series.keys.size(); ++i) gap += series.values(i, 0) - series.values(i, 1);
  gap /= static_cast<double>(series.keys.size());
  CHECK(gap == doctest::Approx(0.15).epsilon(0.35));
}
