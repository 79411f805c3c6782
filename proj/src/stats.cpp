#include "xlg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <json.hpp>

#include "xlg/distributions.hpp"
#include "xlg/error.hpp"

namespace xlg {

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::exact: return "exact";
    case TestMethod::normal_approx: return "normal_approx";
    case TestMethod::chi2_approx: return "chi2_approx";
  }
  return "?";
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 share the mean of ranks i+1..j
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    i = j;
  }
  return ranks;
}

double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

namespace {

void set_p_from_log(TestResult& r, double log_p) {
  log_p = std::min(log_p, 0.0);
  r.p_value = std::exp(log_p);
  r.log10_p = log_p / std::numbers::ln10;
}

void set_p(TestResult& r, double p) {
  r.p_value = std::clamp(p, 0.0, 1.0);
  r.log10_p = std::log10(r.p_value);
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + ": non-finite value");
  }
}

// Doubled mid-ranks are always integers.
std::vector<std::size_t> doubled(const std::vector<double>& ranks) {
  std::vector<std::size_t> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
  }
  return out;
}

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                Alternative alt, const StatsOptions& opts) {
  if (x.size() != y.size()) throw InvalidArgument("wilcoxon: length mismatch");
  if (x.empty()) throw InvalidArgument("wilcoxon: empty input");
  require_finite(x, "wilcoxon");
  require_finite(y, "wilcoxon");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw InvalidArgument("wilcoxon: all differences are zero");

  std::vector<double> abs_d(diffs.size());
  std::transform(diffs.begin(), diffs.end(), abs_d.begin(), [](double d) { return std::abs(d); });
  const auto ranks = average_ranks(abs_d);
  const std::size_t n = diffs.size();

  TestResult r;
  r.n_used = n;
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w_plus += ranks[i];
  }
  r.statistic = w_plus;

  if (n <= opts.wilcoxon_exact_max_n) {
    r.method = TestMethod::exact;
    // Null distribution of 2W+ over all 2^n sign assignments, by counting.
    const auto r2 = doubled(ranks);
    const std::size_t total = std::accumulate(r2.begin(), r2.end(), std::size_t{0});
    std::vector<std::uint64_t> count(total + 1, 0);
    count[0] = 1;
    std::size_t reach = 0;
    for (std::size_t v : r2) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (count[s]) count[s + v] += count[s];
      }
      reach += v;
    }
    const auto observed = static_cast<std::size_t>(std::llround(2.0 * w_plus));
    std::uint64_t tail = 0;
    for (std::size_t s = 0; s <= total; ++s) {
      const bool in_tail = alt == Alternative::greater ? s >= observed : s <= observed;
      if (in_tail) tail += count[s];
    }
    set_p(r, std::ldexp(static_cast<double>(tail), -static_cast<int>(n)));
    return r;
  }

  r.method = TestMethod::normal_approx;
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term(abs_d) / 48.0;
  const double sd = std::sqrt(var);
  const double z = alt == Alternative::greater ? (w_plus - mean - 0.5) / sd
                                               : (mean - w_plus - 0.5) / sd;
  set_p_from_log(r, dist::log_normal_sf(z));
  return r;
}

TestResult friedman(const Grid<double>& values) {
  const std::size_t n = values.rows(), k = values.cols();
  if (n < 2 || k < 2) throw InvalidArgument("friedman: need at least 2 blocks and 2 treatments");
  require_finite(values.values(), "friedman");

  std::vector<double> rank_sums(k, 0.0);
  double ties = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto row = values.values().subspan(b * k, k);
    const auto ranks = average_ranks(row);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
    ties += tie_term(row);
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  double sum_sq = 0.0;
  for (double rj : rank_sums) sum_sq += rj * rj;

  TestResult r;
  r.method = TestMethod::chi2_approx;
  r.n_used = n;
  const double divisor = 1.0 - ties / (nd * kd * (kd * kd - 1.0));
  if (divisor <= 1e-12) {
    r.statistic = 0.0;
    set_p(r, 1.0);
    return r;
  }
  const double chi2 = (12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0)) / divisor;
  r.statistic = std::max(chi2, 0.0);
  set_p_from_log(r, dist::log_chi2_sf(r.statistic, kd - 1.0));
  return r;
}

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, Alternative alt,
                          const StatsOptions& opts) {
  if (x.empty() || y.empty()) throw InvalidArgument("mann_whitney: empty sample");
  require_finite(x, "mann_whitney");
  require_finite(y, "mann_whitney");
  const std::size_t n = x.size(), m = y.size(), total = n + m;

  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = average_ranks(pooled);
  double rank_sum_x = 0.0;
  for (std::size_t i = 0; i < n; ++i) rank_sum_x += ranks[i];
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  const double u = rank_sum_x - nd * (nd + 1.0) / 2.0;

  TestResult r;
  r.statistic = u;
  r.n_used = total;

  if (n * m <= opts.mann_whitney_exact_max_nm) {
    r.method = TestMethod::exact;
    // count[j][s]: labelings choosing j of the pooled items with doubled rank sum s.
    const auto r2 = doubled(ranks);
    const std::size_t max_sum = std::accumulate(r2.begin(), r2.end(), std::size_t{0});
    std::vector<std::vector<std::uint64_t>> count(n + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
    count[0][0] = 1;
    std::size_t reach = 0;
    for (std::size_t item = 0; item < total; ++item) {
      const std::size_t v = r2[item];
      for (std::size_t j = std::min(item + 1, n); j >= 1; --j) {
        for (std::size_t s = reach + 1; s-- > 0;) {
          if (count[j - 1][s]) count[j][s + v] += count[j - 1][s];
        }
      }
      reach += v;
    }
    const auto observed = static_cast<std::size_t>(std::llround(2.0 * rank_sum_x));
    std::uint64_t tail = 0, all = 0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      all += count[n][s];
      const bool in_tail = alt == Alternative::greater ? s >= observed : s <= observed;
      if (in_tail) tail += count[n][s];
    }
    set_p(r, static_cast<double>(tail) / static_cast<double>(all));
    return r;
  }

  r.method = TestMethod::normal_approx;
  const double td = static_cast<double>(total);
  const double mean = nd * md / 2.0;
  const double var = nd * md / 12.0 * ((td + 1.0) - tie_term(pooled) / (td * (td - 1.0)));
  if (var <= 0.0) {
    set_p(r, 1.0);
    return r;
  }
  const double sd = std::sqrt(var);
  const double z = alt == Alternative::greater ? (u - mean - 0.5) / sd : (mean - u - 0.5) / sd;
  set_p_from_log(r, dist::log_normal_sf(z));
  return r;
}

namespace {

using LanguageIndex = std::map<std::string, const MetricRecord*, std::less<>>;

struct BlockIndex {
  std::vector<BlockKey> order;  // manifest image x concept order
  std::map<BlockKey, LanguageIndex> blocks;
};

BlockIndex index_records(const std::vector<MetricRecord>& records, const Manifest& manifest) {
  std::set<std::string> backbones;
  BlockIndex idx;
  for (const auto& r : records) {
    backbones.insert(r.backbone);
    if (!manifest.find_language(r.language)) continue;
    auto& langs = idx.blocks[{r.image_id, r.concept_id}];
    if (!langs.emplace(r.language, &r).second) {
      throw InvalidArgument("duplicate record for " + r.image_id + "/" + r.concept_id + "/" + r.language);
    }
  }
  if (backbones.size() > 1) {
    throw InvalidArgument("records mix several backbones; filter to one before testing");
  }
  for (const auto& img : manifest.images) {
    for (const auto& c : manifest.concepts) idx.order.push_back({img, c});
  }
  return idx;
}

std::optional<double> lookup(const BlockIndex& idx, const BlockKey& key, std::string_view lang,
                             Metric metric) {
  auto b = idx.blocks.find(key);
  if (b == idx.blocks.end()) return std::nullopt;
  auto l = b->second.find(lang);
  if (l == b->second.end()) return std::nullopt;
  return metric_value(*l->second, metric);
}

std::optional<double> group_mean(const BlockIndex& idx, const BlockKey& key,
                                 const std::vector<std::string>& langs, Metric metric) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& l : langs) {
    if (auto v = lookup(idx, key, l, metric)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

}  // namespace

PairedSeries hr_lr_pairing(const std::vector<MetricRecord>& records, const Manifest& manifest,
                           Metric metric) {
  const auto hr = manifest.codes_with(ResourceClass::high);
  const auto lr = manifest.codes_with(ResourceClass::low);
  if (hr.empty() || lr.empty()) {
    throw InvalidArgument("hr_lr_pairing: manifest needs both high- and low-resource languages");
  }
  const auto idx = index_records(records, manifest);
  PairedSeries out;
  out.treatments = {"HR", "LR"};
  std::vector<double> flat;
  for (const auto& key : idx.order) {
    const auto h = group_mean(idx, key, hr, metric);
    const auto l = group_mean(idx, key, lr, metric);
    if (!h || !l) {
      ++out.dropped_rows;
      continue;
    }
    out.keys.push_back(key);
    flat.push_back(*h);
    flat.push_back(*l);
  }
  out.values = Grid<double>(out.keys.size(), 2, std::move(flat));
  return out;
}

PairedSeries language_blocks(const std::vector<MetricRecord>& records, const Manifest& manifest,
                             Metric metric) {
  const auto langs = manifest.probe_languages();
  const auto idx = index_records(records, manifest);
  PairedSeries out;
  out.treatments = langs;
  std::vector<double> flat;
  std::vector<double> row(langs.size());
  for (const auto& key : idx.order) {
    bool complete = true;
    for (std::size_t j = 0; j < langs.size() && complete; ++j) {
      const auto v = lookup(idx, key, langs[j], metric);
      complete = v.has_value();
      if (complete) row[j] = *v;
    }
    if (!complete) {
      ++out.dropped_rows;
      continue;
    }
    out.keys.push_back(key);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  out.values = Grid<double>(out.keys.size(), langs.size(), std::move(flat));
  return out;
}

ProtocolReport run_protocol(const std::vector<MetricRecord>& records, const Manifest& manifest,
                            Metric metric, const StatsOptions& opts) {
  if (manifest.probe_languages().size() < 2) {
    throw InvalidArgument("run_protocol: need at least two non-reference languages");
  }
  ProtocolReport rep;
  rep.metric = metric;

  const auto blocks = language_blocks(records, manifest, metric);
  rep.friedman = friedman(blocks.values);
  rep.friedman.dropped_rows = blocks.dropped_rows;
  rep.friedman_treatments = blocks.treatments;

  const auto paired = hr_lr_pairing(records, manifest, metric);
  std::vector<double> hr_means, lr_means;
  for (std::size_t i = 0; i < paired.values.rows(); ++i) {
    hr_means.push_back(paired.values(i, 0));
    lr_means.push_back(paired.values(i, 1));
  }
  rep.wilcoxon_hr_gt_lr = wilcoxon_signed_rank(hr_means, lr_means, Alternative::greater, opts);
  rep.wilcoxon_hr_gt_lr.dropped_rows = paired.dropped_rows;

  const auto idx = index_records(records, manifest);
  const auto hr = manifest.codes_with(ResourceClass::high);
  std::vector<double> hr_pool;
  std::size_t hr_missing = 0;
  for (const auto& key : idx.order) {
    for (const auto& l : hr) {
      if (auto v = lookup(idx, key, l, metric)) hr_pool.push_back(*v);
      else ++hr_missing;
    }
  }
  for (const auto& lang : manifest.codes_with(ResourceClass::low)) {
    std::vector<double> lr_vals;
    std::size_t missing = hr_missing;
    for (const auto& key : idx.order) {
      if (auto v = lookup(idx, key, lang, metric)) lr_vals.push_back(*v);
      else ++missing;
    }
    auto res = mann_whitney_u(hr_pool, lr_vals, Alternative::greater, opts);
    res.dropped_rows = missing;
    rep.mann_whitney.emplace(lang, res);
  }
  return rep;
}

namespace {

nlohmann::json to_json(const TestResult& r) {
  return {{"statistic", r.statistic},       {"p", r.p_value},
          {"log10_p", r.log10_p},           {"n_used", r.n_used},
          {"method", to_string(r.method)},  {"dropped_rows", r.dropped_rows}};
}

}  // namespace

std::string protocol_to_json(const std::vector<ProtocolReport>& reports, int indent) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& rep : reports) {
    nlohmann::json mw = nlohmann::json::object();
    for (const auto& [lang, res] : rep.mann_whitney) mw[lang] = to_json(res);
    auto fr = to_json(rep.friedman);
    fr["treatments"] = rep.friedman_treatments;
    root[std::string(to_string(rep.metric))] = {
        {"friedman", fr},
        {"wilcoxon_hr_gt_lr", to_json(rep.wilcoxon_hr_gt_lr)},
        {"mann_whitney", mw},
    };
  }
  return root.dump(indent);
}

}  // namespace xlg
