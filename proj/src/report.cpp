#include "xlg/report.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "xlg/error.hpp"

namespace xlg {

namespace {

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sorted before summing so the result does not depend on record order.
std::optional<double> stable_mean(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<std::string> languages_in_order(const std::vector<MetricRecord>& records) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.language).second) out.push_back(r.language);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Summary summarize(const std::vector<MetricRecord>& records, const Manifest& manifest) {
  if (records.empty()) throw InvalidArgument("summarize: no records");
  Summary s;
  s.backbone = records.front().backbone;
  s.record_count = records.size();

  std::map<std::string, std::map<Metric, std::vector<double>>, std::less<>> per_lang;
  std::map<ResourceClass, std::map<Metric, std::vector<double>>> per_group;
  std::map<std::string, LanguageSummary, std::less<>> lang_summaries;

  for (const auto& r : records) {
    const LanguageEntry* entry = manifest.find_language(r.language);
    if (!entry) throw InvalidArgument("summarize: record language '" + r.language + "' not in manifest");
    auto& ls = lang_summaries[r.language];
    ls.language = r.language;
    ls.resource_class = entry->resource_class;
    ++ls.total;
    for (Flag f : kAllFlags) {
      if (r.flags.has(f)) ++ls.count_flagged[f];
    }
    for (Metric m : kAllMetrics) {
      if (auto v = metric_value(r, m)) {
        per_lang[r.language][m].push_back(*v);
        per_group[entry->resource_class][m].push_back(*v);
      }
    }
  }

  for (const auto& l : manifest.languages) {
    auto it = lang_summaries.find(l.code);
    if (it == lang_summaries.end()) continue;
    LanguageSummary ls = it->second;
    for (Flag f : kAllFlags) ls.count_flagged.try_emplace(f, 0);
    for (Metric m : kAllMetrics) {
      const auto& values = per_lang[l.code][m];
      ls.metrics[m] = {stable_mean(values), median(values), values.size()};
    }
    s.languages.push_back(std::move(ls));
  }

  for (Metric m : kAllMetrics) {
    GroupComparison g;
    g.hr_mean = stable_mean(per_group[ResourceClass::high][m]);
    g.lr_mean = stable_mean(per_group[ResourceClass::low][m]);
    if (g.hr_mean && g.lr_mean) g.gap = *g.hr_mean - *g.lr_mean;
    s.groups[m] = g;
  }
  return s;
}

std::vector<ScaleShift> scale_shift(const std::vector<MetricRecord>& base,
                                    const std::vector<MetricRecord>& large) {
  auto means = [](const std::vector<MetricRecord>& recs) {
    std::map<std::string, std::vector<double>> by_lang;
    for (const auto& r : recs) {
      auto& v = by_lang[r.language];
      if (r.iou_cluster) v.push_back(*r.iou_cluster);
    }
    std::map<std::string, std::optional<double>> out;
    for (auto& [lang, v] : by_lang) out[lang] = stable_mean(v);
    return out;
  };
  const auto mb = means(base);
  const auto ml = means(large);
  std::vector<ScaleShift> out;
  bool overlap = false;
  for (const auto& [lang, b] : mb) {
    auto it = ml.find(lang);
    if (it == ml.end()) continue;
    overlap = true;
    if (!b || !it->second) continue;
    out.push_back({lang, *b, *it->second, *it->second - *b});
  }
  if (!overlap) throw InvalidArgument("scale_shift: record sets share no language");
  return out;
}

const ConceptCell& ConceptTable::at(std::string_view concept_id, std::string_view language) const {
  const auto ci = std::find(concepts.begin(), concepts.end(), concept_id);
  const auto li = std::find(languages.begin(), languages.end(), language);
  if (ci == concepts.end() || li == languages.end()) {
    throw InvalidArgument("concept table has no cell " + std::string(concept_id) + "/" +
                          std::string(language));
  }
  return cells[static_cast<std::size_t>(ci - concepts.begin())]
              [static_cast<std::size_t>(li - languages.begin())];
}

ConceptTable per_concept_table(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw InvalidArgument("per_concept_table: no records");
  ConceptTable t;
  t.languages = languages_in_order(records);
  std::set<std::string> concepts;
  for (const auto& r : records) concepts.insert(r.concept_id);
  t.concepts.assign(concepts.begin(), concepts.end());

  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  std::map<std::pair<std::string, std::string>, std::size_t> flagged;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.concept_id, r.language);
    if (r.iou_cluster) values[key].push_back(*r.iou_cluster);
    else values[key];
    if (!r.flags.empty()) ++flagged[key];
  }
  t.cells.assign(t.concepts.size(), std::vector<ConceptCell>(t.languages.size()));
  for (std::size_t i = 0; i < t.concepts.size(); ++i) {
    for (std::size_t j = 0; j < t.languages.size(); ++j) {
      const auto key = std::make_pair(t.concepts[i], t.languages[j]);
      auto it = values.find(key);
      if (it == values.end()) continue;
      auto& cell = t.cells[i][j];
      cell.count_defined = it->second.size();
      cell.mean_iou = stable_mean(it->second);
      cell.count_flagged = flagged[key];
    }
  }
  return t;
}

std::vector<MechanismPoint> mechanism_scatter(const std::vector<MetricRecord>& records) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_lang;
  for (const auto& r : records) {
    auto& [peaks, ious] = by_lang[r.language];
    if (r.peak_ratio) peaks.push_back(*r.peak_ratio);
    if (r.iou_cluster) ious.push_back(*r.iou_cluster);
  }
  std::vector<MechanismPoint> out;
  for (auto& [lang, v] : by_lang) out.push_back({lang, stable_mean(v.first), stable_mean(v.second)});
  return out;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string summary_to_json(const Summary& s, int indent) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : s.languages) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [m, ms] : l.metrics) {
      metrics[std::string(to_string(m))] = {{"mean", opt_json(ms.mean)},
                                            {"median", opt_json(ms.median)},
                                            {"count_defined", ms.count_defined}};
    }
    nlohmann::json flags = nlohmann::json::object();
    for (const auto& [f, n] : l.count_flagged) flags[std::string(to_string(f))] = n;
    langs.push_back({{"language", l.language},
                     {"resource_class", to_string(l.resource_class)},
                     {"total", l.total},
                     {"metrics", metrics},
                     {"count_flagged", flags}});
  }
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [m, g] : s.groups) {
    groups[std::string(to_string(m))] = {
        {"hr_mean", opt_json(g.hr_mean)}, {"lr_mean", opt_json(g.lr_mean)}, {"gap", opt_json(g.gap)}};
  }
  nlohmann::json j = {{"backbone", s.backbone},
                      {"record_count", s.record_count},
                      {"languages", langs},
                      {"groups", groups}};
  return j.dump(indent);
}

void write_language_csv(std::ostream& out, const Summary& s) {
  out << "language,resource_class,total";
  for (Metric m : kAllMetrics) out << ',' << to_string(m) << "_mean," << to_string(m) << "_median";
  for (Flag f : kAllFlags) out << ',' << to_string(f);
  out << '\n';
  for (const auto& l : s.languages) {
    out << l.language << ',' << to_string(l.resource_class) << ',' << l.total;
    for (Metric m : kAllMetrics) {
      const auto& ms = l.metrics.at(m);
      out << ',' << opt_csv(ms.mean) << ',' << opt_csv(ms.median);
    }
    for (Flag f : kAllFlags) out << ',' << l.count_flagged.at(f);
    out << '\n';
  }
}

void write_concept_csv(std::ostream& out, const ConceptTable& t) {
  out << "concept";
  for (const auto& l : t.languages) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < t.concepts.size(); ++i) {
    out << t.concepts[i];
    for (const auto& cell : t.cells[i]) out << ',' << (cell.mean_iou ? format_double(*cell.mean_iou) : "NA");
    out << '\n';
  }
}

void write_mechanism_csv(std::ostream& out, const std::vector<MechanismPoint>& pts) {
  out << "language,mean_peak_ratio,mean_iou_cluster\n";
  for (const auto& p : pts) {
    out << p.language << ',' << opt_csv(p.mean_peak_ratio) << ',' << opt_csv(p.mean_iou_cluster) << '\n';
  }
}

void write_scale_shift_csv(std::ostream& out, const std::vector<ScaleShift>& shifts) {
  out << "language,iou_base,iou_large,delta_iou\n";
  for (const auto& s : shifts) {
    out << s.language << ',' << format_double(s.iou_base) << ',' << format_double(s.iou_large) << ','
        << format_double(s.delta_iou) << '\n';
  }
}

void write_energy_csv(std::ostream& out, const std::vector<EnergyReport>& reports) {
  out << "label,total_wh,mean_watts,duration_s,n_queries,e_per_1k\n";
  for (const auto& r : reports) {
    out << r.label << ',' << format_double(r.total_wh) << ',' << format_double(r.mean_watts) << ','
        << format_double(r.duration_s) << ',' << r.n_queries << ',' << format_double(r.e_per_1k)
        << '\n';
  }
}

}  // namespace xlg
