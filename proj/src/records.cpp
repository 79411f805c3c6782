#include "xlg/records.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "xlg/error.hpp"

namespace xlg {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::iou_cluster: return "iou_cluster";
    case Metric::iou_p90: return "iou_p90";
    case Metric::iou_p95: return "iou_p95";
    case Metric::iou_p99: return "iou_p99";
    case Metric::spearman: return "spearman";
    case Metric::peak_ratio: return "peak_ratio";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown metric: " + std::string(s));
}

std::optional<double> metric_value(const MetricRecord& r, Metric m) {
  auto top = [&](int p) -> std::optional<double> {
    auto it = r.iou_top.find(p);
    if (it == r.iou_top.end()) return std::nullopt;
    return it->second;
  };
  switch (m) {
    case Metric::iou_cluster: return r.iou_cluster;
    case Metric::iou_p90: return top(90);
    case Metric::iou_p95: return top(95);
    case Metric::iou_p99: return top(99);
    case Metric::spearman: return r.spearman;
    case Metric::peak_ratio: return r.peak_ratio;
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt(std::string_view s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("records line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

// Identifiers never contain commas; reject them rather than quoting.
void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw InvalidArgument("record field contains a CSV delimiter: " + s);
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  out << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    for (const auto* f : {&r.backbone, &r.image_id, &r.concept_id, &r.language}) check_field(*f);
    out << r.backbone << ',' << r.image_id << ',' << r.concept_id << ',' << r.language;
    out << ',' << opt(r.iou_cluster);
    for (Metric m : {Metric::iou_p90, Metric::iou_p95, Metric::iou_p99}) {
      out << ',' << opt(metric_value(r, m));
    }
    out << ',' << opt(r.spearman) << ',' << opt(r.peak_ratio) << ',';
    bool first = true;
    for (Flag f : kAllFlags) {
      if (!r.flags.has(f)) continue;
      if (!first) out << '|';
      out << to_string(f);
      first = false;
    }
    out << '\n';
  }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write records: " + path.string());
  write_records_csv(out, records);
}

std::vector<MetricRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("records: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordCsvHeader) throw FormatError("records: unexpected header");
  std::vector<MetricRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) {
      throw FormatError("records line " + std::to_string(lineno) + ": expected 11 fields");
    }
    MetricRecord r;
    r.backbone = f[0];
    r.image_id = f[1];
    r.concept_id = f[2];
    r.language = f[3];
    r.iou_cluster = parse_opt(f[4], lineno);
    for (std::size_t i = 0; i < kPercentiles.size(); ++i) {
      if (auto v = parse_opt(f[5 + i], lineno)) r.iou_top[kPercentiles[i]] = *v;
    }
    r.spearman = parse_opt(f[8], lineno);
    r.peak_ratio = parse_opt(f[9], lineno);
    if (!f[10].empty()) {
      for (auto name : split(f[10], '|')) r.flags.set(parse_flag(name));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open records: " + path.string());
  return read_records_csv(in);
}

}  // namespace xlg
