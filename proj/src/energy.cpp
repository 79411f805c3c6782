#include "xlg/energy.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "xlg/error.hpp"

namespace xlg {

void PowerTrace::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t_s) || !std::isfinite(s.watts)) {
      throw InvalidArgument("power trace sample " + std::to_string(i) + " is not finite");
    }
    if (s.watts < 0.0) throw InvalidArgument("power trace sample " + std::to_string(i) + " is negative");
    if (i > 0 && !(s.t_s > samples[i - 1].t_s)) {
      throw InvalidArgument("power trace timestamps not strictly increasing at sample " +
                            std::to_string(i));
    }
  }
}

double PowerTrace::duration_s() const {
  return samples.size() < 2 ? 0.0 : samples.back().t_s - samples.front().t_s;
}

namespace {

double parse_number(std::string_view s, std::size_t line, const char* what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("power csv line " + std::to_string(line) + ": malformed " + what);
  }
  return v;
}

}  // namespace

PowerTrace parse_power_csv(std::istream& in, double nominal_period_s) {
  if (!(nominal_period_s > 0.0)) throw InvalidArgument("nominal sample period must be positive");
  PowerTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "t_s,power_w") {
        throw FormatError("power csv line " + std::to_string(lineno) + ": expected header t_s,power_w");
      }
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw FormatError("power csv line " + std::to_string(lineno) + ": expected two fields");
    }
    const std::string_view view(line);
    const double t = parse_number(view.substr(0, comma), lineno, "timestamp");
    const double p = parse_number(view.substr(comma + 1), lineno, "power");
    if (!std::isfinite(t) || !std::isfinite(p)) {
      throw FormatError("power csv line " + std::to_string(lineno) + ": non-finite value");
    }
    if (p < 0.0) throw FormatError("power csv line " + std::to_string(lineno) + ": negative power");
    if (!trace.samples.empty()) {
      const double dt = t - trace.samples.back().t_s;
      if (!(dt > 0.0)) {
        throw FormatError("power csv line " + std::to_string(lineno) + ": non-increasing timestamp");
      }
      if (dt > kGapFactor * nominal_period_s) trace.gaps.push_back(trace.samples.size());
    }
    trace.samples.push_back({t, p});
  }
  if (!header_seen) throw FormatError("power csv: missing header t_s,power_w");
  return trace;
}

PowerTrace parse_power_csv(const std::filesystem::path& path, double nominal_period_s) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open power trace: " + path.string());
  return parse_power_csv(in, nominal_period_s);
}

double integrate_energy(const PowerTrace& trace) {
  if (trace.samples.size() < 2) throw InvalidArgument("integrate_energy: need at least 2 samples");
  trace.validate();
  double joules = 0.0;
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    const auto& a = trace.samples[i - 1];
    const auto& b = trace.samples[i];
    joules += 0.5 * (a.watts + b.watts) * (b.t_s - a.t_s);
  }
  return joules / 3600.0;
}

double e_per_1k(double total_wh, std::size_t n_queries) {
  if (n_queries == 0) throw InvalidArgument("e_per_1k: zero queries");
  return total_wh * 1000.0 / static_cast<double>(n_queries);
}

EnergyReport make_energy_report(const PowerTrace& trace, std::size_t n_queries,
                                std::optional<double> baseline_watts) {
  EnergyReport r;
  r.duration_s = trace.duration_s();
  r.total_wh = integrate_energy(trace);
  if (baseline_watts) {
    if (!(*baseline_watts >= 0.0)) throw InvalidArgument("baseline power must be >= 0");
    r.total_wh -= *baseline_watts * r.duration_s / 3600.0;
    r.baseline_watts = baseline_watts;
  }
  r.n_queries = n_queries;
  r.e_per_1k = e_per_1k(r.total_wh, n_queries);
  r.mean_watts = r.total_wh * 3600.0 / r.duration_s;
  r.gap_count = trace.gaps.size();
  return r;
}

std::string energy_report_to_json(const EnergyReport& r, int indent) {
  nlohmann::json j = {{"total_wh", r.total_wh},   {"mean_watts", r.mean_watts},
                      {"duration_s", r.duration_s}, {"n_queries", r.n_queries},
                      {"e_per_1k", r.e_per_1k},   {"gap_count", r.gap_count}};
  j["baseline_watts"] = r.baseline_watts ? nlohmann::json(*r.baseline_watts) : nlohmann::json();
  if (!r.label.empty()) j["label"] = r.label;
  return j.dump(indent);
}

EnergyReport energy_report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EnergyReport r;
    r.total_wh = j.at("total_wh").get<double>();
    r.mean_watts = j.at("mean_watts").get<double>();
    r.duration_s = j.at("duration_s").get<double>();
    r.n_queries = j.at("n_queries").get<std::size_t>();
    r.e_per_1k = j.at("e_per_1k").get<double>();
    r.gap_count = j.value("gap_count", std::size_t{0});
    if (j.contains("baseline_watts") && !j["baseline_watts"].is_null()) {
      r.baseline_watts = j["baseline_watts"].get<double>();
    }
    r.label = j.value("label", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("energy report: ") + e.what());
  }
}

}  // namespace xlg
