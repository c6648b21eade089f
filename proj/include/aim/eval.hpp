// Scoring a track against ground truth: nearest-timestamp alignment, per-step 3-D error,
// per-regime breakdown and an empirical CDF.
#pragma once

#include "aim/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace aim {

enum class Regime { LoS, PLoS, NLoS };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::LoS: return "LoS";
    case Regime::PLoS: return "PLoS";
    case Regime::NLoS: return "NLoS";
  }
  return "?";
}

/// Every array in view, some, or none. With no LoS flags the step counts as LoS.
inline Regime regime_of(const std::vector<char>& los) {
  auto seen = std::count(los.begin(), los.end(), 1);
  if (seen == static_cast<long>(los.size())) return Regime::LoS;
  return seen == 0 ? Regime::NLoS : Regime::PLoS;
}

struct StepError {
  double t = 0.0;
  double error = 0.0;  // m
  Regime regime = Regime::LoS;
};

struct RegimeStats {
  std::size_t steps = 0;
  double mean = 0.0;
};

struct RunReport {
  std::vector<StepError> steps;
  double mean = 0.0;
  double median = 0.0;
  double p90 = 0.0;
  std::vector<std::pair<double, double>> cdf;  // (error, fraction of steps <= error)
  std::map<std::string, RegimeStats> regimes;
  double runtime = 0.0;  // s, pipeline wall time when known
};

/// Pairs each track row with the truth row nearest in time (within max_gap). Throws
/// InvalidInput when nothing overlaps.
inline RunReport evaluate(const std::vector<PositionSample>& track, std::vector<PositionSample> truth,
                          double max_gap) {
  std::sort(truth.begin(), truth.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  RunReport rep;
  for (const auto& row : track) {
    auto it = std::lower_bound(truth.begin(), truth.end(), row.t, [](const auto& s, double t) { return s.t < t; });
    const PositionSample* best = nullptr;
    if (it != truth.end()) best = &*it;
    if (it != truth.begin() && (!best || row.t - std::prev(it)->t < best->t - row.t)) best = &*std::prev(it);
    if (!best || std::abs(best->t - row.t) > max_gap + 1e-9) continue;
    rep.steps.push_back({row.t, (row.position - best->position).norm(), regime_of(best->los)});
  }
  if (rep.steps.empty()) fail(ErrorCode::InvalidInput, "track and truth do not overlap in time");

  std::vector<double> e;
  for (const auto& s : rep.steps) e.push_back(s.error);
  double sum = 0.0;
  for (double v : e) sum += v;
  rep.mean = sum / static_cast<double>(e.size());
  std::sort(e.begin(), e.end());
  auto pick = [&](double q) { return e[std::min(e.size() - 1, static_cast<std::size_t>(q * static_cast<double>(e.size())))]; };
  rep.median = pick(0.5);
  rep.p90 = pick(0.9);
  for (std::size_t i = 0; i < e.size(); ++i)
    rep.cdf.emplace_back(e[i], static_cast<double>(i + 1) / static_cast<double>(e.size()));

  for (const auto& s : rep.steps) {
    auto& r = rep.regimes[to_string(s.regime)];
    ++r.steps;
    r.mean += s.error;
  }
  for (auto& [name, r] : rep.regimes) r.mean /= static_cast<double>(r.steps);
  return rep;
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["mean_error_m"] = r.mean;
  j["median_error_m"] = r.median;
  j["p90_error_m"] = r.p90;
  j["steps"] = r.steps.size();
  j["runtime_s"] = r.runtime;
  j["regimes"] = nlohmann::json::object();
  for (const auto& [name, s] : r.regimes) j["regimes"][name] = {{"steps", s.steps}, {"mean_error_m", s.mean}};
  auto& per = j["per_step"] = nlohmann::json::array();
  for (const auto& s : r.steps) per.push_back({{"t", s.t}, {"error_m", s.error}, {"regime", to_string(s.regime)}});
  return j;
}

inline std::string cdf_csv(const RunReport& r) {
  std::string s = "error_m,cdf\n";
  for (const auto& [e, f] : r.cdf) s += detail::fmt(e) + ',' + detail::fmt(f) + '\n';
  return s;
}

}  // namespace aim
