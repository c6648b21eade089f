// Tunable thresholds and filter scales for the tracking pipeline.
#pragma once

#include "aim/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

namespace aim {

struct PipelineConfig {
  double hop = 0.1;                  // s between location updates
  std::size_t spectral_window = 8192;
  std::size_t doa_window = 4096;
  std::size_t doa_history = 10;      // W
  double theta_nlos = 0.03;          // rad^2, azimuth variance above which LoS is considered blocked
  double theta_motion = 6e-4;        // rad^2, azimuth/elevation variance bound for a stable DoA
  double merge_hz = 4.0;
  double fc = 0.5;                   // Hz, complementary filter cutoff
  double fusion_window = 2.0;        // s
  double process_floor = 0.05;       // m, process noise std per step
  double q_scale = 0.15;             // relative displacement uncertainty
  double r_scale = 1.0;              // multiplier on the projected DoA covariance
  double doa_sigma = 0.035;          // rad, angular std used to project R
  double height_sigma = 2.0;         // m, measurement std along z (height is not observed by one array)
  double horizon_guard = 3.0;        // deg, elevation below which a single-array fix is suppressed
  double gate_chi2 = 16.27;          // innovation gate, chi-square with 3 dof at 99.9%
  int reacquire_hops = 10;           // gated fixes in forward flight before the track restarts on them
  double select_variance = 0.03;     // rad^2, DoA variance below which an array is a candidate
  double similarity_floor = 0.8;     // identification floor
  double energy_floor = 0.05;        // minimum in-band energy fraction for identification
  std::optional<double> initial_height;   // m; defaults to the scenario start height
  std::optional<double> initial_heading;  // rad; defaults to the scenario start yaw
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"hop", c.hop},
       {"spectral_window", c.spectral_window},
       {"doa_window", c.doa_window},
       {"doa_history", c.doa_history},
       {"theta_nlos", c.theta_nlos},
       {"theta_motion", c.theta_motion},
       {"merge_hz", c.merge_hz},
       {"fc", c.fc},
       {"fusion_window", c.fusion_window},
       {"process_floor", c.process_floor},
       {"q_scale", c.q_scale},
       {"r_scale", c.r_scale},
       {"doa_sigma", c.doa_sigma},
       {"height_sigma", c.height_sigma},
       {"horizon_guard", c.horizon_guard},
       {"gate_chi2", c.gate_chi2},
       {"reacquire_hops", c.reacquire_hops},
       {"select_variance", c.select_variance},
       {"similarity_floor", c.similarity_floor},
       {"energy_floor", c.energy_floor}};
  if (c.initial_height) j["initial_height"] = *c.initial_height;
  if (c.initial_heading) j["initial_heading"] = *c.initial_heading;
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("hop", c.hop);
  get("spectral_window", c.spectral_window);
  get("doa_window", c.doa_window);
  get("doa_history", c.doa_history);
  get("theta_nlos", c.theta_nlos);
  get("theta_motion", c.theta_motion);
  get("merge_hz", c.merge_hz);
  get("fc", c.fc);
  get("fusion_window", c.fusion_window);
  get("process_floor", c.process_floor);
  get("q_scale", c.q_scale);
  get("r_scale", c.r_scale);
  get("doa_sigma", c.doa_sigma);
  get("height_sigma", c.height_sigma);
  get("horizon_guard", c.horizon_guard);
  get("gate_chi2", c.gate_chi2);
  get("reacquire_hops", c.reacquire_hops);
  get("select_variance", c.select_variance);
  get("similarity_floor", c.similarity_floor);
  get("energy_floor", c.energy_floor);
  if (j.contains("initial_height")) c.initial_height = j.at("initial_height").get<double>();
  if (j.contains("initial_heading")) c.initial_heading = j.at("initial_heading").get<double>();
}

/// Reads a config file; an empty path falls back to $AIM_CONFIG, then to the defaults.
inline PipelineConfig load_config(const std::string& path = {}) {
  std::string p = path;
  if (p.empty())
    if (const char* env = std::getenv("AIM_CONFIG")) p = env;
  PipelineConfig c;
  if (p.empty()) return c;
  std::ifstream in(p);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open config file " + p);
  try {
    c = nlohmann::json::parse(in).get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, p + ": " + e.what());
  }
  return c;
}

}  // namespace aim
