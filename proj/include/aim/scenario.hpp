// Scripted flight scenarios and their JSON schema.
#pragma once

#include "aim/core.hpp"
#include "aim/geometry.hpp"
#include "aim/profile.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aim {

struct Segment {
  MotionKind kind = MotionKind::Hover;
  double duration = 1.0;
  // Horizontal: target speed (m/s). Vertical: signed target speed, + climbs.
  // Yaw: signed angular acceleration (rad/s^2) held for the first half, reversed for the second.
  double magnitude = 0.0;
  double direction = 0.0;  // horizontal travel direction relative to the body heading, rad
};

struct NoiseSource {
  Vec3 position = Vec3::Zero();
  double center_freq = 300.0;
  double bandwidth = 100.0;
  double spl = 50.0;  // dB at 1 m
};

struct BeaconConfig {
  bool enabled = false;
  double low = 16000.0;
  double high = 20000.0;
  double period = 1.0;
  double length = 0.1;
  double spl = 60.0;  // dB at 1 m
  double first_emission = 0.05;
  Vec3 speaker = Vec3::Zero();
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  DroneProfile profile = mini2_profile();
  std::vector<Segment> segments;
  Vec3 start_position = Vec3(0, 0, 2);
  double start_yaw = 0.0;
  std::vector<ArrayGeometry> arrays;
  std::vector<Box> obstacles;
  std::vector<NoiseSource> noise_sources;
  BeaconConfig beacon;
  double sample_rate = 48000.0;
  double noise_floor_db = 40.0;    // white sensor noise, dB SPL
  int harmonics = 5;
  double harmonic_decay = 0.6;
  double nlos_attenuation = 0.3;   // amplitude factor of the reflected path
  double nlos_jitter = 1.2;        // image-point jitter std, m per m/s of drone speed
  double sim_step = 1e-3;
  double hop = 0.1;
  double ramp_accel = 2.0;         // m/s^2 used to reach and leave commanded speeds
  double ramp_time = 0.05;         // linear rotor-frequency ramp at segment joins

  double duration() const {
    double d = 0.0;
    for (const auto& s : segments) d += s.duration;
    return d;
  }

  double highest_frequency() const {
    double f = harmonics * profile.hover_bpf() * profile.max_freq_ratio;
    for (const auto& n : noise_sources) f = std::max(f, n.center_freq + 0.5 * n.bandwidth);
    if (beacon.enabled) f = std::max(f, beacon.high);
    return f;
  }
};

inline void validate(const Scenario& s) {
  validate(s.profile);
  if (s.segments.empty()) fail(ErrorCode::InvalidInput, "segments must be non-empty");
  for (std::size_t i = 0; i < s.segments.size(); ++i)
    if (!(s.segments[i].duration > 0.0))
      fail(ErrorCode::InvalidInput, "segments[" + std::to_string(i) + "].duration must be > 0");
  if (s.sample_rate < 2.0 * s.highest_frequency())
    fail(ErrorCode::InvalidInput, "sample_rate below twice the highest synthesized frequency");
  if (s.arrays.empty()) fail(ErrorCode::InvalidInput, "at least one array is required");
  for (const auto& a : s.arrays) {
    validate(a);
    if (std::abs(wrap_angle(a.orientation - s.arrays.front().orientation)) > 1e-9)
      fail(ErrorCode::InvalidInput, "all arrays must share one orientation");
  }
  if (s.hop <= 0 || s.sim_step <= 0 || s.sim_step > s.hop) fail(ErrorCode::InvalidInput, "bad time steps");
}

// ---------------------------------------------------------------------------------------------
// JSON

namespace detail {

inline Vec3 vec3(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::InvalidInput, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

/// 1-based line of the first occurrence of `"key"` at or after `from`, best effort.
inline int line_of_key(const std::string& text, const std::string& key, std::size_t from = 0) {
  auto pos = text.find("\"" + key + "\"", from);
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

}  // namespace detail

inline nlohmann::json array_to_json(const ArrayGeometry& a) {
  nlohmann::json el = nlohmann::json::array();
  for (const auto& o : a.element_offsets) el.push_back({o.x(), o.y()});
  return {{"id", a.id},
          {"origin", detail::vec3(a.origin)},
          {"elements", el},
          {"orientation", a.orientation},
          {"clock_offset", a.clock_offset}};
}

inline ArrayGeometry array_from_json(const nlohmann::json& j) {
  ArrayGeometry a;
  a.id = j.at("id").get<std::string>();
  a.origin = detail::vec3(j.at("origin"));
  a.orientation = j.value("orientation", 0.0);
  a.clock_offset = j.value("clock_offset", 0.0);
  if (j.contains("elements")) {
    for (const auto& e : j.at("elements")) a.element_offsets.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  } else {
    std::string layout = j.value("layout", "respeaker6");
    ArrayGeometry t = layout == "respeaker4" ? four_mic_array(a.id, a.origin) : six_mic_array(a.id, a.origin);
    a.element_offsets = t.element_offsets;
    if (layout != "respeaker4" && layout != "respeaker6")
      fail(ErrorCode::InvalidInput, "unknown array layout '" + layout + "'");
  }
  return a;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& g : s.segments)
    segs.push_back({{"kind", to_string(g.kind)}, {"duration", g.duration}, {"magnitude", g.magnitude},
                    {"direction", g.direction}});
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& a : s.arrays) arrays.push_back(array_to_json(a));
  nlohmann::json obstacles = nlohmann::json::array();
  for (const auto& b : s.obstacles) obstacles.push_back({{"min", detail::vec3(b.lo)}, {"max", detail::vec3(b.hi)}});
  nlohmann::json noise = nlohmann::json::array();
  for (const auto& n : s.noise_sources)
    noise.push_back({{"position", detail::vec3(n.position)}, {"center_freq", n.center_freq},
                     {"bandwidth", n.bandwidth}, {"spl", n.spl}});
  nlohmann::json j = {{"name", s.name},
                      {"seed", s.seed},
                      {"profile", s.profile},
                      {"segments", segs},
                      {"start_position", detail::vec3(s.start_position)},
                      {"start_yaw", s.start_yaw},
                      {"arrays", arrays},
                      {"obstacles", obstacles},
                      {"noise_sources", noise},
                      {"sample_rate", s.sample_rate},
                      {"noise_floor_db", s.noise_floor_db},
                      {"harmonics", s.harmonics},
                      {"harmonic_decay", s.harmonic_decay},
                      {"nlos_attenuation", s.nlos_attenuation},
                      {"nlos_jitter", s.nlos_jitter},
                      {"hop", s.hop},
                      {"sim_step", s.sim_step},
                      {"ramp_accel", s.ramp_accel},
                      {"ramp_time", s.ramp_time}};
  if (s.beacon.enabled)
    j["beacon"] = {{"low", s.beacon.low},       {"high", s.beacon.high},
                   {"period", s.beacon.period}, {"length", s.beacon.length},
                   {"spl", s.beacon.spl},       {"first_emission", s.beacon.first_emission},
                   {"speaker", detail::vec3(s.beacon.speaker)}};
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("profile")) {
    const auto& p = j.at("profile");
    if (p.is_string()) {
      bool found = false;
      for (const auto& d : default_profiles())
        if (d.name == p.get<std::string>()) {
          s.profile = d;
          found = true;
        }
      if (!found) fail(ErrorCode::InvalidInput, "unknown profile '" + p.get<std::string>() + "'");
    } else {
      s.profile = p.get<DroneProfile>();
    }
  }
  for (const auto& g : j.at("segments")) {
    Segment seg;
    seg.kind = motion_from_string(g.at("kind").get<std::string>());
    seg.duration = g.at("duration").get<double>();
    seg.magnitude = g.value("magnitude", 0.0);
    seg.direction = g.value("direction", 0.0);
    s.segments.push_back(seg);
  }
  if (j.contains("start_position")) s.start_position = detail::vec3(j.at("start_position"));
  s.start_yaw = j.value("start_yaw", 0.0);
  for (const auto& a : j.at("arrays")) s.arrays.push_back(array_from_json(a));
  if (j.contains("obstacles"))
    for (const auto& b : j.at("obstacles")) s.obstacles.push_back({detail::vec3(b.at("min")), detail::vec3(b.at("max"))});
  if (j.contains("noise_sources"))
    for (const auto& n : j.at("noise_sources"))
      s.noise_sources.push_back({detail::vec3(n.at("position")), n.at("center_freq").get<double>(),
                                 n.value("bandwidth", 100.0), n.at("spl").get<double>()});
  if (j.contains("beacon")) {
    const auto& b = j.at("beacon");
    s.beacon.enabled = true;
    s.beacon.low = b.value("low", 16000.0);
    s.beacon.high = b.value("high", 20000.0);
    s.beacon.period = b.value("period", 1.0);
    s.beacon.length = b.value("length", 0.1);
    s.beacon.spl = b.value("spl", 60.0);
    s.beacon.first_emission = b.value("first_emission", 0.05);
    s.beacon.speaker = detail::vec3(b.at("speaker"));
  }
  s.sample_rate = j.value("sample_rate", 48000.0);
  s.noise_floor_db = j.value("noise_floor_db", 40.0);
  s.harmonics = j.value("harmonics", 5);
  s.harmonic_decay = j.value("harmonic_decay", 0.6);
  s.nlos_attenuation = j.value("nlos_attenuation", 0.3);
  s.nlos_jitter = j.value("nlos_jitter", 1.2);
  s.hop = j.value("hop", 0.1);
  s.sim_step = j.value("sim_step", 1e-3);
  s.ramp_accel = j.value("ramp_accel", 2.0);
  s.ramp_time = j.value("ramp_time", 0.05);
  return s;
}

/// Parses and validates a scenario document; errors carry "<source>:<line>: " anchors.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "scenario") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidInput, source + ": " + e.what());
  }
  auto anchored = [&](const std::string& msg) {
    // Anchor to the first key mentioned in the message, when one can be found.
    int line = 0;
    for (const char* key : {"segments", "duration", "arrays", "profile", "sample_rate", "beacon", "obstacles",
                            "noise_sources", "elements", "start_position"})
      if (msg.find(key) != std::string::npos) {
        line = detail::line_of_key(text, key);
        if (line) break;
      }
    return source + ":" + std::to_string(line) + ": " + msg;
  };
  try {
    Scenario s = scenario_from_json(j);
    validate(s);
    return s;
  } catch (const Error& e) {
    fail(ErrorCode::InvalidInput, anchored(e.what()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, anchored(e.what()));
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace aim
