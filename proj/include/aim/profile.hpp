// Drone structure profiles: physical constants and rotor grouping per basic motion.
#pragma once

#include "aim/core.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace aim {

enum class Structure { Quad, Hexa, Octo, Y6 };
enum class MotionKind { Hover, Yaw, Horizontal, Vertical };

inline const char* to_string(Structure s) {
  switch (s) {
    case Structure::Quad: return "Quad";
    case Structure::Hexa: return "Hexa";
    case Structure::Octo: return "Octo";
    case Structure::Y6: return "Y6";
  }
  return "?";
}

inline const char* to_string(MotionKind k) {
  switch (k) {
    case MotionKind::Hover: return "hover";
    case MotionKind::Yaw: return "yaw";
    case MotionKind::Horizontal: return "horizontal";
    case MotionKind::Vertical: return "vertical";
  }
  return "?";
}

inline Structure structure_from_string(const std::string& s) {
  if (s == "Quad") return Structure::Quad;
  if (s == "Hexa") return Structure::Hexa;
  if (s == "Octo") return Structure::Octo;
  if (s == "Y6") return Structure::Y6;
  fail(ErrorCode::InvalidInput, "unknown structure '" + s + "'");
}

inline MotionKind motion_from_string(const std::string& s) {
  if (s == "hover") return MotionKind::Hover;
  if (s == "yaw") return MotionKind::Yaw;
  if (s == "horizontal") return MotionKind::Horizontal;
  if (s == "vertical") return MotionKind::Vertical;
  fail(ErrorCode::InvalidInput, "unknown motion kind '" + s + "'");
}

/// Two rotor groups (0-based rotor indices) that share a frequency during a motion.
struct RotorPartition {
  std::vector<int> first;
  std::vector<int> second;
};

struct DroneProfile {
  std::string name;
  Structure structure = Structure::Quad;
  int rotor_count = 4;
  int blade_count = 2;
  double mass = 0.249;         // kg
  double lift_coeff = 0.0;     // N s^2, thrust per rotor = k_v f^2
  double drag_coeff = 0.0;     // N m s^2, reaction torque per rotor = k_h f^2
  double inertia = 1e-3;       // kg m^2 about the yaw axis
  double drag_h = 0.5;         // N s^2 / m^2
  double drag_v = 0.6;         // N s^2 / m^2
  double hover_freq = 164.0;   // Hz, per-motor rotation frequency
  double spl_1m = 77.0;        // dB SPL at 1 m while hovering
  double pitch_split = 0.025;  // fractional frequency offset between pitch groups
  double max_freq_ratio = 1.6; // motor limit relative to hover_freq
  RotorPartition yaw_groups;
  RotorPartition pitch_groups;

  double hover_bpf() const { return hover_freq * blade_count; }
  double weight() const { return mass * kGravity; }

  const RotorPartition& groups(MotionKind kind) const {
    require(kind == MotionKind::Yaw || kind == MotionKind::Horizontal,
            "rotor groups exist only for yaw and horizontal motion");
    return kind == MotionKind::Yaw ? yaw_groups : pitch_groups;
  }
};

/// Rotor groups from the per-structure tables (0-based).
/// Hexa and Octo pitch use front/back halves so that exactly two frequency families appear.
inline std::pair<RotorPartition, RotorPartition> default_groups(Structure s) {
  switch (s) {
    case Structure::Quad: return {{{0, 2}, {1, 3}}, {{0, 1}, {2, 3}}};
    case Structure::Hexa: return {{{0, 2, 4}, {1, 3, 5}}, {{0, 1, 2, 5}, {3, 4}}};
    case Structure::Octo: return {{{0, 2, 4, 6}, {1, 3, 5, 7}}, {{0, 1, 2, 7}, {3, 4, 5, 6}}};
    case Structure::Y6: return {{{0, 2, 4}, {1, 3, 5}}, {{2, 3, 4, 5}, {0, 1}}};
  }
  return {};
}

inline int rotors_for(Structure s) {
  switch (s) {
    case Structure::Quad: return 4;
    case Structure::Hexa: return 6;
    case Structure::Octo: return 8;
    case Structure::Y6: return 6;
  }
  return 0;
}

/// Checks the profile invariants; throws InvalidInput with a diagnostic.
inline void validate(const DroneProfile& p) {
  auto bad = [&](const std::string& m) { fail(ErrorCode::InvalidInput, "profile '" + p.name + "': " + m); };
  if (p.rotor_count != rotors_for(p.structure)) bad("rotor_count does not match structure");
  if (p.blade_count < 2) bad("blade_count must be >= 2");
  if (p.mass <= 0 || p.lift_coeff <= 0 || p.drag_coeff <= 0 || p.inertia <= 0) bad("non-positive constant");
  double hover_thrust = p.rotor_count * p.lift_coeff * p.hover_freq * p.hover_freq;
  if (std::abs(hover_thrust - p.weight()) > 0.01 * p.weight()) bad("hover thrust does not balance weight within 1%");
  for (const auto* part : {&p.yaw_groups, &p.pitch_groups}) {
    std::vector<int> seen(p.rotor_count, 0);
    if (part->first.empty() || part->second.empty()) bad("empty rotor group");
    for (int i : part->first) {
      if (i < 0 || i >= p.rotor_count) bad("rotor index out of range");
      ++seen[i];
    }
    for (int i : part->second) {
      if (i < 0 || i >= p.rotor_count) bad("rotor index out of range");
      ++seen[i];
    }
    for (int c : seen)
      if (c != 1) bad("rotor groups must partition all rotors");
  }
}

/// Builds a self-consistent profile: the lift coefficient comes from the hover balance and
/// the drag coefficient is set so that a 0.8 rad/s^2 yaw needs a 5% thrust-square differential.
inline DroneProfile make_profile(std::string name, Structure s, int blades, double mass, double hover_freq,
                                 double spl_1m, double inertia) {
  DroneProfile p;
  p.name = std::move(name);
  p.structure = s;
  p.rotor_count = rotors_for(s);
  p.blade_count = blades;
  p.mass = mass;
  p.hover_freq = hover_freq;
  p.spl_1m = spl_1m;
  p.inertia = inertia;
  p.lift_coeff = p.weight() / (p.rotor_count * hover_freq * hover_freq);
  double sum_sq_hover = p.weight() / p.lift_coeff;
  p.drag_coeff = inertia * 0.8 / (0.05 * sum_sq_hover);
  // Drag constants scale with mass so every default profile reaches similar tilt and climb margins.
  p.drag_h = 0.5 * mass / 0.249;
  p.drag_v = 0.6 * mass / 0.249;
  std::tie(p.yaw_groups, p.pitch_groups) = default_groups(s);
  return p;
}

/// 249 g two-blade quadcopter hovering at 164 Hz (BPF about 328 Hz).
inline DroneProfile mini2_profile() {
  return make_profile("mini2", Structure::Quad, 2, 0.249, 164.0, 77.0, 1.0e-3);
}
/// Three-blade quadcopter at 185 Hz, BPF about 555 Hz.
inline DroneProfile fpv_profile() { return make_profile("fpv", Structure::Quad, 3, 0.795, 185.0, 85.0, 4.0e-3); }
/// Five-blade ducted quadcopter at 300 Hz, BPF about 1500 Hz.
inline DroneProfile avata_profile() { return make_profile("avata", Structure::Quad, 5, 0.41, 300.0, 80.0, 1.5e-3); }
/// Heavy-lift hexacopter at 120 Hz, BPF about 240 Hz.
inline DroneProfile hexa_profile() { return make_profile("hexa", Structure::Hexa, 2, 2.0, 120.0, 82.0, 2.5e-2); }

inline std::vector<DroneProfile> default_profiles() {
  return {mini2_profile(), fpv_profile(), avata_profile(), hexa_profile()};
}

// ---------------------------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const RotorPartition& g) { j = nlohmann::json::array({g.first, g.second}); }

inline void from_json(const nlohmann::json& j, RotorPartition& g) {
  if (!j.is_array() || j.size() != 2) fail(ErrorCode::InvalidInput, "rotor partition must hold two groups");
  g.first = j[0].get<std::vector<int>>();
  g.second = j[1].get<std::vector<int>>();
}

inline void to_json(nlohmann::json& j, const DroneProfile& p) {
  j = {{"name", p.name},
       {"structure", to_string(p.structure)},
       {"rotor_count", p.rotor_count},
       {"blade_count", p.blade_count},
       {"mass", p.mass},
       {"lift_coeff", p.lift_coeff},
       {"drag_coeff", p.drag_coeff},
       {"inertia", p.inertia},
       {"drag_h", p.drag_h},
       {"drag_v", p.drag_v},
       {"hover_freq", p.hover_freq},
       {"spl_1m", p.spl_1m},
       {"pitch_split", p.pitch_split},
       {"max_freq_ratio", p.max_freq_ratio},
       {"motion_groups", {{"yaw", p.yaw_groups}, {"horizontal", p.pitch_groups}}}};
}

inline void from_json(const nlohmann::json& j, DroneProfile& p) {
  p.name = j.at("name").get<std::string>();
  p.structure = structure_from_string(j.at("structure").get<std::string>());
  p.rotor_count = j.value("rotor_count", rotors_for(p.structure));
  p.blade_count = j.at("blade_count").get<int>();
  p.mass = j.at("mass").get<double>();
  p.hover_freq = j.at("hover_freq").get<double>();
  p.lift_coeff = j.value("lift_coeff", p.weight() / (p.rotor_count * p.hover_freq * p.hover_freq));
  p.inertia = j.at("inertia").get<double>();
  p.drag_coeff = j.at("drag_coeff").get<double>();
  p.drag_h = j.at("drag_h").get<double>();
  p.drag_v = j.at("drag_v").get<double>();
  p.spl_1m = j.at("spl_1m").get<double>();
  p.pitch_split = j.value("pitch_split", 0.025);
  p.max_freq_ratio = j.value("max_freq_ratio", 1.6);
  auto defaults = default_groups(p.structure);
  if (j.contains("motion_groups")) {
    const auto& mg = j.at("motion_groups");
    p.yaw_groups = mg.contains("yaw") ? mg.at("yaw").get<RotorPartition>() : defaults.first;
    p.pitch_groups = mg.contains("horizontal") ? mg.at("horizontal").get<RotorPartition>() : defaults.second;
  } else {
    std::tie(p.yaw_groups, p.pitch_groups) = defaults;
  }
  validate(p);
}

}  // namespace aim
