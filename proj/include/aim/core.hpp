// Common types, physical constants and error types shared by every module.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace aim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kGravity = 9.81;        // m/s^2
inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kRefPressure = 20e-6;   // Pa, 0 dB SPL

enum class ErrorCode {
  InvalidInput,
  NoSignal,
  InfeasibleTilt,
  NotReady,
  SolveFailed,
  NoMeasurement,
  StaleSync,
  Unknown,
  ContractViolation,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NoSignal: return "NoSignal";
    case ErrorCode::InfeasibleTilt: return "InfeasibleTilt";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::NoMeasurement: return "NoMeasurement";
    case ErrorCode::StaleSync: return "StaleSync";
    case ErrorCode::Unknown: return "Unknown";
    case ErrorCode::ContractViolation: return "ContractViolation";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::ContractViolation, what);
}

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// RMS pressure in pascals for a sound pressure level in dB.
inline double spl_to_pa(double db) { return kRefPressure * std::pow(10.0, db / 20.0); }
inline double pa_to_spl(double pa) { return 20.0 * std::log10(pa / kRefPressure); }

/// Unit vector for an azimuth (from +x, counter-clockwise) and elevation above the xy plane.
inline Vec3 direction_from_angles(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

}  // namespace aim
