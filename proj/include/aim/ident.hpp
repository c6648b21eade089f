// Drone structure identification: one band-pass filter per known profile, time-averaged MFCC of
// each filtered signal, and a pluggable scorer (cosine similarity to a stored centroid).
#pragma once

#include "aim/fft.hpp"
#include "aim/profile.hpp"
#include "aim/scenario.hpp"
#include "aim/spectral.hpp"
#include "aim/synth.hpp"

#include <nlohmann/json.hpp>
#include <sodium.h>

#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace aim {

struct ProfileEntry {
  DroneProfile profile;
  double band_low = 0.0;   // Hz
  double band_high = 0.0;  // Hz
  Eigen::VectorXd centroid;  // unit-norm mean MFCC
};

struct ProfileDatabase {
  std::vector<ProfileEntry> entries;
  std::uint64_t corpus_seed = 1;
  // Band = [lower, upper] * hover BPF. Wide enough for the rotor-frequency swing of ordinary
  // climbs and accelerations (about 0.89 to 1.20 of hover), narrow enough to miss neighbours.
  double band_lower = 0.88;
  double band_upper = 1.22;
};

inline std::pair<double, double> profile_band(const DroneProfile& p, double lower = 0.88, double upper = 1.22) {
  return {p.hover_bpf() * lower, p.hover_bpf() * upper};
}

/// Zero-phase brick-wall band-pass via one FFT over the whole signal.
inline std::vector<double> bandpass(const std::vector<double>& x, double fs, double low, double high) {
  require(low < high, "band-pass needs low < high");
  if (x.empty()) return {};
  std::size_t nfft = fft::next_pow2(x.size());
  auto X = fft::rfft(x, nfft);
  for (std::size_t k = 0; k < X.size(); ++k) {
    double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    if (f < low || f > high) X[k] = 0.0;
  }
  auto y = fft::irfft(X, nfft);
  y.resize(x.size());
  return y;
}

inline std::vector<std::vector<double>> bandpass_bank(const std::vector<double>& x, double fs,
                                                      const ProfileDatabase& db) {
  require(!db.entries.empty(), "profile database is empty");
  std::vector<std::vector<double>> out;
  out.reserve(db.entries.size());
  for (const auto& e : db.entries) out.push_back(bandpass(x, fs, e.band_low, e.band_high));
  return out;
}

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

/// Unit-norm time-averaged MFCC.
inline Eigen::VectorXd mfcc_signature(const std::vector<double>& x, double fs) { return mean_mfcc(mfcc(x, fs)); }

/// Scores a feature vector against one database entry; higher is more similar.
using Scorer = std::function<double(const Eigen::VectorXd&, const ProfileEntry&)>;

inline double cosine_similarity(const Eigen::VectorXd& f, const ProfileEntry& e) {
  if (f.size() != e.centroid.size()) return -1.0;
  double n = f.norm() * e.centroid.norm();
  return n > 0 ? f.dot(e.centroid) / n : -1.0;
}

struct ProfileScore {
  std::size_t index = 0;
  double similarity = -1.0;
  double energy_fraction = 0.0;  // in-band energy over the whole clip
  bool eligible = false;         // passed the energy gates
};

struct Identification {
  std::size_t index = 0;
  const DroneProfile* profile = nullptr;
  double confidence = 0.0;
  std::vector<ProfileScore> scores;
};

struct IdentOptions {
  double similarity_floor = 0.8;
  double energy_floor = 0.05;     // minimum in-band share of the clip energy
  double dominance = 0.5;         // minimum in-band energy relative to the strongest band; keeps
                                  // another drone's harmonic from winning over its fundamental
  double min_duration = 1.0;      // s
};

/// Per-profile scores of a mono clip.
inline std::vector<ProfileScore> score_profiles(const std::vector<double>& x, double fs, const ProfileDatabase& db,
                                                const IdentOptions& opt = {},
                                                const Scorer& scorer = cosine_similarity) {
  auto bank = bandpass_bank(x, fs, db);
  double total = energy(x);
  std::vector<ProfileScore> scores(db.entries.size());
  double strongest = 0.0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    scores[i].index = i;
    double e = energy(bank[i]);
    scores[i].energy_fraction = total > 0 ? e / total : 0.0;
    strongest = std::max(strongest, e);
    if (e > 0) scores[i].similarity = scorer(mfcc_signature(bank[i], fs), db.entries[i]);
  }
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double e = scores[i].energy_fraction * total;
    scores[i].eligible = scores[i].energy_fraction >= opt.energy_floor && e >= opt.dominance * strongest;
  }
  return scores;
}

/// Best eligible profile by similarity (ties keep database order). Unknown below the floor.
inline Identification identify(const std::vector<double>& x, double fs, const ProfileDatabase& db,
                               const IdentOptions& opt = {}, const Scorer& scorer = cosine_similarity) {
  if (static_cast<double>(x.size()) < opt.min_duration * fs - 0.5)
    fail(ErrorCode::InvalidInput, "identification needs at least " + std::to_string(opt.min_duration) + " s of audio");
  Identification id;
  id.scores = score_profiles(x, fs, db, opt, scorer);
  double best = -2.0;
  for (const auto& s : id.scores)
    if (s.eligible && s.similarity > best) {
      best = s.similarity;
      id.index = s.index;
    }
  if (best < opt.similarity_floor) fail(ErrorCode::Unknown, "no known drone matches this clip");
  id.profile = &db.entries[id.index].profile;
  id.confidence = best;
  return id;
}

/// Channel mean of the first `seconds` of a recording.
inline std::vector<double> mono_clip(const Recording& rec, double seconds) {
  auto n = std::min(rec.samples(), static_cast<std::size_t>(std::lround(seconds * rec.sample_rate)));
  std::vector<double> x(n, 0.0);
  for (const auto& ch : rec.channels)
    for (std::size_t i = 0; i < n; ++i) x[i] += ch[i];
  for (auto& v : x) v /= static_cast<double>(rec.channels.size());
  return x;
}

// ---------------------------------------------------------------------------------------------
// Corpus and centroids

/// One clean single-motion clip of a profile, 1.5 s, drone 3 m from a 6-element array.
inline Scenario corpus_scenario(const DroneProfile& p, MotionKind kind, std::uint64_t seed) {
  Scenario s;
  s.name = p.name + "_" + to_string(kind);
  s.seed = seed;
  s.profile = p;
  double magnitude = kind == MotionKind::Yaw ? 0.8 : kind == MotionKind::Horizontal ? 1.5 : kind == MotionKind::Vertical ? 1.0 : 0.0;
  s.segments = {{kind, 1.5, magnitude, 0.0}};
  s.start_position = Vec3(2.0, 2.0, 1.5);
  s.arrays = {six_mic_array("A", Vec3::Zero())};
  return s;
}

inline std::vector<double> corpus_clip(const DroneProfile& p, MotionKind kind, std::uint64_t seed) {
  auto sc = corpus_scenario(p, kind, seed);
  auto rec = synthesize(plan_flight(sc), sc).front();
  return mono_clip(rec, 1.5);
}

constexpr MotionKind kAllMotions[] = {MotionKind::Hover, MotionKind::Yaw, MotionKind::Horizontal, MotionKind::Vertical};

/// Centroids from the simulator corpus: every motion, `seeds` seeds from `corpus_seed` upward.
inline ProfileDatabase build_database(const std::vector<DroneProfile>& profiles, std::uint64_t corpus_seed = 1,
                                      int seeds = 2, double lower = 0.88, double upper = 1.22) {
  ProfileDatabase db;
  db.corpus_seed = corpus_seed;
  db.band_lower = lower;
  db.band_upper = upper;
  for (const auto& p : profiles) {
    ProfileEntry e;
    e.profile = p;
    std::tie(e.band_low, e.band_high) = profile_band(p, lower, upper);
    Eigen::VectorXd sum;
    for (MotionKind kind : kAllMotions)
      for (int k = 0; k < seeds; ++k) {
        auto clip = corpus_clip(p, kind, corpus_seed + static_cast<std::uint64_t>(k));
        auto sig = mfcc_signature(bandpass(clip, 48000.0, e.band_low, e.band_high), 48000.0);
        sum = sum.size() ? Eigen::VectorXd(sum + sig) : sig;
      }
    e.centroid = sum.normalized();
    db.entries.push_back(std::move(e));
  }
  return db;
}

// ---------------------------------------------------------------------------------------------
// JSON with base64 centroids (little-endian float64)

inline std::string encode_vector(const Eigen::VectorXd& v) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(v.size()) * sizeof(double));
  std::memcpy(bytes.data(), v.data(), bytes.size());
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

inline Eigen::VectorXd decode_vector(const std::string& b64) {
  std::vector<unsigned char> bytes(b64.size());
  std::size_t len = 0;
  if (sodium_base642bin(bytes.data(), bytes.size(), b64.c_str(), b64.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      len % sizeof(double) != 0)
    fail(ErrorCode::InvalidInput, "malformed base64 centroid");
  Eigen::VectorXd v(static_cast<Eigen::Index>(len / sizeof(double)));
  std::memcpy(v.data(), bytes.data(), len);
  return v;
}

inline nlohmann::json database_to_json(const ProfileDatabase& db) {
  nlohmann::json j;
  j["corpus_seed"] = db.corpus_seed;
  j["band_lower"] = db.band_lower;
  j["band_upper"] = db.band_upper;
  j["profiles"] = nlohmann::json::array();
  for (const auto& e : db.entries)
    j["profiles"].push_back({{"profile", e.profile},
                             {"band", {e.band_low, e.band_high}},
                             {"centroid_dims", e.centroid.size()},
                             {"centroid", encode_vector(e.centroid)}});
  return j;
}

inline ProfileDatabase database_from_json(const nlohmann::json& j) {
  ProfileDatabase db;
  try {
    db.corpus_seed = j.value("corpus_seed", std::uint64_t{1});
    db.band_lower = j.value("band_lower", 0.88);
    db.band_upper = j.value("band_upper", 1.22);
    for (const auto& p : j.at("profiles")) {
      ProfileEntry e;
      e.profile = p.at("profile").get<DroneProfile>();
      e.band_low = p.at("band").at(0).get<double>();
      e.band_high = p.at("band").at(1).get<double>();
      e.centroid = decode_vector(p.at("centroid").get<std::string>());
      if (e.centroid.size() != p.at("centroid_dims").get<Eigen::Index>())
        fail(ErrorCode::InvalidInput, "centroid length does not match centroid_dims for " + e.profile.name);
      if (!(e.band_low < e.band_high)) fail(ErrorCode::InvalidInput, "empty band for " + e.profile.name);
      db.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::InvalidInput, std::string("profile database: ") + ex.what());
  }
  if (db.entries.empty()) fail(ErrorCode::InvalidInput, "profile database has no profiles");
  return db;
}

inline ProfileDatabase load_database(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open profile database " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::InvalidInput, path + ": " + ex.what());
  }
  return database_from_json(j);
}

}  // namespace aim
