// File formats: float32 multi-channel WAV, truth/track/fused CSVs, atomic writes.
#pragma once

#include "aim/flight.hpp"
#include "aim/synth.hpp"
#include "aim/tracker.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace aim {

namespace fs = std::filesystem;

/// Writes `content` to a temporary sibling and renames it over `path`, so readers never see a
/// half-written file.
inline void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::InvalidInput, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      fail(ErrorCode::InvalidInput, "short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------------------------
// WAV (IEEE float, little-endian host assumed)

namespace detail {

template <typename T>
void put(std::string& s, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  s.append(b, sizeof(T));
}

template <typename T>
T get(const std::string& s, std::size_t at) {
  T v;
  std::memcpy(&v, s.data() + at, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string encode_wav(const std::vector<std::vector<float>>& channels, double sample_rate) {
  require(!channels.empty(), "WAV needs at least one channel");
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels) require(c.size() == frames, "channels must have equal length");
  const auto data_bytes = static_cast<std::uint32_t>(frames * nch * sizeof(float));
  const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  detail::put<std::uint32_t>(s, 36 + data_bytes);
  s += "WAVEfmt ";
  detail::put<std::uint32_t>(s, 16);
  detail::put<std::uint16_t>(s, 3);  // IEEE float
  detail::put<std::uint16_t>(s, nch);
  detail::put<std::uint32_t>(s, rate);
  detail::put<std::uint32_t>(s, rate * nch * 4);
  detail::put<std::uint16_t>(s, static_cast<std::uint16_t>(nch * 4));
  detail::put<std::uint16_t>(s, 32);
  s += "data";
  detail::put<std::uint32_t>(s, data_bytes);
  for (std::size_t i = 0; i < frames; ++i)
    for (const auto& c : channels) detail::put<float>(s, c[i]);
  return s;
}

struct WavData {
  double sample_rate = 0.0;
  std::vector<std::vector<float>> channels;
  bool truncated = false;  // data chunk shorter than its header claims
};

inline WavData decode_wav(const std::string& s, const std::string& name = "wav") {
  auto bad = [&](const std::string& why) { fail(ErrorCode::InvalidInput, name + ": " + why); };
  if (s.size() < 12 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0) bad("not a RIFF/WAVE file");
  WavData w;
  std::uint16_t format = 0, nch = 0, bits = 0;
  std::size_t at = 12;
  bool have_fmt = false;
  while (at + 8 <= s.size()) {
    std::string id = s.substr(at, 4);
    auto len = detail::get<std::uint32_t>(s, at + 4);
    std::size_t body = at + 8;
    if (id == "fmt ") {
      if (len < 16 || body + 16 > s.size()) bad("short fmt chunk");
      format = detail::get<std::uint16_t>(s, body);
      nch = detail::get<std::uint16_t>(s, body + 2);
      w.sample_rate = detail::get<std::uint32_t>(s, body + 4);
      bits = detail::get<std::uint16_t>(s, body + 14);
      if (format == 0xFFFE && len >= 40) format = detail::get<std::uint16_t>(s, body + 24);  // extensible
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) bad("data chunk before fmt");
      if (format != 3 || bits != 32) bad("only 32-bit float WAV is supported");
      if (nch == 0) bad("zero channels");
      std::size_t avail = std::min<std::size_t>(len, s.size() - body);
      w.truncated = avail < len;
      std::size_t frames = avail / (4u * nch);
      w.channels.assign(nch, std::vector<float>(frames));
      for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < nch; ++c) w.channels[c][i] = detail::get<float>(s, body + 4 * (i * nch + c));
      return w;
    }
    at = body + len + (len & 1u);
  }
  fail(ErrorCode::InvalidInput, name + ": no data chunk");
}

inline void write_wav(const fs::path& path, const Recording& rec) {
  write_atomic(path, encode_wav(rec.channels, rec.sample_rate));
}

/// Reads an array's WAV and attaches the geometry; the channel count must match.
inline Recording read_wav(const fs::path& path, const ArrayGeometry& geometry, bool* truncated = nullptr) {
  auto w = decode_wav(read_file(path), path.string());
  if (w.channels.size() != geometry.size())
    fail(ErrorCode::InvalidInput, path.string() + ": " + std::to_string(w.channels.size()) +
                                      " channels but array " + geometry.id + " has " +
                                      std::to_string(geometry.size()) + " elements");
  if (truncated) *truncated = w.truncated;
  return {geometry, w.sample_rate, std::move(w.channels)};
}

// ---------------------------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double to_number(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidInput, where + ": not a number: '" + cell + "'");
  }
}

inline std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6f", v);
  return b;
}

}  // namespace detail

/// Header plus rows of cells; the first line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& source) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::InvalidInput, source + ": missing column '" + name + "'");
  }
};

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split(line);
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorCode::InvalidInput, source + ":" + std::to_string(n) + ": expected " +
                                        std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) fail(ErrorCode::InvalidInput, source + ": empty CSV");
  return t;
}

/// Truth rows at t = k * hop for k = 1 .. floor(duration / hop).
inline std::string truth_csv(const GroundTruth& truth, const Scenario& sc) {
  std::string s = "t,x,y,z,vx,vy,vz,yaw,motion";
  for (const auto& a : sc.arrays) s += ",los_" + a.id;
  s += '\n';
  auto n = static_cast<long>(std::floor(sc.duration() / sc.hop + 1e-9));
  for (long k = 1; k <= n; ++k) {
    double t = static_cast<double>(k) * sc.hop;
    const auto& st = truth.at(t);
    Vec3 p = truth.position(t);
    s += detail::fmt(t) + ',' + detail::fmt(p.x()) + ',' + detail::fmt(p.y()) + ',' + detail::fmt(p.z()) + ',' +
         detail::fmt(st.velocity.x()) + ',' + detail::fmt(st.velocity.y()) + ',' + detail::fmt(st.velocity.z()) + ',' +
         detail::fmt(st.yaw) + ',' + to_string(st.kind);
    for (char los : st.los) s += los ? ",1" : ",0";
    s += '\n';
  }
  return s;
}

inline std::string track_csv(const std::vector<TrackRow>& rows) {
  std::string s = "t,x,y,z,los,n_hypotheses\n";
  for (const auto& r : rows)
    s += detail::fmt(r.t) + ',' + detail::fmt(r.position.x()) + ',' + detail::fmt(r.position.y()) + ',' +
         detail::fmt(r.position.z()) + ',' + (r.los ? "1" : "0") + ',' + std::to_string(r.n_hypotheses) + '\n';
  return s;
}

struct FusedRow {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  bool fused = false;  // false = inertial-only
};

inline std::string fused_csv(const std::vector<FusedRow>& rows) {
  std::string s = "t,x,y,z,source\n";
  for (const auto& r : rows)
    s += detail::fmt(r.t) + ',' + detail::fmt(r.position.x()) + ',' + detail::fmt(r.position.y()) + ',' +
         detail::fmt(r.position.z()) + ',' + (r.fused ? "fused" : "inertial-only") + '\n';
  return s;
}

/// Timestamped position with optional per-array LoS flags (truth files only).
struct PositionSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  std::vector<char> los;
};

/// Reads t,x,y,z (and any los_* columns) from a truth, track or fused CSV.
inline std::vector<PositionSample> read_positions(const fs::path& path) {
  auto src = path.string();
  auto t = parse_csv(read_file(path), src);
  std::size_t ct = t.column("t", src), cx = t.column("x", src), cy = t.column("y", src), cz = t.column("z", src);
  std::vector<std::size_t> los_cols;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i].rfind("los_", 0) == 0) los_cols.push_back(i);
  std::vector<PositionSample> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    auto where = src + ":" + std::to_string(r + 2);
    PositionSample p;
    p.t = detail::to_number(row[ct], where);
    p.position = Vec3(detail::to_number(row[cx], where), detail::to_number(row[cy], where),
                      detail::to_number(row[cz], where));
    for (auto c : los_cols) p.los.push_back(detail::to_number(row[c], where) != 0.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace aim
