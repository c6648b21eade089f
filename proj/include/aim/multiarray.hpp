// Several arrays: beacon clock sync, inter-array TDoA, hyperbolic multilateration with the
// two-array fallback, array selection and complementary fusion with the inertial track.
#pragma once

#include "aim/doa.hpp"
#include "aim/fft.hpp"
#include "aim/synth.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <array>
#include <optional>
#include <vector>

namespace aim {

// ---------------------------------------------------------------------------------------------
// Clock sync

struct SyncState {
  std::size_t reference = 0;
  std::vector<double> offsets;         // s, local clock minus reference clock
  std::vector<double> last_detection;  // local arrival time of the last beacon used
  std::vector<double> confidence;      // 1 fresh, halves each time a beacon is missed
  bool stale = false;
};

struct BeaconDetection {
  double arrival = 0.0;  // local time of the first beacon sample
  double score = 0.0;    // correlation peak over the robust noise level
};

/// Matched filter restricted to the beacon band over local times [t0, t1).
inline std::optional<BeaconDetection> detect_beacon(const std::vector<float>& channel, double fs,
                                                    const std::vector<double>& beacon, double low, double high,
                                                    double t0, double t1, double threshold = 8.0) {
  auto a = static_cast<long>(std::floor(std::max(0.0, t0) * fs));
  auto b = std::min(static_cast<long>(channel.size()), static_cast<long>(std::ceil(t1 * fs)) +
                                                           static_cast<long>(beacon.size()));
  if (b - a < static_cast<long>(beacon.size())) return std::nullopt;
  std::size_t n = static_cast<std::size_t>(b - a);
  std::size_t nfft = fft::next_pow2(n + beacon.size());
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = channel[static_cast<std::size_t>(a) + i];
  auto X = fft::rfft(x, nfft);
  auto B = fft::rfft(beacon, nfft);
  for (std::size_t k = 0; k < X.size(); ++k) {
    double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    X[k] = (f >= low && f <= high) ? X[k] * std::conj(B[k]) : 0.0;
  }
  auto xc = fft::irfft(X, nfft);
  // Envelope from the analytic signal; the carrier makes the raw correlation unreliable for
  // picking the right cycle.
  auto H = X;
  for (auto& v : H) v *= std::complex<double>(0.0, -1.0);
  auto xh = fft::irfft(H, nfft);
  std::size_t lags = n - beacon.size() + 1;
  std::vector<double> env(lags);
  for (std::size_t i = 0; i < lags; ++i) env[i] = std::hypot(xc[i], xh[i]);
  std::size_t best = static_cast<std::size_t>(std::max_element(env.begin(), env.end()) - env.begin());
  auto sorted = env;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(lags / 2), sorted.end());
  double noise = 1.4826 * sorted[lags / 2] + 1e-300;
  double score = env[best] / noise;
  if (score < threshold) return std::nullopt;
  double centre = static_cast<double>(best);
  if (best > 0 && best + 1 < lags) {
    double l = env[best - 1], c = env[best], r = env[best + 1];
    double den = l - 2 * c + r;
    if (std::abs(den) > 1e-300) centre += std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
  }
  // Signed maximum of the band-limited correlation within one carrier period of the envelope peak.
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k < X.size(); ++k)
    if (std::abs(X[k]) > 0.0) bins.push_back(k);
  auto corr_at = [&](double lag) {
    double w = 2.0 * kPi * lag / static_cast<double>(nfft), v = 0.0;
    for (std::size_t k : bins) v += (X[k] * std::polar(1.0, w * static_cast<double>(k))).real();
    return v;
  };
  double half_period = 0.5 * fs / (0.5 * (low + high));
  double arg = centre, top = -std::numeric_limits<double>::infinity();
  for (double d = -half_period; d <= half_period; d += 0.1) {
    double v = corr_at(centre + d);
    if (v > top) {
      top = v;
      arg = centre + d;
    }
  }
  double lo = arg - 0.1, hi = arg + 0.1;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = corr_at(x1), f2 = corr_at(x2);
  for (int it = 0; it < 20; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = corr_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = corr_at(x2);
    }
  }
  double frac = 0.5 * (lo + hi) - static_cast<double>(best);
  return BeaconDetection{(static_cast<double>(a + static_cast<long>(best)) + frac) / fs, score};
}

/// Offsets relative to the reference array from one beacon emission at (true) time `emission`.
/// Each array searches local times [emission - search, emission + search + max propagation].
/// An undetected array keeps its previous offset (halved confidence) or raises StaleSync.
inline SyncState sync_clocks(const std::vector<Recording>& recs, const std::vector<double>& beacon,
                             const BeaconConfig& cfg, double emission, const SyncState* previous = nullptr,
                             double search = 0.1, double threshold = 8.0) {
  require(!recs.empty(), "sync needs at least one array");
  SyncState s;
  s.offsets.assign(recs.size(), 0.0);
  s.last_detection.assign(recs.size(), 0.0);
  s.confidence.assign(recs.size(), 0.0);
  std::vector<std::optional<double>> raw(recs.size());  // arrival minus propagation, local clock
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& rec = recs[i];
    double travel = (rec.geometry.element_position(0) - cfg.speaker).norm() / kSpeedOfSound;
    auto det = detect_beacon(rec.channels.front(), rec.sample_rate, beacon, cfg.low, cfg.high, emission - search,
                             emission + travel + search, threshold);
    if (det) {
      raw[i] = det->arrival - travel;
      s.last_detection[i] = det->arrival;
      s.confidence[i] = 1.0;
    }
  }
  if (!raw[s.reference]) {
    if (!previous) fail(ErrorCode::StaleSync, "beacon not detected at the reference array");
    s = *previous;
    s.stale = true;
    for (auto& c : s.confidence) c *= 0.5;
    return s;
  }
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (raw[i]) {
      s.offsets[i] = *raw[i] - *raw[s.reference];
    } else {
      if (!previous) fail(ErrorCode::StaleSync, "beacon not detected at array " + recs[i].geometry.id);
      s.offsets[i] = previous->offsets[i];
      s.last_detection[i] = previous->last_detection[i];
      s.confidence[i] = 0.5 * previous->confidence[i];
      s.stale = true;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------------------------
// Inter-array TDoA

struct TdoaMeasurement {
  std::size_t p = 0, q = 0;
  double T = 0.0;  // s, arrival at q minus arrival at p
  int m = 0;       // element pairs averaged
  double t = 0.0;
};

namespace detail {

/// Channel c of a recording as a frame of `length` samples starting near the true time
/// `t_true`; returns the true time of the first sample actually used.
inline double channel_slice(const Recording& rec, std::size_t c, double t_true, double offset, std::size_t length,
                            std::vector<double>& out) {
  long start = std::lround((t_true + offset) * rec.sample_rate);
  out.assign(length, 0.0);
  const auto& ch = rec.channels.at(c);
  for (std::size_t i = 0; i < length; ++i) {
    long n = start + static_cast<long>(i);
    if (n >= 0 && n < static_cast<long>(ch.size())) out[i] = ch[static_cast<std::size_t>(n)];
  }
  return static_cast<double>(start) / rec.sample_rate - offset;
}

/// Delay of element `cq` of q relative to element `cp` of p, searched within `window` seconds of
/// `expected` (both true time).
inline double element_delay(const Recording& rp, std::size_t cp, double off_p, const Recording& rq, std::size_t cq,
                            double off_q, double t, double expected, double window, std::size_t length) {
  std::vector<double> a, b;
  double half = 0.5 * static_cast<double>(length) / rp.sample_rate;
  double tp = channel_slice(rp, cp, t - half, off_p, length, a);
  double tq = channel_slice(rq, cq, t - half + expected, off_q, length, b);
  GccOptions opt;
  opt.max_delay = window;
  opt.expected = expected - (tq - tp);
  opt.band_low = 150.0;
  opt.band_high = 4000.0;
  return gcc_phat_delay(a, b, rp.sample_rate, opt) + (tq - tp);
}

}  // namespace detail

/// Average over corresponding elements of the delay of array q relative to array p at true time t.
/// `expected` centres the search (the drone sound is tonal, so GCC peaks repeat every 1/BPF).
inline TdoaMeasurement inter_array_tdoa(const Recording& rp, const Recording& rq, const SyncState& sync,
                                        std::size_t p, std::size_t q, double t, double expected = 0.0,
                                        std::size_t length = 8192) {
  const auto& gp = rp.geometry;
  const auto& gq = rq.geometry;
  require(gp.size() == gq.size(), "corresponding arrays must have the same element count");
  require(std::abs(wrap_angle(gp.orientation - gq.orientation)) < 1e-6, "arrays must share one orientation");
  double bound = (gp.origin - gq.origin).norm() / kSpeedOfSound;
  double guard = gp.max_spacing() / kSpeedOfSound + 2e-4;
  double window = 1.5e-3;
  TdoaMeasurement m{p, q, 0.0, 0, t};
  double sum = 0.0;
  for (std::size_t i = 0; i < gp.size(); ++i) {
    double d = 0.0;
    try {
      d = detail::element_delay(rp, i, sync.offsets.at(p), rq, i, sync.offsets.at(q), t, expected, window, length);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSignal) throw;
      continue;
    }
    if (std::abs(d) > bound + guard) continue;
    sum += d;
    ++m.m;
  }
  if (m.m == 0) fail(ErrorCode::NoMeasurement, "no element pair gave a physical delay");
  m.T = sum / m.m;
  return m;
}

// ---------------------------------------------------------------------------------------------
// Least-squares position

/// ||S - q|| - ||S - p|| = d.
struct RangeDifference {
  Vec3 p = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  double d = 0.0;
};

/// Bearing from an origin along unit direction u.
struct Bearing {
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitZ();
};

struct SolverOptions {
  double bearing_weight = 0.5;  // relative weight of a bearing miss distance against a range difference
  double max_rms = 0.3;         // m, range-difference RMS above which the solve fails
  double min_height = 0.0;      // solutions must lie above this z
};

namespace detail {

struct PositionResidual : Eigen::DenseFunctor<double> {
  const std::vector<RangeDifference>& rds;
  const std::vector<Bearing>& bearings;
  double w;

  PositionResidual(const std::vector<RangeDifference>& r, const std::vector<Bearing>& b, double weight)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(std::max<std::size_t>(3, r.size() + 3 * b.size()))),
        rds(r), bearings(b), w(weight) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    Vec3 s = x;
    f.setZero(values());
    Eigen::Index k = 0;
    for (const auto& r : rds) f(k++) = (s - r.q).norm() - (s - r.p).norm() - r.d;
    // Bearing residual: miss distance between S and the point on the ray at the same range.
    for (const auto& b : bearings) {
      Vec3 v = s - b.origin;
      f.segment<3>(k) = w * (v - v.norm() * b.u);
      k += 3;
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& J) const {
    Vec3 s = x;
    J.setZero(values(), 3);
    Eigen::Index k = 0;
    auto unit = [](const Vec3& v) { return v / std::max(v.norm(), 1e-9); };
    for (const auto& r : rds) J.row(k++) = (unit(s - r.q) - unit(s - r.p)).transpose();
    for (const auto& b : bearings) {
      Vec3 u = unit(s - b.origin);
      J.block<3, 3>(k, 0) = w * (Mat3::Identity() - b.u * u.transpose());
      k += 3;
    }
    return 0;
  }
};

inline double rd_rms(const std::vector<RangeDifference>& rds, const Vec3& s) {
  if (rds.empty()) return 0.0;
  double e = 0.0;
  for (const auto& r : rds) e += std::pow((s - r.q).norm() - (s - r.p).norm() - r.d, 2);
  return std::sqrt(e / static_cast<double>(rds.size()));
}

inline double total_cost(const std::vector<RangeDifference>& rds, const std::vector<Bearing>& bearings, double w,
                         const Vec3& s) {
  PositionResidual f(rds, bearings, w);
  Eigen::VectorXd r;
  f(s, r);
  return r.squaredNorm();
}

/// True when the points span less than a plane (all on one line).
inline bool collinear(const std::vector<Vec3>& pts, double tol = 1e-6) {
  if (pts.size() < 3) return true;
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::MatrixXd M(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = (pts[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  auto sv = svd.singularValues();
  return sv(0) < 1e-12 || sv(1) < tol * std::max(1.0, sv(0));
}

}  // namespace detail

/// Least-squares intersection of bearing lines.
inline std::optional<Vec3> bearing_fix(const std::vector<Bearing>& bearings) {
  if (bearings.size() < 2) return std::nullopt;
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& br : bearings) {
    Mat3 proj = Mat3::Identity() - br.u * br.u.transpose();
    A += proj;
    b += proj * br.origin;
  }
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < 1e-6 * svd.singularValues()(0)) return std::nullopt;
  Vec3 s = svd.solve(b);
  if (!s.allFinite()) return std::nullopt;
  return s;
}

/// Damped least squares over range differences (and optional bearings) from a multistart set:
/// 8 corners of a box around the sensors plus any extra starts.
inline Vec3 solve_least_squares(const std::vector<RangeDifference>& rds, const std::vector<Bearing>& bearings,
                                const std::vector<Vec3>& sensors, const SolverOptions& opt = {},
                                const std::vector<Vec3>& extra_starts = {}) {
  require(!sensors.empty(), "solver needs sensor positions");
  if (rds.size() + 3 * bearings.size() < 3) fail(ErrorCode::SolveFailed, "too few equations");
  Vec3 lo = sensors.front(), hi = sensors.front();
  for (const auto& s : sensors) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  Vec3 mid = 0.5 * (lo + hi);
  Vec3 half = 0.5 * (hi - lo) + Vec3(3, 3, 0);
  std::vector<Vec3> starts = extra_starts;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (double z : {1.0, 4.0}) starts.emplace_back(mid.x() + sx * half.x(), mid.y() + sy * half.y(), mid.z() + z);

  detail::PositionResidual f(rds, bearings, opt.bearing_weight);
  Vec3 best = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& s0 : starts) {
    Eigen::VectorXd x = s0;
    Eigen::LevenbergMarquardt<detail::PositionResidual> lm(f);
    lm.setMaxfev(200);
    lm.minimize(x);
    Vec3 s = x;
    if (!s.allFinite()) continue;
    // Sensors share a horizontal plane, so the mirror image fits equally well; keep the one above.
    if (s.z() < opt.min_height) s.z() = 2.0 * opt.min_height - s.z();
    double c = detail::total_cost(rds, bearings, opt.bearing_weight, s);
    if (c < best_cost) {
      best_cost = c;
      best = s;
    }
  }
  if (!best.allFinite()) fail(ErrorCode::SolveFailed, "solver diverged");
  if (detail::rd_rms(rds, best) > opt.max_rms) fail(ErrorCode::SolveFailed, "range-difference residual too large");
  return best;
}

/// Multilateration from array-level TDoAs (and optional per-array bearings) over >= 3 arrays.
inline Vec3 solve_position(const std::vector<TdoaMeasurement>& tdoas, const std::vector<ArrayGeometry>& arrays,
                           const std::vector<Bearing>& bearings = {}, const SolverOptions& opt = {},
                           const std::vector<Vec3>& extra_starts = {}) {
  std::vector<Vec3> origins;
  for (const auto& a : arrays) origins.push_back(a.origin);
  if (arrays.size() < 3) fail(ErrorCode::SolveFailed, "multilateration needs three arrays");
  if (detail::collinear(origins)) fail(ErrorCode::SolveFailed, "arrays are collinear");
  std::vector<RangeDifference> rds;
  for (const auto& m : tdoas) rds.push_back({arrays.at(m.p).origin, arrays.at(m.q).origin, kSpeedOfSound * m.T});
  return solve_least_squares(rds, bearings, origins, opt, extra_starts);
}

// ---------------------------------------------------------------------------------------------
// Two-array fallback

struct ElementChoice {
  std::size_t p_a = 0, p_b = 0, q_a = 0, q_b = 0;
};

namespace detail {

/// Element pairs by descending spacing, ties in lexicographic index order.
inline std::vector<std::pair<std::size_t, std::size_t>> pairs_by_spacing(const ArrayGeometry& g) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) out.emplace_back(i, j);
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    double da = (g.element_offsets[a.first] - g.element_offsets[a.second]).norm();
    double db = (g.element_offsets[b.first] - g.element_offsets[b.second]).norm();
    return da > db + 1e-12;
  });
  return out;
}

}  // namespace detail

/// Widest element pair from each array such that the four chosen elements are not collinear.
inline ElementChoice choose_elements(const ArrayGeometry& gp, const ArrayGeometry& gq) {
  auto pp = detail::pairs_by_spacing(gp);
  auto pq = detail::pairs_by_spacing(gq);
  // Try combinations in order of the smaller of the two spacings, then by index.
  for (const auto& a : pp)
    for (const auto& b : pq) {
      std::vector<Vec3> pts = {gp.element_position(a.first), gp.element_position(a.second),
                               gq.element_position(b.first), gq.element_position(b.second)};
      if (!detail::collinear(pts)) return {a.first, a.second, b.first, b.second};
    }
  fail(ErrorCode::SolveFailed, "every element choice is collinear");
}

/// Position from two arrays using element-level delays between the chosen elements.
inline Vec3 solve_two_array(const Recording& rp, const Recording& rq, const SyncState& sync, std::size_t p,
                            std::size_t q, double t, const Vec3& prior, const std::vector<Bearing>& bearings = {},
                            const SolverOptions& opt = {}, std::size_t length = 8192) {
  const auto& gp = rp.geometry;
  const auto& gq = rq.geometry;
  auto ch = choose_elements(gp, gq);
  Vec3 ref = gp.element_position(ch.p_a);
  struct Other {
    const Recording* rec;
    std::size_t idx;
    double off;
  };
  std::vector<Other> others = {{&rp, ch.p_b, sync.offsets.at(p)},
                               {&rq, ch.q_a, sync.offsets.at(q)},
                               {&rq, ch.q_b, sync.offsets.at(q)}};
  std::vector<RangeDifference> rds;
  std::vector<Vec3> sensors = {ref};
  for (const auto& o : others) {
    Vec3 pos = o.rec->geometry.element_position(o.idx);
    double expected = ((prior - pos).norm() - (prior - ref).norm()) / kSpeedOfSound;
    double d = 0.0;
    try {
      d = detail::element_delay(rp, ch.p_a, sync.offsets.at(p), *o.rec, o.idx, o.off, t, expected, 1.5e-3, length);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSignal) throw;
      fail(ErrorCode::SolveFailed, "no delay between chosen elements");
    }
    rds.push_back({ref, pos, kSpeedOfSound * d});
    sensors.push_back(pos);
  }
  return solve_least_squares(rds, bearings, sensors, opt, {prior});
}

// ---------------------------------------------------------------------------------------------
// Array selection

struct ArrayCandidate {
  std::size_t index = 0;
  Vec3 origin = Vec3::Zero();
  double variance = 0.0;  // azimuth variance over the DoA window
  bool ready = true;      // window full
};

enum class Route { InertialOnly, TwoArray, Multilateration };

struct Selection {
  std::vector<std::size_t> arrays;
  Route route = Route::InertialOnly;
};

/// Keep arrays whose azimuth variance is below the threshold. Above three survivors, start from
/// the triple with the largest product of pairwise distances and add the steadiest remaining one.
inline Selection select_arrays(const std::vector<ArrayCandidate>& candidates, double threshold) {
  std::vector<ArrayCandidate> ok;
  for (const auto& c : candidates)
    if (c.ready && c.variance < threshold) ok.push_back(c);
  Selection sel;
  if (ok.size() < 2) return sel;
  auto by_variance = [](const ArrayCandidate& a, const ArrayCandidate& b) {
    return a.variance < b.variance || (a.variance == b.variance && a.index < b.index);
  };
  if (ok.size() == 2) {
    sel.arrays = {ok[0].index, ok[1].index};
    sel.route = Route::TwoArray;
    return sel;
  }
  std::vector<ArrayCandidate> chosen;
  if (ok.size() == 3) {
    chosen = ok;
  } else {
    double best = -1.0;
    std::array<std::size_t, 3> tri{};
    for (std::size_t a = 0; a < ok.size(); ++a)
      for (std::size_t b = a + 1; b < ok.size(); ++b)
        for (std::size_t c = b + 1; c < ok.size(); ++c) {
          double prod = (ok[a].origin - ok[b].origin).norm() * (ok[a].origin - ok[c].origin).norm() *
                        (ok[b].origin - ok[c].origin).norm();
          if (prod > best + 1e-12) {
            best = prod;
            tri = {a, b, c};
          }
        }
    std::vector<ArrayCandidate> rest;
    for (std::size_t i = 0; i < ok.size(); ++i)
      if (i != tri[0] && i != tri[1] && i != tri[2]) rest.push_back(ok[i]);
    chosen = {ok[tri[0]], ok[tri[1]], ok[tri[2]]};
    chosen.push_back(*std::min_element(rest.begin(), rest.end(), by_variance));
  }
  std::vector<Vec3> origins;
  for (const auto& c : chosen) origins.push_back(c.origin);
  if (detail::collinear(origins)) {
    std::sort(chosen.begin(), chosen.end(), by_variance);
    sel.arrays = {chosen[0].index, chosen[1].index};
    sel.route = Route::TwoArray;
    return sel;
  }
  for (const auto& c : chosen) sel.arrays.push_back(c.index);
  sel.route = Route::Multilateration;
  return sel;
}

// ---------------------------------------------------------------------------------------------
// Complementary fusion

namespace detail {

/// First-order low-pass G(f) = 1 / (1 + j f / fc) applied to a linearly detrended block.
inline std::vector<double> lowpass_block(const std::vector<double>& x, double dt, double fc) {
  std::size_t n = x.size();
  if (n < 2) return x;
  double a = x.front(), b = x.back();
  std::vector<double> r(n);
  auto trend = [&](std::size_t i) { return a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1); };
  for (std::size_t i = 0; i < n; ++i) r[i] = x[i] - trend(i);
  std::size_t nfft = fft::next_pow2(2 * n);
  auto X = fft::rfft(r, nfft);
  for (std::size_t k = 0; k < X.size(); ++k) {
    double f = static_cast<double>(k) / (static_cast<double>(nfft) * dt);
    X[k] /= std::complex<double>(1.0, f / fc);
  }
  auto y = fft::irfft(X, nfft);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + trend(i);
  return out;
}

}  // namespace detail

/// Per axis, fused = G * z_M + (1 - G) * z_A, evaluated as z_A + G * (z_M - z_A) over windows of
/// `window` seconds with 50% overlap and a triangular cross-fade. Steps without a
/// multilateration fix take the inertial value.
inline std::vector<Vec3> fuse_tracks(const std::vector<std::optional<Vec3>>& zm, const std::vector<Vec3>& za,
                                     double dt, double fc, double window) {
  require(zm.size() == za.size(), "tracks must share one time grid");
  require(dt > 0 && fc > 0 && window > 0, "fusion needs positive dt, cutoff and window");
  std::size_t n = za.size();
  if (std::none_of(zm.begin(), zm.end(), [](const auto& v) { return v.has_value(); })) return za;
  std::size_t w = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(window / dt)));
  std::size_t hop = std::max<std::size_t>(1, w / 2);
  std::vector<Vec3> acc(n, Vec3::Zero());
  std::vector<double> wsum(n, 0.0);
  for (std::size_t start = 0;; start += hop) {
    std::size_t len = std::min(w, n - start);
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> e(len);
      for (std::size_t i = 0; i < len; ++i) {
        const auto& m = zm[start + i];
        e[i] = m ? (*m)(axis) - za[start + i](axis) : 0.0;
      }
      auto lp = detail::lowpass_block(e, dt, fc);
      for (std::size_t i = 0; i < len; ++i) {
        double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(len);
        double tri = 1.0 - std::abs(2.0 * pos - 1.0);
        bool first = start == 0 && 2 * i < len;
        bool last = start + len == n && 2 * i >= len;
        double wt = (first || last) ? 1.0 : tri;
        acc[start + i](axis) += wt * lp[i];
        if (axis == 0) wsum[start + i] += wt;
      }
    }
    if (start + len >= n) break;
  }
  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = za[i] + acc[i] / std::max(wsum[i], 1e-12);
  return out;
}

}  // namespace aim
