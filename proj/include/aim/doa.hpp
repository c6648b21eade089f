// Spatial front end: GCC-PHAT delays, far-field direction fit, IQR smoothing and the
// variance tests used for NLoS detection and motion stability.
#pragma once

#include "aim/fft.hpp"
#include "aim/geometry.hpp"
#include "aim/spectral.hpp"

#include <Eigen/Dense>

#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aim {

struct GccOptions {
  double max_delay = 0.0;     // s; 0 = whole correlation
  double band_low = 0.0;      // Hz, bins outside [band_low, band_high] are ignored
  double band_high = 0.0;     // Hz; 0 = Nyquist
  double mask_rel = 1e-2;     // bins with cross-power below this fraction of the maximum are ignored
  double expected = std::numeric_limits<double>::quiet_NaN();  // pick the peak nearest this delay (s)
  bool refine = true;         // band-limited interpolation after the parabolic step
};

namespace detail {

/// PHAT-weighted cross-spectrum of b against a (peak at +d when b lags a by d), restricted to
/// the usable bins.
struct PhatSpectrum {
  std::size_t nfft = 0;
  std::vector<fft::Complex> weights;     // full half spectrum
  std::vector<std::size_t> active;       // indices of non-zero bins
};

inline PhatSpectrum phat_spectrum(std::span<const double> a, std::span<const double> b, double fs,
                                  const GccOptions& opt) {
  PhatSpectrum ps;
  ps.nfft = fft::next_pow2(2 * std::max(a.size(), b.size()));
  auto fa = fft::rfft(a, ps.nfft);
  auto fb = fft::rfft(b, ps.nfft);
  ps.weights.assign(fa.size(), {0.0, 0.0});
  double hi = opt.band_high > 0 ? opt.band_high : 0.5 * fs;
  double peak = 0.0;
  std::vector<fft::Complex> cross(fa.size());
  for (std::size_t k = 0; k < fa.size(); ++k) {
    cross[k] = fb[k] * std::conj(fa[k]);
    double f = static_cast<double>(k) * fs / static_cast<double>(ps.nfft);
    if (f < opt.band_low || f > hi) cross[k] = 0.0;
    peak = std::max(peak, std::abs(cross[k]));
  }
  for (std::size_t k = 1; k < fa.size(); ++k) {
    double m = std::abs(cross[k]);
    if (m <= 0.0 || m < opt.mask_rel * peak) continue;
    ps.weights[k] = cross[k] / m;
    ps.active.push_back(k);
  }
  return ps;
}

/// Band-limited correlation value at a fractional lag (samples) using only the active bins.
inline double phat_at(const PhatSpectrum& ps, double lag) {
  double s = 0.0;
  double w = 2.0 * kPi * lag / static_cast<double>(ps.nfft);
  for (std::size_t k : ps.active) s += (ps.weights[k] * std::polar(1.0, w * static_cast<double>(k))).real();
  return s;
}

}  // namespace detail

/// Delay (s) of chan_j relative to chan_i: chan_j(t) ~ chan_i(t - tau).
inline double gcc_phat_delay(std::span<const double> chan_i, std::span<const double> chan_j, double fs,
                             const GccOptions& opt = {}) {
  require(chan_i.size() == chan_j.size(), "gcc_phat_delay needs equal-length channels");
  auto energy = [](std::span<const double> x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
  };
  if (energy(chan_i) <= 0.0 || energy(chan_j) <= 0.0) fail(ErrorCode::NoSignal, "zero-energy channel");
  auto ps = detail::phat_spectrum(chan_i, chan_j, fs, opt);
  if (ps.active.empty()) fail(ErrorCode::NoSignal, "no usable cross-spectrum bins");
  auto r = fft::irfft(ps.weights, ps.nfft);
  const long n = static_cast<long>(ps.nfft);
  long bound = opt.max_delay > 0 ? static_cast<long>(std::ceil(opt.max_delay * fs)) + 1 : n / 2 - 1;
  bound = std::min(bound, n / 2 - 1);
  auto at = [&](long lag) { return r[static_cast<std::size_t>((lag + n) % n)]; };

  long best = 0;
  if (!std::isnan(opt.expected)) {
    // Nearest local maximum to the expected lag, among those within half the strongest peak.
    double top = -1e300;
    for (long l = -bound; l <= bound; ++l) top = std::max(top, at(l));
    double target = opt.expected * fs, best_d = 1e300;
    for (long l = -bound; l <= bound; ++l) {
      double v = at(l);
      if (v < 0.5 * top || v < at(l - 1) || v < at(l + 1)) continue;
      double d = std::abs(static_cast<double>(l) - target);
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
  } else {
    double top = -1e300;
    for (long l = -bound; l <= bound; ++l)
      if (at(l) > top) {
        top = at(l);
        best = l;
      }
  }
  double y0 = at(best - 1), y1 = at(best), y2 = at(best + 1);
  double den = y0 - 2.0 * y1 + y2;
  double lag = static_cast<double>(best) + (den < 0 ? std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5) : 0.0);
  if (opt.refine) {
    // Golden-section search of the band-limited interpolant around the parabolic estimate.
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = static_cast<double>(best) - 1.0, b = static_cast<double>(best) + 1.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = detail::phat_at(ps, c), fd = detail::phat_at(ps, d);
    for (int it = 0; it < 30 && b - a > 1e-4; ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = detail::phat_at(ps, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = detail::phat_at(ps, d);
      }
    }
    double refined = 0.5 * (a + b);
    if (detail::phat_at(ps, refined) >= detail::phat_at(ps, lag)) lag = refined;
  }
  return lag / fs;
}

// ---------------------------------------------------------------------------------------------
// Direction of arrival

struct DoAEstimate {
  std::string array_id;
  double t = 0.0;
  double azimuth = 0.0;    // world frame, from +x counter-clockwise, [-pi, pi)
  double elevation = 0.0;  // above the horizontal plane, [0, pi/2]
  double residual = 0.0;   // RMS delay misfit relative to the largest element spacing / c
  bool high_residual = false;
  bool smoothed = false;

  Vec3 direction() const { return direction_from_angles(azimuth, elevation); }
};

struct DoAConfig {
  double band_low = 150.0;
  double band_high = 4000.0;
  double residual_max = 0.25;
};

/// Far-field plane-wave fit over every element pair: tau_ij = -u . (p_j - p_i) / c.
inline DoAEstimate estimate_doa(const MultiChannelFrame& frame, const ArrayGeometry& geo, const DoAConfig& cfg = {}) {
  require(static_cast<std::size_t>(frame.count()) == geo.size(), "frame channel count must match the geometry");
  require(geo.size() >= 3, "direction fit needs at least 3 elements");
  const double max_delay = geo.max_spacing() / kSpeedOfSound;
  GccOptions opt;
  opt.max_delay = max_delay;
  opt.band_low = cfg.band_low;
  opt.band_high = cfg.band_high;

  std::vector<std::vector<double>> ch(geo.size());
  for (std::size_t c = 0; c < geo.size(); ++c) {
    Eigen::VectorXd row = frame.channels.row(static_cast<Eigen::Index>(c)).transpose();
    ch[c].assign(row.data(), row.data() + row.size());
  }
  const std::size_t pairs = geo.size() * (geo.size() - 1) / 2;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pairs), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(pairs));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < geo.size(); ++i)
    for (std::size_t j = i + 1; j < geo.size(); ++j, ++row) {
      Vec3 d = geo.element_position(j) - geo.element_position(i);
      a(row, 0) = -d.x() / kSpeedOfSound;
      a(row, 1) = -d.y() / kSpeedOfSound;
      b(row) = gcc_phat_delay(ch[i], ch[j], frame.sample_rate, opt);
    }
  Eigen::Vector2d uxy = a.colPivHouseholderQr().solve(b);
  double r = uxy.norm();
  if (r > 1.0) uxy /= r;
  Vec3 u(uxy.x(), uxy.y(), std::sqrt(std::max(0.0, 1.0 - uxy.squaredNorm())));

  DoAEstimate est;
  est.array_id = geo.id;
  est.t = frame.t_start + 0.5 * static_cast<double>(frame.length()) / frame.sample_rate;
  est.azimuth = wrap_angle(std::atan2(u.y(), u.x()));
  est.elevation = std::asin(std::clamp(u.z(), 0.0, 1.0));
  Eigen::VectorXd resid = a * u.head<2>() - b;
  est.residual = std::sqrt(resid.squaredNorm() / static_cast<double>(pairs)) / max_delay;
  est.high_residual = est.residual > cfg.residual_max;
  return est;
}

// ---------------------------------------------------------------------------------------------
// IQR smoothing and window statistics

namespace detail {

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile of an empty set");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace detail

struct SmoothedSeries {
  std::vector<double> values;  // survivors after outlier removal, median-smoothed
  std::vector<char> kept;      // per input sample
  bool low_confidence = false;
};

/// IQR outlier rejection followed by a width-3 moving median. Circular series are unwrapped
/// about their median first and wrapped back on output.
inline SmoothedSeries iqr_smooth(const std::vector<double>& series, bool circular = false) {
  if (series.size() < 4) fail(ErrorCode::InvalidInput, "iqr_smooth needs at least 4 samples");
  std::vector<double> x = series;
  double centre = detail::quantile(x, 0.5);
  if (circular) {
    // Circular median proxy: the sample minimizing the summed wrapped distance.
    double best = 1e300;
    for (double c : series) {
      double s = 0.0;
      for (double v : series) s += std::abs(wrap_angle(v - c));
      if (s < best) {
        best = s;
        centre = c;
      }
    }
    for (auto& v : x) v = centre + wrap_angle(v - centre);
  }
  double q1 = detail::quantile(x, 0.25), q3 = detail::quantile(x, 0.75);
  double iqr = q3 - q1;
  double lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;

  SmoothedSeries out;
  out.kept.assign(x.size(), 0);
  std::vector<double> kept;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= lo && x[i] <= hi) {
      kept.push_back(x[i]);
      out.kept[i] = 1;
    }
  if (kept.empty()) {
    out.values = {circular ? wrap_angle(centre) : centre};
    out.low_confidence = true;
    return out;
  }
  out.values.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i == 0 || i + 1 == kept.size()) {
      out.values[i] = kept[i];
      continue;
    }
    double a = kept[i - 1], b = kept[i], c = kept[i + 1];
    out.values[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
  }
  if (circular)
    for (auto& v : out.values) v = wrap_angle(v);
  return out;
}

/// Ring buffer of the latest W estimates of one array with the statistics of its smoothed series.
class DoAWindow {
 public:
  explicit DoAWindow(std::size_t size = 10) : size_(size) { require(size >= 4, "DoA window needs W >= 4"); }

  void push(const DoAEstimate& e) {
    buf_.push_back(e);
    if (buf_.size() > size_) buf_.pop_front();
    recompute();
  }

  void clear() {
    buf_.clear();
    var_az_ = var_el_ = 0.0;
  }

  bool full() const { return buf_.size() == size_; }
  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return size_; }
  const std::deque<DoAEstimate>& estimates() const { return buf_; }

  double azimuth_variance() const { return var_az_; }
  double elevation_variance() const { return var_el_; }

  /// Latest estimate with its angles replaced by the smoothed series' last value.
  DoAEstimate latest_smoothed() const {
    require(!buf_.empty(), "empty DoA window");
    DoAEstimate e = buf_.back();
    if (!az_.empty()) {
      e.azimuth = az_.back();
      e.elevation = el_.back();
      e.smoothed = true;
    }
    return e;
  }

  bool los_believed = true;

 private:
  void recompute() {
    az_.clear();
    el_.clear();
    var_az_ = var_el_ = 0.0;
    if (buf_.size() < 4) return;
    std::vector<double> az, el;
    for (const auto& e : buf_) {
      az.push_back(e.azimuth);
      el.push_back(e.elevation);
    }
    auto sa = iqr_smooth(az, true);
    auto se = iqr_smooth(el, false);
    az_ = sa.values;
    el_ = se.values;
    // Variance of the azimuth about its circular centre.
    std::vector<double> unwrapped;
    for (double v : az_) unwrapped.push_back(az_.front() + wrap_angle(v - az_.front()));
    var_az_ = detail::variance(unwrapped);
    var_el_ = detail::variance(el_);
  }

  std::size_t size_;
  std::deque<DoAEstimate> buf_;
  std::vector<double> az_, el_;
  double var_az_ = 0.0, var_el_ = 0.0;
};

inline bool detect_nlos(const DoAWindow& w, double threshold) {
  require(w.full(), "detect_nlos needs a full window");
  return w.azimuth_variance() > threshold;
}

enum class Stability { Stable, Unstable };

inline Stability doa_stability(const DoAWindow& w, double threshold_motion) {
  require(w.full(), "doa_stability needs a full window");
  return w.azimuth_variance() <= threshold_motion && w.elevation_variance() <= threshold_motion
             ? Stability::Stable
             : Stability::Unstable;
}

}  // namespace aim
