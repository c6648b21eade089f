// Frequency-domain front end: windowed spectra, harmonic-family BPF estimation,
// peak-group counting and MFCC features.
#pragma once

#include "aim/fft.hpp"
#include "aim/profile.hpp"
#include "aim/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace aim {

struct MultiChannelFrame {
  std::string array_id;
  double t_start = 0.0;
  double sample_rate = 48000.0;
  Eigen::MatrixXd channels;  // C x L

  Eigen::Index length() const { return channels.cols(); }
  Eigen::Index count() const { return channels.rows(); }
};

inline void validate(const MultiChannelFrame& f) {
  if (f.count() != 4 && f.count() != 6) fail(ErrorCode::InvalidInput, "frame needs 4 or 6 channels");
  auto l = static_cast<std::size_t>(f.length());
  if (l == 0 || fft::next_pow2(l) != l) fail(ErrorCode::InvalidInput, "frame length must be a power of two");
  if (!f.channels.allFinite()) fail(ErrorCode::InvalidInput, "frame holds non-finite samples");
}

/// Frame of `length` samples starting at local time t_start; samples past the end are zero.
inline MultiChannelFrame extract_frame(const Recording& rec, double t_start, std::size_t length) {
  MultiChannelFrame f;
  f.array_id = rec.geometry.id;
  f.t_start = t_start;
  f.sample_rate = rec.sample_rate;
  f.channels = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rec.channels.size()), static_cast<Eigen::Index>(length));
  auto start = static_cast<long>(std::lround(t_start * rec.sample_rate));
  for (std::size_t c = 0; c < rec.channels.size(); ++c)
    for (std::size_t i = 0; i < length; ++i) {
      long n = start + static_cast<long>(i);
      if (n >= 0 && n < static_cast<long>(rec.samples()))
        f.channels(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = rec.channels[c][static_cast<std::size_t>(n)];
    }
  return f;
}

struct Spectrum {
  double sample_rate = 48000.0;
  std::size_t nfft = 0;
  std::vector<double> magnitude;  // nfft/2 + 1 bins

  double bin_width() const { return sample_rate / static_cast<double>(nfft); }
  double freq(std::size_t k) const { return static_cast<double>(k) * bin_width(); }
};

/// Hann-windowed magnitude spectrum of the channel average.
inline Spectrum stft_magnitude(const MultiChannelFrame& frame) {
  validate(frame);
  auto n = static_cast<std::size_t>(frame.length());
  Eigen::VectorXd avg = frame.channels.colwise().mean();
  auto w = fft::hann(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = avg(static_cast<Eigen::Index>(i)) * w[i];
  auto spec = fft::rfft(x, n);
  Spectrum s;
  s.sample_rate = frame.sample_rate;
  s.nfft = n;
  s.magnitude.resize(spec.size());
  // Amplitude-calibrated: a unit sinusoid reads about 1 at its bin.
  for (std::size_t k = 0; k < spec.size(); ++k) s.magnitude[k] = 4.0 * std::abs(spec[k]) / static_cast<double>(n);
  return s;
}

struct SpectralPeak {
  double freq = 0.0;
  double amplitude = 0.0;
  int harmonic = 0;  // 0 = unassigned
  int group = -1;
};

struct FundamentalGroup {
  double bpf = 0.0;
  double weight = 0.0;
};

struct SpectralPeaks {
  std::vector<SpectralPeak> peaks;       // sorted by frequency
  std::vector<FundamentalGroup> groups;  // strongest first
};

struct SpectralConfig {
  double floor_db = 6.0;         // peak must exceed the band median by this much
  double detect_db = 15.0;       // strongest family peak must exceed the median by this much
  int max_harmonic = 5;
  double merge_hz = 4.0;         // fundamentals closer than this count as one group
  double second_ratio = 0.15;    // minimum score of a second family relative to the first
  double rel_tol = 0.004;        // harmonic tolerance grows by this fraction of k * f0
  double band_low = 0.6;         // fundamental search band as multiples of the hover BPF
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace detail

/// Detects harmonic families near the profile's BPF. Each family's BPF is the amplitude-weighted
/// mean of f_k / k over its member peaks. Throws NoSignal when nothing stands above the floor.
inline SpectralPeaks estimate_bpf_groups(const Spectrum& spec, const DroneProfile& profile,
                                         const SpectralConfig& cfg = {}) {
  const double bin = spec.bin_width();
  const double f0_lo = cfg.band_low * profile.hover_bpf();
  const double f0_hi = profile.max_freq_ratio * profile.hover_bpf();
  const double nyq = 0.5 * spec.sample_rate;
  const double band_hi = std::min(nyq - bin, (cfg.max_harmonic + 0.5) * f0_hi);
  const auto k_lo = static_cast<std::size_t>(std::max(1.0, std::floor(f0_lo / bin)));
  const auto k_hi = std::min(spec.magnitude.size() - 2, static_cast<std::size_t>(std::ceil(band_hi / bin)));

  std::vector<double> band(spec.magnitude.begin() + static_cast<std::ptrdiff_t>(k_lo),
                           spec.magnitude.begin() + static_cast<std::ptrdiff_t>(k_hi) + 1);
  const double floor_level = detail::median(band);
  const double peak_gate = floor_level * std::pow(10.0, cfg.floor_db / 20.0);
  const double detect_gate = floor_level * std::pow(10.0, cfg.detect_db / 20.0);

  SpectralPeaks out;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    double m = spec.magnitude[k];
    if (m <= peak_gate || m < spec.magnitude[k - 1] || m <= spec.magnitude[k + 1]) continue;
    // Parabolic interpolation on log magnitude.
    double a = std::log(std::max(spec.magnitude[k - 1], 1e-300));
    double b = std::log(m);
    double c = std::log(std::max(spec.magnitude[k + 1], 1e-300));
    double den = a - 2.0 * b + c;
    double off = den < 0 ? 0.5 * (a - c) / den : 0.0;
    off = std::clamp(off, -0.5, 0.5);
    SpectralPeak p;
    p.freq = (static_cast<double>(k) + off) * bin;
    p.amplitude = std::exp(b - 0.25 * (a - c) * off);
    out.peaks.push_back(p);
  }
  if (out.peaks.empty() || floor_level <= 0.0) fail(ErrorCode::NoSignal, "no spectral peak above the noise floor");

  struct Family {
    double f0 = 0.0, score = 0.0, bpf = 0.0;
    std::vector<std::pair<std::size_t, int>> members;  // peak index, harmonic number
  };
  std::vector<char> claimed(out.peaks.size(), 0);
  auto score_family = [&](double f0) {
    Family fam;
    fam.f0 = f0;
    double num = 0.0;
    for (int j = 1; j <= cfg.max_harmonic; ++j) {
      double target = j * f0;
      double tol = 0.5 * bin + cfg.rel_tol * j * f0;
      std::size_t best = out.peaks.size();
      for (std::size_t i = 0; i < out.peaks.size(); ++i) {
        if (claimed[i] || std::abs(out.peaks[i].freq - target) > tol) continue;
        if (best == out.peaks.size() || out.peaks[i].amplitude > out.peaks[best].amplitude) best = i;
      }
      if (best == out.peaks.size()) continue;
      fam.members.emplace_back(best, j);
      fam.score += out.peaks[best].amplitude;
      num += out.peaks[best].amplitude * out.peaks[best].freq / j;
    }
    fam.bpf = fam.score > 0 ? num / fam.score : 0.0;
    return fam;
  };
  auto best_family = [&]() {
    Family best;
    for (std::size_t i = 0; i < out.peaks.size(); ++i) {
      if (claimed[i]) continue;
      for (int j = 1; j <= cfg.max_harmonic; ++j) {
        double f0 = out.peaks[i].freq / j;
        if (f0 < f0_lo || f0 > f0_hi) continue;
        Family fam = score_family(f0);
        // Refine once around the weighted estimate, then keep the best; ties go to lower frequency.
        if (fam.bpf > 0) {
          Family again = score_family(fam.bpf);
          if (again.score >= fam.score) fam = again;
        }
        if (fam.score > best.score * (1.0 + 1e-12) ||
            (std::abs(fam.score - best.score) <= 1e-12 * best.score && fam.bpf < best.bpf))
          best = fam;
      }
    }
    return best;
  };

  Family first = best_family();
  double strongest = 0.0;
  for (auto [i, j] : first.members) strongest = std::max(strongest, out.peaks[i].amplitude);
  if (first.members.empty() || strongest < detect_gate)
    fail(ErrorCode::NoSignal, "no harmonic family above the detection threshold");
  std::vector<Family> families{first};
  for (auto [i, j] : first.members) claimed[i] = 1;
  Family second = best_family();
  if (!second.members.empty() && second.score >= cfg.second_ratio * first.score) {
    families.push_back(second);
  }
  for (std::size_t g = 0; g < families.size(); ++g) {
    for (auto [i, j] : families[g].members) {
      out.peaks[i].harmonic = j;
      out.peaks[i].group = static_cast<int>(g);
    }
    out.groups.push_back({families[g].bpf, families[g].score});
  }
  return out;
}

/// 2 when two fundamental groups are farther apart than merge_hz, else 1.
inline int peak_group_count(const SpectralPeaks& peaks, double merge_hz = 4.0) {
  if (peaks.groups.size() < 2) return 1;
  return std::abs(peaks.groups[0].bpf - peaks.groups[1].bpf) > merge_hz ? 2 : 1;
}

/// Weighted BPF across every detected family (the single-group estimate when the groups merge).
inline double combined_bpf(const SpectralPeaks& peaks) {
  double num = 0.0, den = 0.0;
  for (const auto& g : peaks.groups) {
    num += g.weight * g.bpf;
    den += g.weight;
  }
  return den > 0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------------------------
// MFCC

struct MfccConfig {
  int n_mels = 20;
  int n_coeffs = 13;
  double window = 0.025;
  double hop = 0.010;
  double f_min = 0.0;
  double f_max = 8000.0;
};

namespace detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filterbank, n_mels x (nfft/2 + 1).
inline Eigen::MatrixXd mel_filterbank(int n_mels, std::size_t nfft, double fs, double f_min, double f_max) {
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, static_cast<Eigen::Index>(nfft / 2 + 1));
  double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(std::min(f_max, 0.5 * fs));
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  for (int m = 0; m < n_mels; ++m) {
    double l = edges[static_cast<std::size_t>(m)], c = edges[static_cast<std::size_t>(m) + 1],
           r = edges[static_cast<std::size_t>(m) + 2];
    for (Eigen::Index k = 0; k < fb.cols(); ++k) {
      double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
      if (f > l && f < c) fb(m, k) = (f - l) / (c - l);
      else if (f >= c && f < r) fb(m, k) = (r - f) / (r - c);
    }
  }
  return fb;
}

}  // namespace detail

/// Cepstra per sub-window (columns). c0 is dropped and each column is L2-normalized, so the
/// result does not depend on the input gain.
inline Eigen::MatrixXd mfcc(const std::vector<double>& signal, double fs, const MfccConfig& cfg = {}) {
  auto win = static_cast<std::size_t>(std::lround(cfg.window * fs));
  auto hop = static_cast<std::size_t>(std::lround(cfg.hop * fs));
  require(win > 0 && hop > 0, "mfcc window and hop must be positive");
  if (signal.size() < win) fail(ErrorCode::InvalidInput, "signal shorter than one MFCC window");
  std::size_t nfft = fft::next_pow2(win);
  std::size_t frames = 1 + (signal.size() - win) / hop;
  Eigen::MatrixXd fb = detail::mel_filterbank(cfg.n_mels, nfft, fs, cfg.f_min, cfg.f_max);
  auto w = fft::hann(win);

  Eigen::MatrixXd energies(cfg.n_mels, static_cast<Eigen::Index>(frames));
  std::vector<double> buf(win);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < win; ++i) buf[i] = signal[t * hop + i] * w[i];
    auto spec = fft::rfft(buf, nfft);
    Eigen::VectorXd power(static_cast<Eigen::Index>(spec.size()));
    for (std::size_t k = 0; k < spec.size(); ++k) power(static_cast<Eigen::Index>(k)) = std::norm(spec[k]);
    energies.col(static_cast<Eigen::Index>(t)) = fb * power;
  }
  // Log floor relative to the loudest band keeps the transform scale-free.
  double ref = std::max(energies.maxCoeff(), 1e-300);
  Eigen::MatrixXd logmel = (energies.array() + 1e-10 * ref).log().matrix();

  // Orthonormal DCT-II, rows 1..n_coeffs.
  const int m = cfg.n_mels;
  Eigen::MatrixXd dct(cfg.n_coeffs, m);
  for (int q = 1; q <= cfg.n_coeffs; ++q)
    for (int i = 0; i < m; ++i) dct(q - 1, i) = std::sqrt(2.0 / m) * std::cos(kPi * q * (i + 0.5) / m);
  Eigen::MatrixXd cep = dct * logmel;
  for (Eigen::Index t = 0; t < cep.cols(); ++t) {
    double n = cep.col(t).norm();
    if (n > 0) cep.col(t) /= n;
  }
  return cep;
}

/// MFCC of the channel-averaged frame.
inline Eigen::MatrixXd mfcc(const MultiChannelFrame& frame, int n_mels, int n_coeffs) {
  Eigen::VectorXd avg = frame.channels.colwise().mean();
  std::vector<double> x(avg.data(), avg.data() + avg.size());
  MfccConfig cfg;
  cfg.n_mels = n_mels;
  cfg.n_coeffs = n_coeffs;
  return mfcc(x, frame.sample_rate, cfg);
}

/// Column mean of an MFCC matrix, re-normalized.
inline Eigen::VectorXd mean_mfcc(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v = m.rowwise().mean();
  double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace aim
