// Multi-channel audio synthesis: rotor harmonics, propagation with an NLoS image path,
// ambient noise sources, sensor noise, beacon emissions and per-array clock skew.
#pragma once

#include "aim/fft.hpp"
#include "aim/flight.hpp"

#include <random>
#include <string>
#include <vector>

namespace aim {

/// Audio captured by one array: channels[c][n] is element c at local time n / sample_rate.
struct Recording {
  ArrayGeometry geometry;
  double sample_rate = 48000.0;
  std::vector<std::vector<float>> channels;

  std::size_t samples() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return static_cast<double>(samples()) / sample_rate; }
};

namespace detail {

/// Independent generator for one purpose/stream of a scenario.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

/// Band-limited Gaussian noise of length n built in the frequency domain, unit RMS.
inline std::vector<fft::Complex> noise_spectrum(std::size_t nfft, double fs, double lo, double hi,
                                                std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<fft::Complex> spec(nfft / 2 + 1);
  double power = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    if (f < lo || f > hi) continue;
    spec[k] = {g(rng), g(rng)};
    power += std::norm(spec[k]);
  }
  // Time-domain mean square of irfft output = 2 * sum |X_k|^2 / nfft^2 for one-sided bins.
  double ms = 2.0 * power / (static_cast<double>(nfft) * static_cast<double>(nfft));
  if (ms > 0)
    for (auto& c : spec) c /= std::sqrt(ms);
  return spec;
}

/// Adds gain * x(n - delay) to out using a frequency-domain fractional delay.
inline void add_delayed(std::vector<float>& out, const std::vector<double>& x, double delay_samples, double gain) {
  const long pad = 256;
  long shift = static_cast<long>(std::floor(delay_samples));
  double frac = delay_samples - static_cast<double>(shift);
  std::size_t nfft = fft::next_pow2(x.size() + 2 * pad);
  std::vector<double> buf(nfft, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) buf[i + pad] = x[i];
  auto spec = fft::rfft(buf, nfft);
  for (std::size_t k = 0; k < spec.size(); ++k)
    spec[k] *= std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * frac / static_cast<double>(nfft));
  auto y = fft::irfft(spec, nfft);
  for (std::size_t i = 0; i < nfft; ++i) {
    long n = static_cast<long>(i) - pad + shift;
    if (n >= 0 && n < static_cast<long>(out.size())) out[static_cast<std::size_t>(n)] += static_cast<float>(gain * y[i]);
  }
}

}  // namespace detail

/// Beacon waveform: pseudo-random noise confined to [low, high], identical for every emission,
/// scaled to the beacon level at 1 m.
inline std::vector<double> emit_beacon(const Scenario& sc) {
  if (sc.sample_rate < 40000.0) fail(ErrorCode::InvalidInput, "beacon needs sample_rate >= 40 kHz");
  auto n = static_cast<std::size_t>(std::lround(sc.beacon.length * sc.sample_rate));
  if (n < 16) fail(ErrorCode::InvalidInput, "beacon length too short");
  auto rng = detail::stream_rng(sc.seed, 0xBEAC);
  auto spec = detail::noise_spectrum(n, sc.sample_rate, sc.beacon.low, sc.beacon.high, rng);
  auto w = fft::irfft(spec, n);
  double scale = spl_to_pa(sc.beacon.spl);
  for (auto& v : w) v *= scale;
  return w;
}

/// True emission times of every beacon that can reach an array inside [0, duration].
inline std::vector<double> beacon_times(const Scenario& sc) {
  std::vector<double> t;
  if (!sc.beacon.enabled) return t;
  for (double e = sc.beacon.first_emission; e < sc.duration(); e += sc.beacon.period) t.push_back(e);
  return t;
}

namespace detail {

/// Rotor phase integrals on the truth grid: phase[i][k] = 2*pi * blades * integral of f_i up to step k.
inline std::vector<std::vector<double>> rotor_phases(const GroundTruth& truth, int blades) {
  std::size_t rotors = truth.steps.front().rotor_freqs.size();
  std::vector<std::vector<double>> ph(rotors, std::vector<double>(truth.steps.size(), 0.0));
  for (std::size_t i = 0; i < rotors; ++i)
    for (std::size_t k = 1; k < truth.steps.size(); ++k)
      ph[i][k] = ph[i][k - 1] + kPi * blades * truth.step *
                                    (truth.steps[k - 1].rotor_freqs[i] + truth.steps[k].rotor_freqs[i]);
  return ph;
}

struct PathSample {
  double emit_time;  // true emission time
  double gain;       // amplitude factor including spreading
};

}  // namespace detail

/// Renders every array's recording for a planned flight.
inline std::vector<Recording> synthesize(const GroundTruth& truth, const Scenario& sc) {
  validate(sc);
  require(!truth.steps.empty() && truth.duration() + 1e-9 >= sc.duration() - sc.sim_step,
          "ground truth must cover the scenario");
  const double fs = sc.sample_rate;
  const double dt = truth.step;
  const auto n_samples = static_cast<std::size_t>(std::floor(sc.duration() * fs));
  const DroneProfile& p = sc.profile;
  const std::size_t rotors = static_cast<std::size_t>(p.rotor_count);
  const auto phase = detail::rotor_phases(truth, p.blade_count);

  // Per-rotor phase offsets in [0, pi/2) keep rotors from cancelling on a shared frequency.
  std::vector<fft::Complex> rotor_offset(rotors);
  {
    auto rng = detail::stream_rng(sc.seed, 0xF00D);
    std::uniform_real_distribution<double> u(0.0, 0.5 * kPi);
    for (auto& o : rotor_offset) o = std::polar(1.0, u(rng));
  }
  // Hover level at 1 m: rotors share a frequency, so they add with their fixed phase offsets.
  double decay_power = 0.0;
  for (int k = 0; k < sc.harmonics; ++k) decay_power += std::pow(sc.harmonic_decay, 2.0 * k);
  fft::Complex phasor_sum = 0.0;
  for (const auto& o : rotor_offset) phasor_sum += o;
  const double a0 = spl_to_pa(p.spl_1m) * std::sqrt(2.0 / (std::norm(phasor_sum) * decay_power));
  const double noise_sigma = spl_to_pa(sc.noise_floor_db);

  // Evaluates the rotor field at emission time te (before spreading).
  auto emitted = [&](double te) {
    double x = te / dt;
    double sum = 0.0;
    std::size_t last = truth.steps.size() - 1;
    for (std::size_t i = 0; i < rotors; ++i) {
      double ph, f;
      if (x <= 0.0) {
        f = truth.steps.front().rotor_freqs[i];
        ph = 2.0 * kPi * p.blade_count * f * te;
      } else if (x >= static_cast<double>(last)) {
        f = truth.steps.back().rotor_freqs[i];
        ph = phase[i][last] + 2.0 * kPi * p.blade_count * f * (te - static_cast<double>(last) * dt);
      } else {
        auto k = static_cast<std::size_t>(x);
        double s = te - static_cast<double>(k) * dt;
        double f0 = truth.steps[k].rotor_freqs[i], f1 = truth.steps[k + 1].rotor_freqs[i];
        f = f0 + (f1 - f0) * s / dt;
        ph = phase[i][k] + 2.0 * kPi * p.blade_count * (f0 * s + 0.5 * (f1 - f0) * s * s / dt);
      }
      double ratio = f / p.hover_freq;
      double amp = a0 * ratio * ratio;
      fft::Complex z = std::polar(1.0, std::fmod(ph, 2.0 * kPi));
      fft::Complex zk = z * rotor_offset[i];
      for (int k = 0; k < sc.harmonics; ++k) {
        sum += amp * zk.imag();
        amp *= sc.harmonic_decay;
        zk *= z;
      }
    }
    return sum;
  };

  const auto beacon = sc.beacon.enabled ? emit_beacon(sc) : std::vector<double>{};
  const auto beacon_at = beacon_times(sc);

  std::vector<Recording> out;
  for (std::size_t a = 0; a < sc.arrays.size(); ++a) {
    const ArrayGeometry& geo = sc.arrays[a];
    Recording rec;
    rec.geometry = geo;
    rec.sample_rate = fs;
    rec.channels.assign(geo.size(), std::vector<float>(n_samples, 0.0f));

    // Reflection jitter: one random offset per 100 ms frame, scaled by the drone speed.
    const double frame = 0.1;
    auto n_frames = static_cast<std::size_t>(std::ceil(sc.duration() / frame)) + 3;
    std::vector<Vec3> jitter(n_frames);
    {
      auto rng = detail::stream_rng(sc.seed, 0x1E1F, a);
      std::normal_distribution<double> g;
      for (auto& j : jitter) j = Vec3(g(rng), g(rng), g(rng));
    }
    auto jitter_at = [&](double te) {
      double x = std::clamp(te / frame, 0.0, static_cast<double>(n_frames - 2));
      auto k = static_cast<std::size_t>(x);
      double w = x - static_cast<double>(k);
      double speed = truth.at(te).velocity.norm();
      return (sc.nlos_jitter * speed) * ((1.0 - w) * jitter[k] + w * jitter[k + 1]);
    };

    for (std::size_t c = 0; c < geo.size(); ++c) {
      const Vec3 mic = geo.element_position(c);
      // Propagation on a coarse receive-time grid, interpolated per sample.
      const double grid = dt;
      auto n_grid = static_cast<std::size_t>(std::ceil(static_cast<double>(n_samples) / fs / grid)) + 2;
      std::vector<detail::PathSample> path(n_grid);
      for (std::size_t g = 0; g < n_grid; ++g) {
        double t_true = static_cast<double>(g) * grid - geo.clock_offset;
        double te = t_true;
        Vec3 src = truth.position(std::max(te, 0.0));
        double r = 0.0;
        double gain = 1.0;
        for (int it = 0; it < 4; ++it) {
          src = truth.position(std::max(te, 0.0));
          int blocker = blocking_obstacle(src, mic, sc.obstacles);
          if (blocker >= 0) {
            // The jitter moves the apparent direction only: the path length to the array centre
            // follows the clean image, so it adds no Doppler of its own.
            const auto& box = sc.obstacles[static_cast<std::size_t>(blocker)];
            Vec3 image = mirror_across_nearest_face(src, box);
            Vec3 seen = mirror_across_nearest_face(src + jitter_at(te), box);
            r = (image - geo.origin).norm() + (seen - mic).norm() - (seen - geo.origin).norm();
            gain = sc.nlos_attenuation;
          } else {
            r = (src - mic).norm();
            gain = 1.0;
          }
          te = t_true - r / kSpeedOfSound;
        }
        path[g] = {te, gain / std::max(r, 0.05)};
      }
      auto& ch = rec.channels[c];
      for (std::size_t n = 0; n < n_samples; ++n) {
        double x = static_cast<double>(n) / fs / grid;
        auto g = static_cast<std::size_t>(x);
        double w = x - static_cast<double>(g);
        double te = (1.0 - w) * path[g].emit_time + w * path[g + 1].emit_time;
        double gain = (1.0 - w) * path[g].gain + w * path[g + 1].gain;
        ch[n] = static_cast<float>(gain * emitted(te));
      }
    }

    // Ambient noise sources: stationary band-limited noise with exact fractional delays.
    std::size_t nfft = fft::next_pow2(n_samples + 4096);
    for (std::size_t s = 0; s < sc.noise_sources.size(); ++s) {
      const NoiseSource& ns = sc.noise_sources[s];
      auto rng = detail::stream_rng(sc.seed, 0x5050, s);
      auto base = detail::noise_spectrum(nfft, fs, ns.center_freq - 0.5 * ns.bandwidth,
                                         ns.center_freq + 0.5 * ns.bandwidth, rng);
      double level = spl_to_pa(ns.spl);
      for (std::size_t c = 0; c < geo.size(); ++c) {
        double r = (ns.position - geo.element_position(c)).norm();
        double delay = (r / kSpeedOfSound + geo.clock_offset) * fs;
        double gain = level / std::max(r, 0.05);
        std::vector<fft::Complex> spec(base.size());
        for (std::size_t k = 0; k < base.size(); ++k)
          spec[k] = gain * base[k] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * delay / static_cast<double>(nfft));
        auto y = fft::irfft(spec, nfft);
        for (std::size_t n = 0; n < n_samples; ++n) rec.channels[c][n] += static_cast<float>(y[n]);
      }
    }

    // Beacon emissions from the fixed speaker.
    for (double te : beacon_at)
      for (std::size_t c = 0; c < geo.size(); ++c) {
        double r = (sc.beacon.speaker - geo.element_position(c)).norm();
        double delay = (te + r / kSpeedOfSound + geo.clock_offset) * fs;
        detail::add_delayed(rec.channels[c], beacon, delay, 1.0 / std::max(r, 0.05));
      }

    // Sensor noise.
    {
      auto rng = detail::stream_rng(sc.seed, 0x0015, a);
      std::normal_distribution<double> g(0.0, noise_sigma);
      for (auto& ch : rec.channels)
        for (auto& v : ch) v += static_cast<float>(g(rng));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace aim
