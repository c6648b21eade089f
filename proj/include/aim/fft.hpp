// Real-signal FFT helpers on top of Eigen's FFT module (kissfft backend).
#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>
#include <numbers>
#include <cstddef>
#include <span>
#include <vector>

namespace aim::fft {

using Complex = std::complex<double>;

inline Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> e = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return e;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// One-sided spectrum (nfft/2 + 1 bins) of `x` zero-padded (or truncated) to nfft.
inline std::vector<Complex> rfft(std::span<const double> x, std::size_t nfft) {
  std::vector<double> buf(nfft, 0.0);
  for (std::size_t i = 0; i < std::min(nfft, x.size()); ++i) buf[i] = x[i];
  std::vector<Complex> out;
  engine().fwd(out, buf);
  out.resize(nfft / 2 + 1);
  return out;
}

/// Inverse of rfft; `spec` holds nfft/2 + 1 bins. Output is scaled by 1/nfft.
inline std::vector<double> irfft(std::span<const Complex> spec, std::size_t nfft) {
  std::vector<Complex> half(spec.begin(), spec.end());
  half.resize(nfft / 2 + 1);
  std::vector<double> out;
  engine().inv(out, half);
  out.resize(nfft);
  return out;
}

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

}  // namespace aim::fft
