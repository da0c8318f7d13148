#pragma once

// Signal-processing primitives shared by the speech features.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace classlens::dsp {

inline constexpr double kSilenceDb = -120.0;

inline double power_to_db(double power) {
  return power > 0.0 ? std::max(kSilenceDb, 10.0 * std::log10(power)) : kSilenceDb;
}

inline double rms_db(std::span<const double> x) {
  if (x.empty()) return kSilenceDb;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return power_to_db(acc / static_cast<double>(x.size()));
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

inline std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

/// Per-thread engine so FFT plans are reused across frames.
inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

/// Full complex spectrum of a real signal zero-padded to `nfft`.
inline std::vector<std::complex<double>> spectrum(std::span<const double> x, std::size_t nfft) {
  std::vector<double> buf(nfft, 0.0);
  std::copy_n(x.begin(), std::min(x.size(), nfft), buf.begin());
  std::vector<std::complex<double>> out;
  fft_engine().fwd(out, buf);
  return out;
}

/// Real cepstrum-domain transform: inverse FFT of a real, symmetric spectrum.
inline std::vector<double> inverse_real(const std::vector<std::complex<double>>& spec) {
  std::vector<double> out;
  fft_engine().inv(out, spec);
  return out;
}

/// Parabolic peak offset in (-0.5, 0.5) from three neighbouring values.
inline double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (denom == 0.0) return 0.0;
  const double d = 0.5 * (left - right) / denom;
  return std::clamp(d, -0.5, 0.5);
}

/// Autocorrelation r[0..order] of a windowed frame.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t order) {
  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order && lag < x.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < x.size(); ++i) acc += x[i] * x[i + lag];
    r[lag] = acc;
  }
  return r;
}

/// Levinson-Durbin recursion. Returns the prediction polynomial
/// [1, a1, ..., ap] or nullopt when a reflection coefficient leaves (-1, 1).
inline std::optional<std::vector<double>> levinson(const std::vector<double>& r, std::size_t order) {
  if (r.size() <= order || r[0] <= 0.0) return std::nullopt;
  std::vector<double> a(order + 1, 0.0), prev(order + 1, 0.0);
  a[0] = 1.0;
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = -acc / err;
    if (!(std::abs(k) < 1.0)) return std::nullopt;
    prev = a;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= (1.0 - k * k);
    if (err <= 0.0) return std::nullopt;
  }
  return a;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline double semitones(double hz, double ref = 100.0) { return 12.0 * std::log2(hz / ref); }

}  // namespace classlens::dsp
