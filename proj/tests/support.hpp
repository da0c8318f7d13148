#pragma once

// Signal and fixture helpers shared by the test suites. Generators here are
// written from first principles so they can serve as oracles.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "classlens/ingest.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using classlens::AudioClip;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline AudioClip silence(double seconds, int rate = 16000) {
  return {rate, std::vector<double>(static_cast<std::size_t>(std::lround(seconds * rate)), 0.0)};
}

inline AudioClip sine(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  AudioClip c = silence(seconds, rate);
  for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i] = amp * std::sin(kTwoPi * hz * i / rate);
  return c;
}

inline AudioClip white_noise(double seconds, std::uint64_t seed, double rms = 0.1, int rate = 16000) {
  AudioClip c = silence(seconds, rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, rms);
  for (auto& s : c.samples) s = n(rng);
  return c;
}

/// Unit impulses every `period` samples starting at `offset`.
inline AudioClip pulse_train(std::size_t period, double seconds, double amp = 0.5, int rate = 16000,
                             std::size_t offset = 0) {
  AudioClip c = silence(seconds, rate);
  for (std::size_t i = offset; i < c.samples.size(); i += period) c.samples[i] = amp;
  return c;
}

/// Two-pole resonator y[n] = x[n] + a1 y[n-1] + a2 y[n-2] centred at `hz`.
inline std::vector<double> resonate(const std::vector<double>& x, double hz, double bandwidth, int rate) {
  const double r = std::exp(-std::numbers::pi * bandwidth / rate);
  const double a1 = 2.0 * r * std::cos(kTwoPi * hz / rate);
  const double a2 = -r * r;
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = x[n];
    if (n >= 1) y[n] += a1 * y[n - 1];
    if (n >= 2) y[n] += a2 * y[n - 2];
  }
  return y;
}

/// Impulse-excited vowel through the given resonances, scaled to `peak`.
inline AudioClip vowel(double f0, const std::vector<std::pair<double, double>>& formants, double seconds,
                       double peak = 0.5, int rate = 16000) {
  AudioClip c = silence(seconds, rate);
  double phase = 0.0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    phase += f0 / rate;
    if (phase >= 1.0) {
      phase -= 1.0;
      c.samples[i] = 1.0;
    }
  }
  for (const auto& [hz, bw] : formants) c.samples = resonate(c.samples, hz, bw, rate);
  double mx = 0.0;
  for (double v : c.samples) mx = std::max(mx, std::abs(v));
  if (mx > 0.0)
    for (auto& v : c.samples) v *= peak / mx;
  return c;
}

/// Adds a harmonic tone burst over [start, end) with 3 ms raised-cosine edges.
inline void add_burst(AudioClip& c, double start, double end, double f0 = 150.0, double amp = 0.3) {
  const int rate = c.sample_rate;
  const auto i0 = static_cast<std::size_t>(std::lround(start * rate));
  const auto i1 = std::min(c.samples.size(), static_cast<std::size_t>(std::lround(end * rate)));
  const double ramp = 0.003 * rate;
  for (std::size_t i = i0; i < i1; ++i) {
    const double t = static_cast<double>(i - i0) / rate;
    double v = 0.0;
    for (int k = 1; k <= 10; ++k) v += std::sin(kTwoPi * k * f0 * t) / k;
    double env = 1.0;
    const double a = static_cast<double>(i - i0), b = static_cast<double>(i1 - 1 - i);
    if (a < ramp) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * a / ramp);
    if (b < ramp) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * b / ramp);
    c.samples[i] += amp * 0.5 * env * v;
  }
}

inline void add_noise(AudioClip& c, double rms, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, rms);
  for (auto& s : c.samples) s += n(rng);
}

/// Fresh empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("classlens_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace testing_support
