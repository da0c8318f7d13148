#pragma once

// Teacher speech analysis: energy VAD, pitch, voice quality, formants,
// syllable-rate estimation and the coarse/fine window aggregation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classlens/core.hpp"
#include "classlens/dsp.hpp"
#include "classlens/ingest.hpp"

namespace classlens {

struct SpeechParams {
  // VAD
  double frame_length = 0.025;
  double hop = 0.010;
  double vad_delta_db = 9.0;
  double noise_percentile = 0.10;
  double gap_close = 0.2;
  double min_utterance = 0.125;
  double refine_block = 0.005;
  // pitch
  double pitch_window = 0.040;
  double f0_min = 75.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.45;
  double octave_ratio = 0.9;  // earliest peak within this fraction of the best wins
  // formants
  double formant_window = 0.030;
  double formant_min_hz = 90.0;
  double formant_prominence_db = 3.0;
  // speaking rate
  double syllable_smoothing = 0.120;
  double syllable_prominence_db = 2.0;
  double syllables_per_word = 1.5;
  // windows
  double coarse_window = 60.0;
  double fine_window = 10.0;
  double intonation_ref_semitones = 2.0;
};

struct Utterance {
  TimeInterval interval;
};

// Frame grid ----------------------------------------------------------------

struct FrameGrid {
  std::size_t frame_samples = 0;
  std::size_t hop_samples = 0;
  std::size_t count = 0;
  int rate = 0;

  std::size_t start(std::size_t i) const { return i * hop_samples; }
  Timestamp center(std::size_t i) const {
    return (static_cast<double>(start(i)) + static_cast<double>(frame_samples) / 2.0) / rate;
  }
};

inline FrameGrid frame_grid(const AudioClip& clip, const SpeechParams& p) {
  FrameGrid g;
  g.rate = clip.sample_rate;
  g.frame_samples = static_cast<std::size_t>(std::lround(p.frame_length * clip.sample_rate));
  g.hop_samples = static_cast<std::size_t>(std::lround(p.hop * clip.sample_rate));
  if (clip.samples.size() >= g.frame_samples && g.frame_samples > 0 && g.hop_samples > 0)
    g.count = (clip.samples.size() - g.frame_samples) / g.hop_samples + 1;
  return g;
}

namespace detail {

/// Prefix sums of squared samples for O(1) window energies.
struct EnergyIndex {
  std::vector<double> prefix;
  explicit EnergyIndex(const std::vector<double>& x) : prefix(x.size() + 1, 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  }
  double db(std::size_t begin, std::size_t end) const {
    if (end <= begin) return dsp::kSilenceDb;
    const double e = std::max(0.0, prefix[end] - prefix[begin]);
    return dsp::power_to_db(e / static_cast<double>(end - begin));
  }
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return dsp::kSilenceDb;
  const std::size_t k = std::min(v.size() - 1, static_cast<std::size_t>(q * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace detail

/// Frame loudness (RMS dBFS) over the analysis grid.
inline std::vector<double> frame_loudness(const AudioClip& clip, const SpeechParams& p) {
  const FrameGrid g = frame_grid(clip, p);
  const detail::EnergyIndex energy(clip.samples);
  std::vector<double> db(g.count);
  for (std::size_t i = 0; i < g.count; ++i) db[i] = energy.db(g.start(i), g.start(i) + g.frame_samples);
  return db;
}

// Voice activity ------------------------------------------------------------

struct VadResult {
  std::vector<Utterance> utterances;
  double noise_floor_db = dsp::kSilenceDb;
  double threshold_db = dsp::kSilenceDb;
};

/// Energy VAD. A frame is speech when its RMS exceeds the 10th-percentile
/// frame level by delta dB. Speech runs get sample-accurate boundaries from a
/// short-block energy scan, gaps shorter than `gap_close` are bridged, and
/// segments shorter than `min_utterance` are discarded.
inline VadResult detect_voice_activity(const AudioClip& clip, const SpeechParams& p = {}) {
  VadResult out;
  const FrameGrid g = frame_grid(clip, p);
  if (g.count == 0) return out;
  const detail::EnergyIndex energy(clip.samples);

  std::vector<double> db(g.count);
  for (std::size_t i = 0; i < g.count; ++i) db[i] = energy.db(g.start(i), g.start(i) + g.frame_samples);
  out.noise_floor_db = detail::percentile(db, p.noise_percentile);
  out.threshold_db = out.noise_floor_db + p.vad_delta_db;

  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(p.refine_block * g.rate)));
  const std::size_t step = std::max<std::size_t>(1, static_cast<std::size_t>(g.rate / 1000));
  const std::size_t n = clip.samples.size();
  const double rate = g.rate;

  std::vector<TimeInterval> raw;
  std::size_t i = 0;
  while (i < g.count) {
    if (db[i] <= out.threshold_db) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < g.count && db[j + 1] > out.threshold_db) ++j;

    // Refine the onset: first short block above threshold inside the first frame.
    const std::size_t s0 = g.start(i);
    double start = (static_cast<double>(s0) + g.frame_samples / 2.0 - g.hop_samples / 2.0) / rate;
    for (std::size_t b = s0; b + block <= std::min(n, s0 + g.frame_samples + block); b += step) {
      if (energy.db(b, b + block) > out.threshold_db) {
        start = (static_cast<double>(b) + block / 2.0) / rate;
        break;
      }
    }
    // Refine the offset: last short block above threshold inside the last frame.
    const std::size_t e0 = std::min(n, g.start(j) + g.frame_samples);
    double end = (static_cast<double>(g.start(j)) + g.frame_samples / 2.0 + g.hop_samples / 2.0) / rate;
    const std::size_t lo = e0 > g.frame_samples + block ? e0 - g.frame_samples - block : 0;
    for (std::size_t b = e0 >= block ? e0 - block : 0;; b = b >= step ? b - step : 0) {
      if (energy.db(b, b + block) > out.threshold_db) {
        end = (static_cast<double>(b) + block / 2.0) / rate;
        break;
      }
      if (b <= lo || b == 0) break;
    }
    if (end < start) std::swap(start, end);
    raw.push_back({std::max(0.0, start), std::min(clip.duration(), end)});
    i = j + 1;
  }

  // Bridge short gaps, then enforce the minimum duration.
  std::vector<TimeInterval> merged;
  for (const auto& iv : raw) {
    if (!merged.empty() && iv.start - merged.back().end < p.gap_close)
      merged.back().end = std::max(merged.back().end, iv.end);
    else
      merged.push_back(iv);
  }
  for (const auto& iv : merged)
    if (iv.duration() >= p.min_utterance) out.utterances.push_back({iv});
  return out;
}

inline std::vector<Utterance> segment_utterances(const AudioClip& clip, const SpeechParams& p = {}) {
  return detect_voice_activity(clip, p).utterances;
}

// Pitch ---------------------------------------------------------------------

struct PitchFrame {
  Timestamp time = 0.0;
  std::optional<double> f0_hz;
  double voicing_prob = 0.0;
};

/// Normalized-autocorrelation pitch on a 40 ms window centred at each time.
/// The earliest lag peak within `octave_ratio` of the best peak is taken and
/// refined parabolically. Peaks below the voicing threshold are unvoiced.
inline std::vector<PitchFrame> estimate_pitch(const AudioClip& clip, std::span<const double> times,
                                              const SpeechParams& p = {}) {
  std::vector<PitchFrame> out;
  out.reserve(times.size());
  const double rate = clip.sample_rate;
  const std::size_t win = static_cast<std::size_t>(std::lround(p.pitch_window * rate));
  const std::size_t lag_min = static_cast<std::size_t>(std::floor(rate / p.f0_max));
  const std::size_t lag_max = static_cast<std::size_t>(std::ceil(rate / p.f0_min));
  std::vector<double> x(win), r(lag_max + 2, 0.0), sq_prefix(win + 1, 0.0);
  const std::size_t nfft = dsp::next_pow2(2 * win);

  for (double t : times) {
    PitchFrame pf{t, std::nullopt, 0.0};
    const double first = std::round(t * rate - win / 2.0);
    if (first < 0 || first + win > clip.samples.size() || lag_max + 2 >= win) {
      out.push_back(pf);
      continue;
    }
    const auto begin = static_cast<std::size_t>(first);
    double m = 0.0;
    for (std::size_t i = 0; i < win; ++i) m += clip.samples[begin + i];
    m /= static_cast<double>(win);
    for (std::size_t i = 0; i < win; ++i) {
      x[i] = clip.samples[begin + i] - m;
      sq_prefix[i + 1] = sq_prefix[i] + x[i] * x[i];
    }
    if (sq_prefix[win] <= 1e-12 * static_cast<double>(win)) {
      out.push_back(pf);
      continue;
    }
    // Raw lag products via the power spectrum (zero-padded, so no wrap).
    auto spec = dsp::spectrum(x, nfft);
    for (auto& c : spec) c = std::norm(c);
    const auto raw = dsp::inverse_real(spec);
    for (std::size_t lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      const std::size_t len = win - lag;
      const double acc = raw[lag];
      const double e0 = sq_prefix[len];
      const double e1 = sq_prefix[win] - sq_prefix[lag];
      r[lag] = (e0 > 0 && e1 > 0) ? acc / std::sqrt(e0 * e1) : 0.0;
    }
    double best = -1.0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag)
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) best = std::max(best, r[lag]);
    if (best <= 0.0) {
      out.push_back(pf);
      continue;
    }
    std::size_t pick = 0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= p.octave_ratio * best) {
        pick = lag;
        break;
      }
    }
    const double d = dsp::parabolic_offset(r[pick - 1], r[pick], r[pick + 1]);
    const double peak = r[pick] - 0.25 * (r[pick - 1] - r[pick + 1]) * d;
    pf.voicing_prob = std::clamp(peak, 0.0, 1.0);
    if (peak >= p.voicing_threshold) pf.f0_hz = rate / (static_cast<double>(pick) + d);
    out.push_back(pf);
  }
  return out;
}

// Voice quality -------------------------------------------------------------

/// One glottal cycle ending at `time`.
struct GlottalCycle {
  Timestamp time = 0.0;
  double period = 0.0;      // seconds since the previous mark
  double amplitude = 0.0;   // peak value at this mark
  int run = 0;              // id of the voiced run the cycle belongs to
};

struct VoiceQuality {
  std::optional<double> jitter_pct;
  std::optional<double> shimmer_pct;
  std::optional<double> cpp_db;
};

/// Marks successive waveform peaks through each run of consecutive voiced
/// frames, searching one local period ahead (+/-20%) of the previous mark.
inline std::vector<GlottalCycle> glottal_cycles(const AudioClip& clip, const std::vector<PitchFrame>& frames,
                                                const SpeechParams& p = {}) {
  std::vector<GlottalCycle> out;
  const double rate = clip.sample_rate;
  const auto& x = clip.samples;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  int run_id = 0;

  auto argmax = [&](std::ptrdiff_t a, std::ptrdiff_t b) {
    std::ptrdiff_t best = a;
    for (std::ptrdiff_t i = a; i < b; ++i)
      if (x[static_cast<std::size_t>(i)] > x[static_cast<std::size_t>(best)]) best = i;
    return best;
  };
  auto refined = [&](std::ptrdiff_t i) {
    if (i <= 0 || i + 1 >= n) return static_cast<double>(i);
    return static_cast<double>(i) + dsp::parabolic_offset(x[static_cast<std::size_t>(i - 1)],
                                                          x[static_cast<std::size_t>(i)],
                                                          x[static_cast<std::size_t>(i + 1)]);
  };

  std::size_t i = 0;
  while (i < frames.size()) {
    if (!frames[i].f0_hz) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < frames.size() && frames[j + 1].f0_hz &&
           frames[j + 1].time - frames[j].time <= p.hop * 1.5)
      ++j;
    const auto region_begin = static_cast<std::ptrdiff_t>(std::max(0.0, std::floor((frames[i].time - p.hop / 2) * rate)));
    const auto region_end = std::min(n, static_cast<std::ptrdiff_t>(std::ceil((frames[j].time + p.hop / 2) * rate)));
    auto local_period = [&](std::ptrdiff_t at) {
      const double t = static_cast<double>(at) / rate;
      std::size_t k = i;
      while (k < j && std::abs(frames[k + 1].time - t) < std::abs(frames[k].time - t)) ++k;
      return rate / *frames[k].f0_hz;
    };

    const double t0 = local_period(region_begin);
    std::ptrdiff_t mark = argmax(region_begin, std::min(region_end, region_begin + static_cast<std::ptrdiff_t>(std::ceil(t0))));
    double mark_pos = refined(mark);
    while (true) {
      const double per = local_period(mark);
      const auto a = mark + static_cast<std::ptrdiff_t>(std::floor(0.8 * per));
      const auto b = mark + static_cast<std::ptrdiff_t>(std::ceil(1.2 * per)) + 1;
      if (b > region_end || a <= mark) break;
      const std::ptrdiff_t next = argmax(a, b);
      const double next_pos = refined(next);
      out.push_back({next_pos / rate, (next_pos - mark_pos) / rate, x[static_cast<std::size_t>(next)], run_id});
      mark = next;
      mark_pos = next_pos;
    }
    ++run_id;
    i = j + 1;
  }
  return out;
}

/// Jitter and shimmer (%) over cycle-to-cycle differences within runs that
/// hold at least three periods; nullopt when no run qualifies.
inline std::pair<std::optional<double>, std::optional<double>> jitter_shimmer(
    std::span<const GlottalCycle> cycles) {
  double dp = 0.0, da = 0.0, sp = 0.0, sa = 0.0;
  std::size_t ndiff = 0, nper = 0;
  std::size_t i = 0;
  while (i < cycles.size()) {
    std::size_t j = i;
    while (j + 1 < cycles.size() && cycles[j + 1].run == cycles[i].run) ++j;
    if (j - i + 1 >= 3) {
      for (std::size_t k = i; k <= j; ++k) {
        sp += cycles[k].period;
        sa += cycles[k].amplitude;
        ++nper;
        if (k > i) {
          dp += std::abs(cycles[k].period - cycles[k - 1].period);
          da += std::abs(cycles[k].amplitude - cycles[k - 1].amplitude);
          ++ndiff;
        }
      }
    }
    i = j + 1;
  }
  if (ndiff == 0 || sp <= 0.0) return {std::nullopt, std::nullopt};
  const double mean_p = sp / static_cast<double>(nper);
  const double mean_a = sa / static_cast<double>(nper);
  std::optional<double> shimmer;
  if (mean_a > 0.0) shimmer = 100.0 * (da / static_cast<double>(ndiff)) / mean_a;
  return {100.0 * (dp / static_cast<double>(ndiff)) / mean_p, shimmer};
}

/// Cepstral peak prominence (dB) of the 40 ms frame centred at `time`: the
/// power-cepstrum peak in the pitch quefrency band above a least-squares trend
/// line fitted from 1 ms to the Nyquist quefrency.
inline std::optional<double> cepstral_peak_prominence(const AudioClip& clip, double time,
                                                      const SpeechParams& p = {}) {
  const double rate = clip.sample_rate;
  const std::size_t win = static_cast<std::size_t>(std::lround(p.pitch_window * rate));
  const double first = std::round(time * rate - win / 2.0);
  if (first < 0 || first + win > clip.samples.size()) return std::nullopt;
  const auto begin = static_cast<std::size_t>(first);
  const auto w = dsp::hann(win);
  std::vector<double> frame(win);
  double energy = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    frame[i] = clip.samples[begin + i] * w[i];
    energy += frame[i] * frame[i];
  }
  if (energy <= 0.0) return std::nullopt;

  const std::size_t nfft = dsp::next_pow2(win);
  auto spec = dsp::spectrum(frame, nfft);
  for (auto& c : spec) c = 10.0 * std::log10(std::norm(c) + 1e-20);
  const auto ceps = dsp::inverse_real(spec);

  const std::size_t half = nfft / 2;
  std::vector<double> pc(half + 1);
  for (std::size_t i = 0; i <= half; ++i) pc[i] = 10.0 * std::log10(ceps[i] * ceps[i] + 1e-20);

  const std::size_t q_lo = static_cast<std::size_t>(std::ceil(rate / p.f0_max));
  const std::size_t q_hi = std::min(half, static_cast<std::size_t>(std::floor(rate / p.f0_min)));
  const std::size_t fit_lo = static_cast<std::size_t>(std::lround(0.001 * rate));
  if (q_lo >= q_hi || fit_lo >= half) return std::nullopt;

  std::size_t peak = q_lo;
  for (std::size_t i = q_lo; i <= q_hi; ++i)
    if (pc[i] > pc[peak]) peak = i;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = static_cast<double>(half - fit_lo + 1);
  for (std::size_t i = fit_lo; i <= half; ++i) {
    const double q = static_cast<double>(i);
    sx += q;
    sy += pc[i];
    sxx += q * q;
    sxy += q * pc[i];
  }
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / cnt;
  return pc[peak] - (icpt + slope * static_cast<double>(peak));
}

/// Jitter, shimmer and mean CPP. CPP averages over voiced frames, or over
/// all frames with signal when none are voiced.
inline VoiceQuality voice_quality(const AudioClip& clip, const std::vector<PitchFrame>& frames,
                                  const SpeechParams& p = {}) {
  VoiceQuality q;
  const auto cycles = glottal_cycles(clip, frames, p);
  std::tie(q.jitter_pct, q.shimmer_pct) = jitter_shimmer(cycles);

  const bool any_voiced = std::any_of(frames.begin(), frames.end(), [](const auto& f) { return f.f0_hz.has_value(); });
  double sum = 0.0;
  std::size_t cnt = 0;
  for (const auto& f : frames) {
    if (any_voiced && !f.f0_hz) continue;
    if (auto c = cepstral_peak_prominence(clip, f.time, p)) {
      sum += *c;
      ++cnt;
    }
  }
  if (cnt > 0) q.cpp_db = sum / static_cast<double>(cnt);
  return q;
}

// Formants ------------------------------------------------------------------

struct FormantFrame {
  Timestamp time = 0.0;
  std::optional<double> f1_hz;
  std::optional<double> f2_hz;
  bool incomplete = false;  // fewer than two resonances found
};

inline std::size_t lpc_order(int sample_rate) { return 2 + static_cast<std::size_t>(sample_rate / 1000); }

/// Formants of one frame from the linear-prediction envelope: the first two
/// envelope peaks above `formant_min_hz` that rise at least
/// `formant_prominence_db` over their surrounding dips. Unstable predictors
/// yield nullopt.
inline std::optional<FormantFrame> formants_at(const AudioClip& clip, double time, const SpeechParams& p = {}) {
  const double rate = clip.sample_rate;
  const std::size_t win = static_cast<std::size_t>(std::lround(p.formant_window * rate));
  const double first = std::round(time * rate - win / 2.0);
  if (first < 1 || first + win > clip.samples.size()) return std::nullopt;
  const auto begin = static_cast<std::size_t>(first);
  const double alpha = std::exp(-2.0 * std::numbers::pi * 50.0 / rate);
  const auto w = dsp::hamming(win);
  std::vector<double> frame(win);
  for (std::size_t i = 0; i < win; ++i)
    frame[i] = (clip.samples[begin + i] - alpha * clip.samples[begin + i - 1]) * w[i];

  const std::size_t order = lpc_order(clip.sample_rate);
  const auto a = dsp::levinson(dsp::autocorrelation(frame, order), order);
  if (!a) return std::nullopt;

  const std::size_t nfft = 2048;
  const auto spec = dsp::spectrum(*a, nfft);
  const std::size_t half = nfft / 2;
  std::vector<double> env(half + 1);
  for (std::size_t k = 0; k <= half; ++k) env[k] = -10.0 * std::log10(std::norm(spec[k]) + 1e-30);
  const double bin_hz = rate / static_cast<double>(nfft);

  std::vector<std::size_t> peaks;
  for (std::size_t k = 1; k < half; ++k)
    if (env[k] > env[k - 1] && env[k] >= env[k + 1] && k * bin_hz >= p.formant_min_hz) peaks.push_back(k);

  std::vector<double> found;
  for (std::size_t idx = 0; idx < peaks.size() && found.size() < 2; ++idx) {
    const std::size_t k = peaks[idx];
    // Lowest point between this peak and the nearest higher one on each side.
    double left_min = env[k];
    for (std::size_t m = k; m-- > 0;) {
      if (env[m] > env[k]) break;
      left_min = std::min(left_min, env[m]);
    }
    double right_min = env[k];
    for (std::size_t m = k + 1; m <= half; ++m) {
      if (env[m] > env[k]) break;
      right_min = std::min(right_min, env[m]);
    }
    if (env[k] - std::max(left_min, right_min) < p.formant_prominence_db) continue;
    const double d = dsp::parabolic_offset(env[k - 1], env[k], env[k + 1]);
    found.push_back((static_cast<double>(k) + d) * bin_hz);
  }

  FormantFrame f{time, std::nullopt, std::nullopt, true};
  if (!found.empty()) f.f1_hz = found[0];
  if (found.size() >= 2) {
    f.f2_hz = found[1];
    f.incomplete = false;
  }
  return f;
}

inline std::vector<FormantFrame> estimate_formants(const AudioClip& clip, const std::vector<PitchFrame>& frames,
                                                   const SpeechParams& p = {}) {
  std::vector<FormantFrame> out;
  for (const auto& f : frames) {
    if (!f.f0_hz) continue;
    if (auto ff = formants_at(clip, f.time, p)) out.push_back(*ff);
  }
  return out;
}

// Speaking rate -------------------------------------------------------------

struct SpeakingRate {
  double wpm = 0.0;
  std::vector<Timestamp> nuclei;
};

/// Syllable nuclei: peaks of the 120 ms smoothed intensity contour inside
/// utterances that rise at least 2 dB over the dips on both sides. Words per
/// minute over the whole session length use 1.5 syllables per word.
inline SpeakingRate speaking_rate(const std::vector<Utterance>& utterances, const AudioClip& clip,
                                  const SpeechParams& p = {}, std::optional<double> session_duration = std::nullopt) {
  SpeakingRate out;
  const double duration = session_duration.value_or(clip.duration());
  if (utterances.empty() || duration <= 0.0) return out;

  const FrameGrid g = frame_grid(clip, p);
  const auto db = frame_loudness(clip, p);
  const auto half = static_cast<std::ptrdiff_t>(std::lround(p.syllable_smoothing / p.hop / 2.0));
  std::vector<double> smooth(g.count);
  {
    std::vector<double> pw(g.count + 1, 0.0);
    for (std::size_t i = 0; i < g.count; ++i) pw[i + 1] = pw[i] + std::pow(10.0, db[i] / 10.0);
    const auto cnt = static_cast<std::ptrdiff_t>(g.count);
    for (std::ptrdiff_t i = 0; i < cnt; ++i) {
      const auto a = std::max<std::ptrdiff_t>(0, i - half);
      const auto b = std::min<std::ptrdiff_t>(cnt, i + half + 1);
      smooth[static_cast<std::size_t>(i)] = dsp::power_to_db((pw[static_cast<std::size_t>(b)] - pw[static_cast<std::size_t>(a)]) / static_cast<double>(b - a));
    }
  }

  for (const auto& u : utterances) {
    std::size_t lo = g.count, hi = 0;
    for (std::size_t i = 0; i < g.count; ++i) {
      const double c = g.center(i);
      if (c >= u.interval.start && c <= u.interval.end) {
        lo = std::min(lo, i);
        hi = std::max(hi, i);
      }
    }
    if (lo > hi) continue;
    std::size_t i = lo;
    while (i <= hi) {
      // Plateau [i, j] of equal values.
      std::size_t j = i;
      while (j + 1 <= hi && smooth[j + 1] == smooth[i]) ++j;
      const bool left_lower = i == lo || smooth[i - 1] < smooth[i];
      const bool right_lower = j == hi || smooth[j + 1] < smooth[i];
      if (left_lower && right_lower && !(i == lo && j == hi)) {
        const double v = smooth[i];
        double lmin = v, rmin = v;
        for (std::size_t m = i; m-- > lo;) {
          if (smooth[m] > v) break;
          lmin = std::min(lmin, smooth[m]);
        }
        // An equal peak to the right claims the tie.
        for (std::size_t m = j + 1; m <= hi; ++m) {
          if (smooth[m] >= v) break;
          rmin = std::min(rmin, smooth[m]);
        }
        if (v - std::max(lmin, rmin) >= p.syllable_prominence_db)
          out.nuclei.push_back((g.center(i) + g.center(j)) / 2.0);
      }
      i = j + 1;
    }
  }
  const double per_minute = static_cast<double>(out.nuclei.size()) / (duration / 60.0);
  out.wpm = per_minute / p.syllables_per_word;
  return out;
}

// Frame features and windows ------------------------------------------------

struct FrameFeatures {
  Timestamp time = 0.0;
  double loudness_db = dsp::kSilenceDb;
  std::optional<double> f0_hz;
  double voicing_prob = 0.0;
  bool speech = false;
  std::optional<double> cpp_db;
  std::optional<double> f1_hz;
  std::optional<double> f2_hz;
};

enum class WindowLevel { coarse, fine, session };

inline const char* to_string(WindowLevel l) {
  switch (l) {
    case WindowLevel::coarse: return "coarse";
    case WindowLevel::fine: return "fine";
    case WindowLevel::session: return "session";
  }
  return "fine";
}

struct StatisticalFeatures {
  std::optional<double> loudness_mean_db;
  std::optional<double> loudness_std_db;
  std::optional<double> pitch_mean_st;
  std::optional<double> pitch_std_st;
  std::optional<double> f1_hz;
  std::optional<double> f2_hz;
  std::optional<double> voicing_prob;
};

struct ContextualFeatures {
  std::size_t utterance_count = 0;
  std::optional<double> mean_utterance_len;
  std::optional<double> mean_pause_len;
  double speaking_rate_wpm = 0.0;
  double speech_fraction = 0.0;
};

struct LinguisticFeatures {
  std::optional<double> cpp_db;
  std::optional<double> jitter_pct;
  std::optional<double> shimmer_pct;
  std::optional<double> intonation_score;
};

struct WindowFeatures {
  TimeInterval interval;
  WindowLevel level = WindowLevel::fine;
  bool partial = false;
  StatisticalFeatures statistical;
  ContextualFeatures contextual;
  LinguisticFeatures linguistic;
};

/// Everything the window aggregation reads.
struct SpeechTrace {
  double duration = 0.0;
  std::vector<FrameFeatures> frames;  // sorted by time
  std::vector<Utterance> utterances;
  std::vector<GlottalCycle> cycles;
  std::vector<Timestamp> nuclei;
};

/// Tiles [0, duration] into windows of `length`; the last may be shorter.
inline std::vector<TimeInterval> tile_windows(double duration, double length) {
  std::vector<TimeInterval> out;
  if (duration <= 0.0 || length <= 0.0) return out;
  const auto n = static_cast<std::size_t>(std::ceil(duration / length - 1e-12));
  for (std::size_t k = 0; k < n; ++k)
    out.push_back({static_cast<double>(k) * length, std::min(duration, static_cast<double>(k + 1) * length)});
  return out;
}

namespace detail {

inline std::optional<double> opt_mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return dsp::mean(v);
}

inline double overlap(const TimeInterval& a, const TimeInterval& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

}  // namespace detail

/// Features for one window. Frames and cycles belong to the window holding
/// their time in [start, end); utterances and pauses count when they overlap
/// it by a positive amount.
inline WindowFeatures window_features(const SpeechTrace& trace, const TimeInterval& w, WindowLevel level,
                                      double nominal_length, const SpeechParams& p = {}) {
  WindowFeatures out;
  out.interval = w;
  out.level = level;
  out.partial = w.duration() < nominal_length - 1e-9;

  const auto by_time = [](const FrameFeatures& f, double t) { return f.time < t; };
  const auto first = std::lower_bound(trace.frames.begin(), trace.frames.end(), w.start, by_time);
  const auto last = std::lower_bound(first, trace.frames.end(), w.end, by_time);

  std::vector<double> loud, pitch, f1, f2, voicing, cpp;
  for (auto it = first; it != last; ++it) {
    if (!it->speech) continue;
    loud.push_back(it->loudness_db);
    voicing.push_back(it->voicing_prob);
    if (it->f0_hz) pitch.push_back(dsp::semitones(*it->f0_hz));
    if (it->f1_hz) f1.push_back(*it->f1_hz);
    if (it->f2_hz) f2.push_back(*it->f2_hz);
    if (it->f0_hz && it->cpp_db) cpp.push_back(*it->cpp_db);
  }
  auto& st = out.statistical;
  st.loudness_mean_db = detail::opt_mean(loud);
  if (!loud.empty()) st.loudness_std_db = dsp::stddev(loud);
  st.pitch_mean_st = detail::opt_mean(pitch);
  if (pitch.size() >= 2) st.pitch_std_st = dsp::stddev(pitch);
  st.f1_hz = detail::opt_mean(f1);
  st.f2_hz = detail::opt_mean(f2);
  st.voicing_prob = detail::opt_mean(voicing);

  auto& cx = out.contextual;
  std::vector<double> lens, pauses;
  double speech = 0.0;
  for (std::size_t i = 0; i < trace.utterances.size(); ++i) {
    const auto& u = trace.utterances[i].interval;
    const double ov = detail::overlap(u, w);
    if (ov > 0.0) {
      lens.push_back(u.duration());
      speech += ov;
    }
    if (i > 0) {
      const TimeInterval gap{trace.utterances[i - 1].interval.end, u.start};
      if (detail::overlap(gap, w) > 0.0) pauses.push_back(gap.duration());
    }
  }
  cx.utterance_count = lens.size();
  cx.mean_utterance_len = detail::opt_mean(lens);
  cx.mean_pause_len = detail::opt_mean(pauses);
  cx.speech_fraction = w.duration() > 0.0 ? std::clamp(speech / w.duration(), 0.0, 1.0) : 0.0;
  const auto n0 = std::lower_bound(trace.nuclei.begin(), trace.nuclei.end(), w.start);
  const auto n1 = std::lower_bound(n0, trace.nuclei.end(), w.end);
  if (w.duration() > 0.0)
    cx.speaking_rate_wpm = static_cast<double>(n1 - n0) / (w.duration() / 60.0) / p.syllables_per_word;

  auto& li = out.linguistic;
  li.cpp_db = detail::opt_mean(cpp);
  std::vector<GlottalCycle> in_window;
  for (const auto& c : trace.cycles)
    if (c.time >= w.start && c.time < w.end) in_window.push_back(c);
  std::tie(li.jitter_pct, li.shimmer_pct) = jitter_shimmer(in_window);
  if (st.pitch_std_st) li.intonation_score = *st.pitch_std_st / p.intonation_ref_semitones;
  return out;
}

inline std::vector<WindowFeatures> aggregate_windows(const SpeechTrace& trace, WindowLevel level,
                                                     const SpeechParams& p = {}) {
  const double length = level == WindowLevel::coarse ? p.coarse_window
                        : level == WindowLevel::fine ? p.fine_window
                                                     : trace.duration;
  std::vector<WindowFeatures> out;
  for (const auto& w : tile_windows(trace.duration, length))
    out.push_back(window_features(trace, w, level, length, p));
  return out;
}

// Whole-clip driver ---------------------------------------------------------

struct SpeechAnalysis {
  SpeechTrace trace;
  VadResult vad;
  VoiceQuality quality;
  SpeakingRate rate;
  WindowFeatures session;
  std::vector<WindowFeatures> coarse;
  std::vector<WindowFeatures> fine;
};

/// Runs the full speech chain. Pitch, CPP and formants are computed only for
/// frames inside utterances.
inline SpeechAnalysis analyze_speech(const AudioClip& clip, const SpeechParams& p = {},
                                     std::optional<double> session_duration = std::nullopt) {
  SpeechAnalysis out;
  auto& tr = out.trace;
  tr.duration = session_duration.value_or(clip.duration());
  out.vad = detect_voice_activity(clip, p);
  tr.utterances = out.vad.utterances;

  const FrameGrid g = frame_grid(clip, p);
  const auto loud = frame_loudness(clip, p);
  tr.frames.resize(g.count);
  std::vector<double> speech_times;
  std::vector<std::size_t> speech_index;
  std::size_t u = 0;
  for (std::size_t i = 0; i < g.count; ++i) {
    auto& f = tr.frames[i];
    f.time = g.center(i);
    f.loudness_db = loud[i];
    while (u < tr.utterances.size() && tr.utterances[u].interval.end < f.time) ++u;
    f.speech = u < tr.utterances.size() && tr.utterances[u].interval.contains(f.time);
    if (f.speech) {
      speech_times.push_back(f.time);
      speech_index.push_back(i);
    }
  }

  const auto pitch = estimate_pitch(clip, speech_times, p);
  for (std::size_t k = 0; k < pitch.size(); ++k) {
    auto& f = tr.frames[speech_index[k]];
    f.f0_hz = pitch[k].f0_hz;
    f.voicing_prob = pitch[k].voicing_prob;
    if (f.f0_hz) {
      f.cpp_db = cepstral_peak_prominence(clip, f.time, p);
      if (auto ff = formants_at(clip, f.time, p)) {
        f.f1_hz = ff->f1_hz;
        f.f2_hz = ff->f2_hz;
      }
    }
  }
  tr.cycles = glottal_cycles(clip, pitch, p);
  out.quality.cpp_db = std::nullopt;
  std::tie(out.quality.jitter_pct, out.quality.shimmer_pct) = jitter_shimmer(tr.cycles);
  {
    std::vector<double> cpp;
    for (const auto& f : tr.frames)
      if (f.f0_hz && f.cpp_db) cpp.push_back(*f.cpp_db);
    out.quality.cpp_db = detail::opt_mean(cpp);
  }
  out.rate = speaking_rate(tr.utterances, clip, p, tr.duration);
  tr.nuclei = out.rate.nuclei;

  out.session = window_features(tr, {0.0, tr.duration}, WindowLevel::session, tr.duration, p);
  out.coarse = aggregate_windows(tr, WindowLevel::coarse, p);
  out.fine = aggregate_windows(tr, WindowLevel::fine, p);
  return out;
}

// Export --------------------------------------------------------------------

namespace detail {

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::string opt_csv(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace detail

inline json window_to_json(const WindowFeatures& w) {
  const auto& s = w.statistical;
  const auto& c = w.contextual;
  const auto& l = w.linguistic;
  return json{
      {"start", w.interval.start},
      {"end", w.interval.end},
      {"level", to_string(w.level)},
      {"partial", w.partial},
      {"statistical",
       {{"loudness_mean_db", detail::opt_json(s.loudness_mean_db)},
        {"loudness_std_db", detail::opt_json(s.loudness_std_db)},
        {"pitch_mean_st", detail::opt_json(s.pitch_mean_st)},
        {"pitch_std_st", detail::opt_json(s.pitch_std_st)},
        {"f1_hz", detail::opt_json(s.f1_hz)},
        {"f2_hz", detail::opt_json(s.f2_hz)},
        {"voicing_prob", detail::opt_json(s.voicing_prob)}}},
      {"contextual",
       {{"utterance_count", c.utterance_count},
        {"mean_utterance_len", detail::opt_json(c.mean_utterance_len)},
        {"mean_pause_len", detail::opt_json(c.mean_pause_len)},
        {"speaking_rate_wpm", c.speaking_rate_wpm},
        {"speech_fraction", c.speech_fraction}}},
      {"linguistic",
       {{"cpp_db", detail::opt_json(l.cpp_db)},
        {"jitter_pct", detail::opt_json(l.jitter_pct)},
        {"shimmer_pct", detail::opt_json(l.shimmer_pct)},
        {"intonation_score", detail::opt_json(l.intonation_score)}}},
  };
}

inline constexpr const char* kWindowCsvHeader =
    "start,end,level,partial,loudness_mean_db,loudness_std_db,pitch_mean_st,pitch_std_st,f1_hz,f2_hz,"
    "voicing_prob,utterance_count,mean_utterance_len,mean_pause_len,speaking_rate_wpm,speech_fraction,"
    "cpp_db,jitter_pct,shimmer_pct,intonation_score";

/// One row per window; empty cells mark unavailable values.
inline std::string windows_to_csv(const std::vector<WindowFeatures>& windows) {
  std::string out = std::string(kWindowCsvHeader) + "\n";
  for (const auto& w : windows) {
    const auto& s = w.statistical;
    const auto& c = w.contextual;
    const auto& l = w.linguistic;
    const std::vector<std::string> cells = {
        format_number(w.interval.start), format_number(w.interval.end), to_string(w.level),
        w.partial ? "1" : "0", detail::opt_csv(s.loudness_mean_db), detail::opt_csv(s.loudness_std_db),
        detail::opt_csv(s.pitch_mean_st), detail::opt_csv(s.pitch_std_st), detail::opt_csv(s.f1_hz),
        detail::opt_csv(s.f2_hz), detail::opt_csv(s.voicing_prob), std::to_string(c.utterance_count),
        detail::opt_csv(c.mean_utterance_len), detail::opt_csv(c.mean_pause_len),
        format_number(c.speaking_rate_wpm), format_number(c.speech_fraction), detail::opt_csv(l.cpp_db),
        detail::opt_csv(l.jitter_pct), detail::opt_csv(l.shimmer_pct), detail::opt_csv(l.intonation_score)};
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }
  return out;
}

}  // namespace classlens
