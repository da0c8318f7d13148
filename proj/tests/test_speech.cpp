#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "classlens/speech.hpp"
#include "classlens/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace classlens;
namespace ts = testing_support;

namespace {

std::vector<double> frame_times(const AudioClip& clip, const SpeechParams& p = {}) {
  const auto g = frame_grid(clip, p);
  std::vector<double> t;
  for (std::size_t i = 0; i < g.count; ++i) t.push_back(g.center(i));
  return t;
}

using oracles::interior_times;

}  // namespace

// VAD -----------------------------------------------------------------------

TEST(Vad, ThreeBurstsRecoveredWithinTwentyMs) {
  auto clip = ts::silence(4.0);
  const std::vector<std::pair<double, double>> bursts{{0.5, 1.0}, {2.0, 2.5}, {3.0, 3.5}};
  for (auto [a, b] : bursts) ts::add_burst(clip, a, b);
  const auto utts = segment_utterances(clip);
  ASSERT_EQ(utts.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(utts[i].interval.start, bursts[i].first, 0.020);
    EXPECT_NEAR(utts[i].interval.end, bursts[i].second, 0.020);
  }
}

TEST(Vad, BurstOfOneHundredMsIsExcluded) {
  auto clip = ts::silence(2.0);
  ts::add_burst(clip, 0.8, 0.9);
  EXPECT_TRUE(segment_utterances(clip).empty());
}

TEST(Vad, SilenceAndTinyClips) {
  EXPECT_TRUE(segment_utterances(ts::silence(3.0)).empty());
  EXPECT_TRUE(segment_utterances(ts::silence(0.01)).empty());
  EXPECT_TRUE(segment_utterances(AudioClip{16000, {}}).empty());
}

TEST(Vad, NoiseOnlyGivesNoUtterances) {
  auto clip = ts::white_noise(5.0, 3, 0.01);
  EXPECT_TRUE(segment_utterances(clip).empty());
}

TEST(Vad, GapsUnderTwoHundredMsAreBridged) {
  auto clip = ts::silence(3.0);
  ts::add_burst(clip, 0.5, 1.0);
  ts::add_burst(clip, 1.1, 1.6);  // 100 ms gap
  const auto utts = segment_utterances(clip);
  ASSERT_EQ(utts.size(), 1u);
  EXPECT_NEAR(utts[0].interval.start, 0.5, 0.02);
  EXPECT_NEAR(utts[0].interval.end, 1.6, 0.02);
}

TEST(VadProperty, RandomSignalsNeverYieldShortOrOverlappingUtterances) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    auto clip = ts::silence(6.0);
    double t = 0.1;
    while (t < 5.5) {
      const double len = 0.02 + 0.5 * u(rng);
      ts::add_burst(clip, t, std::min(5.9, t + len), 100 + 150 * u(rng), 0.05 + 0.4 * u(rng));
      t += len + 0.05 + 0.5 * u(rng);
    }
    ts::add_noise(clip, 0.002 * u(rng), rng());
    const auto utts = segment_utterances(clip);
    double total = 0.0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      EXPECT_GE(utts[i].interval.duration(), 0.125);
      if (i) {
        EXPECT_LT(utts[i - 1].interval.end, utts[i].interval.start);
      }
      total += utts[i].interval.duration();
    }
    EXPECT_LE(total, clip.duration());
  }
}

TEST(Vad, LectureFixtureBurstsMatchGroundTruth) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto la = synth::lecture_audio(60.0, seed);
    const auto utts = segment_utterances(la.clip);
    for (const auto& b : la.bursts) {
      const auto hit = std::find_if(utts.begin(), utts.end(), [&](const Utterance& u) {
        return std::min(u.interval.end, b.interval.end) > std::max(u.interval.start, b.interval.start);
      });
      if (b.expected_kept) {
        ASSERT_NE(hit, utts.end()) << "seed " << seed << " burst at " << b.interval.start;
        EXPECT_NEAR(hit->interval.start, b.interval.start, 0.020);
        EXPECT_NEAR(hit->interval.end, b.interval.end, 0.020);
      } else {
        EXPECT_EQ(hit, utts.end()) << "short burst at " << b.interval.start << " survived";
      }
    }
    // Every utterance corresponds to some kept burst.
    for (const auto& u : utts) {
      const bool matched = std::any_of(la.bursts.begin(), la.bursts.end(), [&](const synth::Burst& b) {
        return b.expected_kept && std::min(u.interval.end, b.interval.end) > std::max(u.interval.start, b.interval.start);
      });
      EXPECT_TRUE(matched) << "false utterance at " << u.interval.start;
    }
  }
}

// Loudness ------------------------------------------------------------------

TEST(Loudness, GainShiftsLevelByTwentyLogG) {
  const auto clip = ts::sine(180.0, 1.0, 0.4);
  auto half = clip;
  for (auto& s : half.samples) s *= 0.5;
  const auto a = frame_loudness(clip, {}), b = frame_loudness(half, {});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i] - a[i], 20.0 * std::log10(0.5), 0.1);
  for (double v : a) EXPECT_LE(v, 0.0);
}

// Pitch ---------------------------------------------------------------------

class PitchTone : public ::testing::TestWithParam<double> {};

TEST_P(PitchTone, SineWithinTwoHzOnInteriorFrames) {
  const double hz = GetParam();
  const auto clip = ts::sine(hz, 1.0, 0.5);
  const auto times = interior_times(clip);
  const auto frames = estimate_pitch(clip, times);
  std::size_t good = 0;
  for (const auto& f : frames)
    if (f.f0_hz && std::abs(*f.f0_hz - hz) <= 2.0) ++good;
  EXPECT_EQ(good, frames.size()) << hz << " Hz";
}

TEST_P(PitchTone, GainInvariantWithinOneHz) {
  const double hz = GetParam();
  const auto clip = ts::sine(hz, 1.0, 0.5);
  auto half = clip;
  for (auto& s : half.samples) s *= 0.5;
  const auto times = interior_times(clip);
  const auto a = estimate_pitch(clip, times), b = estimate_pitch(half, times);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a[i].f0_hz && b[i].f0_hz);
    EXPECT_LE(std::abs(*a[i].f0_hz - *b[i].f0_hz), 1.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Tones, PitchTone, ::testing::Values(100.0, 220.0, 350.0));

TEST(Pitch, HarmonicComplexTracksFundamental) {
  auto clip = ts::silence(1.0);
  ts::add_burst(clip, 0.0, 1.0, 130.0);
  const auto frames = estimate_pitch(clip, interior_times(clip));
  for (const auto& f : frames) {
    ASSERT_TRUE(f.f0_hz);
    EXPECT_NEAR(*f.f0_hz, 130.0, 2.0);
  }
}

TEST(Pitch, WhiteNoiseMostlyUnvoiced) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto clip = ts::white_noise(2.0, seed);
    const auto frames = estimate_pitch(clip, frame_times(clip));
    const auto unvoiced = std::count_if(frames.begin(), frames.end(), [](const auto& f) { return !f.f0_hz; });
    EXPECT_GE(static_cast<double>(unvoiced), 0.9 * static_cast<double>(frames.size())) << "seed " << seed;
  }
}

TEST(Pitch, SilenceAllUnvoiced) {
  const auto clip = ts::silence(1.0);
  for (const auto& f : estimate_pitch(clip, frame_times(clip))) {
    EXPECT_FALSE(f.f0_hz);
    EXPECT_EQ(f.voicing_prob, 0.0);
  }
}

TEST(PitchProperty, VoicedEstimatesStayInBand) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> hz(60.0, 500.0);
  SpeechParams p;
  for (int trial = 0; trial < 30; ++trial) {
    auto clip = ts::silence(0.5);
    ts::add_burst(clip, 0.0, 0.5, hz(rng));
    ts::add_noise(clip, 0.01, rng());
    for (const auto& f : estimate_pitch(clip, frame_times(clip))) {
      if (!f.f0_hz) continue;
      EXPECT_GE(*f.f0_hz, p.f0_min * 0.97);
      EXPECT_LE(*f.f0_hz, p.f0_max * 1.03);
      EXPECT_GE(f.voicing_prob, 0.0);
      EXPECT_LE(f.voicing_prob, 1.0);
    }
  }
}

// Voice quality -------------------------------------------------------------

TEST(VoiceQuality, PulseTrainHasZeroJitterAndShimmer) {
  const auto clip = ts::pulse_train(128, 1.0, 0.5, 16000, 7);  // 125 Hz
  const auto frames = estimate_pitch(clip, interior_times(clip));
  ASSERT_TRUE(std::all_of(frames.begin(), frames.end(), [](const auto& f) { return f.f0_hz.has_value(); }));
  const auto q = voice_quality(clip, frames);
  ASSERT_TRUE(q.jitter_pct && q.shimmer_pct);
  EXPECT_EQ(*q.jitter_pct, 0.0);
  EXPECT_EQ(*q.shimmer_pct, 0.0);
}

TEST(VoiceQuality, ConstantAmplitudeToneHasZeroShimmer) {
  // 160 Hz at 16 kHz: exactly 100 samples per period, identical peaks.
  const auto clip = ts::sine(160.0, 1.0, 0.5);
  const auto frames = estimate_pitch(clip, interior_times(clip));
  const auto cycles = glottal_cycles(clip, frames);
  ASSERT_GE(cycles.size(), 10u);
  const auto [jitter, shimmer] = jitter_shimmer(cycles);
  ASSERT_TRUE(jitter && shimmer);
  EXPECT_NEAR(*shimmer, 0.0, 1e-9);
  EXPECT_NEAR(*jitter, 0.0, 1e-6);
}

TEST(VoiceQuality, JitterReflectsAlternatingPeriods) {
  // Periods alternate 120/136 samples: mean |dP| = 16, mean P = 128 -> 12.5 %.
  auto clip = ts::silence(1.0);
  std::size_t i = 10;
  bool odd = false;
  while (i < clip.samples.size()) {
    clip.samples[i] = 0.5;
    i += odd ? 136 : 120;
    odd = !odd;
  }
  std::vector<PitchFrame> frames;
  for (double t : interior_times(clip)) frames.push_back({t, 125.0, 1.0});
  const auto [jitter, shimmer] = jitter_shimmer(glottal_cycles(clip, frames));
  ASSERT_TRUE(jitter);
  EXPECT_NEAR(*jitter, 12.5, 0.5);
  EXPECT_NEAR(*shimmer, 0.0, 1e-12);
}

TEST(VoiceQuality, CppPeriodicBeatsNoiseOnTwentySeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto periodic = ts::silence(0.6);
    ts::add_burst(periodic, 0.0, 0.6, 150.0);
    ts::add_noise(periodic, 0.005, seed);
    const auto noise = ts::white_noise(0.6, 1000 + seed);
    const auto qp = voice_quality(periodic, estimate_pitch(periodic, interior_times(periodic)));
    const auto qn = voice_quality(noise, estimate_pitch(noise, interior_times(noise)));
    ASSERT_TRUE(qp.cpp_db && qn.cpp_db);
    EXPECT_GT(*qp.cpp_db, *qn.cpp_db) << "seed " << seed;
  }
}

TEST(VoiceQuality, NoVoicedRunsGiveNoJitter) {
  const auto [j, s] = jitter_shimmer(std::vector<GlottalCycle>{});
  EXPECT_FALSE(j);
  EXPECT_FALSE(s);
}

// Formants ------------------------------------------------------------------

TEST(Formants, TwoResonanceVowel) {
  const auto clip = ts::vowel(130.0, {{700.0, 80.0}, {1200.0, 90.0}}, 0.5);
  std::size_t checked = 0;
  for (double t : interior_times(clip)) {
    const auto f = formants_at(clip, t);
    ASSERT_TRUE(f);
    ASSERT_TRUE(f->f1_hz && f->f2_hz) << "t=" << t;
    EXPECT_NEAR(*f->f1_hz, 700.0, 50.0);
    EXPECT_NEAR(*f->f2_hz, 1200.0, 75.0);
    EXPECT_FALSE(f->incomplete);
    ++checked;
  }
  EXPECT_GT(checked, 20u);
}

TEST(Formants, SingleResonanceLeavesSecondUnavailable) {
  const auto clip = ts::vowel(130.0, {{700.0, 80.0}}, 0.5);
  for (double t : interior_times(clip)) {
    const auto f = formants_at(clip, t);
    ASSERT_TRUE(f);
    ASSERT_TRUE(f->f1_hz);
    EXPECT_NEAR(*f->f1_hz, 700.0, 50.0);
    EXPECT_FALSE(f->f2_hz);
    EXPECT_TRUE(f->incomplete);
  }
}

TEST(Formants, UnvoicedFramesGetNoFormants) {
  const auto clip = ts::vowel(130.0, {{700.0, 80.0}, {1200.0, 90.0}}, 0.5);
  std::vector<PitchFrame> frames{{0.25, std::nullopt, 0.1}};
  EXPECT_TRUE(estimate_formants(clip, frames).empty());
  frames[0].f0_hz = 130.0;
  EXPECT_EQ(estimate_formants(clip, frames).size(), 1u);
}

// Speaking rate -------------------------------------------------------------

namespace {

AudioClip syllable_train(int count, double pad_before, double pad_after) {
  auto clip = ts::silence(pad_before + 0.6 * count + pad_after);
  for (int k = 0; k < count; ++k) {
    const double s = pad_before + 0.1 + 0.6 * k;
    ts::add_burst(clip, s, s + 0.2);
  }
  return clip;
}

}  // namespace

TEST(SpeakingRate, TenBurstsInSixSeconds) {
  const auto clip = syllable_train(10, 0.0, 0.0);
  ASSERT_DOUBLE_EQ(clip.duration(), 6.0);
  const auto utts = segment_utterances(clip);
  ASSERT_EQ(utts.size(), 10u);
  const auto r = speaking_rate(utts, clip, {}, 6.0);
  EXPECT_EQ(r.nuclei.size(), 10u);
  EXPECT_NEAR(r.wpm, 100.0 / 1.5, 1e-9);
}

TEST(SpeakingRate, ZeroUtterancesIsZero) {
  const auto clip = ts::silence(3.0);
  EXPECT_EQ(speaking_rate({}, clip).wpm, 0.0);
}

TEST(SpeakingRate, DoublingPaddingHalvesRate) {
  const auto a = syllable_train(10, 0.0, 0.0);  // 6 s
  const auto b = syllable_train(10, 3.0, 3.0);  // 12 s
  const auto ra = speaking_rate(segment_utterances(a), a);
  const auto rb = speaking_rate(segment_utterances(b), b);
  ASSERT_EQ(ra.nuclei.size(), rb.nuclei.size());
  EXPECT_NEAR(rb.wpm, ra.wpm / 2.0, 1e-9);
}

// Windows -------------------------------------------------------------------

TEST(Windows, TilingOfOneHundredThirtySeconds) {
  const auto coarse = tile_windows(130.0, 60.0);
  ASSERT_EQ(coarse.size(), 3u);
  EXPECT_EQ(coarse[0].start, 0.0);
  EXPECT_EQ(coarse[0].end, 60.0);
  EXPECT_EQ(coarse[1].end, 120.0);
  EXPECT_EQ(coarse[2].start, 120.0);
  EXPECT_EQ(coarse[2].end, 130.0);
  const auto fine = tile_windows(130.0, 10.0);
  ASSERT_EQ(fine.size(), 13u);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    EXPECT_DOUBLE_EQ(fine[k].start, 10.0 * k);
    EXPECT_DOUBLE_EQ(fine[k].end, 10.0 * (k + 1));
  }
}

TEST(WindowsProperty, TilingCoversExactlyOnce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.5, 500.0), l(0.3, 70.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double dur = d(rng), len = l(rng);
    const auto w = tile_windows(dur, len);
    ASSERT_FALSE(w.empty());
    EXPECT_EQ(w.front().start, 0.0);
    EXPECT_EQ(w.back().end, dur);
    for (std::size_t k = 1; k < w.size(); ++k) EXPECT_EQ(w[k].start, w[k - 1].end);
    for (std::size_t k = 0; k + 1 < w.size(); ++k) EXPECT_NEAR(w[k].duration(), len, 1e-9);
    EXPECT_GT(w.back().duration(), 0.0);
  }
}

TEST(Windows, PartialTailIsFlagged) {
  SpeechTrace tr;
  tr.duration = 130.0;
  const auto coarse = aggregate_windows(tr, WindowLevel::coarse);
  ASSERT_EQ(coarse.size(), 3u);
  EXPECT_FALSE(coarse[0].partial);
  EXPECT_TRUE(coarse[2].partial);
}

TEST(Windows, ConstantPitchGivesZeroIntonation) {
  SpeechTrace tr;
  tr.duration = 10.0;
  for (int i = 0; i < 100; ++i) {
    FrameFeatures f;
    f.time = 0.05 + 0.1 * i;
    f.speech = true;
    f.f0_hz = 180.0;
    f.loudness_db = -20.0;
    tr.frames.push_back(f);
  }
  tr.utterances.push_back({{0.0, 10.0}});
  const auto w = window_features(tr, {0.0, 10.0}, WindowLevel::fine, 10.0);
  ASSERT_TRUE(w.linguistic.intonation_score);
  EXPECT_NEAR(*w.linguistic.intonation_score, 0.0, 1e-12);
}

namespace {

void expect_opt_near(const std::optional<double>& got, const std::optional<double>& want, const char* what) {
  ASSERT_EQ(got.has_value(), want.has_value()) << what;
  if (got) {
    EXPECT_NEAR(*got, *want, 1e-9) << what;
  }
}

}  // namespace

TEST(Windows, FeaturesMatchBruteForceReslicing) {
  const auto la = synth::lecture_audio(130.0, 9);
  const auto an = analyze_speech(la.clip);
  ASSERT_EQ(an.coarse.size(), 3u);
  ASSERT_EQ(an.fine.size(), 13u);
  std::vector<WindowFeatures> all = an.coarse;
  all.insert(all.end(), an.fine.begin(), an.fine.end());
  all.push_back(an.session);
  for (const auto& w : all) {
    const auto o = oracles::window(an.trace, w.interval.start, w.interval.end);
    const auto& s = w.statistical;
    expect_opt_near(s.loudness_mean_db, o.loud_mean, "loudness mean");
    expect_opt_near(s.loudness_std_db, o.loud_std, "loudness std");
    expect_opt_near(s.pitch_mean_st, o.pitch_mean, "pitch mean");
    expect_opt_near(s.pitch_std_st, o.pitch_std, "pitch std");
    expect_opt_near(s.voicing_prob, o.voicing, "voicing");
    expect_opt_near(w.linguistic.cpp_db, o.cpp, "cpp");
    expect_opt_near(w.linguistic.intonation_score, o.intonation, "intonation");
    EXPECT_EQ(w.contextual.utterance_count, o.utterances);
    EXPECT_NEAR(w.contextual.speech_fraction, o.speech / w.interval.duration(), 1e-9);
    expect_opt_near(w.contextual.mean_utterance_len, o.mean_len, "utterance len");
    expect_opt_near(w.contextual.mean_pause_len, o.mean_pause, "pause len");
    EXPECT_NEAR(w.contextual.speaking_rate_wpm, o.wpm, 1e-9);
    EXPECT_GE(w.contextual.speech_fraction, 0.0);
    EXPECT_LE(w.contextual.speech_fraction, 1.0);
  }
}

TEST(Windows, CsvHasOneRowPerWindowAndFullHeader) {
  const auto la = synth::lecture_audio(25.0, 4);
  const auto an = analyze_speech(la.clip);
  const auto csv = windows_to_csv(an.fine);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 19);
}

TEST(Speech, TenMinutesOfVadUnderFiveSeconds) {
  const auto la = synth::lecture_audio(600.0, 21);
  const auto t0 = std::chrono::steady_clock::now();
  const auto utts = segment_utterances(la.clip);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 5.0);
  EXPECT_FALSE(utts.empty());
}
