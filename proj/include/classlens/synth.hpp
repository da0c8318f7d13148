#pragma once

// Seeded synthetic sessions with ground truth, used as test fixtures and as
// the oracle source for the acceptance suite.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "classlens/actions.hpp"
#include "classlens/core.hpp"
#include "classlens/ingest.hpp"

namespace classlens::synth {

inline constexpr std::array<const char*, 4> kScenarios = {"stationary", "crossing", "exit_reentry", "lecture_audio"};
inline constexpr std::uint64_t kDefaultSeed = 20240617;
inline constexpr double kFps = 10.0;
inline constexpr int kAudioRate = 16000;

inline bool is_scenario(std::string_view s) {
  for (const char* n : kScenarios)
    if (s == n) return true;
  return false;
}

// Audio ---------------------------------------------------------------------

struct Burst {
  TimeInterval interval;
  bool expected_kept = true;  // long enough to survive the minimum-duration rule
  double f0_hz = 0.0;
};

struct LectureAudio {
  AudioClip clip;
  std::vector<Burst> bursts;
};

struct LectureAudioParams {
  double short_fraction = 0.2;  // share of bursts at or below 0.10 s
  double lead_in = 0.8;
  double tail = 1.0;
  double min_gap = 0.5;
  double max_gap = 1.5;
  double noise_rms = 0.001;
  double level = 0.25;
  double syllable_hz = 4.0;
};

/// Harmonic voiced bursts separated by low-level noise. Long bursts carry a
/// 4 Hz syllable envelope; short ones (<= 0.10 s) must be rejected by VAD.
inline LectureAudio lecture_audio(double duration, std::uint64_t seed, int rate = kAudioRate,
                                  const LectureAudioParams& p = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };

  LectureAudio out;
  out.clip.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  out.clip.samples.assign(n, 0.0);

  double t = p.lead_in;
  while (true) {
    const bool is_short = u01(rng) < p.short_fraction;
    double len;
    if (is_short) {
      len = uni(0.04, 0.10);
    } else if (u01(rng) < 0.25) {
      len = uni(0.15, 0.40);
    } else {
      len = uni(0.40, 3.0);
    }
    if (t + len > duration - p.tail) break;
    out.bursts.push_back({{t, t + len}, !is_short, uni(110.0, 200.0)});
    t += len + uni(p.min_gap, p.max_gap);
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (const auto& b : out.bursts) {
    const auto i0 = static_cast<std::size_t>(std::llround(b.interval.start * rate));
    const auto i1 = std::min(n, static_cast<std::size_t>(std::llround(b.interval.end * rate)));
    const double ramp = 0.003 * rate;
    const int harmonics = static_cast<int>(3500.0 / b.f0_hz);
    const double drift_hz = uni(0.2, 0.6);
    double phase = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
      const double tl = static_cast<double>(i - i0) / rate;
      const double f0 = b.f0_hz * (1.0 + 0.06 * std::sin(two_pi * drift_hz * tl));
      phase += two_pi * f0 / rate;
      double v = 0.0;
      for (int k = 1; k <= harmonics; ++k) v += std::sin(k * phase) / k;
      double env = b.expected_kept ? 0.65 + 0.35 * std::cos(two_pi * p.syllable_hz * tl) : 1.0;
      const double from_start = static_cast<double>(i - i0), to_end = static_cast<double>(i1 - 1 - i);
      if (from_start < ramp) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * from_start / ramp);
      if (to_end < ramp) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * to_end / ramp);
      out.clip.samples[i] += p.level * 0.5 * env * v;
    }
  }
  std::normal_distribution<double> noise(0.0, p.noise_rms);
  for (auto& s : out.clip.samples) s += noise(rng);
  return out;
}

// Video ---------------------------------------------------------------------

/// Upright figure whose ankle midpoint is `foot`; `wave` raises the right
/// wrist above the shoulder at horizontal offset `wave_dx`.
inline PoseKeypoints figure(NormPoint foot, double height, std::optional<double> wave_dx = std::nullopt) {
  const double h = height;
  const double top = foot.y - h;
  const double x = foot.x;
  PoseKeypoints pose;
  const auto set = [&](Joint j, double px, double py) {
    pose[j] = Keypoint{{clamp_unit(px), clamp_unit(py)}, 0.9};
  };
  set(Joint::nose, x, top + 0.08 * h);
  set(Joint::left_eye, x + 0.02 * h, top + 0.06 * h);
  set(Joint::right_eye, x - 0.02 * h, top + 0.06 * h);
  set(Joint::left_ear, x + 0.05 * h, top + 0.07 * h);
  set(Joint::right_ear, x - 0.05 * h, top + 0.07 * h);
  set(Joint::left_shoulder, x + 0.12 * h, top + 0.2 * h);
  set(Joint::right_shoulder, x - 0.12 * h, top + 0.2 * h);
  set(Joint::left_elbow, x + 0.15 * h, top + 0.35 * h);
  set(Joint::left_wrist, x + 0.14 * h, top + 0.48 * h);
  if (wave_dx) {
    set(Joint::right_elbow, x - 0.18 * h, top + 0.14 * h);
    set(Joint::right_wrist, x - 0.2 * h + *wave_dx, top + 0.02 * h);
  } else {
    set(Joint::right_elbow, x - 0.15 * h, top + 0.35 * h);
    set(Joint::right_wrist, x - 0.14 * h, top + 0.48 * h);
  }
  set(Joint::left_hip, x + 0.07 * h, top + 0.52 * h);
  set(Joint::right_hip, x - 0.07 * h, top + 0.52 * h);
  set(Joint::left_knee, x + 0.06 * h, top + 0.75 * h);
  set(Joint::right_knee, x - 0.06 * h, top + 0.75 * h);
  set(Joint::left_ankle, x + 0.05 * h, foot.y);
  set(Joint::right_ankle, x - 0.05 * h, foot.y);
  return pose;
}

inline PersonDetection person(int id, NormPoint foot, double height, double conf,
                              std::optional<double> wave_dx = std::nullopt) {
  PersonDetection p;
  p.detection_id = id;
  p.box = BoundingBox{{foot.x, foot.y - height / 2.0}, 0.4 * height, height};
  p.pose = figure(foot, height, wave_dx);
  p.confidence = conf;
  return p;
}

struct Session {
  std::string scenario;
  std::uint64_t seed = kDefaultSeed;
  double duration = 0.0;
  SessionManifest manifest;
  std::vector<FrameDetections> frames;
  LectureAudio audio;
  std::vector<RawAnnotation> manual;
  std::vector<RawAnnotation> model;
  std::vector<LumaSample> luma;
  // Ground truth.
  std::vector<std::optional<int>> teacher_ids;  // per frame
  std::vector<TimeInterval> exit_gaps;
  std::vector<TimeInterval> hand_waves;
  std::vector<double> slide_changes;
};

namespace detail {

inline std::vector<Zone> default_zones() {
  return {
      {"board", {{0.05, 0.0}, {0.95, 0.0}, {0.95, 0.55}, {0.05, 0.55}}},
      {"students", {{0.0, 0.62}, {1.0, 0.62}, {1.0, 1.0}, {0.0, 1.0}}},
  };
}

struct Seated {
  int id;
  NormPoint foot;
};

inline std::vector<Seated> seated_students(std::size_t count) {
  std::vector<Seated> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({10 + static_cast<int>(i), {0.2 + 0.6 * static_cast<double>(i) / std::max<std::size_t>(1, count - 1),
                                              0.84 + 0.04 * static_cast<double>(i % 2)}});
  return out;
}

inline double smoothstep(double a, double b, double t) {
  if (t <= a) return 0.0;
  if (t >= b) return 1.0;
  const double s = (t - a) / (b - a);
  return s * s * (3.0 - 2.0 * s);
}

inline double lerp(double a, double b, double s) { return a + (b - a) * s; }

}  // namespace detail

/// Builds a scenario in memory. Throws ConfigError for unknown names.
inline Session make_session(std::string_view scenario, std::uint64_t seed = kDefaultSeed,
                            std::optional<double> duration_override = std::nullopt) {
  if (!is_scenario(scenario)) throw ConfigError("unknown scenario '" + std::string(scenario) + "'");
  Session s;
  s.scenario = std::string(scenario);
  s.seed = seed;
  const double default_duration = scenario == "crossing" ? 40.0 : scenario == "lecture_audio" ? 130.0 : 60.0;
  s.duration = duration_override.value_or(default_duration);
  if (!(s.duration >= 10.0)) throw ConfigError("synthetic sessions need at least 10 s");

  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> jitter(0.0, 0.002);
  const auto jit = [&](NormPoint p) { return NormPoint{p.x + jitter(rng), p.y + jitter(rng)}; };

  constexpr double teacher_h = 0.32, crosser_h = 0.30, seated_h = 0.22;
  const auto seated = detail::seated_students(scenario == "crossing" ? 2 : 3);
  const auto frame_count = static_cast<std::int64_t>(std::floor(s.duration * kFps + 1e-9)) + 1;

  // Crossing ids swap to fresh ones at the midpoint, in seeded order.
  int cross_teacher_late = 3, cross_student_late = 4;
  if (scenario == "crossing" && (rng() & 1U)) std::swap(cross_teacher_late, cross_student_late);

  const double wave_start = std::min(20.0, s.duration * 0.3), wave_end = wave_start + 4.0;
  if (scenario == "stationary" || scenario == "lecture_audio") s.hand_waves.push_back({wave_start, wave_end});
  if (scenario == "exit_reentry") s.exit_gaps.push_back({15.0, 25.0});

  for (std::int64_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / kFps;
    FrameDetections fd;
    fd.frame_index = f;
    fd.timestamp = t;
    std::optional<int> teacher_id;

    if (scenario == "stationary" || scenario == "lecture_audio") {
      const NormPoint foot{0.45 + 0.08 * std::sin(2.0 * std::numbers::pi * t / 30.0), 0.42};
      std::optional<double> wave;
      if (t >= wave_start && t <= wave_end) wave = 0.04 * std::sin(2.0 * std::numbers::pi * 1.5 * (t - wave_start));
      fd.persons.push_back(person(1, jit(foot), teacher_h, 0.95, wave));
      teacher_id = 1;
    } else if (scenario == "crossing") {
      const double a = 5.0, b = s.duration - 5.0, mid = s.duration / 2.0;
      const double k = std::clamp((t - a) / (b - a), 0.0, 1.0);
      const NormPoint tf{detail::lerp(0.2, 0.8, k), 0.40};
      const NormPoint cf{detail::lerp(0.8, 0.2, k), 0.46};
      const bool late = t >= mid;
      const int tid = late ? cross_teacher_late : 1;
      const int cid = late ? cross_student_late : 2;
      fd.persons.push_back(person(tid, jit(tf), teacher_h, 0.93));
      fd.persons.push_back(person(cid, jit(cf), crosser_h, 0.9));
      teacher_id = tid;
    } else {  // exit_reentry
      if (t < 15.0) {
        const double k = detail::smoothstep(3.0, 13.0, t);
        fd.persons.push_back(person(1, jit({detail::lerp(0.5, 0.02, k), 0.40}), teacher_h, 0.95));
        teacher_id = 1;
      } else if (t >= 25.0) {
        const double k = detail::smoothstep(25.0, 35.0, t);
        fd.persons.push_back(person(7, jit({detail::lerp(0.97, 0.6, k), 0.40}), teacher_h, 0.95));
        teacher_id = 7;
      }
    }
    for (const auto& st : seated) fd.persons.push_back(person(st.id, jit(st.foot), seated_h, 0.85));
    std::sort(fd.persons.begin(), fd.persons.end(),
              [](const auto& x, const auto& y) { return x.detection_id < y.detection_id; });
    s.frames.push_back(std::move(fd));
    s.teacher_ids.push_back(teacher_id);
  }

  s.audio = lecture_audio(s.duration, seed);

  // Slide changes every ~25 s on a flat screen signal.
  std::normal_distribution<double> luma_noise(0.0, 0.004);
  double level = 0.55;
  double next_change = 12.0;
  for (std::int64_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / kFps;
    if (t >= next_change && t < s.duration - 1.0) {
      level = level > 0.5 ? 0.35 : 0.7;
      s.slide_changes.push_back(t);
      next_change += 25.0;
    }
    s.luma.push_back({t, level + luma_noise(rng)});
  }

  // Model actions: board work, pointing, and one unmapped label.
  const double d = s.duration;
  s.model = {
      {{0.1 * d, 0.2 * d}, "writing", AnnotationSource::model},
      {{0.18 * d, 0.25 * d}, "writing", AnnotationSource::model},
      {{0.4 * d, 0.45 * d}, "pointing", AnnotationSource::model},
      {{0.6 * d, 0.62 * d}, "gesture", AnnotationSource::model},
      {{0.7 * d, 0.72 * d}, "walking", AnnotationSource::model},
  };
  // Manual annotations: teaching-style segments plus one board action.
  s.manual = {
      {{0.0, 0.5 * d}, "lecturing", AnnotationSource::manual},
      {{0.5 * d, 0.8 * d}, "questioning", AnnotationSource::manual},
      {{0.8 * d, d}, "group_work", AnnotationSource::manual},
      {{0.85 * d, 0.9 * d}, "writing", AnnotationSource::manual},
  };

  auto& m = s.manifest;
  m.session_id = s.scenario + "-" + std::to_string(seed);
  m.fps = kFps;
  m.duration = s.duration;
  m.media_path = "media.mp4";
  m.zones = detail::default_zones();
  m.style_map = {{"lecturing", "passive"}, {"questioning", "active"}, {"group_work", "active"}};
  m.label_map = {{"writing", "writing_on_board"}, {"pointing", "pointing_at_board"}, {"gesture", "gesturing_at_board"}};
  return s;
}

inline json ground_truth_json(const Session& s) {
  json ids = json::array();
  for (const auto& id : s.teacher_ids) ids.push_back(id ? json(*id) : json(nullptr));
  json bursts = json::array();
  for (const auto& b : s.audio.bursts)
    bursts.push_back({{"start", b.interval.start}, {"end", b.interval.end}, {"expected_kept", b.expected_kept},
                      {"f0_hz", b.f0_hz}});
  json gaps = json::array();
  for (const auto& g : s.exit_gaps) gaps.push_back({g.start, g.end});
  json waves = json::array();
  for (const auto& w : s.hand_waves) waves.push_back({w.start, w.end});
  return json{{"scenario", s.scenario},
              {"seed", s.seed},
              {"duration", s.duration},
              {"fps", kFps},
              {"teacher_detection_ids", std::move(ids)},
              {"exit_gaps", std::move(gaps)},
              {"hand_waves", std::move(waves)},
              {"slide_changes", s.slide_changes},
              {"bursts", std::move(bursts)}};
}

/// Writes the session directory: manifest, streams, placeholder media and
/// `ground_truth.json`.
inline void write_session(Session s, const fs::path& dir) {
  fs::create_directories(dir);
  auto& m = s.manifest;
  m.directory = dir;
  m.detections = dir / "detections.jsonl";
  m.audio = dir / "audio.wav";
  m.annotations = dir / "annotations.tsv";
  m.model_actions = dir / "model_actions.tsv";
  m.screen_luma = dir / "screen_luma.csv";

  std::string det;
  for (const auto& f : s.frames) det += detection_line(f) + "\n";
  write_file(m.detections, det);
  write_file(m.audio, encode_wav({s.audio.clip.samples}, s.audio.clip.sample_rate));
  write_file(*m.annotations, "# start\tend\tlabel\n" + format_annotations(s.manual));
  write_file(*m.model_actions, "# start\tend\tlabel\n" + format_annotations(s.model));
  std::string luma = "frame,luma\n";
  for (const auto& l : s.luma) luma += std::to_string(std::llround(l.time * kFps)) + "," + format_number(l.luma) + "\n";
  write_file(*m.screen_luma, luma);

  // Placeholder media: deterministic bytes so range requests are checkable.
  std::mt19937_64 rng(s.seed);
  std::string media(64 * 1024, '\0');
  for (auto& c : media) c = static_cast<char>(rng() & 0xFF);
  write_file(dir / m.media_path, media);

  write_file(dir / kManifestName, manifest_to_json(m).dump(2) + "\n");
  write_file(dir / "ground_truth.json", ground_truth_json(s).dump(2) + "\n");
}

}  // namespace classlens::synth
