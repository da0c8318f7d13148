#pragma once

// SessionSummary assembly: the single document behind the summary and review
// screens. Objects serialize with sorted keys, so identical inputs give
// byte-identical output.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "classlens/actions.hpp"
#include "classlens/analytics.hpp"
#include "classlens/config.hpp"
#include "classlens/ingest.hpp"
#include "classlens/scoring.hpp"
#include "classlens/speech.hpp"
#include "classlens/tracking.hpp"

namespace classlens {

inline constexpr const char* kToolName = "classlens";
inline constexpr const char* kSummaryName = "summary.json";
inline constexpr const char* kTimelineName = "timeline.json";
inline constexpr const char* kWindowsName = "windows.csv";

struct SummaryInputs {
  const SessionManifest* manifest = nullptr;
  const AnalysisConfig* config = nullptr;
  const TrackingResult* tracking = nullptr;
  const SpeechAnalysis* speech = nullptr;
  const EventTimeline* timeline = nullptr;
  std::vector<RawAnnotation> manual_annotations;
  std::string media_path;  // as it should appear in the document
};

/// Session-level value of a scored feature, or nullopt when unavailable.
inline std::optional<double> scored_feature_value(const std::string& name, const WindowFeatures& w,
                                                  const ClarityMapping& clarity) {
  if (name == "loudness_stability") return w.statistical.loudness_std_db;
  if (name == "intonation") return w.linguistic.intonation_score;
  if (name == "clarity") {
    if (!w.linguistic.cpp_db) return std::nullopt;
    return clarity(*w.linguistic.cpp_db);
  }
  if (name == "speaking_rate") {
    if (w.contextual.utterance_count == 0) return std::nullopt;
    return w.contextual.speaking_rate_wpm;
  }
  if (name == "speech_fraction") return w.contextual.speech_fraction;
  throw ConfigError("unknown scored feature '" + name + "'");
}

inline SpeakingScore score_session(const SpeechAnalysis& speech, const AnalysisConfig& cfg) {
  std::vector<std::optional<double>> session;
  std::vector<std::vector<double>> fine;
  for (const auto& spec : cfg.scored_features) {
    session.push_back(scored_feature_value(spec.name, speech.session, cfg.clarity));
    std::vector<double> per_window;
    for (const auto& w : speech.fine)
      if (auto v = scored_feature_value(spec.name, w, cfg.clarity)) per_window.push_back(*v);
    fine.push_back(std::move(per_window));
  }
  return score_speaking(cfg.scored_features, session, fine);
}

namespace detail {

inline json opt_vec_json(const std::optional<std::vector<double>>& v) { return v ? json(*v) : json(nullptr); }

inline json heatmap_to_json(const HeatmapGrid& g) {
  json counts = json::array();
  for (std::size_t r = 0; r < g.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < g.cols; ++c) row.push_back(g.at(r, c));
    counts.push_back(std::move(row));
  }
  json normalized = nullptr;
  if (auto n = g.normalized()) {
    normalized = json::array();
    for (std::size_t r = 0; r < g.rows; ++r)
      normalized.push_back(std::vector<double>(n->begin() + static_cast<std::ptrdiff_t>(r * g.cols),
                                               n->begin() + static_cast<std::ptrdiff_t>((r + 1) * g.cols)));
  }
  return json{{"rows", g.rows}, {"cols", g.cols}, {"counts", std::move(counts)}, {"total", g.total},
              {"normalized", std::move(normalized)}};
}

}  // namespace detail

inline json compile_summary(const SummaryInputs& in) {
  if (!in.manifest) throw PipelineError("compile_summary: missing manifest");
  if (!in.config) throw PipelineError("compile_summary: missing config");
  if (!in.tracking) throw PipelineError("compile_summary: missing teacher track");
  if (!in.speech) throw PipelineError("compile_summary: missing speech analysis");
  if (!in.timeline) throw PipelineError("compile_summary: missing event timeline");

  const auto& m = *in.manifest;
  const auto& cfg = *in.config;
  const auto& speech = *in.speech;
  const auto& track = in.tracking->track;
  const double duration = m.duration;

  // Donut.
  const auto props = action_proportions(*in.timeline, track, m.zones, duration, cfg.analytics.short_event_span);
  json outer = props.outer;
  json inner = json::object();
  for (const auto& [kind, zones] : props.inner) inner[kind] = zones;

  // Teaching style.
  const auto style = teaching_style_balance(in.manual_annotations, m.style_map);
  json teaching{{"available", style.active_fraction.has_value()},
                {"active_fraction", detail::opt_json(style.active_fraction)},
                {"passive_fraction", detail::opt_json(style.passive_fraction)}};

  // Speaking style.
  StyleMetrics metrics;
  metrics.speaking_rate_wpm = scored_feature_value("speaking_rate", speech.session, cfg.clarity);
  metrics.clarity = scored_feature_value("clarity", speech.session, cfg.clarity);
  metrics.intonation = speech.session.linguistic.intonation_score;
  const auto verdicts = classify_style(metrics, cfg.norms);
  const auto score = score_session(speech, cfg);
  json features = json::array();
  for (const auto& f : score.features)
    features.push_back({{"name", f.name}, {"raw", f.raw}, {"score", f.score}, {"sigma", detail::opt_json(f.sigma)}});
  json speaking{
      {"metrics",
       {{"speaking_rate_wpm", detail::opt_json(metrics.speaking_rate_wpm)},
        {"clarity", detail::opt_json(metrics.clarity)},
        {"cpp_db", detail::opt_json(speech.quality.cpp_db)},
        {"intonation_score", detail::opt_json(metrics.intonation)},
        {"jitter_pct", detail::opt_json(speech.quality.jitter_pct)},
        {"shimmer_pct", detail::opt_json(speech.quality.shimmer_pct)}}},
      {"verdicts",
       {{"speaking_rate", verdicts.speaking_rate},
        {"rate_distance_wpm", detail::opt_json(verdicts.rate_distance_wpm)},
        {"clarity", verdicts.clarity},
        {"monotony", verdicts.monotony}}},
      {"norms",
       {{"rate_target_wpm", cfg.norms.rate_target_wpm},
        {"rate_low_wpm", cfg.norms.rate_low_wpm},
        {"rate_high_wpm", cfg.norms.rate_high_wpm},
        {"clarity_acceptable", cfg.norms.clarity_acceptable},
        {"clarity_optimal", cfg.norms.clarity_optimal},
        {"monotony_low", cfg.norms.monotony_low},
        {"monotony_average", cfg.norms.monotony_average},
        {"monotony_high", cfg.norms.monotony_high}}},
      {"score",
       {{"features", std::move(features)},
        {"ew", detail::opt_json(score.ew_score)},
        {"rw", detail::opt_json(score.rw_score)},
        {"ew_weights", score.ew_weights},
        {"rw_weights", score.rw_weights}}},
  };

  const auto sp = speak_pause_ratio(speech.trace.utterances, duration);
  json speak_pause{{"speech_s", sp.speech_s},
                   {"pause_s", sp.pause_s},
                   {"ratio", detail::opt_json(sp.ratio)},
                   {"ratio_infinite", sp.ratio_infinite},
                   {"speech_fraction", sp.speech_s / duration},
                   {"pause_fraction", sp.pause_s / duration}};

  const auto grid = compute_heatmap(track, cfg.analytics.heatmap_rows, cfg.analytics.heatmap_cols);
  const auto occupancy = zone_occupancy(track.samples, m.zones);

  json xy = json::array();
  for (const auto& s : downsample_xy(track.samples, duration, cfg.analytics.xy_tick))
    xy.push_back({{"t", s.time}, {"x", s.point.x}, {"y", s.point.y}});

  json coarse = json::array(), fine = json::array();
  for (const auto& w : speech.coarse) coarse.push_back(window_to_json(w));
  for (const auto& w : speech.fine) fine.push_back(window_to_json(w));

  json exits = json::array();
  for (const auto& e : track.exits) exits.push_back({e.start, e.end});
  json utterances = json::array();
  for (const auto& u : speech.trace.utterances) utterances.push_back({u.interval.start, u.interval.end});

  return json{
      {"session_id", m.session_id},
      {"duration", duration},
      {"media_path", in.media_path},
      {"provenance", {{"tool", kToolName}, {"version", kVersion}, {"config", config_to_json(cfg)}}},
      {"action_proportions", {{"outer", std::move(outer)}, {"inner", std::move(inner)}}},
      {"teaching_style", std::move(teaching)},
      {"speaking_style", std::move(speaking)},
      {"speak_pause", std::move(speak_pause)},
      {"heatmap", detail::heatmap_to_json(grid)},
      {"zone_occupancy", {{"fractions", occupancy.fractions}, {"samples", occupancy.samples}}},
      {"xy_series", std::move(xy)},
      {"windows", {{"session", window_to_json(speech.session)}, {"coarse", std::move(coarse)}, {"fine", std::move(fine)}}},
      {"utterances", std::move(utterances)},
      {"tracking",
       {{"teacher_track_id", track.track_id},
        {"samples", track.samples.size()},
        {"exits", std::move(exits)},
        {"student_tracks", in.tracking->student_tracks_created}}},
      {"timeline", {{"path", kTimelineName}, {"event_count", in.timeline->events.size()}}},
  };
}

/// Canonical text form: sorted keys, two-space indent, trailing newline.
inline std::string dump_document(const json& j) { return j.dump(2) + "\n"; }

}  // namespace classlens
