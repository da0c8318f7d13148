#pragma once

// Analysis configuration: every tunable parameter with its default, loaded
// from JSON with unknown keys rejected, overridable per field.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "classlens/actions.hpp"
#include "classlens/core.hpp"
#include "classlens/ingest.hpp"
#include "classlens/scoring.hpp"
#include "classlens/speech.hpp"
#include "classlens/tracking.hpp"

namespace classlens {

struct AnalyticsParams {
  std::size_t heatmap_rows = 12;
  std::size_t heatmap_cols = 20;
  double trace_span = 60.0;
  double short_event_span = 1.0;
  double xy_tick = 0.5;
};

struct AnalysisConfig {
  TrackingParams tracking;
  HandWaveParams hand_wave;
  SlideChangeParams slide_change;
  double merge_gap = kMergeGap;
  SpeechParams speech;
  std::vector<ScoredFeatureSpec> scored_features = default_scored_features();
  ClarityMapping clarity;
  StyleNorms norms;
  AnalyticsParams analytics;
};

namespace detail {

inline json scale_to_json(const FeatureScale& s) {
  if (s.kind == FeatureScale::Kind::higher_better)
    return json{{"kind", "higher_better"}, {"lo", s.lo}, {"hi", s.hi}};
  return json{{"kind", "target_centered"}, {"target", s.target}, {"tol", s.tol}};
}

inline FeatureScale scale_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  for (const auto& [k, v] : j.items()) {
    static const std::set<std::string> allowed{"kind", "lo", "hi", "target", "tol", "name"};
    if (!allowed.count(k)) throw ConfigError("scoring.features: unknown key '" + k + "'");
  }
  if (kind == "higher_better") {
    auto s = FeatureScale::higher_better(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (!(s.lo < s.hi)) throw ConfigError("scoring.features: lo must be below hi");
    return s;
  }
  if (kind == "target_centered") {
    auto s = FeatureScale::target_centered(j.at("target").get<double>(), j.at("tol").get<double>());
    if (!(s.tol > 0.0)) throw ConfigError("scoring.features: tol must be positive");
    return s;
  }
  throw ConfigError("scoring.features: unknown kind '" + kind + "'");
}

/// Applies `patch` onto `base`. Every patch key must already exist in base
/// with a compatible type; arrays replace wholesale.
inline void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    json& target = base[key];
    if (target.is_object()) {
      merge_checked(target, value, where);
    } else if (target.is_number()) {
      if (!value.is_number()) throw ConfigError(where + ": expected a number");
      target = value;
    } else if (target.is_string()) {
      if (!value.is_string()) throw ConfigError(where + ": expected a string");
      target = value;
    } else if (target.is_array()) {
      if (!value.is_array()) throw ConfigError(where + ": expected an array");
      target = value;
    } else {
      target = value;
    }
  }
}

}  // namespace detail

inline json config_to_json(const AnalysisConfig& c) {
  const auto& t = c.tracking;
  const auto& s = c.speech;
  json features = json::array();
  for (const auto& f : c.scored_features) {
    json fj = detail::scale_to_json(f.scale);
    fj["name"] = f.name;
    features.push_back(std::move(fj));
  }
  return json{
      {"tracking",
       {{"history", t.history},
        {"gate_radius", t.gate_radius},
        {"max_cost", t.max_cost},
        {"exit_after", t.exit_after},
        {"edge_margin", t.edge_margin},
        {"visibility", t.visibility},
        {"student_ttl", t.student_ttl},
        {"max_extrapolation", t.max_extrapolation},
        {"teacher_select", to_string(t.teacher_select)}}},
      {"actions",
       {{"hand_wave_window", c.hand_wave.window},
        {"hand_wave_reversals", c.hand_wave.min_reversals},
        {"slide_threshold", c.slide_change.threshold},
        {"slide_debounce", c.slide_change.debounce},
        {"merge_gap", c.merge_gap}}},
      {"speech",
       {{"frame_length", s.frame_length},
        {"hop", s.hop},
        {"vad_delta_db", s.vad_delta_db},
        {"noise_percentile", s.noise_percentile},
        {"gap_close", s.gap_close},
        {"min_utterance", s.min_utterance},
        {"refine_block", s.refine_block},
        {"pitch_window", s.pitch_window},
        {"f0_min", s.f0_min},
        {"f0_max", s.f0_max},
        {"voicing_threshold", s.voicing_threshold},
        {"octave_ratio", s.octave_ratio},
        {"formant_window", s.formant_window},
        {"formant_min_hz", s.formant_min_hz},
        {"formant_prominence_db", s.formant_prominence_db},
        {"syllable_smoothing", s.syllable_smoothing},
        {"syllable_prominence_db", s.syllable_prominence_db},
        {"syllables_per_word", s.syllables_per_word},
        {"coarse_window", s.coarse_window},
        {"fine_window", s.fine_window},
        {"intonation_ref_semitones", s.intonation_ref_semitones}}},
      {"scoring",
       {{"features", std::move(features)},
        {"cpp_floor_db", c.clarity.cpp_floor_db},
        {"cpp_ceiling_db", c.clarity.cpp_ceiling_db},
        {"norms",
         {{"rate_target_wpm", c.norms.rate_target_wpm},
          {"rate_low_wpm", c.norms.rate_low_wpm},
          {"rate_high_wpm", c.norms.rate_high_wpm},
          {"clarity_acceptable", c.norms.clarity_acceptable},
          {"clarity_optimal", c.norms.clarity_optimal},
          {"monotony_low", c.norms.monotony_low},
          {"monotony_average", c.norms.monotony_average},
          {"monotony_high", c.norms.monotony_high}}}}},
      {"analytics",
       {{"heatmap_rows", c.analytics.heatmap_rows},
        {"heatmap_cols", c.analytics.heatmap_cols},
        {"trace_span", c.analytics.trace_span},
        {"short_event_span", c.analytics.short_event_span},
        {"xy_tick", c.analytics.xy_tick}}},
  };
}

/// Reads a complete config document (as produced by config_to_json).
inline AnalysisConfig config_from_json(const json& j) {
  AnalysisConfig c;
  try {
    const auto& t = j.at("tracking");
    c.tracking.history = t.at("history").get<std::size_t>();
    c.tracking.gate_radius = t.at("gate_radius").get<double>();
    c.tracking.max_cost = t.at("max_cost").get<double>();
    c.tracking.exit_after = t.at("exit_after").get<double>();
    c.tracking.edge_margin = t.at("edge_margin").get<double>();
    c.tracking.visibility = t.at("visibility").get<double>();
    c.tracking.student_ttl = t.at("student_ttl").get<double>();
    c.tracking.max_extrapolation = t.at("max_extrapolation").get<double>();
    c.tracking.teacher_select = teacher_select_from_string(t.at("teacher_select").get<std::string>());

    const auto& a = j.at("actions");
    c.hand_wave.window = a.at("hand_wave_window").get<double>();
    c.hand_wave.min_reversals = a.at("hand_wave_reversals").get<int>();
    c.hand_wave.visibility = c.tracking.visibility;
    c.slide_change.threshold = a.at("slide_threshold").get<double>();
    c.slide_change.debounce = a.at("slide_debounce").get<double>();
    c.merge_gap = a.at("merge_gap").get<double>();

    const auto& s = j.at("speech");
    auto& p = c.speech;
    p.frame_length = s.at("frame_length").get<double>();
    p.hop = s.at("hop").get<double>();
    p.vad_delta_db = s.at("vad_delta_db").get<double>();
    p.noise_percentile = s.at("noise_percentile").get<double>();
    p.gap_close = s.at("gap_close").get<double>();
    p.min_utterance = s.at("min_utterance").get<double>();
    p.refine_block = s.at("refine_block").get<double>();
    p.pitch_window = s.at("pitch_window").get<double>();
    p.f0_min = s.at("f0_min").get<double>();
    p.f0_max = s.at("f0_max").get<double>();
    p.voicing_threshold = s.at("voicing_threshold").get<double>();
    p.octave_ratio = s.at("octave_ratio").get<double>();
    p.formant_window = s.at("formant_window").get<double>();
    p.formant_min_hz = s.at("formant_min_hz").get<double>();
    p.formant_prominence_db = s.at("formant_prominence_db").get<double>();
    p.syllable_smoothing = s.at("syllable_smoothing").get<double>();
    p.syllable_prominence_db = s.at("syllable_prominence_db").get<double>();
    p.syllables_per_word = s.at("syllables_per_word").get<double>();
    p.coarse_window = s.at("coarse_window").get<double>();
    p.fine_window = s.at("fine_window").get<double>();
    p.intonation_ref_semitones = s.at("intonation_ref_semitones").get<double>();

    const auto& sc = j.at("scoring");
    c.scored_features.clear();
    static const std::set<std::string> known{"loudness_stability", "intonation", "clarity", "speaking_rate",
                                             "speech_fraction"};
    for (const auto& f : sc.at("features")) {
      const auto name = f.at("name").get<std::string>();
      if (!known.count(name)) throw ConfigError("scoring.features: unknown feature '" + name + "'");
      c.scored_features.push_back({name, detail::scale_from_json(f)});
    }
    c.clarity.cpp_floor_db = sc.at("cpp_floor_db").get<double>();
    c.clarity.cpp_ceiling_db = sc.at("cpp_ceiling_db").get<double>();
    const auto& n = sc.at("norms");
    c.norms.rate_target_wpm = n.at("rate_target_wpm").get<double>();
    c.norms.rate_low_wpm = n.at("rate_low_wpm").get<double>();
    c.norms.rate_high_wpm = n.at("rate_high_wpm").get<double>();
    c.norms.clarity_acceptable = n.at("clarity_acceptable").get<double>();
    c.norms.clarity_optimal = n.at("clarity_optimal").get<double>();
    c.norms.monotony_low = n.at("monotony_low").get<double>();
    c.norms.monotony_average = n.at("monotony_average").get<double>();
    c.norms.monotony_high = n.at("monotony_high").get<double>();

    const auto& an = j.at("analytics");
    c.analytics.heatmap_rows = an.at("heatmap_rows").get<std::size_t>();
    c.analytics.heatmap_cols = an.at("heatmap_cols").get<std::size_t>();
    c.analytics.trace_span = an.at("trace_span").get<double>();
    c.analytics.short_event_span = an.at("short_event_span").get<double>();
    c.analytics.xy_tick = an.at("xy_tick").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (!(c.tracking.max_cost > 0.0) || !(c.tracking.gate_radius > 0.0) || c.tracking.history == 0)
    throw ConfigError("config: tracking parameters must be positive");
  if (!(c.speech.hop > 0.0) || !(c.speech.frame_length > 0.0) || !(c.speech.fine_window > 0.0) ||
      !(c.speech.coarse_window > 0.0) || !(c.speech.f0_min > 0.0) || !(c.speech.f0_max > c.speech.f0_min))
    throw ConfigError("config: speech parameters out of range");
  if (!(c.clarity.cpp_ceiling_db > c.clarity.cpp_floor_db))
    throw ConfigError("config: cpp_ceiling_db must exceed cpp_floor_db");
  const auto& n = c.norms;
  if (!(n.rate_low_wpm <= n.rate_target_wpm && n.rate_target_wpm <= n.rate_high_wpm &&
        n.clarity_acceptable <= n.clarity_optimal && n.monotony_low <= n.monotony_average &&
        n.monotony_average <= n.monotony_high))
    throw ConfigError("config: norm band edges must be ordered");
  if (c.analytics.heatmap_rows == 0 || c.analytics.heatmap_cols == 0)
    throw ConfigError("config: heatmap needs at least one row and column");
  return c;
}

/// Defaults with a partial JSON override applied.
inline AnalysisConfig config_with_overrides(const AnalysisConfig& base, const json& patch) {
  json j = config_to_json(base);
  detail::merge_checked(j, patch, "");
  return config_from_json(j);
}

/// Applies one `section.key=value` assignment; value is parsed as JSON and
/// falls back to a plain string.
inline AnalysisConfig config_with_assignment(const AnalysisConfig& base, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  const std::string key(trim(assignment.substr(0, eq)));
  const std::string text(trim(assignment.substr(eq + 1)));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json patch = value;
  std::string_view rest = key;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = rest.find('.');
    parts.emplace_back(rest.substr(0, dot));
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  return config_with_overrides(base, patch);
}

inline AnalysisConfig load_config_file(const fs::path& path, const AnalysisConfig& base = {}) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_with_overrides(base, j);
}

}  // namespace classlens
