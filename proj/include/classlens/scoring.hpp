#pragma once

// Speaking-performance scoring on a [0,100] scale (equal weights and
// reciprocal-standard-deviation weights) and verdicts against delivery norms.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classlens/core.hpp"
#include "classlens/dsp.hpp"

namespace classlens {

// Normalization -------------------------------------------------------------

struct HigherBetter {
  double lo = 0.0;
  double hi = 1.0;
};

struct TargetCentered {
  double target = 0.0;
  double tol = 1.0;
};

struct FeatureScale {
  enum class Kind { higher_better, target_centered } kind = Kind::higher_better;
  double lo = 0.0;
  double hi = 1.0;
  double target = 0.0;
  double tol = 1.0;

  static FeatureScale higher_better(double lo, double hi) {
    return {Kind::higher_better, lo, hi, 0.0, 1.0};
  }
  static FeatureScale target_centered(double target, double tol) {
    return {Kind::target_centered, 0.0, 1.0, target, tol};
  }
};

/// Maps a raw value onto [0,100]. Out-of-range values clamp.
inline double normalize_feature(double value, const FeatureScale& s) {
  if (s.kind == FeatureScale::Kind::higher_better) {
    if (!(s.lo < s.hi)) throw ConfigError("normalize_feature: lo must be below hi");
    return 100.0 * std::clamp((value - s.lo) / (s.hi - s.lo), 0.0, 1.0);
  }
  if (!(s.tol > 0.0)) throw ConfigError("normalize_feature: tol must be positive");
  return 100.0 * std::max(0.0, 1.0 - std::abs(value - s.target) / s.tol);
}

// Weighting -----------------------------------------------------------------

inline double score_equal_weights(std::span<const double> scores) {
  if (scores.empty()) throw Error("score_equal_weights: empty feature vector");
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

struct WeightedScore {
  double score = 0.0;
  std::vector<double> weights;
};

/// w_i = (1/sigma_i) / sum_j (1/sigma_j). Zero sigmas take the smallest
/// positive sigma; all-zero (or non-positive) sigmas are an error.
inline WeightedScore score_reciprocal_std_weights(std::span<const double> scores, std::span<const double> stds) {
  if (scores.empty()) throw Error("score_reciprocal_std_weights: empty feature vector");
  if (scores.size() != stds.size()) throw Error("score_reciprocal_std_weights: length mismatch");
  double min_pos = 0.0;
  for (double s : stds) {
    if (s < 0.0 || !std::isfinite(s)) throw Error("score_reciprocal_std_weights: invalid sigma");
    if (s > 0.0 && (min_pos == 0.0 || s < min_pos)) min_pos = s;
  }
  if (min_pos == 0.0) throw Error("score_reciprocal_std_weights: all sigmas are zero");

  WeightedScore out;
  out.weights.resize(stds.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < stds.size(); ++i) denom += 1.0 / (stds[i] > 0.0 ? stds[i] : min_pos);
  for (std::size_t i = 0; i < stds.size(); ++i) {
    out.weights[i] = (1.0 / (stds[i] > 0.0 ? stds[i] : min_pos)) / denom;
    out.score += out.weights[i] * scores[i];
  }
  // Guard against rounding pushing the mean outside the score range.
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  out.score = std::clamp(out.score, *mn, *mx);
  return out;
}

// Norms ---------------------------------------------------------------------

struct StyleNorms {
  double rate_target_wpm = 140.0;
  double rate_low_wpm = 125.0;
  double rate_high_wpm = 160.0;
  double clarity_acceptable = 0.5;
  double clarity_optimal = 0.75;
  double monotony_low = 0.4;
  double monotony_average = 1.0;
  double monotony_high = 1.6;
};

/// CPP to a [0,1] clarity score by linear mapping of [cpp_floor, cpp_ceiling].
struct ClarityMapping {
  double cpp_floor_db = 0.0;
  double cpp_ceiling_db = 15.0;

  double operator()(double cpp_db) const {
    return std::clamp((cpp_db - cpp_floor_db) / (cpp_ceiling_db - cpp_floor_db), 0.0, 1.0);
  }
};

struct StyleMetrics {
  std::optional<double> speaking_rate_wpm;
  std::optional<double> clarity;     // [0,1]
  std::optional<double> intonation;  // intonation score
};

struct StyleVerdicts {
  std::string speaking_rate;  // below | within | above | insufficient data
  std::optional<double> rate_distance_wpm;
  std::string clarity;        // suboptimal | acceptable | optimal | insufficient data
  std::string monotony;       // monotonous | average | lively | insufficient data
};

inline constexpr const char* kInsufficientData = "insufficient data";

/// Band verdicts with half-open bands [lo, hi).
inline StyleVerdicts classify_style(const StyleMetrics& m, const StyleNorms& n = {}) {
  StyleVerdicts v;
  if (m.speaking_rate_wpm) {
    const double r = *m.speaking_rate_wpm;
    v.speaking_rate = r < n.rate_low_wpm ? "below" : r < n.rate_high_wpm ? "within" : "above";
    v.rate_distance_wpm = r - n.rate_target_wpm;
  } else {
    v.speaking_rate = kInsufficientData;
  }
  if (m.clarity) {
    const double c = *m.clarity;
    v.clarity = c < n.clarity_acceptable ? "suboptimal" : c < n.clarity_optimal ? "acceptable" : "optimal";
  } else {
    v.clarity = kInsufficientData;
  }
  if (m.intonation) {
    const double s = *m.intonation;
    v.monotony = s < n.monotony_low ? "monotonous" : s < n.monotony_high ? "average" : "lively";
  } else {
    v.monotony = kInsufficientData;
  }
  return v;
}

// Feature set ---------------------------------------------------------------

struct ScoredFeatureSpec {
  std::string name;  // loudness_stability | intonation | clarity | speaking_rate | speech_fraction
  FeatureScale scale;
};

inline std::vector<ScoredFeatureSpec> default_scored_features() {
  return {
      {"loudness_stability", FeatureScale::target_centered(0.0, 15.0)},
      {"intonation", FeatureScale::target_centered(1.0, 1.0)},
      {"clarity", FeatureScale::higher_better(0.0, 1.0)},
      {"speaking_rate", FeatureScale::target_centered(140.0, 40.0)},
      {"speech_fraction", FeatureScale::higher_better(0.0, 1.0)},
  };
}

struct FeatureScore {
  std::string name;
  double raw = 0.0;
  double score = 0.0;
  std::optional<double> sigma;  // std of the score over fine windows
};

struct SpeakingScore {
  std::vector<FeatureScore> features;
  std::optional<double> ew_score;
  std::optional<double> rw_score;
  std::vector<double> ew_weights;
  std::vector<double> rw_weights;
};

/// Scores per-feature session values; per-feature sigma is the population std
/// of that feature's normalized score over the fine windows. Features lacking
/// a session value are left out. Missing sigmas count as zero and so take the
/// smallest positive sigma; with no positive sigma at all RW is unavailable.
inline SpeakingScore score_speaking(const std::vector<ScoredFeatureSpec>& specs,
                                    const std::vector<std::optional<double>>& session_values,
                                    const std::vector<std::vector<double>>& fine_values) {
  SpeakingScore out;
  std::vector<double> scores, sigmas;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!session_values[i]) continue;
    FeatureScore fs;
    fs.name = specs[i].name;
    fs.raw = *session_values[i];
    fs.score = normalize_feature(fs.raw, specs[i].scale);
    std::vector<double> window_scores;
    for (double v : fine_values[i]) window_scores.push_back(normalize_feature(v, specs[i].scale));
    if (window_scores.size() >= 2) fs.sigma = dsp::stddev(window_scores);
    scores.push_back(fs.score);
    sigmas.push_back(fs.sigma.value_or(0.0));
    out.features.push_back(std::move(fs));
  }
  if (scores.empty()) return out;
  out.ew_score = score_equal_weights(scores);
  out.ew_weights.assign(scores.size(), 1.0 / static_cast<double>(scores.size()));
  if (std::any_of(sigmas.begin(), sigmas.end(), [](double s) { return s > 0.0; })) {
    auto rw = score_reciprocal_std_weights(scores, sigmas);
    out.rw_score = rw.score;
    out.rw_weights = std::move(rw.weights);
  }
  return out;
}

}  // namespace classlens
