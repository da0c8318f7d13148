#pragma once

// Spatial and session-level analytics: occupancy heatmap, zone occupancy,
// recent position trace, action-time proportions, speaking/pausing balance,
// teaching-style balance.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "classlens/actions.hpp"
#include "classlens/core.hpp"
#include "classlens/ingest.hpp"
#include "classlens/speech.hpp"
#include "classlens/tracking.hpp"

namespace classlens {

// Heatmap -------------------------------------------------------------------

struct HeatmapGrid {
  std::size_t rows = 12;
  std::size_t cols = 20;
  std::vector<std::size_t> counts;  // row-major
  std::size_t total = 0;

  std::size_t at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }

  /// Per-cell fraction of samples; nullopt for an empty grid.
  std::optional<std::vector<double>> normalized() const {
    if (total == 0) return std::nullopt;
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return out;
  }
};

inline std::pair<std::size_t, std::size_t> heatmap_cell(NormPoint p, std::size_t rows, std::size_t cols) {
  const auto idx = [](double v, std::size_t n) {
    const auto i = static_cast<std::size_t>(std::floor(clamp_unit(v) * static_cast<double>(n)));
    return std::min(i, n - 1);
  };
  return {idx(p.y, rows), idx(p.x, cols)};
}

inline HeatmapGrid compute_heatmap(const std::vector<TeacherSample>& samples, std::size_t rows = 12,
                                   std::size_t cols = 20) {
  if (rows == 0 || cols == 0) throw ConfigError("heatmap needs at least one row and column");
  HeatmapGrid g;
  g.rows = rows;
  g.cols = cols;
  g.counts.assign(rows * cols, 0);
  for (const auto& s : samples) {
    const auto [r, c] = heatmap_cell(s.point, rows, cols);
    ++g.counts[r * cols + c];
    ++g.total;
  }
  return g;
}

inline HeatmapGrid compute_heatmap(const TeacherTrack& track, std::size_t rows = 12, std::size_t cols = 20) {
  return compute_heatmap(track.samples, rows, cols);
}

// Zones ---------------------------------------------------------------------

struct ZoneOccupancy {
  std::map<std::string, double> fractions;
  std::size_t samples = 0;
};

inline ZoneOccupancy zone_occupancy(const std::vector<TeacherSample>& samples, const std::vector<Zone>& zones) {
  ZoneOccupancy out;
  out.samples = samples.size();
  for (const auto& z : zones) {
    std::size_t inside = 0;
    for (const auto& s : samples)
      if (point_in_polygon(s.point, z.polygon)) ++inside;
    out.fractions[z.name] = samples.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(samples.size());
  }
  return out;
}

// Trace ---------------------------------------------------------------------

/// Samples with time in (now - span, now], in track order.
inline std::vector<TeacherSample> trace_window(const TeacherTrack& track, Timestamp now, double span = 60.0) {
  const auto by_time = [](const TeacherSample& s, double t) { return s.time <= t; };
  const auto first = std::lower_bound(track.samples.begin(), track.samples.end(), now - span, by_time);
  const auto last = std::lower_bound(first, track.samples.end(), now, by_time);
  return {first, last};
}

// Action proportions --------------------------------------------------------

inline constexpr const char* kZoneBoard = "board";
inline constexpr const char* kZoneStudents = "students";
inline constexpr const char* kZoneElsewhere = "elsewhere";
inline constexpr const char* kZoneUntracked = "untracked";
inline constexpr const char* kNoAction = "none";

struct ActionProportions {
  std::map<std::string, double> outer;                         // kind -> fraction, plus "none"
  std::map<std::string, std::map<std::string, double>> inner;  // kind -> zone category -> fraction
};

inline std::string zone_category(NormPoint p, const std::vector<Zone>& zones) {
  for (const char* name : {kZoneBoard, kZoneStudents})
    for (const auto& z : zones)
      if (z.name == name && point_in_polygon(p, z.polygon)) return name;
  return kZoneElsewhere;
}

namespace detail {

inline std::map<std::string, double> zone_split(const TimeInterval& iv, const std::vector<TeacherSample>& samples,
                                                const std::vector<Zone>& zones, double short_span) {
  std::map<std::string, double> dist;
  const auto by_time = [](const TeacherSample& s, double t) { return s.time < t; };
  if (iv.duration() < short_span) {
    // Zone at the event midpoint: nearest sample within half a second.
    const double mid = (iv.start + iv.end) / 2.0;
    const auto it = std::lower_bound(samples.begin(), samples.end(), mid, by_time);
    const TeacherSample* best = nullptr;
    if (it != samples.end()) best = &*it;
    if (it != samples.begin() && (!best || mid - std::prev(it)->time <= best->time - mid)) best = &*std::prev(it);
    if (best && std::abs(best->time - mid) <= 0.5)
      dist[zone_category(best->point, zones)] = 1.0;
    else
      dist[kZoneUntracked] = 1.0;
    return dist;
  }
  const auto first = std::lower_bound(samples.begin(), samples.end(), iv.start, by_time);
  std::size_t n = 0;
  for (auto it = first; it != samples.end() && it->time <= iv.end; ++it) {
    dist[zone_category(it->point, zones)] += 1.0;
    ++n;
  }
  if (n == 0) {
    dist[kZoneUntracked] = 1.0;
  } else {
    for (auto& [k, v] : dist) v /= static_cast<double>(n);
  }
  return dist;
}

}  // namespace detail

/// Outer ring: share of session time per action kind (sources pooled). Time
/// where several kinds run at once is split evenly among them, and `none`
/// takes the uncovered remainder, so the ring sums to one. Inner ring: each
/// kind's share split by the teacher's zone (board, students, elsewhere,
/// untracked); events shorter than `short_span` use the zone at their midpoint.
inline ActionProportions action_proportions(const EventTimeline& timeline, const TeacherTrack& track,
                                            const std::vector<Zone>& zones, double duration,
                                            double short_span = 1.0) {
  ActionProportions out;
  if (!(duration > 0.0)) throw Error("action_proportions: duration must be positive");

  std::map<std::string, std::vector<TimeInterval>> by_kind;
  for (const auto& e : timeline.events) {
    const double s = std::clamp(e.interval.start, 0.0, duration);
    const double t = std::clamp(e.interval.end, 0.0, duration);
    by_kind[e.kind_name()].push_back({s, t});
  }
  for (auto& [kind, ivs] : by_kind) {
    ivs = interval_union(std::move(ivs));
    out.outer[kind] = 0.0;
  }

  std::vector<double> cuts{0.0, duration};
  for (const auto& [kind, ivs] : by_kind)
    for (const auto& iv : ivs) {
      cuts.push_back(iv.start);
      cuts.push_back(iv.end);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // Zone distribution per union interval, computed once.
  std::map<std::string, std::vector<std::map<std::string, double>>> splits;
  for (const auto& [kind, ivs] : by_kind)
    for (const auto& iv : ivs) splits[kind].push_back(detail::zone_split(iv, track.samples, zones, short_span));

  double covered = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    const double mid = (a + b) / 2.0;
    std::vector<std::pair<std::string, std::size_t>> active;
    for (const auto& [kind, ivs] : by_kind) {
      const auto it = std::upper_bound(ivs.begin(), ivs.end(), mid,
                                       [](double t, const TimeInterval& iv) { return t < iv.start; });
      if (it != ivs.begin() && std::prev(it)->end >= mid)
        active.emplace_back(kind, static_cast<std::size_t>(std::prev(it) - ivs.begin()));
    }
    if (active.empty()) continue;
    covered += b - a;
    const double share = (b - a) / static_cast<double>(active.size());
    for (const auto& [kind, idx] : active) {
      out.outer[kind] += share;
      for (const auto& [zone, frac] : splits[kind][idx]) out.inner[kind][zone] += share * frac;
    }
  }
  for (auto& [k, v] : out.outer) v /= duration;
  for (auto& [k, zones_map] : out.inner)
    for (auto& [z, v] : zones_map) v /= duration;
  out.outer[kNoAction] = std::max(0.0, (duration - covered) / duration);
  return out;
}

// Speaking and pausing ------------------------------------------------------

struct SpeakPause {
  double speech_s = 0.0;
  double pause_s = 0.0;
  std::optional<double> ratio;  // nullopt when pause time is zero
  bool ratio_infinite = false;
};

inline SpeakPause speak_pause_ratio(const std::vector<Utterance>& utterances, double duration) {
  SpeakPause out;
  for (const auto& u : utterances) out.speech_s += u.interval.duration();
  out.pause_s = std::max(0.0, duration - out.speech_s);
  if (out.pause_s > 0.0) {
    out.ratio = out.speech_s / out.pause_s;
  } else {
    out.ratio_infinite = true;
  }
  return out;
}

// Teaching style ------------------------------------------------------------

struct TeachingStyle {
  std::optional<double> active_fraction;
  std::optional<double> passive_fraction;
};

/// Active versus passive share of mapped manual-annotation time. Overlapping
/// annotations of one class count once; unmapped labels are ignored.
inline TeachingStyle teaching_style_balance(const std::vector<RawAnnotation>& annotations,
                                            const std::map<std::string, std::string>& style_map) {
  std::vector<TimeInterval> active, passive;
  for (const auto& a : annotations) {
    if (a.source != AnnotationSource::manual) continue;
    const auto it = style_map.find(a.label);
    if (it == style_map.end()) continue;
    (it->second == "active" ? active : passive).push_back(a.interval);
  }
  const double ta = total_duration(interval_union(std::move(active)));
  const double tp = total_duration(interval_union(std::move(passive)));
  TeachingStyle out;
  if (ta + tp > 0.0) {
    out.active_fraction = ta / (ta + tp);
    out.passive_fraction = tp / (ta + tp);
  }
  return out;
}

// Position series -----------------------------------------------------------

/// Keeps, for each 0.5 s tick, the sample nearest to it (within a quarter
/// second), dropping repeats.
inline std::vector<TeacherSample> downsample_xy(const std::vector<TeacherSample>& samples, double duration,
                                                double tick = 0.5) {
  std::vector<TeacherSample> out;
  if (samples.empty()) return out;
  const auto by_time = [](const TeacherSample& s, double t) { return s.time < t; };
  const auto n = static_cast<std::size_t>(std::floor(duration / tick + 1e-9));
  const TeacherSample* last = nullptr;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * tick;
    const auto it = std::lower_bound(samples.begin(), samples.end(), t, by_time);
    const TeacherSample* best = nullptr;
    if (it != samples.end()) best = &*it;
    if (it != samples.begin() && (!best || t - std::prev(it)->time <= best->time - t)) best = &*std::prev(it);
    if (!best || std::abs(best->time - t) > tick / 2.0 || best == last) continue;
    out.push_back(*best);
    last = best;
  }
  return out;
}

}  // namespace classlens
