#pragma once

// Teaching action events: rule detectors (hand waving, slide changes),
// ingestion of labeled annotations, and the merged timeline document.

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "classlens/core.hpp"
#include "classlens/ingest.hpp"
#include "classlens/tracking.hpp"

namespace classlens {

enum class ActionKind {
  writing_on_board,
  pointing_at_board,
  gesturing_at_board,
  hand_gesture,
  slide_change,
  custom,
};

enum class EventSource { manual, model, rule };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::writing_on_board: return "writing_on_board";
    case ActionKind::pointing_at_board: return "pointing_at_board";
    case ActionKind::gesturing_at_board: return "gesturing_at_board";
    case ActionKind::hand_gesture: return "hand_gesture";
    case ActionKind::slide_change: return "slide_change";
    case ActionKind::custom: return "custom";
  }
  return "custom";
}

inline std::optional<ActionKind> action_kind_from_string(std::string_view s) {
  for (auto k : {ActionKind::writing_on_board, ActionKind::pointing_at_board,
                 ActionKind::gesturing_at_board, ActionKind::hand_gesture, ActionKind::slide_change})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline const char* to_string(EventSource s) {
  switch (s) {
    case EventSource::manual: return "manual";
    case EventSource::model: return "model";
    case EventSource::rule: return "rule";
  }
  return "rule";
}

inline EventSource event_source_from_string(std::string_view s) {
  if (s == "manual") return EventSource::manual;
  if (s == "model") return EventSource::model;
  if (s == "rule") return EventSource::rule;
  throw ParseError("unknown event source '" + std::string(s) + "'");
}

struct ActionEvent {
  ActionKind kind = ActionKind::custom;
  std::string custom_label;  // only for ActionKind::custom
  TimeInterval interval;
  double confidence = 1.0;
  EventSource source = EventSource::rule;

  /// Serialized kind: the vocabulary name, or `custom:<label>`.
  std::string kind_name() const {
    return kind == ActionKind::custom ? "custom:" + custom_label : to_string(kind);
  }
  friend bool operator==(const ActionEvent&, const ActionEvent&) = default;
};

struct EventTimeline {
  std::string session_id;
  std::vector<ActionEvent> events;
};

// Hand waving ---------------------------------------------------------------

struct HandWaveParams {
  double window = 1.5;       // W, seconds
  int min_reversals = 2;     // N_rev
  double visibility = kDefaultVisibility;
};

namespace detail {

struct ArmSample {
  Timestamp time;
  double x;
  bool raised;  // wrist and shoulder usable, wrist above shoulder
};

inline std::vector<ArmSample> arm_series(const std::vector<TimedPose>& poses, Joint wrist,
                                         Joint shoulder, double visibility) {
  std::vector<ArmSample> out;
  out.reserve(poses.size());
  for (const auto& tp : poses) {
    const bool ok = tp.pose.usable(wrist, visibility) && tp.pose.usable(shoulder, visibility);
    out.push_back({tp.time, tp.pose[wrist].point.x,
                   ok && tp.pose[wrist].point.y < tp.pose[shoulder].point.y});
  }
  return out;
}

inline int sign_of(double v) { return (v > 0) - (v < 0); }

}  // namespace detail

/// Hand-wave events from a teacher pose series. A window of length W ending at
/// a sample qualifies when every sample in it has the wrist raised above the
/// shoulder and the wrist's horizontal velocity flips sign at least N_rev
/// times. Qualifying windows of either arm are merged into events.
inline std::vector<ActionEvent> detect_hand_wave(const std::vector<TimedPose>& poses,
                                                 const HandWaveParams& params = {}) {
  std::vector<TimeInterval> spans;
  for (auto [wrist, shoulder] : {std::pair{Joint::left_wrist, Joint::left_shoulder},
                                 std::pair{Joint::right_wrist, Joint::right_shoulder}}) {
    const auto arm = detail::arm_series(poses, wrist, shoulder, params.visibility);
    std::size_t begin = 0;
    for (std::size_t end = 0; end < arm.size(); ++end) {
      while (arm[begin].time <= arm[end].time - params.window) ++begin;
      bool raised = true;
      for (std::size_t i = begin; i <= end && raised; ++i) raised = arm[i].raised;
      if (!raised || end - begin < 2) continue;
      int reversals = 0;
      int last_sign = 0;
      for (std::size_t i = begin + 1; i <= end; ++i) {
        const int s = detail::sign_of(arm[i].x - arm[i - 1].x);
        if (s == 0) continue;
        if (last_sign != 0 && s != last_sign) ++reversals;
        last_sign = s;
      }
      if (reversals >= params.min_reversals) spans.push_back({arm[begin].time, arm[end].time});
    }
  }
  std::vector<ActionEvent> out;
  for (const auto& iv : interval_union(std::move(spans)))
    out.push_back({ActionKind::hand_gesture, {}, iv, 1.0, EventSource::rule});
  return out;
}

// Slide changes -------------------------------------------------------------

struct SlideChangeParams {
  double threshold = 0.08;  // theta, luma step
  double debounce = 2.0;    // seconds between events
};

/// Zero-length slide_change events where the screen-region luma jumps by more
/// than theta between consecutive samples, at least `debounce` seconds apart.
inline std::vector<ActionEvent> detect_slide_change(const std::vector<LumaSample>& signal,
                                                    const SlideChangeParams& params = {}) {
  std::vector<ActionEvent> out;
  for (std::size_t i = 1; i < signal.size(); ++i) {
    if (std::abs(signal[i].luma - signal[i - 1].luma) <= params.threshold) continue;
    const double t = signal[i].time;
    if (!out.empty() && t - out.back().interval.start < params.debounce) continue;
    out.push_back({ActionKind::slide_change, {}, {t, t}, 1.0, EventSource::rule});
  }
  return out;
}

// Labeled annotations -------------------------------------------------------

/// Maps annotation labels to action kinds. Labels missing from the map become
/// custom events carrying the label; labels in `exclude` (style annotations)
/// are skipped.
inline std::vector<ActionEvent> ingest_model_actions(const std::vector<RawAnnotation>& anns,
                                                     const std::map<std::string, std::string>& label_map,
                                                     const std::map<std::string, std::string>& exclude = {}) {
  std::vector<ActionEvent> out;
  for (const auto& a : anns) {
    ActionEvent e;
    e.interval = a.interval;
    e.confidence = 1.0;
    e.source = a.source == AnnotationSource::manual ? EventSource::manual : EventSource::model;
    if (auto it = label_map.find(a.label); it != label_map.end()) {
      if (auto k = action_kind_from_string(it->second)) {
        e.kind = *k;
      } else {
        e.kind = ActionKind::custom;
        e.custom_label = it->second;
      }
    } else {
      if (exclude.count(a.label)) continue;
      e.kind = ActionKind::custom;
      e.custom_label = a.label;
    }
    out.push_back(std::move(e));
  }
  return out;
}

// Merging -------------------------------------------------------------------

inline constexpr double kMergeGap = 0.5;

/// Sorts all events by start and coalesces same-kind same-source events that
/// overlap or lie within 0.5 s (union interval, max confidence).
inline EventTimeline merge_timeline(std::string session_id,
                                    const std::vector<std::vector<ActionEvent>>& sources,
                                    double gap = kMergeGap) {
  std::map<std::tuple<std::string, int>, std::vector<ActionEvent>> groups;
  for (const auto& list : sources)
    for (const auto& e : list) groups[{e.kind_name(), static_cast<int>(e.source)}].push_back(e);

  EventTimeline out;
  out.session_id = std::move(session_id);
  for (auto& [key, evs] : groups) {
    std::sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) {
      return a.interval.start < b.interval.start ||
             (a.interval.start == b.interval.start && a.interval.end < b.interval.end);
    });
    std::vector<ActionEvent> merged;
    for (const auto& e : evs) {
      if (!merged.empty() && e.interval.start <= merged.back().interval.end + gap) {
        auto& m = merged.back();
        m.interval.end = std::max(m.interval.end, e.interval.end);
        m.confidence = std::max(m.confidence, e.confidence);
      } else {
        merged.push_back(e);
      }
    }
    out.events.insert(out.events.end(), merged.begin(), merged.end());
  }
  std::sort(out.events.begin(), out.events.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(a.interval.start, a.interval.end, a.kind_name(), static_cast<int>(a.source)) <
           std::make_tuple(b.interval.start, b.interval.end, b.kind_name(), static_cast<int>(b.source));
  });
  return out;
}

// JSON ----------------------------------------------------------------------

inline json event_to_json(const ActionEvent& e) {
  return json{{"kind", e.kind_name()},
              {"start", e.interval.start},
              {"end", e.interval.end},
              {"confidence", e.confidence},
              {"source", to_string(e.source)}};
}

inline ActionEvent event_from_json(const json& j) {
  ActionEvent e;
  const auto kind = j.at("kind").get<std::string>();
  if (auto k = action_kind_from_string(kind)) {
    e.kind = *k;
  } else if (kind.rfind("custom:", 0) == 0) {
    e.kind = ActionKind::custom;
    e.custom_label = kind.substr(7);
  } else {
    throw ParseError("unknown event kind '" + kind + "'");
  }
  e.interval = {j.at("start").get<double>(), j.at("end").get<double>()};
  e.confidence = j.at("confidence").get<double>();
  e.source = event_source_from_string(j.at("source").get<std::string>());
  return e;
}

inline json timeline_to_json(const EventTimeline& t) {
  json events = json::array();
  for (const auto& e : t.events) events.push_back(event_to_json(e));
  return json{{"session_id", t.session_id}, {"events", std::move(events)}};
}

inline EventTimeline timeline_from_json(const json& j) {
  EventTimeline t;
  try {
    t.session_id = j.at("session_id").get<std::string>();
    for (const auto& e : j.at("events")) t.events.push_back(event_from_json(e));
  } catch (const json::exception& e) {
    throw ParseError(std::string("timeline: ") + e.what());
  }
  return t;
}

}  // namespace classlens
