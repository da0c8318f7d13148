#pragma once

// Teacher tracking over per-frame person detections.
//
// The teacher is picked in the first populated frame and followed with
// appearance-free association (box overlap plus a motion gate). A registry of
// detection ids known to be students vetoes teacher reassignment, and a track
// that goes unmatched near a frame edge long enough is marked as exited until
// a new person enters at an edge.

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "classlens/assignment.hpp"
#include "classlens/core.hpp"
#include "classlens/ingest.hpp"

namespace classlens {

enum class TeacherSelect { top_y, bottom_y };

inline TeacherSelect teacher_select_from_string(std::string_view s) {
  if (s == "top_y") return TeacherSelect::top_y;
  if (s == "bottom_y") return TeacherSelect::bottom_y;
  throw ConfigError("teacher_select must be top_y or bottom_y, got '" + std::string(s) + "'");
}

inline const char* to_string(TeacherSelect s) { return s == TeacherSelect::top_y ? "top_y" : "bottom_y"; }

struct TrackingParams {
  std::size_t history = 90;         // H, samples kept per track
  double gate_radius = 0.15;        // R, anchor distance that saturates the motion term
  double max_cost = 0.7;            // C_max
  double exit_after = 5.0;          // T_exit, seconds unmatched before an edge exit
  double edge_margin = 0.05;        // M
  double visibility = kDefaultVisibility;
  double student_ttl = 5.0;         // unmatched student tracks are retired after this
  double max_extrapolation = 1.0;   // seconds of constant-velocity prediction
  TeacherSelect teacher_select = TeacherSelect::top_y;
};

enum class TrackRole { teacher, student };
enum class TrackStatus { active, exited };

struct TrackSample {
  Timestamp time = 0.0;
  NormPoint point;
};

struct TrackState {
  int track_id = 0;
  int detection_id = -1;
  BoundingBox last_box;
  NormPoint last_anchor;
  Timestamp last_seen = 0.0;
  std::deque<TrackSample> history;
  TrackRole role = TrackRole::student;
  TrackStatus status = TrackStatus::active;

  void observe(Timestamp t, const PersonDetection& det, NormPoint anchor, std::size_t capacity) {
    detection_id = det.detection_id;
    last_box = det.box;
    last_anchor = anchor;
    last_seen = t;
    history.push_back({t, anchor});
    while (history.size() > capacity) history.pop_front();
  }
};

/// Detection ids ever confirmed as students. Grows monotonically.
struct StudentRegistry {
  std::set<int> ids;
  bool contains(int id) const { return ids.count(id) != 0; }
  void insert(int id) { ids.insert(id); }
};

struct TeacherSample {
  Timestamp time = 0.0;
  NormPoint point;
  int detection_id = -1;
};

/// Observed teacher positions. Samples exist only for frames where the teacher
/// was active and matched; `exits` lists the spans spent outside the room.
struct TeacherTrack {
  int track_id = 0;
  std::vector<TeacherSample> samples;
  std::vector<TimeInterval> exits;
};

inline bool near_edge(NormPoint p, double margin) {
  return p.x <= margin || p.x >= 1.0 - margin || p.y <= margin || p.y >= 1.0 - margin;
}

// Selection -----------------------------------------------------------------

/// Picks the teacher among the persons of one frame by extremal foot-anchor y
/// (smallest y for top_y). Ties go to the smaller x, then the lower id.
inline int select_initial_teacher(const FrameDetections& frame,
                                  TeacherSelect mode = TeacherSelect::top_y,
                                  double visibility = kDefaultVisibility) {
  if (frame.persons.empty()) throw PipelineError("teacher never detected");
  const PersonDetection* best = nullptr;
  NormPoint best_anchor;
  for (const auto& p : frame.persons) {
    const NormPoint a = foot_anchor(p.pose, p.box, visibility);
    if (!best) {
      best = &p;
      best_anchor = a;
      continue;
    }
    const double ya = mode == TeacherSelect::top_y ? a.y : -a.y;
    const double yb = mode == TeacherSelect::top_y ? best_anchor.y : -best_anchor.y;
    const bool better = ya < yb || (ya == yb && (a.x < best_anchor.x ||
                                                 (a.x == best_anchor.x && p.detection_id < best->detection_id)));
    if (better) {
      best = &p;
      best_anchor = a;
    }
  }
  return best->detection_id;
}

// Association ---------------------------------------------------------------

/// Constant-velocity anchor prediction from the last two history points.
inline NormPoint predicted_anchor(const TrackState& t, Timestamp now, const TrackingParams& params) {
  if (t.history.size() < 2) return t.last_anchor;
  const auto& a = t.history[t.history.size() - 2];
  const auto& b = t.history.back();
  const double dt = b.time - a.time;
  if (dt <= 0.0) return t.last_anchor;
  const double ahead = std::min(now - t.last_seen, params.max_extrapolation);
  return clamp_unit(NormPoint{t.last_anchor.x + (b.point.x - a.point.x) / dt * ahead,
                              t.last_anchor.y + (b.point.y - a.point.y) / dt * ahead});
}

inline double association_cost(const TrackState& t, NormPoint predicted, const BoundingBox& box,
                               NormPoint anchor, const TrackingParams& params) {
  const double overlap = 1.0 - iou(t.last_box, box);
  const double motion = std::min(1.0, distance(predicted, anchor) / params.gate_radius);
  return 0.5 * overlap + 0.5 * motion;
}

struct TrackMatch {
  int track_id = 0;
  int detection_id = 0;
  double cost = 0.0;
};

struct AssociationResult {
  std::vector<TrackState> tracks;
  std::vector<TrackMatch> matches;
  double total_cost = 0.0;
  std::vector<int> spawned;                    // track ids created this frame
  std::vector<PersonDetection> reentry_candidates;  // held back while the teacher is out
  CostMatrix costs;                                  // rows: active tracks, cols: detections by id  // held back while the teacher is out
};

inline const TrackState* find_teacher(const std::vector<TrackState>& tracks) {
  for (const auto& t : tracks)
    if (t.role == TrackRole::teacher) return &t;
  return nullptr;
}

/// Builds the cost matrix between active tracks and the frame's detections
/// (sorted by id). Forbidden: cost above C_max, the teacher on a registered
/// student id, a student on the teacher's own detection id.
inline CostMatrix association_costs(const std::vector<const TrackState*>& rows,
                                    const std::vector<const PersonDetection*>& dets,
                                    const std::vector<NormPoint>& anchors, Timestamp now,
                                    const StudentRegistry& registry, int teacher_detection_id,
                                    const TrackingParams& params) {
  CostMatrix m(rows.size(), dets.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const TrackState& t = *rows[r];
    const NormPoint pred = predicted_anchor(t, now, params);
    for (std::size_t c = 0; c < dets.size(); ++c) {
      const int id = dets[c]->detection_id;
      if (t.role == TrackRole::teacher && registry.contains(id)) continue;
      if (t.role == TrackRole::student && id == teacher_detection_id) continue;
      const double cost = association_cost(t, pred, dets[c]->box, anchors[c], params);
      if (cost > params.max_cost) continue;
      m.at(r, c) = cost;
    }
  }
  return m;
}

/// One association step. Matched tracks absorb their detection; unmatched
/// detections become student tracks, except re-entry candidates while the
/// teacher is exited and the teacher's own detection id.
inline AssociationResult associate_frame(std::vector<TrackState> tracks, const FrameDetections& frame,
                                         StudentRegistry& registry, int& next_track_id,
                                         const TrackingParams& params) {
  AssociationResult out;
  const Timestamp now = frame.timestamp;

  std::vector<const PersonDetection*> dets;
  for (const auto& p : frame.persons) dets.push_back(&p);
  std::sort(dets.begin(), dets.end(),
            [](const auto* a, const auto* b) { return a->detection_id < b->detection_id; });
  std::vector<NormPoint> anchors;
  for (const auto* d : dets) anchors.push_back(foot_anchor(d->pose, d->box, params.visibility));

  std::vector<std::size_t> row_index;
  std::vector<const TrackState*> rows;
  int teacher_det = -1;
  bool teacher_exited = false;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].role == TrackRole::teacher) {
      teacher_det = tracks[i].detection_id;
      teacher_exited = tracks[i].status == TrackStatus::exited;
    }
    if (tracks[i].status != TrackStatus::active) continue;
    row_index.push_back(i);
    rows.push_back(&tracks[i]);
  }

  const CostMatrix costs = association_costs(rows, dets, anchors, now, registry, teacher_det, params);
  const Assignment assignment = solve_assignment(costs);

  std::vector<char> taken(dets.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!assignment.match[r]) continue;
    const std::size_t c = *assignment.match[r];
    TrackState& t = tracks[row_index[r]];
    t.observe(now, *dets[c], anchors[c], params.history);
    if (t.role == TrackRole::student) registry.insert(dets[c]->detection_id);
    taken[c] = 1;
    out.matches.push_back({t.track_id, dets[c]->detection_id, *costs.at(r, *assignment.match[r])});
  }
  out.total_cost = assignment.total_cost;
  out.costs = costs;

  for (std::size_t c = 0; c < dets.size(); ++c) {
    if (taken[c]) continue;
    const PersonDetection& d = *dets[c];
    if (teacher_exited && !registry.contains(d.detection_id) && near_edge(anchors[c], params.edge_margin)) {
      out.reentry_candidates.push_back(d);
      continue;
    }
    if (d.detection_id == teacher_det) continue;
    TrackState s;
    s.track_id = next_track_id++;
    s.role = TrackRole::student;
    s.observe(now, d, anchors[c], params.history);
    registry.insert(d.detection_id);
    out.spawned.push_back(s.track_id);
    tracks.push_back(std::move(s));
  }
  out.tracks = std::move(tracks);
  return out;
}

// Exit handling -------------------------------------------------------------

struct ExitUpdate {
  TrackState teacher;
  std::optional<int> reacquired_detection;
  std::optional<TimeInterval> closed_gap;  // set when the teacher re-enters
};

/// Active teacher unmatched for at least T_exit with its last anchor within M
/// of an edge becomes exited. An exited teacher re-acquires the first
/// candidate (by id) that entered at an edge and is not a registered student;
/// the track id is kept and history restarts.
inline ExitUpdate update_exit_state(TrackState teacher, Timestamp now,
                                    const std::vector<PersonDetection>& candidates,
                                    const StudentRegistry& registry, const TrackingParams& params) {
  ExitUpdate out;
  if (teacher.status == TrackStatus::active) {
    if (teacher.last_seen < now && now - teacher.last_seen >= params.exit_after &&
        near_edge(teacher.last_anchor, params.edge_margin)) {
      teacher.status = TrackStatus::exited;
    }
  } else {
    const PersonDetection* pick = nullptr;
    NormPoint anchor;
    for (const auto& c : candidates) {
      if (registry.contains(c.detection_id)) continue;
      const NormPoint a = foot_anchor(c.pose, c.box, params.visibility);
      if (!near_edge(a, params.edge_margin)) continue;
      if (!pick || c.detection_id < pick->detection_id) {
        pick = &c;
        anchor = a;
      }
    }
    if (pick) {
      out.closed_gap = TimeInterval{teacher.last_seen, now};
      teacher.history.clear();
      teacher.status = TrackStatus::active;
      teacher.observe(now, *pick, anchor, params.history);
      out.reacquired_detection = pick->detection_id;
    }
  }
  out.teacher = std::move(teacher);
  return out;
}

// Whole-stream driver -------------------------------------------------------

struct FrameLog {
  std::int64_t frame_index = 0;
  Timestamp time = 0.0;
  TrackStatus teacher_status = TrackStatus::active;
  std::optional<int> teacher_detection;
  std::vector<TrackMatch> matches;
  std::vector<int> spawned;
  CostMatrix costs;  // the instance solved this frame
  double total_cost = 0.0;
};

struct TimedPose {
  Timestamp time = 0.0;
  PoseKeypoints pose;
};

struct TrackingResult {
  TeacherTrack track;
  StudentRegistry registry;
  std::vector<TimedPose> teacher_poses;
  std::vector<FrameLog> log;
  std::size_t student_tracks_created = 0;
};

inline json frame_log_to_json(const FrameLog& f) {
  json matches = json::array();
  for (const auto& m : f.matches) matches.push_back({m.track_id, m.detection_id, m.cost});
  return json{{"frame", f.frame_index},
              {"t", f.time},
              {"teacher_status", f.teacher_status == TrackStatus::active ? "active" : "exited"},
              {"teacher_detection", f.teacher_detection ? json(*f.teacher_detection) : json(nullptr)},
              {"matches", std::move(matches)},
              {"spawned", f.spawned}};
}

/// Runs selection, association and exit handling over the whole stream.
/// Deterministic for identical inputs and parameters.
inline TrackingResult build_teacher_track(const std::vector<FrameDetections>& frames,
                                          const TrackingParams& params) {
  TrackingResult out;
  auto first = std::find_if(frames.begin(), frames.end(),
                            [](const auto& f) { return !f.persons.empty(); });
  if (first == frames.end()) throw PipelineError("teacher never detected");

  int next_track_id = 0;
  std::vector<TrackState> tracks;
  {
    const int teacher_id = select_initial_teacher(*first, params.teacher_select, params.visibility);
    std::vector<const PersonDetection*> ordered;
    for (const auto& p : first->persons) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [&](const auto* a, const auto* b) {
                // Teacher first so it receives the lowest track id.
                if ((a->detection_id == teacher_id) != (b->detection_id == teacher_id))
                  return a->detection_id == teacher_id;
                return a->detection_id < b->detection_id;
              });
    FrameLog log{first->frame_index, first->timestamp, TrackStatus::active, teacher_id, {}, {}, {}, 0.0};
    for (const auto* p : ordered) {
      TrackState t;
      t.track_id = next_track_id++;
      t.role = p->detection_id == teacher_id ? TrackRole::teacher : TrackRole::student;
      const NormPoint a = foot_anchor(p->pose, p->box, params.visibility);
      t.observe(first->timestamp, *p, a, params.history);
      if (t.role == TrackRole::student) {
        out.registry.insert(p->detection_id);
        ++out.student_tracks_created;
        log.spawned.push_back(t.track_id);
      } else {
        out.track.track_id = t.track_id;
        out.track.samples.push_back({first->timestamp, a, p->detection_id});
        if (p->pose) out.teacher_poses.push_back({first->timestamp, *p->pose});
      }
      tracks.push_back(std::move(t));
    }
    out.log.push_back(std::move(log));
  }

  auto teacher_index = [&]() {
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].role == TrackRole::teacher) return i;
    throw PipelineError("teacher track lost");
  };

  Timestamp last_time = first->timestamp;
  for (auto it = std::next(first); it != frames.end(); ++it) {
    const FrameDetections& frame = *it;
    last_time = frame.timestamp;
    AssociationResult step = associate_frame(std::move(tracks), frame, out.registry, next_track_id, params);
    tracks = std::move(step.tracks);
    out.student_tracks_created += step.spawned.size();

    FrameLog log{frame.frame_index, frame.timestamp, TrackStatus::active, std::nullopt, step.matches,
                 step.spawned, step.costs, step.total_cost};

    std::size_t ti = teacher_index();
    const bool matched = std::any_of(step.matches.begin(), step.matches.end(),
                                     [&](const auto& m) { return m.track_id == tracks[ti].track_id; });
    if (!matched) {
      ExitUpdate upd = update_exit_state(tracks[ti], frame.timestamp, step.reentry_candidates,
                                         out.registry, params);
      tracks[ti] = std::move(upd.teacher);
      if (upd.closed_gap) out.track.exits.push_back(*upd.closed_gap);
      // Candidates not taken by the teacher join as students.
      for (const auto& c : step.reentry_candidates) {
        if (upd.reacquired_detection && c.detection_id == *upd.reacquired_detection) continue;
        TrackState s;
        s.track_id = next_track_id++;
        s.role = TrackRole::student;
        s.observe(frame.timestamp, c, foot_anchor(c.pose, c.box, params.visibility), params.history);
        out.registry.insert(c.detection_id);
        ++out.student_tracks_created;
        log.spawned.push_back(s.track_id);
        tracks.push_back(std::move(s));
      }
      ti = teacher_index();
    }

    const TrackState& teacher = tracks[ti];
    log.teacher_status = teacher.status;
    if (teacher.status == TrackStatus::active && teacher.last_seen == frame.timestamp) {
      log.teacher_detection = teacher.detection_id;
      out.track.samples.push_back({frame.timestamp, teacher.last_anchor, teacher.detection_id});
      for (const auto& p : frame.persons)
        if (p.detection_id == teacher.detection_id && p.pose)
          out.teacher_poses.push_back({frame.timestamp, *p.pose});
    }
    if (out.registry.contains(teacher.detection_id) && teacher.status == TrackStatus::active)
      throw PipelineError("invariant violated: teacher detection id registered as student");

    // Retire stale student tracks.
    std::erase_if(tracks, [&](const TrackState& t) {
      return t.role == TrackRole::student && frame.timestamp - t.last_seen > params.student_ttl;
    });
    out.log.push_back(std::move(log));
  }

  const TrackState& teacher = tracks[teacher_index()];
  if (teacher.status == TrackStatus::exited)
    out.track.exits.push_back({teacher.last_seen, std::max(teacher.last_seen, last_time)});
  return out;
}

}  // namespace classlens
