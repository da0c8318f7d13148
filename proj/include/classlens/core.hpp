#pragma once

// Shared domain types for the classroom analytics pipeline.
//
// Coordinates are image-normalized: x runs left to right, y runs top to
// bottom, both in [0,1]. Time is seconds from session start.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace classlens {

inline constexpr const char* kVersion = "0.1.0";

// Errors --------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or manifest content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage could not produce its artifact.
class PipelineError : public Error {
 public:
  using Error::Error;
};

// Time ----------------------------------------------------------------------

using Timestamp = double;

struct TimeInterval {
  Timestamp start = 0.0;
  Timestamp end = 0.0;

  constexpr double duration() const { return end - start; }
  constexpr bool contains(Timestamp t) const { return t >= start && t <= end; }
  friend constexpr bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

inline bool is_valid(const TimeInterval& iv) {
  return std::isfinite(iv.start) && std::isfinite(iv.end) && iv.start >= 0.0 &&
         iv.start <= iv.end;
}

/// Overlap of two intervals; nullopt when disjoint. Touching intervals
/// produce a zero-length overlap.
inline std::optional<TimeInterval> interval_intersect(const TimeInterval& a,
                                                      const TimeInterval& b) {
  const double lo = std::max(a.start, b.start);
  const double hi = std::min(a.end, b.end);
  if (lo > hi) return std::nullopt;
  return TimeInterval{lo, hi};
}

/// Sorts and coalesces intervals that overlap or lie within `gap` of each other.
inline std::vector<TimeInterval> interval_union(std::vector<TimeInterval> ivs,
                                                double gap = 0.0) {
  std::sort(ivs.begin(), ivs.end(), [](const auto& a, const auto& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  std::vector<TimeInterval> out;
  for (const auto& iv : ivs) {
    if (!out.empty() && iv.start <= out.back().end + gap) {
      out.back().end = std::max(out.back().end, iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

inline double total_duration(const std::vector<TimeInterval>& disjoint) {
  double s = 0.0;
  for (const auto& iv : disjoint) s += iv.duration();
  return s;
}

// Geometry ------------------------------------------------------------------

struct NormPoint {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const NormPoint&, const NormPoint&) = default;
};

inline double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

inline NormPoint clamp_unit(NormPoint p) { return {clamp_unit(p.x), clamp_unit(p.y)}; }

inline double distance(NormPoint a, NormPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct BoundingBox {
  NormPoint center;
  double width = 0.0;
  double height = 0.0;

  // Extents clipped to the unit square.
  double left() const { return clamp_unit(center.x - width / 2); }
  double right() const { return clamp_unit(center.x + width / 2); }
  double top() const { return clamp_unit(center.y - height / 2); }
  double bottom() const { return clamp_unit(center.y + height / 2); }
  double area() const { return (right() - left()) * (bottom() - top()); }
  NormPoint bottom_center() const { return {clamp_unit(center.x), bottom()}; }
};

inline bool is_usable(const BoundingBox& b) {
  return std::isfinite(b.center.x) && std::isfinite(b.center.y) && b.width > 0.0 &&
         b.height > 0.0 && b.area() > 0.0;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Pose ----------------------------------------------------------------------

/// COCO-17 joint order.
enum class Joint : std::size_t {
  nose = 0,
  left_eye,
  right_eye,
  left_ear,
  right_ear,
  left_shoulder,
  right_shoulder,
  left_elbow,
  right_elbow,
  left_wrist,
  right_wrist,
  left_hip,
  right_hip,
  left_knee,
  right_knee,
  left_ankle,
  right_ankle,
};

inline constexpr std::size_t kJointCount = 17;
inline constexpr double kDefaultVisibility = 0.3;

struct Keypoint {
  NormPoint point;
  double confidence = 0.0;
};

struct PoseKeypoints {
  std::array<Keypoint, kJointCount> joints{};

  const Keypoint& operator[](Joint j) const { return joints[static_cast<std::size_t>(j)]; }
  Keypoint& operator[](Joint j) { return joints[static_cast<std::size_t>(j)]; }

  bool usable(Joint j, double visibility = kDefaultVisibility) const {
    return (*this)[j].confidence >= visibility;
  }
};

/// Ground-contact point of a person: midpoint of the usable ankles, else the
/// bottom-center of the box. Throws when neither source is usable.
inline NormPoint foot_anchor(const PoseKeypoints* pose, const BoundingBox* box,
                             double visibility = kDefaultVisibility) {
  if (pose) {
    const bool l = pose->usable(Joint::left_ankle, visibility);
    const bool r = pose->usable(Joint::right_ankle, visibility);
    if (l && r) {
      const auto a = (*pose)[Joint::left_ankle].point;
      const auto b = (*pose)[Joint::right_ankle].point;
      return clamp_unit(NormPoint{(a.x + b.x) / 2, (a.y + b.y) / 2});
    }
    if (l) return clamp_unit((*pose)[Joint::left_ankle].point);
    if (r) return clamp_unit((*pose)[Joint::right_ankle].point);
  }
  if (box && is_usable(*box)) return box->bottom_center();
  throw Error("foot_anchor: neither pose ankles nor bounding box usable");
}

inline NormPoint foot_anchor(const std::optional<PoseKeypoints>& pose, const BoundingBox& box,
                             double visibility = kDefaultVisibility) {
  return foot_anchor(pose ? &*pose : nullptr, &box, visibility);
}

// Polygons ------------------------------------------------------------------

using Polygon = std::vector<NormPoint>;

/// Point-in-polygon with a closed boundary: points on an edge count as inside.
inline bool point_in_polygon(NormPoint p, const Polygon& poly, double eps = 1e-12) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const NormPoint a = poly[j];
    const NormPoint b = poly[i];
    // On-segment check.
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) <= eps && p.x >= std::min(a.x, b.x) - eps &&
        p.x <= std::max(a.x, b.x) + eps && p.y >= std::min(a.y, b.y) - eps &&
        p.y <= std::max(a.y, b.y) + eps) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}

struct Zone {
  std::string name;
  Polygon polygon;
};

}  // namespace classlens
