#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace hprl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 unit_from_angle(double rad) { return {std::cos(rad), std::sin(rad)}; }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double rad) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(rad, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Oriented rectangle: center pose plus half extents along the heading axis.
struct Obb {
  Vec2 center;
  double yaw = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 fwd = unit_from_angle(yaw);
    const Vec2 side{-fwd.y, fwd.x};
    const Vec2 l = fwd * half_length;
    const Vec2 w = side * half_width;
    return {center + l + w, center + l - w, center - l - w, center - l + w};
  }
};

namespace detail {
inline bool separated_on_axis(Vec2 axis, const std::array<Vec2, 4>& a,
                              const std::array<Vec2, 4>& b) {
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (const Vec2& p : a) {
    const double v = dot(axis, p);
    amin = std::min(amin, v);
    amax = std::max(amax, v);
  }
  for (const Vec2& p : b) {
    const double v = dot(axis, p);
    bmin = std::min(bmin, v);
    bmax = std::max(bmax, v);
  }
  return amax < bmin || bmax < amin;
}
}  // namespace detail

/// Separating-axis overlap test for two oriented rectangles. Touching counts
/// as overlap (the strict inequality is on the separation side).
inline bool obb_overlap(const Obb& a, const Obb& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {unit_from_angle(a.yaw),
                                    Vec2{-std::sin(a.yaw), std::cos(a.yaw)},
                                    unit_from_angle(b.yaw),
                                    Vec2{-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const Vec2& axis : axes) {
    if (detail::separated_on_axis(axis, ca, cb)) return false;
  }
  return true;
}

inline bool point_in_obb(Vec2 p, const Obb& box) {
  const Vec2 d = p - box.center;
  const Vec2 fwd = unit_from_angle(box.yaw);
  const Vec2 side{-fwd.y, fwd.x};
  return std::abs(dot(d, fwd)) <= box.half_length &&
         std::abs(dot(d, side)) <= box.half_width;
}

/// Convex polygon given in counterclockwise order.
struct ConvexPolygon {
  std::vector<Vec2> points;

  bool contains(Vec2 p) const {
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = points[i];
      const Vec2 b = points[(i + 1) % n];
      if (cross(b - a, p - a) < 0.0) return false;
    }
    return true;
  }

  /// Euclidean distance from a point to the polygon (0 inside).
  double distance_to(Vec2 p) const {
    if (contains(p)) return 0.0;
    double best = 1e300;
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = points[i];
      const Vec2 b = points[(i + 1) % n];
      const Vec2 ab = b - a;
      const double len2 = dot(ab, ab);
      double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, distance(p, a + ab * t));
    }
    return best;
  }
};

/// Polyline with cached cumulative arc length, supporting point/heading
/// lookup by arc length and point projection back onto the line.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    cum_.resize(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i)
      cum_[i] = cum_[i - 1] + distance(pts_[i - 1], pts_[i]);
  }

  const std::vector<Vec2>& points() const { return pts_; }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  bool empty() const { return pts_.empty(); }

  Vec2 point_at(double s) const {
    const auto [i, t] = locate(s);
    return pts_[i] + (pts_[i + 1] - pts_[i]) * t;
  }

  double heading_at(double s) const {
    const auto [i, t] = locate(s);
    const Vec2 d = pts_[i + 1] - pts_[i];
    return std::atan2(d.y, d.x);
  }

  /// Arc length of the closest point on the polyline to p.
  double project(Vec2 p) const {
    double best_d2 = 1e300;
    double best_s = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const Vec2 ab = pts_[i + 1] - pts_[i];
      const double len2 = dot(ab, ab);
      double t = len2 > 0.0 ? dot(p - pts_[i], ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 q = pts_[i] + ab * t;
      const double d2 = dot(p - q, p - q);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = cum_[i] + std::sqrt(len2) * t;
      }
    }
    return best_s;
  }

  /// Signed lateral offset of p relative to the line direction at its
  /// projection; positive on the left of the direction of travel.
  double lateral_offset(Vec2 p) const {
    const double s = project(p);
    const auto [i, t] = locate(s);
    const Vec2 dir = pts_[i + 1] - pts_[i];
    const Vec2 q = pts_[i] + dir * t;
    const double len = norm(dir);
    if (len == 0.0) return 0.0;
    return cross(dir * (1.0 / len), p - q);
  }

 private:
  // Segment index and interpolation factor for arc length s (clamped).
  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, length());
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t i = it == cum_.begin() ? 0 : (it - cum_.begin()) - 1;
    i = std::min(i, pts_.size() - 2);
    const double seg = cum_[i + 1] - cum_[i];
    const double t = seg > 0.0 ? (s - cum_[i]) / seg : 0.0;
    return {i, t};
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

/// Distance from point p to the segment [a, b].
inline double segment_point_distance(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

/// First intersection point of two polylines, walking a in arc-length order.
/// Returns arc lengths (s_a, s_b) of the crossing, or negative values if the
/// lines never cross.
inline std::array<double, 2> first_crossing(const Polyline& a, const Polyline& b) {
  const auto& pa = a.points();
  const auto& pb = b.points();
  double sa = 0.0;
  for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
    const Vec2 p = pa[i], r = pa[i + 1] - pa[i];
    double sb = 0.0;
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
      const Vec2 q = pb[j], s = pb[j + 1] - pb[j];
      const double denom = cross(r, s);
      if (denom != 0.0) {
        const double t = cross(q - p, s) / denom;
        const double u = cross(q - p, r) / denom;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
          return {sa + t * norm(r), sb + u * norm(s)};
        }
      }
      sb += norm(s);
    }
    sa += norm(r);
  }
  return {-1.0, -1.0};
}

}  // namespace hprl
