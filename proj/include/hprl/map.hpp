#pragma once

// Lane-graph road maps. All maps are template-generated: a straight corridor,
// a two-lane one-way highway, a two-way single-lane road, and a four-way
// intersection (signalized or not).
//
// Conventions: world frame is x/y in meters, headings counterclockwise from
// +x. "Left" of a lane is the counterclockwise side of its heading; opposite
// lanes (two-way roads) are linked through a dedicated `opposite` slot rather
// than the left/right neighbor slots.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hprl/geometry.hpp"

namespace hprl {

constexpr double kLaneWidth = 3.5;

struct Lane {
  int id = -1;
  std::string name;
  Polyline centerline;
  double width = kLaneWidth;
  double speed_limit = 15.0;  // m/s
};

struct LaneLink {
  std::optional<int> left;      // same-direction neighbor on the left
  std::optional<int> right;     // same-direction neighbor on the right
  std::optional<int> opposite;  // facing lane of a two-way road
  std::vector<int> successors;
};

struct LightPhase {
  std::vector<int> green_lanes;  // incoming lanes with right of way
  double duration = 15.0;        // seconds
};

struct Intersection {
  int id = -1;
  std::vector<int> incoming;
  bool signalized = false;
  std::vector<LightPhase> phases;
  ConvexPolygon region;
};

struct RoadMap {
  std::string name;
  std::vector<Lane> lanes;
  std::vector<Intersection> intersections;
  std::map<int, LaneLink> adjacency;

  const Lane& lane(int id) const {
    for (const auto& l : lanes)
      if (l.id == id) return l;
    throw std::out_of_range("map: unknown lane id " + std::to_string(id));
  }

  const Lane* lane_by_name(const std::string& lane_name) const {
    for (const auto& l : lanes)
      if (l.name == lane_name) return &l;
    return nullptr;
  }

  const LaneLink& link(int id) const {
    const auto it = adjacency.find(id);
    if (it == adjacency.end())
      throw std::out_of_range("map: no adjacency for lane " + std::to_string(id));
    return it->second;
  }

  /// The intersection a lane feeds into, if any.
  const Intersection* intersection_for_incoming(int lane_id) const {
    for (const auto& ix : intersections)
      for (int in : ix.incoming)
        if (in == lane_id) return &ix;
    return nullptr;
  }

  const Intersection* intersection_by_id(int id) const {
    for (const auto& ix : intersections)
      if (ix.id == id) return &ix;
    return nullptr;
  }

  /// Checks the structural invariants; throws on violation.
  void validate() const {
    for (const auto& l : lanes) {
      if (l.centerline.points().size() < 2)
        throw std::invalid_argument("map: lane " + l.name + " has < 2 points");
      if (l.width <= 0.0)
        throw std::invalid_argument("map: lane " + l.name + " has width <= 0");
      const auto& pts = l.centerline.points();
      for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i] == pts[i - 1])
          throw std::invalid_argument("map: lane " + l.name +
                                      " repeats a centerline point");
    }
    for (const auto& [id, lk] : adjacency) {
      lane(id);
      const auto check = [&](std::optional<int> n) {
        if (n) lane(*n);
      };
      check(lk.left);
      check(lk.right);
      check(lk.opposite);
      for (int s : lk.successors) lane(s);
      // Neighbor symmetry: A left-of B <=> B right-of A.
      if (lk.left && (!link(*lk.left).right || *link(*lk.left).right != id))
        throw std::invalid_argument("map: asymmetric left link on lane " +
                                    std::to_string(id));
      if (lk.right && (!link(*lk.right).left || *link(*lk.right).left != id))
        throw std::invalid_argument("map: asymmetric right link on lane " +
                                    std::to_string(id));
      if (lk.opposite && (!link(*lk.opposite).opposite ||
                          *link(*lk.opposite).opposite != id))
        throw std::invalid_argument("map: asymmetric opposite link on lane " +
                                    std::to_string(id));
    }
    for (const auto& ix : intersections) {
      if (ix.region.points.size() < 3)
        throw std::invalid_argument("map: degenerate intersection region");
      if (ix.signalized) {
        for (const auto& p : ix.phases)
          if (p.duration <= 0.0)
            throw std::invalid_argument("map: non-positive phase duration");
        for (int in : ix.incoming) {
          bool covered = false;
          for (const auto& p : ix.phases)
            for (int g : p.green_lanes) covered = covered || g == in;
          if (!covered)
            throw std::invalid_argument("map: lane " + std::to_string(in) +
                                        " not covered by any phase");
        }
      }
    }
  }
};

namespace map_detail {

inline std::vector<Vec2> straight_points(Vec2 from, Vec2 to, double spacing = 1.0) {
  std::vector<Vec2> pts;
  const double len = distance(from, to);
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    pts.push_back(from + (to - from) * t);
  }
  return pts;
}

/// Circular arc sampled every ~0.5 m. Angles in radians; sweep sign gives
/// the winding direction.
inline std::vector<Vec2> arc_points(Vec2 center, double radius, double a0,
                                    double a1) {
  std::vector<Vec2> pts;
  const double sweep = a1 - a0;
  const int n = std::max(4, static_cast<int>(std::ceil(std::abs(sweep) * radius / 0.5)));
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + sweep * i / n;
    pts.push_back(center + Vec2{std::cos(a), std::sin(a)} * radius);
  }
  return pts;
}

inline int add_lane(RoadMap& m, const std::string& name, std::vector<Vec2> pts,
                    double speed_limit = 15.0) {
  Lane l;
  l.id = static_cast<int>(m.lanes.size());
  l.name = name;
  l.centerline = Polyline(std::move(pts));
  l.speed_limit = speed_limit;
  m.lanes.push_back(std::move(l));
  m.adjacency[m.lanes.back().id] = {};
  return m.lanes.back().id;
}

inline void link_successor(RoadMap& m, int from, int to) {
  m.adjacency[from].successors.push_back(to);
}

inline void link_neighbors(RoadMap& m, int right_lane, int left_lane) {
  m.adjacency[right_lane].left = left_lane;
  m.adjacency[left_lane].right = right_lane;
}

inline void link_opposite(RoadMap& m, int a, int b) {
  m.adjacency[a].opposite = b;
  m.adjacency[b].opposite = a;
}

}  // namespace map_detail

/// Single straight lane along +x, length meters long, starting at the origin.
inline RoadMap make_corridor(double length = 300.0) {
  using namespace map_detail;
  RoadMap m;
  m.name = "corridor";
  add_lane(m, "lane0", straight_points({0.0, 0.0}, {length, 0.0}));
  m.validate();
  return m;
}

/// Two same-direction lanes along +x. lane0 is the right lane, lane1 the left.
inline RoadMap make_highway(double length = 300.0) {
  using namespace map_detail;
  RoadMap m;
  m.name = "highway";
  const int l0 = add_lane(m, "lane0", straight_points({0.0, 0.0}, {length, 0.0}));
  const int l1 =
      add_lane(m, "lane1", straight_points({0.0, kLaneWidth}, {length, kLaneWidth}));
  link_neighbors(m, l0, l1);
  m.validate();
  return m;
}

/// Two-way single-lane road along x: "east" runs +x at y=-1.75, "west" runs
/// -x at y=+1.75. The facing lanes are linked as opposites.
inline RoadMap make_two_way(double length = 300.0) {
  using namespace map_detail;
  RoadMap m;
  m.name = "two_way";
  const double h = length / 2.0;
  const double off = kLaneWidth / 2.0;
  const int east = add_lane(m, "east", straight_points({-h, -off}, {h, -off}));
  const int west = add_lane(m, "west", straight_points({h, off}, {-h, off}));
  link_opposite(m, east, west);
  m.validate();
  return m;
}

/// Four-way intersection of two single-lane-per-direction roads crossing at
/// the origin, right-hand traffic. Approach lanes end at the stop line
/// 5.25 m from the center; connector lanes cross the intersection; exit
/// lanes leave it. Lane names: {east,west,north,south}_{in,out} and
/// {east,...}_{straight,right,left}, by compass heading of travel.
inline RoadMap make_fourway(bool signalized, double arm = 100.0) {
  using namespace map_detail;
  using std::numbers::pi;
  RoadMap m;
  m.name = signalized ? "fourway_signalized" : "fourway";
  const double stop = kLaneWidth * 1.5;  // 5.25: stop-line distance
  const double off = kLaneWidth / 2.0;   // 1.75: lane offset from road axis
  const double r_small = kLaneWidth;     // right-turn radius
  const double r_big = 2.0 * kLaneWidth; // left-turn radius

  // Approaches and exits, named by heading of travel.
  const int east_in = add_lane(m, "east_in", straight_points({-arm, -off}, {-stop, -off}));
  const int east_out = add_lane(m, "east_out", straight_points({stop, -off}, {arm, -off}));
  const int west_in = add_lane(m, "west_in", straight_points({arm, off}, {stop, off}));
  const int west_out = add_lane(m, "west_out", straight_points({-stop, off}, {-arm, off}));
  const int north_in = add_lane(m, "north_in", straight_points({off, -arm}, {off, -stop}));
  const int north_out = add_lane(m, "north_out", straight_points({off, stop}, {off, arm}));
  const int south_in = add_lane(m, "south_in", straight_points({-off, arm}, {-off, stop}));
  const int south_out = add_lane(m, "south_out", straight_points({-off, -stop}, {-off, -arm}));

  // Connectors. Right turns are clockwise quarter arcs of radius r_small,
  // left turns counterclockwise quarter arcs of radius r_big.
  const int east_straight =
      add_lane(m, "east_straight", straight_points({-stop, -off}, {stop, -off}), 10.0);
  const int east_right = add_lane(
      m, "east_right", arc_points({-stop, -stop}, r_small, pi / 2, 0.0), 8.0);
  const int east_left = add_lane(
      m, "east_left", arc_points({-stop, stop}, r_big, -pi / 2, 0.0), 8.0);

  const int west_straight =
      add_lane(m, "west_straight", straight_points({stop, off}, {-stop, off}), 10.0);
  const int west_right = add_lane(
      m, "west_right", arc_points({stop, stop}, r_small, -pi / 2, -pi), 8.0);
  const int west_left = add_lane(
      m, "west_left", arc_points({stop, -stop}, r_big, pi / 2, pi), 8.0);

  const int north_straight =
      add_lane(m, "north_straight", straight_points({off, -stop}, {off, stop}), 10.0);
  const int north_right = add_lane(
      m, "north_right", arc_points({stop, -stop}, r_small, pi, pi / 2), 8.0);
  const int north_left = add_lane(
      m, "north_left", arc_points({-stop, -stop}, r_big, 0.0, pi / 2), 8.0);

  const int south_straight =
      add_lane(m, "south_straight", straight_points({-off, stop}, {-off, -stop}), 10.0);
  const int south_right = add_lane(
      m, "south_right", arc_points({-stop, stop}, r_small, 0.0, -pi / 2), 8.0);
  const int south_left = add_lane(
      m, "south_left", arc_points({stop, stop}, r_big, pi, 3 * pi / 2), 8.0);

  link_successor(m, east_in, east_straight);
  link_successor(m, east_in, east_right);
  link_successor(m, east_in, east_left);
  link_successor(m, east_straight, east_out);
  link_successor(m, east_right, south_out);
  link_successor(m, east_left, north_out);

  link_successor(m, west_in, west_straight);
  link_successor(m, west_in, west_right);
  link_successor(m, west_in, west_left);
  link_successor(m, west_straight, west_out);
  link_successor(m, west_right, north_out);
  link_successor(m, west_left, south_out);

  link_successor(m, north_in, north_straight);
  link_successor(m, north_in, north_right);
  link_successor(m, north_in, north_left);
  link_successor(m, north_straight, north_out);
  link_successor(m, north_right, east_out);
  link_successor(m, north_left, west_out);

  link_successor(m, south_in, south_straight);
  link_successor(m, south_in, south_right);
  link_successor(m, south_in, south_left);
  link_successor(m, south_straight, south_out);
  link_successor(m, south_right, west_out);
  link_successor(m, south_left, east_out);

  Intersection ix;
  ix.id = 0;
  ix.incoming = {east_in, west_in, north_in, south_in};
  ix.signalized = signalized;
  ix.region.points = {{-stop, -stop}, {stop, -stop}, {stop, stop}, {-stop, stop}};
  if (signalized) {
    ix.phases.push_back({{east_in, west_in}, 15.0});
    ix.phases.push_back({{north_in, south_in}, 15.0});
  }
  m.intersections.push_back(std::move(ix));
  m.validate();
  return m;
}

/// Map templates by name, as referenced from scenario specs.
inline RoadMap make_map(const std::string& name) {
  if (name == "corridor") return make_corridor();
  if (name == "highway") return make_highway();
  if (name == "two_way") return make_two_way();
  if (name == "fourway") return make_fourway(false);
  if (name == "fourway_signalized") return make_fourway(true);
  throw std::invalid_argument("map: unknown map template '" + name + "'");
}

}  // namespace hprl
