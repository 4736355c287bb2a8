#pragma once

// World state and dynamics: kinematic bicycle ego, scripted NPC profiles,
// traffic lights, oriented-rectangle collision detection, and the sensor
// primitives every other module consumes. step() is a pure function of
// (world, control); nothing here draws randomness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hprl/geometry.hpp"
#include "hprl/map.hpp"

namespace hprl {

constexpr double kSensorRange = 50.0;       // R_s, clamp for dx_lon / dx_n
constexpr double kLightLookahead = 30.0;    // light governs ego within this
constexpr double kClearanceMargin = 2.0;    // free space ahead/behind, C_eps

struct Control {
  double throttle = 0.0;  // [0, 1]
  double steer = 0.0;     // [-1, 1], positive steers right (clockwise)
  double brake = 0.0;     // [0, 1]

  Control clamped() const {
    return {std::clamp(throttle, 0.0, 1.0), std::clamp(steer, -1.0, 1.0),
            std::clamp(brake, 0.0, 1.0)};
  }
  bool operator==(const Control&) const = default;
};

enum class BehaviorTag {
  Ego,
  ConstantSpeed,
  SuddenBrake,
  RedLightRunner,
  Crossing,
  Stationary,
  SlowLeader,
};

inline const char* to_string(BehaviorTag b) {
  switch (b) {
    case BehaviorTag::Ego: return "ego";
    case BehaviorTag::ConstantSpeed: return "constant_speed";
    case BehaviorTag::SuddenBrake: return "sudden_brake";
    case BehaviorTag::RedLightRunner: return "red_light_runner";
    case BehaviorTag::Crossing: return "crossing";
    case BehaviorTag::Stationary: return "stationary";
    case BehaviorTag::SlowLeader: return "slow_leader";
  }
  return "?";
}

inline BehaviorTag behavior_from_string(const std::string& s) {
  if (s == "ego") return BehaviorTag::Ego;
  if (s == "constant_speed") return BehaviorTag::ConstantSpeed;
  if (s == "sudden_brake") return BehaviorTag::SuddenBrake;
  if (s == "red_light_runner") return BehaviorTag::RedLightRunner;
  if (s == "crossing") return BehaviorTag::Crossing;
  if (s == "stationary") return BehaviorTag::Stationary;
  if (s == "slow_leader") return BehaviorTag::SlowLeader;
  throw std::invalid_argument("world: unknown behavior '" + s + "'");
}

struct Waypoint {
  Vec2 pos;
  int lane_id = -1;
  double yaw = 0.0;
};

struct VehicleState {
  int id = -1;
  Vec2 pos;
  double yaw = 0.0;
  double speed = 0.0;     // v_ego for the ego vehicle, always >= 0
  double yaw_rate = 0.0;  // rad/s
  double length = 4.5;
  double width = 2.0;
  int lane_id = -1;
  double lane_s = 0.0;  // arc position on lane_id
  Control control;
  BehaviorTag behavior = BehaviorTag::ConstantSpeed;
  double cruise_speed = 0.0;      // scripted behaviors' nominal speed
  bool behavior_latched = false;  // e.g. sudden_brake has triggered
  std::optional<Waypoint> target; // current sub-task target, set by callers
  std::vector<int> route_hint;    // lanes the planner expects; may be empty

  Obb footprint() const { return {pos, yaw, length / 2.0, width / 2.0}; }
};

struct VehicleParams {
  double wheelbase = 2.7;          // m
  double a_max = 4.0;              // m/s^2, full-throttle acceleration
  double b_max = 8.0;              // m/s^2, full-brake deceleration
  double c_drag = 0.05;            // 1/s, linear drag on speed
  double max_wheel_angle = deg_to_rad(35.0);
  double npc_accel = 2.0;          // scripted profiles' gentle acceleration
  double npc_brake = 4.0;          // scripted profiles' service braking
};

struct LightState {
  int phase = 0;
  double clock = 0.0;  // seconds into the active phase
};

struct WorldState {
  std::shared_ptr<const RoadMap> map;
  std::vector<VehicleState> vehicles;
  std::map<int, LightState> lights;  // intersection id -> state
  long tick = 0;
  std::uint64_t rng_seed = 0;
  double dt = 0.1;
  VehicleParams params;

  const VehicleState& ego() const { return vehicles[ego_index()]; }
  VehicleState& ego() { return vehicles[ego_index()]; }

  std::size_t ego_index() const {
    std::size_t idx = vehicles.size();
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      if (vehicles[i].behavior == BehaviorTag::Ego) {
        if (idx != vehicles.size())
          throw std::logic_error("world: more than one ego vehicle");
        idx = i;
      }
    }
    if (idx == vehicles.size()) throw std::logic_error("world: no ego vehicle");
    return idx;
  }

  const VehicleState* find_vehicle(int id) const {
    for (const auto& v : vehicles)
      if (v.id == id) return &v;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Traffic lights

inline bool light_is_green(const WorldState& w, const Intersection& ix,
                           int lane_id) {
  if (!ix.signalized) return true;
  const auto it = w.lights.find(ix.id);
  if (it == w.lights.end()) return true;
  const LightPhase& phase = ix.phases[it->second.phase];
  for (int g : phase.green_lanes)
    if (g == lane_id) return true;
  return false;
}

/// Seconds until the light for lane_id next changes color (falls edge if
/// green now, rising edge if red now). Lights are deterministic, so this is
/// exact. Returns a large value for unsignalized lanes.
inline double time_until_light_change(const WorldState& w, const Intersection& ix,
                                      int lane_id) {
  if (!ix.signalized) return 1e9;
  const auto it = w.lights.find(ix.id);
  if (it == w.lights.end()) return 1e9;
  const bool now_green = light_is_green(w, ix, lane_id);
  double t = ix.phases[it->second.phase].duration - it->second.clock;
  int p = it->second.phase;
  for (std::size_t hop = 0; hop < 2 * ix.phases.size(); ++hop) {
    p = (p + 1) % static_cast<int>(ix.phases.size());
    bool green = false;
    for (int g : ix.phases[p].green_lanes) green = green || g == lane_id;
    if (green != now_green) return t;
    t += ix.phases[p].duration;
  }
  return 1e9;
}

enum class LightColor { None, Red, Green };

struct GoverningLight {
  LightColor color = LightColor::None;
  double distance = kSensorRange;  // along-lane distance to the stop line
  int intersection_id = -1;
};

/// The light governing a vehicle: the signal of its registered lane, once the
/// vehicle is within the lookahead of the stop line on an incoming lane.
inline GoverningLight governing_light(const WorldState& w, const VehicleState& v) {
  const Intersection* ix = w.map->intersection_for_incoming(v.lane_id);
  if (ix == nullptr || !ix->signalized) return {};
  const Lane& lane = w.map->lane(v.lane_id);
  const double dist = lane.centerline.length() - lane.centerline.project(v.pos);
  if (dist > kLightLookahead) return {};
  return {light_is_green(w, *ix, v.lane_id) ? LightColor::Green : LightColor::Red,
          dist, ix->id};
}

// ---------------------------------------------------------------------------
// Lane registration

namespace world_detail {

inline double lane_fit_score(const Lane& lane, const VehicleState& v) {
  const double s = lane.centerline.project(v.pos);
  const Vec2 p = lane.centerline.point_at(s);
  const double lat = distance(p, v.pos);
  const double dyaw = std::abs(wrap_angle(v.yaw - lane.centerline.heading_at(s)));
  return lat + 2.0 * dyaw;
}

/// Deterministic successor choice for lane-following: the hinted lane when a
/// route hint names one, otherwise the straightest continuation, ties to the
/// lower id.
inline std::optional<int> pick_successor(const RoadMap& map, int lane_id,
                                         const std::vector<int>& hint) {
  const auto& succ = map.link(lane_id).successors;
  if (succ.empty()) return std::nullopt;
  for (int h : hint)
    for (int s : succ)
      if (s == h) return s;
  const Lane& from = map.lane(lane_id);
  const double out_heading = from.centerline.heading_at(from.centerline.length());
  int best = succ.front();
  double best_diff = 1e300;
  for (int s : succ) {
    const Lane& to = map.lane(s);
    const double diff = std::abs(wrap_angle(
        to.centerline.heading_at(to.centerline.length() / 2.0) - out_heading));
    if (diff < best_diff - 1e-9 || (std::abs(diff - best_diff) <= 1e-9 && s < best)) {
      best_diff = diff;
      best = s;
    }
  }
  return best;
}

/// Re-registers the ego on the best-fitting lane among the current lane, its
/// neighbors and successors. Hysteresis keeps registration stable mid-lane;
/// running off the end of a lane forces the successor.
inline void update_ego_lane(const RoadMap& map, VehicleState& ego) {
  const Lane& cur = map.lane(ego.lane_id);
  const double s_cur = cur.centerline.project(ego.pos);
  std::vector<int> candidates;
  const LaneLink& lk = map.link(ego.lane_id);
  const bool past_end = s_cur >= cur.centerline.length() - 1e-6;
  if (past_end) {
    if (const auto next = pick_successor(map, ego.lane_id, ego.route_hint)) {
      ego.lane_id = *next;
      ego.lane_s = map.lane(*next).centerline.project(ego.pos);
      return;
    }
  }
  if (lk.left) candidates.push_back(*lk.left);
  if (lk.right) candidates.push_back(*lk.right);
  if (lk.opposite) candidates.push_back(*lk.opposite);
  for (int s : lk.successors) {
    if (ego.route_hint.empty()) {
      candidates.push_back(s);
    } else {
      for (int h : ego.route_hint)
        if (h == s) candidates.push_back(s);
    }
  }
  const double cur_score = lane_fit_score(cur, ego);
  int best = ego.lane_id;
  double best_score = cur_score - 0.3;  // hysteresis: a switch must win clearly
  for (int c : candidates) {
    const double sc = lane_fit_score(map.lane(c), ego);
    if (sc < best_score) {
      best_score = sc;
      best = c;
    }
  }
  ego.lane_id = best;
  ego.lane_s = map.lane(best).centerline.project(ego.pos);
}

inline void place_on_lane(const RoadMap& map, VehicleState& v, int lane_id,
                          double s) {
  const Lane& lane = map.lane(lane_id);
  s = std::clamp(s, 0.0, lane.centerline.length());
  v.lane_id = lane_id;
  v.lane_s = s;
  v.pos = lane.centerline.point_at(s);
  v.yaw = lane.centerline.heading_at(s);
}

inline void advance_npc(const WorldState& w, VehicleState& v, const Vec2 ego_pos) {
  const RoadMap& map = *w.map;
  const double dt = w.dt;
  double target_speed = v.cruise_speed;
  double decel = w.params.npc_brake;

  switch (v.behavior) {
    case BehaviorTag::Stationary:
      v.speed = 0.0;
      return;
    case BehaviorTag::SuddenBrake: {
      if (!v.behavior_latched) {
        const Vec2 to_ego = ego_pos - v.pos;
        const bool ego_behind = dot(to_ego, unit_from_angle(v.yaw)) < 0.0;
        if (ego_behind && norm(to_ego) <= 25.0) v.behavior_latched = true;
      }
      if (v.behavior_latched) {
        target_speed = 0.0;
        decel = w.params.b_max;  // slams the brakes
      }
      break;
    }
    case BehaviorTag::Crossing: {
      // Respects its own signal: stops at the line on red.
      const Intersection* ix = map.intersection_for_incoming(v.lane_id);
      if (ix != nullptr && ix->signalized && !light_is_green(w, *ix, v.lane_id)) {
        const Lane& lane = map.lane(v.lane_id);
        const double to_line = lane.centerline.length() - v.lane_s;
        const double envelope =
            v.speed * v.speed / (2.0 * w.params.npc_brake) + 2.0;
        if (to_line <= envelope) target_speed = 0.0;
      }
      break;
    }
    default:
      break;
  }

  if (v.speed < target_speed) {
    v.speed = std::min(target_speed, v.speed + w.params.npc_accel * dt);
  } else if (v.speed > target_speed) {
    v.speed = std::max(target_speed, v.speed - decel * dt);
  }

  double s = v.lane_s + v.speed * dt;
  const Lane* lane = &map.lane(v.lane_id);
  // Red-stopped crossing traffic holds just short of the line.
  if (v.behavior == BehaviorTag::Crossing && target_speed == 0.0) {
    s = std::min(s, lane->centerline.length() - 0.5);
  }
  while (s > lane->centerline.length()) {
    const auto next = pick_successor(map, v.lane_id, v.route_hint);
    if (!next) {
      s = lane->centerline.length();
      v.speed = 0.0;
      break;
    }
    s -= lane->centerline.length();
    v.lane_id = *next;
    lane = &map.lane(v.lane_id);
  }
  const double old_yaw = v.yaw;
  v.lane_s = s;
  v.pos = lane->centerline.point_at(s);
  v.yaw = lane->centerline.heading_at(s);
  v.yaw_rate = wrap_angle(v.yaw - old_yaw) / dt;
}

}  // namespace world_detail

// ---------------------------------------------------------------------------
// Dynamics

/// Advances the world by one tick. The ego follows a kinematic bicycle model
/// (position integrated with the pre-update speed and heading); NPCs follow
/// their scripted profiles; lights advance by dt. Deterministic.
inline WorldState step(const WorldState& world, const Control& ego_control) {
  WorldState w = world;
  const VehicleParams& P = w.params;
  const Control c = ego_control.clamped();

  VehicleState& ego = w.ego();
  const Vec2 ego_pos_before = ego.pos;
  ego.control = c;
  // Positive steer turns clockwise so that Table-style right-turn commands
  // (steer > 0) curve to the right in a counterclockwise world frame.
  const double wheel = -c.steer * P.max_wheel_angle;
  ego.pos = ego.pos + unit_from_angle(ego.yaw) * (ego.speed * w.dt);
  const double yaw_rate = ego.speed / P.wheelbase * std::tan(wheel);
  ego.yaw = wrap_angle(ego.yaw + yaw_rate * w.dt);
  ego.yaw_rate = yaw_rate;
  const double accel = c.throttle * P.a_max - c.brake * P.b_max - P.c_drag * ego.speed;
  ego.speed = std::max(0.0, ego.speed + accel * w.dt);
  world_detail::update_ego_lane(*w.map, ego);

  for (auto& v : w.vehicles) {
    if (v.behavior == BehaviorTag::Ego) continue;
    world_detail::advance_npc(world, v, ego_pos_before);
  }

  for (auto& [ix_id, ls] : w.lights) {
    const Intersection* ix = w.map->intersection_by_id(ix_id);
    if (ix == nullptr || ix->phases.empty()) continue;
    ls.clock += w.dt;
    while (ls.clock >= ix->phases[ls.phase].duration - 1e-12) {
      ls.clock -= ix->phases[ls.phase].duration;
      ls.phase = (ls.phase + 1) % static_cast<int>(ix->phases.size());
    }
  }

  ++w.tick;
  return w;
}

/// All currently overlapping vehicle pairs, each reported once with the lower
/// id first, ordered lexicographically.
inline std::vector<std::pair<int, int>> detect_collisions(const WorldState& w) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < w.vehicles.size(); ++j) {
      if (obb_overlap(w.vehicles[i].footprint(), w.vehicles[j].footprint())) {
        const int a = w.vehicles[i].id;
        const int b = w.vehicles[j].id;
        out.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Sensing

struct SensorFrame {
  double dx_t = 0.0;      // L2 distance to the current target waypoint
  double dx_c = 0.0;      // signed lateral offset to lane center (+ = left)
  double dx_lon = kSensorRange;  // bumper gap to same-course lead, clamped
  double dx_n = kSensorRange;    // center distance to nearest object, clamped
  double d_angle = 0.0;   // heading error to the bearing of the target
  double d_yaw = 0.0;     // heading error to the lane direction
  double v = 0.0;
  double yaw_rate = 0.0;
  int lane_id = -1;
  double lane_s = 0.0;
  LightColor light = LightColor::None;
  double light_distance = kSensorRange;
  int light_intersection = -1;
  bool clear_left = false;      // static clearance window on that lane
  bool clear_right = false;
  bool clear_opposite = false;
};

namespace world_detail {

/// Bumper-to-bumper gap to the nearest vehicle ahead on the same lane chain,
/// clamped to the sensor range. A vehicle counts as a lead only while the
/// two footprints overlap laterally; something the ego has fully swung
/// clear of no longer blocks its course.
inline double lead_gap(const WorldState& w, const VehicleState& self) {
  const RoadMap& map = *w.map;
  double gap = kSensorRange;
  int lane_id = self.lane_id;
  double base_s = map.lane(lane_id).centerline.project(self.pos);
  const double self_lat =
      map.lane(self.lane_id).centerline.lateral_offset(self.pos);
  double offset = 0.0;  // arc length already consumed on previous lanes
  for (int hops = 0; hops < 8 && offset < kSensorRange; ++hops) {
    const Lane& lane = map.lane(lane_id);
    for (const auto& v : w.vehicles) {
      if (v.id == self.id || v.lane_id != lane_id) continue;
      const double ahead = offset + v.lane_s - base_s;
      if (ahead <= 0.0) continue;
      const double v_lat = lane.centerline.lateral_offset(v.pos);
      if (std::abs(v_lat - self_lat) >= (self.width + v.width) / 2.0 + 0.2)
        continue;
      const double g = ahead - (self.length + v.length) / 2.0;
      gap = std::min(gap, std::max(0.0, g));
    }
    offset += lane.centerline.length() - base_s;
    base_s = 0.0;
    const auto next = pick_successor(map, lane_id, self.route_hint);
    if (!next) break;
    lane_id = *next;
  }
  return std::clamp(gap, 0.0, kSensorRange);
}

/// True when a short constant-velocity extrapolation of every vehicle brings
/// the ego's footprint into contact with another vehicle's.
inline bool imminent_contact(const WorldState& w, double horizon_s = 0.6) {
  const VehicleState& ego = w.ego();
  for (double t = 0.0; t <= horizon_s + 1e-9; t += 0.2) {
    Obb ego_box = ego.footprint();
    ego_box.center = ego.pos + unit_from_angle(ego.yaw) * (ego.speed * t);
    for (const auto& v : w.vehicles) {
      if (v.behavior == BehaviorTag::Ego) continue;
      Obb box = v.footprint();
      box.center = v.pos + unit_from_angle(v.yaw) * (v.speed * t);
      if (obb_overlap(ego_box, box)) return true;
    }
  }
  return false;
}

/// True when the window [s - len/2 - margin, s + len/2 + margin] around the
/// projection of `self` onto `lane_id` contains no other vehicle registered
/// on that lane. Exact touching counts as clear.
inline bool window_clear(const WorldState& w, const VehicleState& self,
                         int lane_id, double margin = kClearanceMargin) {
  const Lane& lane = w.map->lane(lane_id);
  const double s = lane.centerline.project(self.pos);
  const double lo = s - self.length / 2.0 - margin;
  const double hi = s + self.length / 2.0 + margin;
  for (const auto& v : w.vehicles) {
    if (v.id == self.id || v.lane_id != lane_id) continue;
    const double v_lo = v.lane_s - v.length / 2.0;
    const double v_hi = v.lane_s + v.length / 2.0;
    if (v_hi > lo && v_lo < hi) return false;
  }
  return true;
}

}  // namespace world_detail

/// Sensor snapshot for one vehicle. Requires the vehicle to exist and to
/// have a target waypoint set.
inline SensorFrame sense(const WorldState& w, int vehicle_id) {
  const VehicleState* self = w.find_vehicle(vehicle_id);
  if (self == nullptr)
    throw std::invalid_argument("sense: unknown vehicle id " +
                                std::to_string(vehicle_id));
  if (!self->target)
    throw std::logic_error("sense: vehicle " + std::to_string(vehicle_id) +
                           " has no target waypoint");
  const RoadMap& map = *w.map;
  const Lane& lane = map.lane(self->lane_id);

  SensorFrame f;
  f.v = self->speed;
  f.yaw_rate = self->yaw_rate;
  f.lane_id = self->lane_id;
  f.lane_s = lane.centerline.project(self->pos);
  f.dx_t = distance(self->pos, self->target->pos);
  f.dx_c = lane.centerline.lateral_offset(self->pos);
  f.d_yaw = wrap_angle(self->yaw - lane.centerline.heading_at(f.lane_s));
  const Vec2 to_target = self->target->pos - self->pos;
  if (norm(to_target) > 1e-9) {
    f.d_angle = wrap_angle(std::atan2(to_target.y, to_target.x) - self->yaw);
  }
  f.dx_lon = world_detail::lead_gap(w, *self);
  for (const auto& v : w.vehicles) {
    if (v.id == self->id) continue;
    f.dx_n = std::min(f.dx_n, distance(v.pos, self->pos));
  }
  f.dx_n = std::clamp(f.dx_n, 0.0, kSensorRange);

  const GoverningLight gl = governing_light(w, *self);
  f.light = gl.color;
  f.light_distance = gl.distance;
  f.light_intersection = gl.intersection_id;

  const LaneLink& lk = map.link(self->lane_id);
  f.clear_left = lk.left && world_detail::window_clear(w, *self, *lk.left);
  f.clear_right = lk.right && world_detail::window_clear(w, *self, *lk.right);
  f.clear_opposite =
      lk.opposite && world_detail::window_clear(w, *self, *lk.opposite);
  return f;
}

/// Spawns a vehicle on a lane at arc position s. Ego pose offsets model
/// perturbed starts (the control-loss scenario).
inline VehicleState spawn_vehicle(const WorldState& w, int id, BehaviorTag behavior,
                                  int lane_id, double s, double speed,
                                  double lateral_offset = 0.0,
                                  double yaw_offset = 0.0) {
  VehicleState v;
  v.id = id;
  v.behavior = behavior;
  v.speed = speed;
  v.cruise_speed = speed;
  world_detail::place_on_lane(*w.map, v, lane_id, s);
  if (lateral_offset != 0.0) {
    const double h = v.yaw;
    v.pos = v.pos + Vec2{-std::sin(h), std::cos(h)} * lateral_offset;
  }
  v.yaw = wrap_angle(v.yaw + yaw_offset);
  return v;
}

}  // namespace hprl
