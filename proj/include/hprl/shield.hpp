#pragma once

// The functional-safety layer: extracts the proposition frame the safety
// specifications are written over, tracks the in-flight obligations of the
// five specifications, and overrides the RL control with safe actuation.
//
// The enforcement rules act earlier than the formal thresholds: braking
// starts inside a stopping-distance envelope of each threshold, so a
// proposition edge that starts an obligation can only occur once the ego is
// already stationary. That is what makes recorded traces satisfy the
// specifications exactly rather than "up to braking time".

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "hprl/geometry.hpp"
#include "hprl/ltl.hpp"
#include "hprl/world.hpp"

namespace hprl {

struct ShieldConfig {
  double t_headway = 1.0;    // s; D_lon threshold is v * t_headway + d_min
  double d_min = 3.0;        // m
  double lat_min = 1.0;      // m edge-to-edge; D_lat threshold
  int t_eps_ticks = 50;      // blocked ticks before a lane change triggers
  double c_eps_margin = 2.0; // m free ahead and behind for a lane change
  double v_stop_eps = 0.05;  // m/s; below this e_stop holds
  double overtake_margin = 1.0;  // s added to the overtake-time window

  // Enforcement margins (how far ahead of the formal thresholds the shield
  // intervenes).
  double enforce_margin = 1.0;   // m slack on the longitudinal envelope
  double release_margin = 5.0;   // m hysteresis before a blocked stop releases
  double lat_margin = 0.5;       // m slack on the lateral threshold
  double clear_margin = 0.5;     // m slack on the clearance window
  double junction_zone = 15.0;   // m; engagement distance from the region
  double min_escape_gap = 5.0;   // m lead gap needed to swing out safely

  void check() const {
    if (t_headway <= 0 || d_min <= 0 || lat_min <= 0 || t_eps_ticks <= 0 ||
        c_eps_margin <= 0 || v_stop_eps <= 0)
      throw std::invalid_argument("shield: config values must be positive");
  }
};

/// Truth values of the atoms of the five safety specifications for one tick.
struct PropositionFrame {
  bool T_red = false;
  bool D_lon = true;
  bool D_lat = true;
  bool J_ev = false;
  bool prio_v_gt_e = false;
  bool L_e = false;
  bool L_ev = false;
  bool C_eps = true;
  bool e_stop = false;
  bool e_stop_lon = false;
  bool e_stop_lat = false;

  ltl::Assignment to_assignment() const {
    namespace pr = ltl::prop;
    return {{pr::T_red, T_red},
            {pr::D_lon, D_lon},
            {pr::D_lat, D_lat},
            {pr::J_ev, J_ev},
            {pr::prio_v_gt_e, prio_v_gt_e},
            {pr::L_e, L_e},
            {pr::L_ev, L_ev},
            {pr::C_eps, C_eps},
            {pr::e_stop, e_stop},
            {pr::e_stop_lon, e_stop_lon},
            {pr::e_stop_lat, e_stop_lat}};
  }
};

struct ShieldState {
  int blocking_tick_count = 0;
  bool lane_change_active = false;   // L_e
  std::optional<int> lane_change_target;
  bool lane_change_to_opposite = false;
  int lane_change_origin = -1;
  int lane_change_ticks = 0;

  // Formal obligations in flight, one per specification (index = id - 1).
  std::array<bool, 5> obligation{};
  std::optional<PropositionFrame> prev;

  // Junction bookkeeping: region entry ticks and vehicles that have passed
  // through. Conflict distances are refreshed every tick by the proposition
  // extraction: vehicle id -> (ego distance, vehicle distance) to the point
  // where the routes meet.
  std::map<int, long> junction_entry_tick;
  std::set<int> junction_cleared;
  std::map<int, std::pair<double, double>> conflict_dist;

  bool lon_hold = false;   // spec-2 enforcement latched until safe release
  bool red_hold = false;   // spec-1 enforcement latched until green

  // Remaining route geometry, refreshed by check_functional_safety.
  std::vector<Waypoint> route_ahead;
};

struct ShieldReport {
  std::optional<int> spec_triggered;  // 1..5 when the shield overrode
  PropositionFrame props;
  bool lane_change_started = false;
};

/// Full brake, wheel centered, no throttle.
inline Control emergency_stop() { return {0.0, 0.0, 1.0}; }

enum class Priority { VehicleHigher, EgoHigher };

/// Junction priority between the ego and vehicle v: earlier region entry
/// wins; with neither inside, the smaller recorded distance to the conflict
/// point wins; exact ties go to the lower vehicle id.
inline Priority junction_priority(const WorldState& world, const ShieldState& state,
                                  int ego_id, int v_id) {
  const auto entry = [&](int id) {
    const auto it = state.junction_entry_tick.find(id);
    return it == state.junction_entry_tick.end()
               ? std::numeric_limits<long>::max()
               : it->second;
  };
  const long te = entry(ego_id);
  const long tv = entry(v_id);
  if (te != tv) return tv < te ? Priority::VehicleHigher : Priority::EgoHigher;
  if (te == std::numeric_limits<long>::max()) {
    const auto it = state.conflict_dist.find(v_id);
    if (it != state.conflict_dist.end()) {
      const auto [de, dv] = it->second;
      if (dv < de) return Priority::VehicleHigher;
      if (de < dv) return Priority::EgoHigher;
    }
  }
  (void)world;
  return v_id < ego_id ? Priority::VehicleHigher : Priority::EgoHigher;
}

namespace shield_detail {

inline double stopping_distance(const WorldState& w, double v) {
  return v * v / (2.0 * w.params.b_max) + v * w.dt;
}

/// Forward polyline a scripted vehicle will follow: its lane from its
/// current position plus successors, up to `horizon` meters.
inline std::vector<Vec2> chain_points(const WorldState& w, const VehicleState& v,
                                      double horizon = 60.0) {
  std::vector<Vec2> pts;
  const RoadMap& map = *w.map;
  int lane_id = v.lane_id;
  double s = v.lane_s;
  double walked = 0.0;
  while (walked < horizon) {
    const Lane& lane = map.lane(lane_id);
    const double len = lane.centerline.length();
    for (; s <= len && walked < horizon; s += 1.0, walked += 1.0)
      pts.push_back(lane.centerline.point_at(s));
    if (walked >= horizon) break;
    const auto next = world_detail::pick_successor(map, lane_id, v.route_hint);
    if (!next) break;
    s = s - len;  // carry the fractional remainder
    lane_id = *next;
  }
  return pts;
}

/// Remaining route geometry from the ego position, up to `horizon` meters.
inline std::vector<Vec2> route_points_ahead(const std::vector<Waypoint>& route,
                                            Vec2 ego_pos, double horizon = 60.0) {
  std::vector<Vec2> pts;
  if (route.empty()) return pts;
  std::size_t start = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < route.size(); ++i) {
    const double d = distance(route[i].pos, ego_pos);
    if (d < best) {
      best = d;
      start = i;
    }
  }
  double walked = 0.0;
  pts.push_back(ego_pos);
  for (std::size_t i = start; i < route.size() && walked < horizon; ++i) {
    walked += distance(pts.back(), route[i].pos);
    pts.push_back(route[i].pos);
  }
  return pts;
}

/// First place two polylines come within `touch` meters of each other:
/// covers both crossing and merging routes. Returns arc distances along each
/// line, or std::nullopt when they stay apart.
inline std::optional<std::pair<double, double>> route_conflict(
    const std::vector<Vec2>& a, const std::vector<Vec2>& b, double touch = 1.8) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  double sa = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    const Vec2 p = a[i];
    const Vec2 step = a[i + 1] - a[i];
    const double seg = norm(step);
    const int n = std::max(1, static_cast<int>(seg / 0.5));
    for (int k = 0; k < n; ++k) {
      const Vec2 q = p + step * (static_cast<double>(k) / n);
      double sb = 0.0;
      for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        const Vec2 bp = b[j];
        const Vec2 bs = b[j + 1] - b[j];
        const double blen2 = dot(bs, bs);
        double t = blen2 > 0.0 ? dot(q - bp, bs) / blen2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        if (distance(q, bp + bs * t) <= touch)
          return std::make_pair(sa + seg * k / n, sb + std::sqrt(blen2) * t);
        sb += std::sqrt(blen2);
      }
    }
    sa += seg;
  }
  return std::nullopt;
}

struct JunctionView {
  bool ego_engaged = false;
  bool ego_inside = false;
  // Conflicting, engaged (or imminently engaged) vehicles.
  std::vector<int> conflicts;
  std::vector<int> engaged_conflicts;
};

/// Updates entry/cleared bookkeeping and evaluates which vehicles are in
/// conflict with the ego's route at the nearest junction.
inline JunctionView junction_scan(const WorldState& w, ShieldState& st,
                                  const ShieldConfig& cfg) {
  JunctionView view;
  if (w.map->intersections.empty()) return view;
  const Intersection& ix = w.map->intersections.front();
  const VehicleState& ego = w.ego();

  for (const auto& v : w.vehicles) {
    const bool inside = ix.region.contains(v.pos);
    const bool has_entry = st.junction_entry_tick.count(v.id) > 0;
    if (inside && !has_entry) st.junction_entry_tick[v.id] = w.tick;
    if (!inside && has_entry) st.junction_cleared.insert(v.id);
  }

  const auto ego_route = route_points_ahead(st.route_ahead, ego.pos);
  view.ego_inside = ix.region.contains(ego.pos);
  const double ego_dist = ix.region.distance_to(ego.pos);
  bool ego_route_hits = false;
  for (const Vec2& p : ego_route)
    ego_route_hits = ego_route_hits || ix.region.distance_to(p) < 1.0;
  view.ego_engaged = !st.junction_cleared.count(ego.id) && ego_route_hits &&
                     (view.ego_inside || ego_dist <= cfg.junction_zone);

  if (!ego_route_hits || st.junction_cleared.count(ego.id)) return view;

  for (const auto& v : w.vehicles) {
    if (v.behavior == BehaviorTag::Ego) continue;
    if (st.junction_cleared.count(v.id)) continue;
    if (v.speed < 0.01 && !ix.region.contains(v.pos) &&
        ix.region.distance_to(v.pos) > cfg.junction_zone)
      continue;  // parked far from the junction
    const auto chain = chain_points(w, v);
    bool chain_hits = false;
    for (const Vec2& p : chain) chain_hits = chain_hits || ix.region.distance_to(p) < 1.0;
    if (!chain_hits) continue;
    const auto conflict = route_conflict(ego_route, chain);
    if (!conflict) continue;
    st.conflict_dist[v.id] = *conflict;
    view.conflicts.push_back(v.id);
    const bool inside = ix.region.contains(v.pos);
    const double dist = ix.region.distance_to(v.pos);
    // Engagement prediction: count the vehicle once it could reach the
    // engagement zone before the ego can come to a stop.
    const double horizon_dist = cfg.junction_zone + v.speed * 2.0;
    if (inside || dist <= horizon_dist) view.engaged_conflicts.push_back(v.id);
  }
  return view;
}

struct LateralNeighbor {
  double edge_gap = std::numeric_limits<double>::infinity();
  int lane_id = -1;
};

/// Closest vehicle on an adjacent lane that overlaps the ego longitudinally,
/// as an edge-to-edge lateral gap in the ego lane's frame.
inline LateralNeighbor nearest_lateral_neighbor(const WorldState& w) {
  const VehicleState& ego = w.ego();
  const Lane& lane = w.map->lane(ego.lane_id);
  const LaneLink& lk = w.map->link(ego.lane_id);
  const double ego_lat = lane.centerline.lateral_offset(ego.pos);
  const double ego_s = lane.centerline.project(ego.pos);
  LateralNeighbor out;
  for (const auto& v : w.vehicles) {
    if (v.id == ego.id) continue;
    const bool adjacent = (lk.left && v.lane_id == *lk.left) ||
                          (lk.right && v.lane_id == *lk.right) ||
                          (lk.opposite && v.lane_id == *lk.opposite);
    if (!adjacent) continue;
    const double v_s = lane.centerline.project(v.pos);
    if (std::abs(v_s - ego_s) > (ego.length + v.length) / 2.0 + 1.0) continue;
    const double v_lat = lane.centerline.lateral_offset(v.pos);
    const double edge = std::abs(v_lat - ego_lat) - (ego.width + v.width) / 2.0;
    if (edge < out.edge_gap) {
      out.edge_gap = edge;
      out.lane_id = v.lane_id;
    }
  }
  return out;
}

/// Static clearance plus, for opposite lanes, the oncoming-traffic window:
/// the overtake distance at current speed must fit before the nearest
/// oncoming vehicle arrives.
inline bool lane_clear_for_change(const WorldState& w, const ShieldConfig& cfg,
                                  int target_lane, bool opposite, double margin) {
  const VehicleState& ego = w.ego();
  if (!world_detail::window_clear(w, ego, target_lane, cfg.c_eps_margin + margin))
    return false;
  if (!opposite) return true;
  const Lane& lane = w.map->lane(target_lane);
  const double lead_gap = world_detail::lead_gap(w, ego);
  const double pass_distance =
      std::min(lead_gap, kSensorRange) + 2.0 * ego.length + 2.0 * cfg.c_eps_margin;
  const double t_overtake = pass_distance / std::max(ego.speed, 2.0);
  const double ego_s_on_opp = lane.centerline.project(ego.pos);
  for (const auto& v : w.vehicles) {
    if (v.id == ego.id || v.lane_id != target_lane) continue;
    // Oncoming traffic travels toward decreasing distance from the ego's
    // projection; on the opposite lane that is increasing lane_s.
    const double head_on_dist = ego_s_on_opp - v.lane_s;
    if (head_on_dist <= 0.0) continue;  // already past
    const double window =
        v.speed * (t_overtake + cfg.overtake_margin) + pass_distance + margin;
    if (head_on_dist < window) return false;
  }
  return true;
}

}  // namespace shield_detail

/// Evaluates every proposition of the five specifications for this tick.
/// Junction bookkeeping inside the state is refreshed as a side effect.
inline PropositionFrame extract_propositions(const WorldState& world,
                                             ShieldState& state,
                                             const ShieldConfig& cfg) {
  const VehicleState& ego = world.ego();
  const Lane& lane = world.map->lane(ego.lane_id);
  PropositionFrame p;

  // Stopped flags from the lane-frame velocity decomposition.
  const double d_yaw =
      wrap_angle(ego.yaw - lane.centerline.heading_at(lane.centerline.project(ego.pos)));
  p.e_stop_lon = std::abs(ego.speed * std::cos(d_yaw)) < cfg.v_stop_eps;
  p.e_stop_lat = std::abs(ego.speed * std::sin(d_yaw)) < cfg.v_stop_eps;
  p.e_stop = p.e_stop_lon && p.e_stop_lat;

  p.T_red = governing_light(world, ego).color == LightColor::Red;

  const double gap = world_detail::lead_gap(world, ego);
  p.D_lon = gap >= ego.speed * cfg.t_headway + cfg.d_min;

  const shield_detail::LateralNeighbor lateral =
      shield_detail::nearest_lateral_neighbor(world);
  p.D_lat = lateral.edge_gap >= cfg.lat_min;
  const LaneLink& lk = world.map->link(ego.lane_id);

  state.conflict_dist.clear();
  const auto junction = shield_detail::junction_scan(world, state, cfg);
  bool any_conflict = false;
  bool any_priority = false;
  for (int v_id : junction.engaged_conflicts) {
    const VehicleState* v = world.find_vehicle(v_id);
    const bool engaged_now =
        world.map->intersections.front().region.contains(v->pos) ||
        world.map->intersections.front().region.distance_to(v->pos) <=
            cfg.junction_zone;
    if (!engaged_now) continue;
    any_conflict = true;
    any_priority = any_priority ||
                   junction_priority(world, state, ego.id, v_id) ==
                       Priority::VehicleHigher;
  }
  p.J_ev = junction.ego_engaged && any_conflict;
  p.prio_v_gt_e = any_priority;

  p.L_e = state.lane_change_active;
  p.L_ev = state.lane_change_active &&
           (lateral.lane_id < 0 || !state.lane_change_target ||
            *state.lane_change_target != lateral.lane_id);

  // Clearance of the lane-change target (or the default candidate when no
  // change is in flight).
  std::optional<int> target = state.lane_change_target;
  bool opposite = state.lane_change_to_opposite;
  if (!target) {
    if (lk.left) {
      target = lk.left;
      opposite = false;
    } else if (lk.right) {
      target = lk.right;
      opposite = false;
    } else if (lk.opposite) {
      target = lk.opposite;
      opposite = true;
    }
  }
  p.C_eps = !target || shield_detail::lane_clear_for_change(world, cfg, *target,
                                                            opposite, 0.0);
  return p;
}

using NeuralCallback = std::function<Control(const WorldState&)>;

/// The safety wrapper around the agent policy. Runs the five specifications
/// in order: a formal obligation in flight, or an enforcement rule inside
/// its envelope, overrides the callback with the spec's safe control. Also
/// owns the blocked-lane bookkeeping that triggers shield lane changes.
inline std::pair<Control, ShieldReport> check_functional_safety(
    const WorldState& world, const std::vector<Waypoint>& route,
    ShieldState& state, const ShieldConfig& cfg, const NeuralCallback& neural) {
  if (route.empty())
    throw std::invalid_argument("shield: route must be non-empty");
  state.route_ahead = route;
  const VehicleState& ego = world.ego();

  PropositionFrame props = extract_propositions(world, state, cfg);

  // Lane-change lifecycle before obligations. L_e only falls once the ego
  // is settled in the target lane: registered there, near its centerline,
  // with a safe lateral margin to whatever it passed. Clearing any earlier
  // would drop the L_e / L_ev releases while the manoeuvre geometry is
  // still live.
  if (state.lane_change_active) {
    ++state.lane_change_ticks;
    const Lane& ego_lane = world.map->lane(ego.lane_id);
    const double lat_off = ego_lane.centerline.lateral_offset(ego.pos);
    const auto lateral = shield_detail::nearest_lateral_neighbor(world);
    const bool arrived = state.lane_change_target &&
                         ego.lane_id == *state.lane_change_target &&
                         std::abs(lat_off) < 0.6 &&
                         lateral.edge_gap >= cfg.lat_min + 0.3;
    const bool still_home = ego.lane_id == state.lane_change_origin;
    const bool clearance_eroding =
        state.lane_change_target &&
        !shield_detail::lane_clear_for_change(world, cfg, *state.lane_change_target,
                                              state.lane_change_to_opposite,
                                              cfg.clear_margin);
    if (arrived || state.lane_change_ticks > 400) {
      state.lane_change_active = false;
      state.lane_change_target.reset();
      state.lane_change_to_opposite = false;
      state.lane_change_ticks = 0;
      props.L_e = false;
      props.L_ev = false;
    } else if (still_home && clearance_eroding && props.C_eps &&
               state.lane_change_target &&
               *state.lane_change_target != state.lane_change_origin) {
      // Abort by retargeting the origin lane; L_e stays up until settled.
      state.lane_change_target = state.lane_change_origin;
      state.lane_change_origin = ego.lane_id;
      state.lane_change_to_opposite = false;
    }
  }

  // Formal obligation transitions (rising edges against the previous tick).
  if (state.prev) {
    const PropositionFrame& q = *state.prev;
    if (!q.T_red && props.T_red) state.obligation[0] = true;
    if (q.D_lon && !props.D_lon) state.obligation[1] = true;
    if (q.D_lat && !props.D_lat) state.obligation[2] = true;
  }
  if (props.J_ev && props.prio_v_gt_e) state.obligation[3] = true;
  if (props.L_e && !props.C_eps) state.obligation[4] = true;

  // Releases (evaluated on the current frame; an obligation released at its
  // own start tick never constrains the control).
  if (!props.T_red) state.obligation[0] = false;
  if (props.D_lon || props.L_e) state.obligation[1] = false;
  if (props.D_lat || props.L_ev) state.obligation[2] = false;
  if (!props.J_ev) state.obligation[3] = false;
  if (props.C_eps) state.obligation[4] = false;

  std::optional<int> fired;
  for (int i = 0; i < 5 && !fired; ++i)
    if (state.obligation[i]) fired = i + 1;

  // Enforcement rules, in specification order.
  const double stop_dist = shield_detail::stopping_distance(world, ego.speed);

  if (!fired) {
    // Spec 1: red lights. Never enter the governed zone moving while the
    // zone is (or will be) red; inside the zone, stop unless the remaining
    // green suffices to cross the stop line.
    const Intersection* ix = world.map->intersection_for_incoming(ego.lane_id);
    if (ix != nullptr && ix->signalized) {
      const Lane& lane = world.map->lane(ego.lane_id);
      const double d = lane.centerline.length() - lane.centerline.project(ego.pos);
      const bool green = light_is_green(world, *ix, ego.lane_id);
      const double change_in = time_until_light_change(world, *ix, ego.lane_id);
      bool brake = false;
      if (d <= kLightLookahead) {
        if (!green) {
          brake = true;
        } else if (change_in < d / std::max(ego.speed, 3.0) + 2.0 &&
                   d > stop_dist + 1.5) {
          brake = true;  // cannot clear the line before the flip; stop now
        }
      } else {
        const double t_to_zone = (d - kLightLookahead) / std::max(ego.speed, 0.5);
        const bool red_at_entry =
            green ? change_in <= t_to_zone : change_in > t_to_zone;
        if (red_at_entry &&
            d - kLightLookahead <= stop_dist + cfg.enforce_margin)
          brake = true;
        if (state.red_hold && !green && d - kLightLookahead <= 8.0) brake = true;
      }
      if (brake) {
        fired = 1;
        state.red_hold = !green;
      } else if (green) {
        state.red_hold = false;
      }
    }
  }

  if (!fired) {
    // Spec 2: longitudinal gap, braking-distance envelope ahead of the
    // formal threshold, with hysteresis so a blocked stop stays blocked.
    const double gap = world_detail::lead_gap(world, ego);
    const double engage = ego.speed * cfg.t_headway + cfg.d_min + stop_dist +
                          cfg.enforce_margin;
    const double release = ego.speed * cfg.t_headway + cfg.d_min +
                           cfg.release_margin;
    if (state.lane_change_active) {
      // Swinging out: only a contact-imminence guard remains.
      if (world_detail::imminent_contact(world)) fired = 2;
      state.lon_hold = false;
    } else if (gap < engage || (state.lon_hold && gap < release)) {
      fired = 2;
      state.lon_hold = true;
    } else {
      state.lon_hold = false;
    }
  }

  if (!fired && !(props.L_e && props.L_ev)) {
    // Spec 3: lateral gap envelope; brake while drifting with a close
    // lateral neighbor. Suppressed while a lane change away from the
    // neighbor is in flight (that is the L_ev release).
    const Lane& lane = world.map->lane(ego.lane_id);
    const double d_yaw = wrap_angle(
        ego.yaw - lane.centerline.heading_at(lane.centerline.project(ego.pos)));
    const double lat_speed = ego.speed * std::sin(d_yaw);
    if (!props.D_lat && std::abs(lat_speed) >= cfg.v_stop_eps) fired = 3;
    if (!fired && std::abs(lat_speed) > 0.05) {
      // Predictive: the gap must clear the threshold plus the drift covered
      // while stopping.
      const double horizon =
          std::abs(lat_speed) * (ego.speed / world.params.b_max + 0.3);
      const auto lateral = shield_detail::nearest_lateral_neighbor(world);
      if (lateral.edge_gap < cfg.lat_min + cfg.lat_margin + horizon) fired = 3;
    }
  }

  if (!fired) {
    // Spec 4: yield at junctions. Stop (outside the region) while any
    // conflicting vehicle is engaged with priority, or would co-occupy the
    // region with us.
    const auto junction = shield_detail::junction_scan(world, state, cfg);
    if (!junction.ego_inside && !junction.engaged_conflicts.empty()) {
      const Intersection& ix = world.map->intersections.front();
      const double ego_region_dist = ix.region.distance_to(ego.pos);
      if (ego_region_dist < 45.0) {
        for (int v_id : junction.engaged_conflicts) {
          const VehicleState* v = world.find_vehicle(v_id);
          const bool v_higher = junction_priority(world, state, ego.id, v_id) ==
                                Priority::VehicleHigher;
          // Predicted co-occupancy even with priority: the scripted traffic
          // does not yield.
          const double t_exit =
              (ego_region_dist + 12.0) / std::max(ego.speed, 1.0);
          const double t_v_entry =
              ix.region.distance_to(v->pos) / std::max(v->speed, 0.1);
          if (v_higher || t_exit + 0.5 >= t_v_entry) {
            fired = 4;
            break;
          }
        }
      }
    }
  }

  if (!fired) {
    // Spec 5: clearance erosion during a lane change.
    if (state.lane_change_active && state.lane_change_target &&
        !shield_detail::lane_clear_for_change(world, cfg, *state.lane_change_target,
                                              state.lane_change_to_opposite,
                                              cfg.clear_margin))
      fired = 5;
  }

  // Blocked-lane bookkeeping: count consecutive ticks held by spec 2.
  ShieldReport report;
  if (fired == 2 && !state.lane_change_active) {
    ++state.blocking_tick_count;
    if (state.blocking_tick_count > cfg.t_eps_ticks) {
      const double gap = world_detail::lead_gap(world, ego);
      const LaneLink& lk = world.map->link(ego.lane_id);
      struct Candidate {
        int lane;
        bool opposite;
      };
      std::vector<Candidate> candidates;
      if (lk.left) candidates.push_back({*lk.left, false});
      if (lk.right) candidates.push_back({*lk.right, false});
      if (lk.opposite) candidates.push_back({*lk.opposite, true});
      for (const Candidate& c : candidates) {
        if (gap < cfg.min_escape_gap) break;
        if (shield_detail::lane_clear_for_change(world, cfg, c.lane, c.opposite,
                                                 cfg.clear_margin + 0.5)) {
          state.lane_change_active = true;
          state.lane_change_target = c.lane;
          state.lane_change_to_opposite = c.opposite;
          state.lane_change_origin = ego.lane_id;
          state.lane_change_ticks = 0;
          props.L_e = true;  // rises this tick; the stop releases next tick
          props.L_ev = true;
          report.lane_change_started = true;
          break;
        }
      }
    }
  } else if (fired != 2) {
    state.blocking_tick_count = 0;
  }

  report.spec_triggered = fired;
  report.props = props;
  state.prev = props;

  const Control control = fired ? emergency_stop() : neural(world).clamped();
  return {control, report};
}

}  // namespace hprl
