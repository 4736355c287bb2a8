#pragma once

// The supervisory controller: route planning over the lane graph,
// decomposition of a route into manoeuvre-typed sub-tasks, and the main
// control loop that triggers the per-manoeuvre agents through the safety
// shield.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "hprl/agents.hpp"
#include "hprl/map.hpp"
#include "hprl/rng.hpp"
#include "hprl/shield.hpp"
#include "hprl/trace.hpp"
#include "hprl/world.hpp"

namespace hprl {

struct RouteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RoutePlan {
  std::vector<Waypoint> waypoints;
  Waypoint source;
  Waypoint destination;
};

namespace controller_detail {

constexpr double kWaypointSpacing = 2.0;
constexpr double kNeighborHopRun = 25.0;  // forward run before a planned hop

struct LaneEntry {
  double cost = std::numeric_limits<double>::infinity();
  double entry_s = 0.0;
  int prev_lane = -1;
  double hop_s = -1.0;  // on the previous lane, when reached via a neighbor hop
};

inline void append_lane_span(const RoadMap& map, int lane_id, double s0, double s1,
                             std::vector<Waypoint>& out) {
  const Lane& lane = map.lane(lane_id);
  const double len = s1 - s0;
  if (len <= 1e-9) {
    const Waypoint wp{lane.centerline.point_at(s0), lane_id,
                      lane.centerline.heading_at(s0)};
    if (out.empty() || distance(out.back().pos, wp.pos) > 1e-6) out.push_back(wp);
    return;
  }
  const int n = std::max(1, static_cast<int>(std::ceil(len / kWaypointSpacing)));
  for (int i = 0; i <= n; ++i) {
    const double s = s0 + len * i / n;
    const Waypoint wp{lane.centerline.point_at(s), lane_id,
                      lane.centerline.heading_at(s)};
    if (out.empty() || distance(out.back().pos, wp.pos) > 1e-6) out.push_back(wp);
  }
}

}  // namespace controller_detail

/// Shortest path over the lane successor/neighbor graph, realized as a
/// waypoint sequence with spacing <= 2 m. Deterministic: Dijkstra ties break
/// toward the lower lane id. Throws RouteError when the destination cannot
/// be reached.
inline RoutePlan plan_route(const RoadMap& map, const Waypoint& src,
                            const Waypoint& dst) {
  using controller_detail::LaneEntry;
  map.lane(src.lane_id);
  map.lane(dst.lane_id);
  const double src_s = map.lane(src.lane_id).centerline.project(src.pos);
  const double dst_s = map.lane(dst.lane_id).centerline.project(dst.pos);

  RoutePlan plan;
  plan.source = src;
  plan.destination = dst;
  if (src.lane_id == dst.lane_id && std::abs(dst_s - src_s) < 1e-9) {
    plan.waypoints.push_back(src);
    return plan;
  }

  std::map<int, LaneEntry> entries;
  entries[src.lane_id] = {0.0, src_s, -1, -1.0};
  using Item = std::pair<double, int>;  // (cost, lane id)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  queue.push({0.0, src.lane_id});
  std::map<int, bool> settled;

  while (!queue.empty()) {
    const auto [cost, lane_id] = queue.top();
    queue.pop();
    if (settled[lane_id]) continue;
    settled[lane_id] = true;
    const LaneEntry& cur = entries[lane_id];
    const Lane& lane = map.lane(lane_id);
    const double remaining = lane.centerline.length() - cur.entry_s;
    const LaneLink& lk = map.link(lane_id);

    const auto relax = [&](int next_lane, double next_cost, double next_entry,
                           double hop_s) {
      auto& e = entries.try_emplace(next_lane).first->second;
      if (next_cost < e.cost - 1e-12 ||
          (std::abs(next_cost - e.cost) <= 1e-12 && lane_id < e.prev_lane)) {
        e = {next_cost, next_entry, lane_id, hop_s};
        queue.push({next_cost, next_lane});
      }
    };

    for (int s : lk.successors) relax(s, cost + remaining, 0.0, -1.0);
    for (const std::optional<int>& n : {lk.left, lk.right}) {
      if (!n) continue;
      const double hop_s =
          std::min(cur.entry_s + controller_detail::kNeighborHopRun,
                   lane.centerline.length() - 2.0);
      if (hop_s <= cur.entry_s + 1.0) continue;
      const double run = hop_s - cur.entry_s;
      relax(*n, cost + run + kLaneWidth, hop_s, hop_s);
    }
  }

  const auto it = entries.find(dst.lane_id);
  if (it == entries.end() || dst_s < it->second.entry_s - 1e-9) {
    throw RouteError("plan_route: destination on lane " +
                     map.lane(dst.lane_id).name + " is unreachable from lane " +
                     map.lane(src.lane_id).name);
  }

  // Unwind the lane chain, then realize waypoints along it.
  std::vector<int> chain;
  for (int l = dst.lane_id; l != -1; l = entries[l].prev_lane) chain.push_back(l);
  std::reverse(chain.begin(), chain.end());

  plan.waypoints.clear();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const LaneEntry& e = entries[chain[i]];
    double exit_s;
    if (i + 1 == chain.size()) {
      exit_s = dst_s;
    } else {
      const LaneEntry& next = entries[chain[i + 1]];
      exit_s = next.hop_s >= 0.0 ? next.hop_s
                                 : map.lane(chain[i]).centerline.length();
    }
    controller_detail::append_lane_span(map, chain[i], e.entry_s, exit_s,
                                        plan.waypoints);
  }
  if (plan.waypoints.empty()) plan.waypoints.push_back(src);
  return plan;
}

// ---------------------------------------------------------------------------
// Decomposition into sub-tasks

struct SubTask {
  AgentKind kind = AgentKind::DriveStraight;
  std::size_t begin = 0;  // waypoint slice [begin, end)
  std::size_t end = 0;
  Waypoint target;        // the slice's final waypoint

  /// Initiation region: the option is available near the slice's start.
  bool initiation(const WorldState& w) const {
    return initiation_radius <= 0.0 ||
           distance(w.ego().pos, start_pos) <= initiation_radius;
  }
  /// Termination: within the goal radius of the slice's final waypoint.
  bool termination(const WorldState& w, double goal_radius = 2.0) const {
    return distance(w.ego().pos, target.pos) <= goal_radius;
  }

  Vec2 start_pos;
  double initiation_radius = 10.0;
};

namespace controller_detail {

inline SubTask make_subtask(AgentKind kind, std::size_t begin, std::size_t end,
                            const std::vector<Waypoint>& wps) {
  SubTask t;
  t.kind = kind;
  t.begin = begin;
  t.end = end;
  t.target = wps[end - 1];
  t.start_pos = wps[begin].pos;
  return t;
}

}  // namespace controller_detail

/// Splits a route into manoeuvre-typed slices: neighbor-lane hops become
/// lane changes, lane runs whose heading swings 15 degrees or more become
/// turns (right = clockwise), everything else is straight driving. Slices
/// are contiguous and cover the route exactly.
inline std::vector<SubTask> decompose(const RoutePlan& route, const RoadMap& map) {
  const auto& wps = route.waypoints;
  std::vector<SubTask> tasks;
  if (wps.size() <= 1) {
    if (!wps.empty())
      tasks.push_back(controller_detail::make_subtask(AgentKind::DriveStraight, 0,
                                                      wps.size(), wps));
    return tasks;
  }
  const double kTurnThreshold = deg_to_rad(15.0);

  std::size_t seg_begin = 0;
  std::size_t i = 0;
  const auto hop_kind = [&](int from, int to) -> std::optional<AgentKind> {
    const LaneLink& lk = map.link(from);
    if (lk.left && *lk.left == to) return AgentKind::ChangeLeftLane;
    if (lk.right && *lk.right == to) return AgentKind::ChangeRightLane;
    if (lk.opposite && *lk.opposite == to) return AgentKind::ChangeLeftLane;
    return std::nullopt;
  };
  const auto is_successor = [&](int from, int to) {
    for (int s : map.link(from).successors)
      if (s == to) return true;
    return false;
  };
  const auto heading_change = [&](std::size_t b, std::size_t e) {
    double total = 0.0;
    for (std::size_t k = b + 1; k < e; ++k)
      total += wrap_angle(wps[k].yaw - wps[k - 1].yaw);
    return total;
  };
  const auto classify_run = [&](std::size_t b, std::size_t e) {
    const double turn = heading_change(b, e);
    if (turn <= -kTurnThreshold) return AgentKind::RightTurn;
    if (turn >= kTurnThreshold) return AgentKind::LeftTurn;
    return AgentKind::DriveStraight;
  };

  std::vector<SubTask> raw;
  while (i + 1 < wps.size()) {
    // Extend the current run while staying on one lane.
    std::size_t j = i;
    while (j + 1 < wps.size() && wps[j + 1].lane_id == wps[j].lane_id) ++j;
    // Look at the transition following the run.
    if (j + 1 < wps.size()) {
      const int from = wps[j].lane_id;
      const int to = wps[j + 1].lane_id;
      if (const auto change = hop_kind(from, to)) {
        // Close the run before the hop, then carve the lane-change slice:
        // the hop pair plus up to 20 m on the new lane.
        if (j > seg_begin)
          raw.push_back(controller_detail::make_subtask(
              classify_run(seg_begin, j + 1), seg_begin, j + 1, wps));
        std::size_t k = j + 1;
        double run_len = 0.0;
        while (k + 1 < wps.size() && wps[k + 1].lane_id == to && run_len < 20.0) {
          run_len += distance(wps[k].pos, wps[k + 1].pos);
          ++k;
        }
        raw.push_back(controller_detail::make_subtask(*change, j, k + 1, wps));
        seg_begin = k + 1 <= wps.size() - 1 ? k + 1 : wps.size() - 1;
        i = seg_begin;
        if (seg_begin + 1 >= wps.size()) break;
        continue;
      }
      if (!is_successor(from, to)) {
        throw RouteError("decompose: waypoints " + std::to_string(j) + " -> " +
                         std::to_string(j + 1) +
                         " jump between unconnected lanes");
      }
      // Successor transition: close the run if its manoeuvre class differs
      // from what follows. Runs are classified by their own heading change.
      const double this_turn = heading_change(seg_begin, j + 1);
      std::size_t j2 = j + 1;
      while (j2 + 1 < wps.size() && wps[j2 + 1].lane_id == to) ++j2;
      const double next_turn = heading_change(j + 1, j2 + 1);
      const bool this_is_turn = std::abs(this_turn) >= kTurnThreshold;
      const bool next_is_turn = std::abs(next_turn) >= kTurnThreshold;
      if (this_is_turn != next_is_turn ||
          (this_is_turn && next_is_turn &&
           (this_turn < 0) != (next_turn < 0))) {
        raw.push_back(controller_detail::make_subtask(
            classify_run(seg_begin, j + 1), seg_begin, j + 1, wps));
        seg_begin = j + 1;
      }
      i = j + 1;
    } else {
      i = j;
      break;
    }
  }
  if (seg_begin < wps.size() - 1 || raw.empty()) {
    raw.push_back(controller_detail::make_subtask(
        classify_run(seg_begin, wps.size()), seg_begin, wps.size(), wps));
  }

  // Merge adjacent straight slices left over from boundary handling.
  for (const SubTask& t : raw) {
    if (!tasks.empty() && tasks.back().kind == AgentKind::DriveStraight &&
        t.kind == AgentKind::DriveStraight) {
      tasks.back().end = t.end;
      tasks.back().target = wps[t.end - 1];
    } else {
      tasks.push_back(t);
    }
  }
  // Restore exact coverage: slices must tile [0, n).
  for (std::size_t k = 1; k < tasks.size(); ++k) tasks[k].begin = tasks[k - 1].end;
  tasks.front().begin = 0;
  tasks.back().end = wps.size();
  tasks.back().target = wps.back();
  return tasks;
}

// ---------------------------------------------------------------------------
// Task execution

struct RunTaskConfig {
  int max_ticks = 3000;
  bool shield_enabled = true;
  double goal_radius = 2.0;
  bool random_policy = false;  // uniform action per tick instead of greedy
  std::uint64_t policy_seed = 0;
};

/// Executes a planned route: per tick the active sub-task's agent proposes a
/// greedy control, the shield filters it, and the world advances. Shield
/// lane changes are woven in as overlay sub-tasks; the episode ends on final
/// sub-task termination, collision, or the tick budget.
inline EpisodeTrace run_task(WorldState world, const RoutePlan& route,
                             const std::map<AgentKind, QNetwork>& agents,
                             const ShieldConfig& shield_cfg,
                             const RunTaskConfig& cfg) {
  RoutePlan plan = route;
  std::vector<SubTask> tasks = decompose(plan, *world.map);
  if (tasks.empty()) throw RouteError("run_task: empty decomposition");
  for (const SubTask& t : tasks) {
    if (!cfg.random_policy && agents.find(t.kind) == agents.end())
      throw std::invalid_argument(std::string("run_task: no checkpoint for ") +
                                  to_string(t.kind));
  }

  EpisodeTrace trace;
  trace.seed = world.rng_seed;
  trace.shield_enabled = cfg.shield_enabled;
  ShieldState shield_state;
  Rng policy_rng(split_seed(cfg.policy_seed, 0xac7));

  std::size_t active = 0;
  // Shield-triggered lane-change overlay.
  bool overlay = false;
  AgentKind overlay_kind = AgentKind::ChangeLeftLane;
  Waypoint overlay_target;
  bool passing_opposite = false;  // mid-pass on an opposite lane
  int passing_origin = -1;

  const auto route_hint_for = [&](std::size_t task_idx) {
    std::vector<int> hint;
    const SubTask& t = tasks[task_idx];
    for (std::size_t k = t.begin; k < t.end; ++k) {
      if (hint.empty() || hint.back() != plan.waypoints[k].lane_id)
        hint.push_back(plan.waypoints[k].lane_id);
    }
    if (task_idx + 1 < tasks.size()) {
      const int next_lane = plan.waypoints[tasks[task_idx + 1].begin].lane_id;
      if (hint.empty() || hint.back() != next_lane) hint.push_back(next_lane);
    }
    return hint;
  };

  // Re-plans the remaining mission from the ego's current pose; keeps the
  // old decomposition when the position has become unreachable.
  const auto replan = [&]() {
    const VehicleState& ego = world.ego();
    const Waypoint here{ego.pos, ego.lane_id, ego.yaw};
    try {
      RoutePlan fresh = plan_route(*world.map, here, plan.destination);
      std::vector<SubTask> fresh_tasks = decompose(fresh, *world.map);
      if (fresh_tasks.empty()) return;
      for (const SubTask& t : fresh_tasks) {
        if (!cfg.random_policy && agents.find(t.kind) == agents.end()) return;
      }
      plan = std::move(fresh);
      tasks = std::move(fresh_tasks);
      active = 0;
    } catch (const RouteError&) {
      // keep the current plan
    }
  };

  for (int tick_count = 0; tick_count < cfg.max_ticks; ++tick_count) {
    // Advance through terminated sub-tasks (monotone).
    while (!overlay && active + 1 < tasks.size() &&
           tasks[active].termination(world, cfg.goal_radius)) {
      ++active;
    }
    const bool final_done =
        !overlay && tasks[active].termination(world, cfg.goal_radius) &&
        active + 1 == tasks.size();
    if (final_done) {
      trace.completed = true;
      break;
    }

    // A mission-planned lane change raises L_e once its slot is clear; the
    // shield then owns the manoeuvre's releases and settle detection.
    if (!overlay && !shield_state.lane_change_active &&
        (tasks[active].kind == AgentKind::ChangeLeftLane ||
         tasks[active].kind == AgentKind::ChangeRightLane)) {
      const int target_lane = tasks[active].target.lane_id;
      if (target_lane != world.ego().lane_id &&
          shield_detail::lane_clear_for_change(world, shield_cfg, target_lane,
                                               false,
                                               shield_cfg.clear_margin + 0.5)) {
        shield_state.lane_change_active = true;
        shield_state.lane_change_target = target_lane;
        shield_state.lane_change_origin = world.ego().lane_id;
        shield_state.lane_change_to_opposite = false;
        shield_state.lane_change_ticks = 0;
      }
    }

    // Overlay lifecycle: follow the shield's blocked-lane changes.
    if (!overlay && shield_state.lane_change_active &&
        shield_state.lane_change_target &&
        tasks[active].kind != AgentKind::ChangeLeftLane &&
        tasks[active].kind != AgentKind::ChangeRightLane) {
      overlay = true;
      const int target = *shield_state.lane_change_target;
      const LaneLink& lk = world.map->link(world.ego().lane_id);
      overlay_kind = (lk.right && *lk.right == target)
                         ? AgentKind::ChangeRightLane
                         : AgentKind::ChangeLeftLane;
      if (shield_state.lane_change_to_opposite) {
        passing_opposite = true;
        passing_origin = shield_state.lane_change_origin;
      }
    }
    if (overlay) {
      if (passing_opposite) {
        // Slide the target forward in the opposite lane until the home lane
        // is clear again, then retarget home and let the shield settle.
        VehicleState& ego = world.ego();
        const Lane& home = world.map->lane(passing_origin);
        const double home_s = home.centerline.project(ego.pos);
        const bool home_clear = [&] {
          const double lo = home_s + ego.length;
          for (const auto& v : world.vehicles) {
            if (v.id == ego.id || v.lane_id != passing_origin) continue;
            if (v.lane_s > lo - 2.0 && v.lane_s < lo + 25.0) return false;
          }
          return true;
        }();
        if (home_clear &&
            std::abs(home.centerline.lateral_offset(ego.pos)) > 1.0) {
          shield_state.lane_change_target = passing_origin;
          shield_state.lane_change_origin = ego.lane_id;
          shield_state.lane_change_to_opposite = false;
          overlay_kind = overlay_kind == AgentKind::ChangeLeftLane
                             ? AgentKind::ChangeRightLane
                             : AgentKind::ChangeLeftLane;
          passing_opposite = false;
        }
      }
      if (shield_state.lane_change_active && shield_state.lane_change_target) {
        const int target = *shield_state.lane_change_target;
        const Lane& tl = world.map->lane(target);
        const Vec2 ahead =
            world.ego().pos + unit_from_angle(world.ego().yaw) * 15.0;
        const double s = tl.centerline.project(ahead);
        const bool against = shield_state.lane_change_to_opposite;
        overlay_target = {tl.centerline.point_at(s), target,
                          against ? world.ego().yaw
                                  : tl.centerline.heading_at(s)};
      }
      if (!shield_state.lane_change_active) {
        // Settled: resume the mission from wherever the avoidance ended.
        overlay = false;
        passing_opposite = false;
        replan();
      }
    }

    const AgentKind kind = overlay ? overlay_kind : tasks[active].kind;
    const Waypoint target = overlay ? overlay_target : tasks[active].target;
    world.ego().target = target;
    world.ego().route_hint =
        overlay ? std::vector<int>{} : route_hint_for(active);

    const NeuralCallback neural = [&](const WorldState& w) -> Control {
      if (cfg.random_policy) {
        return decode_action(
            kind, static_cast<int>(policy_rng.next_below(action_count(kind))));
      }
      const SensorFrame frame = sense(w, w.ego().id);
      const std::vector<double> obs = build_observation(kind, frame);
      const auto it = agents.find(kind);
      int a = 0;
      const std::vector<double> q = q_forward(it->second, obs);
      for (int i = 1; i < static_cast<int>(q.size()); ++i)
        if (q[i] > q[a]) a = i;
      return decode_action(kind, a);
    };

    Control control;
    TraceRecord rec;
    if (cfg.shield_enabled) {
      auto [c, report] = check_functional_safety(world, plan.waypoints,
                                                 shield_state, shield_cfg, neural);
      control = c;
      rec.spec_triggered = report.spec_triggered;
      rec.props = report.props;
    } else {
      control = neural(world).clamped();
      ShieldState scratch = shield_state;
      scratch.route_ahead = plan.waypoints;
      rec.props = extract_propositions(world, scratch, shield_cfg);
      shield_state.junction_entry_tick = scratch.junction_entry_tick;
      shield_state.junction_cleared = scratch.junction_cleared;
      shield_state.prev = rec.props;
    }

    rec.tick = world.tick;
    rec.x = world.ego().pos.x;
    rec.y = world.ego().pos.y;
    rec.yaw = world.ego().yaw;
    rec.v = world.ego().speed;
    rec.control = control;
    rec.subtask = static_cast<int>(active);

    world = step(world, control);

    bool collided = false;
    for (const auto& pair : detect_collisions(world)) {
      if (pair.first == world.ego().id || pair.second == world.ego().id)
        collided = true;
    }
    if (collided) rec.events.push_back("collision");
    const Lane& lane = world.map->lane(world.ego().lane_id);
    if (std::abs(lane.centerline.lateral_offset(world.ego().pos)) >
        2.0 * kLaneWidth)
      rec.events.push_back("off_road");
    if (!overlay && active + 1 == tasks.size() &&
        tasks[active].termination(world, cfg.goal_radius))
      rec.events.push_back("goal");
    trace.records.push_back(std::move(rec));

    if (collided) {
      trace.collision = true;
      break;
    }
  }
  if (!trace.completed && !trace.collision &&
      static_cast<int>(trace.records.size()) >= cfg.max_ticks)
    trace.budget_exhausted = true;
  if (trace.collision) trace.completed = false;
  return trace;
}

}  // namespace hprl
