#pragma once

// Scenario templates and the ScenarioSpec file format. The catalog is a
// desk-scale set of pre-crash situations: a lead vehicle braking hard, slow
// leaders, blocked lanes with and without oncoming traffic, red-light
// running, and turn/crossing negotiations at a four-way intersection.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hprl/map.hpp"
#include "hprl/rng.hpp"
#include "hprl/world.hpp"

namespace hprl {

struct NpcSpec {
  std::string lane;
  double s = 0.0;
  std::string behavior;
  double speed = 0.0;
};

struct ScenarioSpec {
  std::string id = "custom";
  std::string map;
  std::uint64_t seed = 0;
  std::string ego_lane;
  double ego_s = 0.0;
  double ego_speed = 0.0;
  double ego_lateral_offset = 0.0;
  double ego_yaw_offset = 0.0;
  std::string goal_lane;
  double goal_s = 0.0;
  std::vector<NpcSpec> npcs;
  int lights_initial_phase = 0;
  double lights_initial_clock = 0.0;
  // Plan the route around known obstacles up front (the "with prior action"
  // obstacle-avoidance variant).
  bool prior_lane_change = false;
};

struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Builds the initial world for a spec. Ego is always vehicle 0.
inline WorldState load_scenario(const ScenarioSpec& spec) {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_map(spec.map));
  w.rng_seed = spec.seed;
  w.dt = 0.1;

  const auto resolve_lane = [&](const std::string& name) -> int {
    const Lane* lane = w.map->lane_by_name(name);
    if (lane == nullptr)
      throw LoadError("scenario: unknown lane '" + name + "' on map '" +
                      spec.map + "'");
    return lane->id;
  };

  const int ego_lane = resolve_lane(spec.ego_lane);
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego, ego_lane, spec.ego_s,
                                     spec.ego_speed, spec.ego_lateral_offset,
                                     spec.ego_yaw_offset));
  int next_id = 1;
  for (const auto& npc : spec.npcs) {
    BehaviorTag tag;
    try {
      tag = behavior_from_string(npc.behavior);
    } catch (const std::invalid_argument& e) {
      throw LoadError(e.what());
    }
    if (tag == BehaviorTag::Ego)
      throw LoadError("scenario: npc entries must not use the ego behavior");
    w.vehicles.push_back(
        spawn_vehicle(w, next_id++, tag, resolve_lane(npc.lane), npc.s, npc.speed));
  }

  for (const auto& ix : w.map->intersections) {
    if (!ix.signalized) continue;
    if (spec.lights_initial_phase < 0 ||
        spec.lights_initial_phase >= static_cast<int>(ix.phases.size()))
      throw LoadError("scenario: initial light phase out of range");
    w.lights[ix.id] = {spec.lights_initial_phase, spec.lights_initial_clock};
  }
  return w;
}

// ---------------------------------------------------------------------------
// ScenarioSpec files

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  s.id = j.value("id", std::string("custom"));
  if (!j.contains("map")) throw LoadError("scenario file: missing 'map'");
  s.map = j.at("map").get<std::string>();
  s.seed = j.value("seed", 0ull);
  const auto& ego = j.at("ego");
  s.ego_lane = ego.at("spawn").at("lane").get<std::string>();
  s.ego_s = ego.at("spawn").value("s", 0.0);
  s.ego_speed = ego.value("speed", 0.0);
  s.ego_lateral_offset = ego.value("lateral_offset", 0.0);
  s.ego_yaw_offset = ego.value("yaw_offset", 0.0);
  if (ego.contains("goal")) {
    s.goal_lane = ego.at("goal").at("lane").get<std::string>();
    s.goal_s = ego.at("goal").value("s", 0.0);
  }
  for (const auto& n : j.value("npc", nlohmann::json::array())) {
    NpcSpec npc;
    npc.lane = n.at("spawn").at("lane").get<std::string>();
    npc.s = n.at("spawn").value("s", 0.0);
    npc.behavior = n.at("behavior").get<std::string>();
    npc.speed = n.value("speed", 0.0);
    s.npcs.push_back(std::move(npc));
  }
  if (j.contains("lights")) {
    s.lights_initial_phase = j.at("lights").value("initial_phase", 0);
    s.lights_initial_clock = j.at("lights").value("initial_clock", 0.0);
  }
  s.prior_lane_change = j.value("prior_lane_change", false);
  return s;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["map"] = s.map;
  j["seed"] = s.seed;
  j["ego"] = {{"spawn", {{"lane", s.ego_lane}, {"s", s.ego_s}}},
              {"speed", s.ego_speed},
              {"lateral_offset", s.ego_lateral_offset},
              {"yaw_offset", s.ego_yaw_offset},
              {"goal", {{"lane", s.goal_lane}, {"s", s.goal_s}}}};
  j["npc"] = nlohmann::json::array();
  for (const auto& n : s.npcs) {
    j["npc"].push_back({{"spawn", {{"lane", n.lane}, {"s", n.s}}},
                        {"behavior", n.behavior},
                        {"speed", n.speed}});
  }
  j["lights"] = {{"initial_phase", s.lights_initial_phase},
                 {"initial_clock", s.lights_initial_clock}};
  j["prior_lane_change"] = s.prior_lane_change;
  return j;
}

inline ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("scenario file: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("scenario file " + path + ": " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("scenario file " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Catalog

inline const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids = {
      "control_loss",
      "longitudinal_control",
      "obstacle_avoidance",
      "obstacle_avoidance_prior",
      "lane_change",
      "vehicle_passing",
      "running_red_light",
      "unprotected_left",
      "right_turn",
      "crossing_unsignalized",
  };
  return ids;
}

/// Safety specifications a scenario may legitimately trigger (the scenario
/// table's "Assertions" column). Empty means none expected.
inline std::set<int> scenario_allowed_specs(const std::string& id) {
  if (id == "control_loss") return {};
  if (id == "longitudinal_control") return {2, 5};
  if (id == "obstacle_avoidance" || id == "obstacle_avoidance_prior")
    return {2, 3, 5};
  if (id == "lane_change") return {2, 3, 5};
  if (id == "vehicle_passing") return {2, 3, 5};
  if (id == "running_red_light") return {1, 2, 4};
  if (id == "unprotected_left") return {1, 3, 4};
  if (id == "right_turn") return {1, 3, 4};
  if (id == "crossing_unsignalized") return {2, 4};
  throw LoadError("scenario: unknown scenario id '" + id + "'");
}

/// Instantiates a catalog template. The seed jitters spawn positions and
/// speeds inside ranges that keep each template's situation intact.
inline ScenarioSpec make_scenario(const std::string& id, std::uint64_t seed) {
  Rng rng(split_seed(seed, 0x5ce0));
  const auto u = [&](double lo, double hi) { return rng.uniform(lo, hi); };

  ScenarioSpec s;
  s.id = id;
  s.seed = seed;
  if (id == "control_loss") {
    // Perturbed start, empty road: recover lane tracking without help.
    s.map = "corridor";
    s.ego_lane = "lane0";
    s.ego_s = u(8.0, 14.0);
    s.ego_speed = u(6.0, 8.0);
    s.ego_lateral_offset = u(0.9, 1.5);
    s.ego_yaw_offset = u(0.15, 0.3);
    s.goal_lane = "lane0";
    s.goal_s = 150.0;
  } else if (id == "longitudinal_control") {
    // Lead vehicle brakes hard once the ego closes in.
    s.map = "highway";
    s.ego_lane = "lane0";
    s.ego_s = 5.0;
    s.ego_speed = 8.0;
    s.goal_lane = "lane0";
    s.goal_s = 220.0;
    s.npcs.push_back({"lane0", u(55.0, 70.0), "sudden_brake", u(7.0, 9.0)});
  } else if (id == "obstacle_avoidance" || id == "obstacle_avoidance_prior") {
    s.map = "highway";
    s.ego_lane = "lane0";
    s.ego_s = 5.0;
    s.ego_speed = 8.0;
    s.goal_lane = "lane0";
    s.goal_s = 220.0;
    s.npcs.push_back({"lane0", u(65.0, 80.0), "stationary", 0.0});
    s.prior_lane_change = id == "obstacle_avoidance_prior";
    if (s.prior_lane_change) {
      // The planned detour dodges the parked obstacle; a crawling vehicle
      // further on still forces an emergency response mid-manoeuvre.
      s.npcs.push_back({"lane0", u(140.0, 155.0), "slow_leader", 2.0});
    }
  } else if (id == "lane_change") {
    // Leader far below the desired speed; evading it needs the left lane.
    s.map = "highway";
    s.ego_lane = "lane0";
    s.ego_s = 5.0;
    s.ego_speed = 8.0;
    s.goal_lane = "lane0";
    s.goal_s = 220.0;
    s.npcs.push_back({"lane0", u(40.0, 50.0), "slow_leader", u(0.3, 0.7)});
  } else if (id == "vehicle_passing") {
    // Blocked lane on a two-way road; the opposite lane carries traffic.
    s.map = "two_way";
    s.ego_lane = "east";
    s.ego_s = 20.0;
    s.ego_speed = 8.0;
    s.goal_lane = "east";
    s.goal_s = 260.0;
    s.npcs.push_back({"east", u(72.0, 85.0), "stationary", 0.0});
    s.npcs.push_back({"west", u(90.0, 120.0), "constant_speed", u(5.5, 7.0)});
  } else if (id == "running_red_light") {
    // Crossing vehicle ignores its red while the ego goes straight on green.
    s.map = "fourway_signalized";
    s.ego_lane = "east_in";
    s.ego_s = 20.0;
    s.ego_speed = 8.0;
    s.goal_lane = "east_out";
    s.goal_s = 60.0;
    s.lights_initial_phase = 0;  // east-west green
    const double runner_speed = 10.0;
    const double eta = u(7.5, 9.0);  // roughly the ego's arrival time
    s.npcs.push_back(
        {"north_in", 94.75 - runner_speed * eta, "red_light_runner", runner_speed});
  } else if (id == "unprotected_left") {
    // Left turn across oncoming traffic that shares the green.
    s.map = "fourway_signalized";
    s.ego_lane = "east_in";
    s.ego_s = 30.0;
    s.ego_speed = 7.0;
    s.goal_lane = "north_out";
    s.goal_s = 40.0;
    s.lights_initial_phase = 1;  // ego faces red first
    s.lights_initial_clock = u(7.0, 10.0);
    s.npcs.push_back({"west_in", u(40.0, 60.0), "crossing", 8.0});
  } else if (id == "right_turn") {
    // Right turn yielding to southbound traffic entering near the flip.
    s.map = "fourway_signalized";
    s.ego_lane = "east_in";
    s.ego_s = 30.0;
    s.ego_speed = 7.0;
    s.goal_lane = "south_out";
    s.goal_s = 40.0;
    s.lights_initial_phase = 1;
    s.lights_initial_clock = 2.0 + u(0.0, 2.0);
    const double flip = 15.0 - s.lights_initial_clock;
    s.npcs.push_back(
        {"south_in", 94.75 - 7.0 * (flip - u(0.0, 1.0)), "crossing", 7.0});
  } else if (id == "crossing_unsignalized") {
    // First to enter the junction has priority; the crossing vehicle wins.
    s.map = "fourway";
    s.ego_lane = "east_in";
    s.ego_s = 30.0;
    s.ego_speed = 7.0;
    s.goal_lane = "east_out";
    s.goal_s = 60.0;
    const double npc_eta = u(7.7, 8.5);
    s.npcs.push_back({"north_in", 94.75 - 8.0 * npc_eta, "constant_speed", 8.0});
  } else {
    throw LoadError("scenario: unknown scenario id '" + id + "'");
  }
  return s;
}

}  // namespace hprl
