#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hprl/scenario.hpp"

#include <cstdio>
#include <fstream>

using namespace hprl;

TEST_CASE("longitudinal_control places a sudden-brake lead ahead of the ego") {
  const ScenarioSpec spec = make_scenario("longitudinal_control", 7);
  const WorldState w = load_scenario(spec);
  REQUIRE(w.vehicles.size() == 2);
  const VehicleState& lead = w.vehicles[1];
  CHECK(lead.behavior == BehaviorTag::SuddenBrake);
  CHECK(lead.lane_id == w.ego().lane_id);
  CHECK(lead.pos.x > w.ego().pos.x);
}

TEST_CASE("running_red_light places a red-light runner at the intersection") {
  const ScenarioSpec spec = make_scenario("running_red_light", 3);
  const WorldState w = load_scenario(spec);
  REQUIRE(w.vehicles.size() == 2);
  CHECK(w.vehicles[1].behavior == BehaviorTag::RedLightRunner);
  CHECK(w.map->lane(w.vehicles[1].lane_id).name == "north_in");
  CHECK(w.lights.at(0).phase == 0);
}

TEST_CASE("a world with no npcs still steps") {
  const ScenarioSpec spec = make_scenario("control_loss", 1);
  WorldState w = load_scenario(spec);
  REQUIRE(w.vehicles.size() == 1);
  for (int i = 0; i < 50; ++i) w = step(w, {0.5, 0.0, 0.0});
  CHECK(w.tick == 50);
}

TEST_CASE("load errors are descriptive") {
  ScenarioSpec bad = make_scenario("lane_change", 1);
  bad.map = "atlantis";
  CHECK_THROWS_AS(load_scenario(bad), std::invalid_argument);

  bad = make_scenario("lane_change", 1);
  bad.ego_lane = "lane9";
  CHECK_THROWS_WITH_AS(load_scenario(bad),
                       doctest::Contains("unknown lane 'lane9'"), LoadError);

  bad = make_scenario("lane_change", 1);
  bad.npcs[0].behavior = "teleport";
  CHECK_THROWS_AS(load_scenario(bad), LoadError);
}

TEST_CASE("every catalog scenario loads and declares allowed specs") {
  for (const auto& id : scenario_ids()) {
    const ScenarioSpec spec = make_scenario(id, 42);
    const WorldState w = load_scenario(spec);
    CHECK(w.vehicles.size() >= 1);
    CHECK_NOTHROW(scenario_allowed_specs(id));
    CHECK(spec.goal_lane != "");
  }
  CHECK_THROWS_AS(make_scenario("nope", 1), LoadError);
}

TEST_CASE("scenario files round-trip through json") {
  const ScenarioSpec spec = make_scenario("vehicle_passing", 5);
  const std::string path = "test_scenario_roundtrip.json";
  {
    std::ofstream out(path);
    out << scenario_to_json(spec).dump(2) << "\n";
  }
  const ScenarioSpec back = load_scenario_file(path);
  CHECK(back.map == spec.map);
  CHECK(back.ego_lane == spec.ego_lane);
  CHECK(back.ego_s == spec.ego_s);
  CHECK(back.npcs.size() == spec.npcs.size());
  CHECK(back.npcs[0].behavior == spec.npcs[0].behavior);
  CHECK(back.npcs[0].s == spec.npcs[0].s);
  CHECK(back.lights_initial_phase == spec.lights_initial_phase);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_scenario_file("does_not_exist.json"), LoadError);
}

TEST_CASE("same seed yields the same scenario, different seeds differ") {
  const ScenarioSpec a = make_scenario("obstacle_avoidance", 11);
  const ScenarioSpec b = make_scenario("obstacle_avoidance", 11);
  const ScenarioSpec c = make_scenario("obstacle_avoidance", 12);
  CHECK(a.npcs[0].s == b.npcs[0].s);
  CHECK(a.npcs[0].s != c.npcs[0].s);
}
