#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hprl/map.hpp"
#include "hprl/rng.hpp"
#include "hprl/world.hpp"

#include <cmath>
#include <numbers>

using namespace hprl;

namespace {

WorldState corridor_world(double ego_s, double ego_speed) {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_corridor());
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego, 0, ego_s, ego_speed));
  return w;
}

// Dense point-sampling overlap oracle for two rectangles: sample a grid in
// each box and test containment in the other. Independent of the SAT path.
bool sampling_overlap(const Obb& a, const Obb& b, int grid = 40) {
  const auto sample = [&](const Obb& src, const Obb& dst) {
    for (int i = 0; i <= grid; ++i) {
      for (int j = 0; j <= grid; ++j) {
        const double fx = -1.0 + 2.0 * i / grid;
        const double fy = -1.0 + 2.0 * j / grid;
        const Vec2 fwd = unit_from_angle(src.yaw);
        const Vec2 side{-fwd.y, fwd.x};
        const Vec2 p =
            src.center + fwd * (fx * src.half_length) + side * (fy * src.half_width);
        if (point_in_obb(p, dst)) return true;
      }
    }
    return false;
  };
  return sample(a, b) || sample(b, a);
}

}  // namespace

TEST_CASE("all map templates satisfy their structural invariants") {
  for (const char* name :
       {"corridor", "highway", "two_way", "fourway", "fourway_signalized"}) {
    const RoadMap m = make_map(name);  // validate() runs inside
    CHECK(m.lanes.size() >= 1);
  }
  CHECK_THROWS_AS(make_map("mars_highway"), std::invalid_argument);
}

TEST_CASE("straight-line kinematics advance exactly v*dt") {
  WorldState w = corridor_world(10.0, 10.0);
  const double x0 = w.ego().pos.x;
  const WorldState w2 = step(w, {0.0, 0.0, 0.0});
  CHECK(w2.ego().pos.x == doctest::Approx(x0 + 1.0).epsilon(1e-12));
  CHECK(w2.ego().pos.y == doctest::Approx(0.0));
  CHECK(w2.tick == 1);
}

TEST_CASE("constant full steer drives a circle of radius L/tan(35 deg)") {
  WorldState w = corridor_world(50.0, 5.0);
  w.params.c_drag = 0.0;  // keep speed constant with zero throttle
  const double expected_r = w.params.wheelbase / std::tan(deg_to_rad(35.0));

  std::vector<Vec2> pts;
  for (int i = 0; i < 60; ++i) {
    w = step(w, {0.0, 1.0, 0.0});
    pts.push_back(w.ego().pos);
  }
  // The discrete trajectory is a regular polygon; any three spaced vertices
  // give its circumradius. Probe several triples around the loop.
  for (int k : {0, 7, 17, 29}) {
    const Vec2 a = pts[k], b = pts[k + 12], c = pts[k + 24];
    const double area2 = std::abs(cross(b - a, c - a));
    const double r = distance(a, b) * distance(b, c) * distance(a, c) / (2.0 * area2);
    CHECK(r == doctest::Approx(expected_r).epsilon(0.01));
  }
  CHECK(expected_r == doctest::Approx(3.856).epsilon(0.001));
}

TEST_CASE("positive steer turns clockwise (to the right)") {
  WorldState w = corridor_world(50.0, 5.0);
  w = step(w, {0.0, 0.5, 0.0});
  CHECK(w.ego().yaw < 0.0);
  CHECK(w.ego().yaw_rate < 0.0);
}

TEST_CASE("full brake follows the decel law and never goes negative") {
  // With drag disabled the closed form is v_k = v0 - k*b_max*dt.
  WorldState w = corridor_world(10.0, 5.0);
  w.params.c_drag = 0.0;
  w = step(w, {0.0, 0.0, 1.0});
  CHECK(w.ego().speed == doctest::Approx(4.2).epsilon(1e-12));
  int ticks = 1;
  while (w.ego().speed > 0.0 && ticks < 100) {
    w = step(w, {0.0, 0.0, 1.0});
    ++ticks;
  }
  CHECK(ticks <= 7);
  for (int i = 0; i < 5; ++i) {
    w = step(w, {0.0, 0.0, 1.0});
    CHECK(w.ego().speed == 0.0);
  }

  // With the default drag the first tick sheds an extra c_drag*v*dt.
  WorldState wd = corridor_world(10.0, 5.0);
  wd = step(wd, {0.0, 0.0, 1.0});
  CHECK(wd.ego().speed == doctest::Approx(5.0 - (8.0 + 0.05 * 5.0) * 0.1));
}

TEST_CASE("step is deterministic") {
  const WorldState w0 = corridor_world(10.0, 8.0);
  WorldState a = w0;
  WorldState b = w0;
  for (int i = 0; i < 50; ++i) {
    const Control c{0.4, 0.05, 0.0};
    a = step(a, c);
    b = step(b, c);
  }
  CHECK(a.ego().pos.x == b.ego().pos.x);
  CHECK(a.ego().pos.y == b.ego().pos.y);
  CHECK(a.ego().yaw == b.ego().yaw);
  CHECK(a.ego().speed == b.ego().speed);
}

TEST_CASE("speed stays non-negative and positions finite under any controls") {
  Rng rng(99);
  WorldState w = corridor_world(10.0, 0.0);
  for (int i = 0; i < 300; ++i) {
    const Control c{rng.next_double(), rng.uniform(-1.0, 1.0), rng.next_double()};
    w = step(w, c);
    CHECK(w.ego().speed >= 0.0);
    CHECK(std::isfinite(w.ego().pos.x));
    CHECK(std::isfinite(w.ego().pos.y));
  }
}

TEST_CASE("collisions: far apart none, identical pose one pair") {
  WorldState w = corridor_world(10.0, 0.0);
  w.vehicles.push_back(spawn_vehicle(w, 1, BehaviorTag::Stationary, 0, 110.0, 0.0));
  CHECK(detect_collisions(w).empty());

  w.vehicles[1] = spawn_vehicle(w, 1, BehaviorTag::Stationary, 0, 10.0, 0.0);
  const auto pairs = detect_collisions(w);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == std::make_pair(0, 1));
}

TEST_CASE("SAT collision test agrees with a dense sampling oracle") {
  Rng rng(4242);
  int overlaps = 0;
  for (int i = 0; i < 500; ++i) {
    Obb a{{rng.uniform(-5, 5), rng.uniform(-5, 5)},
          rng.uniform(-std::numbers::pi, std::numbers::pi),
          rng.uniform(0.8, 2.6),
          rng.uniform(0.4, 1.2)};
    Obb b{{rng.uniform(-5, 5), rng.uniform(-5, 5)},
          rng.uniform(-std::numbers::pi, std::numbers::pi),
          rng.uniform(0.8, 2.6),
          rng.uniform(0.4, 1.2)};
    // Keep clearly-touching cases out of the comparison; the sampling oracle
    // cannot decide grazing contact reliably.
    const bool sat = obb_overlap(a, b);
    const bool sampled = sampling_overlap(a, b);
    if (sat != sampled) {
      // Tolerate disagreement only within a thin shell around tangency.
      Obb shrunk = b;
      shrunk.half_length -= 0.1;
      shrunk.half_width -= 0.1;
      Obb grown = b;
      grown.half_length += 0.1;
      grown.half_width += 0.1;
      CHECK(obb_overlap(a, grown));
      CHECK_FALSE(obb_overlap(a, shrunk));
    }
    overlaps += sat ? 1 : 0;
  }
  CHECK(overlaps > 20);  // the sweep actually exercises both outcomes
  CHECK(overlaps < 480);
}

TEST_CASE("sense: centered vehicle reads zero offsets") {
  WorldState w = corridor_world(40.0, 8.0);
  w.ego().target = Waypoint{{90.0, 0.0}, 0, 0.0};
  const SensorFrame f = sense(w, 0);
  CHECK(f.dx_c == doctest::Approx(0.0));
  CHECK(f.d_yaw == doctest::Approx(0.0));
  CHECK(f.dx_t == doctest::Approx(50.0));
  CHECK(f.d_angle == doctest::Approx(0.0));
  CHECK(f.dx_lon == kSensorRange);  // empty road clamps to R_s
  CHECK(f.dx_n == kSensorRange);
}

TEST_CASE("sense: bumper-to-bumper gap is geometric") {
  WorldState w = corridor_world(40.0, 8.0);
  w.ego().target = Waypoint{{90.0, 0.0}, 0, 0.0};
  // Lead placed so that the bumper gap is exactly 7.3 m: centers are
  // 7.3 + length apart (both 4.5 m long).
  const double center_gap = 7.3 + 4.5;
  w.vehicles.push_back(
      spawn_vehicle(w, 1, BehaviorTag::ConstantSpeed, 0, 40.0 + center_gap, 0.0));
  const SensorFrame f = sense(w, 0);
  CHECK(f.dx_lon == doctest::Approx(7.3).epsilon(0.0015));
  CHECK(f.dx_n == doctest::Approx(center_gap).epsilon(0.001));
}

TEST_CASE("sense: angles wrapped, unknown vehicle rejected") {
  WorldState w = corridor_world(40.0, 8.0);
  w.ego().yaw = 3.0;
  w.ego().target = Waypoint{{45.0, 0.0}, 0, 0.0};
  const SensorFrame f = sense(w, 0);
  CHECK(f.d_yaw > -std::numbers::pi);
  CHECK(f.d_yaw <= std::numbers::pi);
  CHECK(f.d_angle > -std::numbers::pi);
  CHECK(f.d_angle <= std::numbers::pi);
  CHECK_THROWS_AS(sense(w, 17), std::invalid_argument);
  w.ego().target.reset();
  CHECK_THROWS_AS(sense(w, 0), std::logic_error);
}

TEST_CASE("lateral offset sign: left of travel is positive") {
  WorldState w = corridor_world(40.0, 5.0);
  w.ego().pos.y = 0.8;  // corridor runs +x, so +y is the left side
  w.ego().target = Waypoint{{90.0, 0.0}, 0, 0.0};
  CHECK(sense(w, 0).dx_c == doctest::Approx(0.8));
}

TEST_CASE("light phases cycle with the sum of durations") {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_fourway(true));
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego,
                                     w.map->lane_by_name("east_in")->id, 10.0, 0.0));
  w.lights[0] = {0, 0.0};
  const Intersection& ix = w.map->intersections[0];
  const int east_in = w.map->lane_by_name("east_in")->id;
  CHECK(light_is_green(w, ix, east_in));
  CHECK(time_until_light_change(w, ix, east_in) == doctest::Approx(15.0));

  // One full cycle is 300 ticks at dt = 0.1; the state must recur exactly.
  WorldState t = w;
  for (int i = 0; i < 150; ++i) t = step(t, {});
  CHECK_FALSE(light_is_green(t, ix, east_in));
  CHECK(time_until_light_change(t, ix, east_in) == doctest::Approx(15.0));
  for (int i = 0; i < 150; ++i) t = step(t, {});
  CHECK(light_is_green(t, ix, east_in));
  CHECK(t.lights.at(0).phase == 0);
  CHECK(t.lights.at(0).clock == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("governing light requires the lookahead window") {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_fourway(true));
  const int east_in = w.map->lane_by_name("east_in")->id;
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego, east_in, 10.0, 0.0));
  w.lights[0] = {1, 0.0};  // east-west red
  CHECK(governing_light(w, w.ego()).color == LightColor::None);  // 84 m out
  w.vehicles[0] = spawn_vehicle(w, 0, BehaviorTag::Ego, east_in, 70.0, 0.0);
  CHECK(governing_light(w, w.ego()).color == LightColor::Red);
  w.lights[0] = {0, 0.0};
  CHECK(governing_light(w, w.ego()).color == LightColor::Green);
}

TEST_CASE("sudden-brake lead latches once the ego closes in") {
  WorldState w = corridor_world(10.0, 8.0);
  w.vehicles.push_back(spawn_vehicle(w, 1, BehaviorTag::SuddenBrake, 0, 35.0, 8.0));
  bool latched_seen = false;
  for (int i = 0; i < 200; ++i) {
    w = step(w, {0.6, 0.0, 0.0});
    if (w.vehicles[1].behavior_latched) {
      latched_seen = true;
      break;
    }
  }
  CHECK(latched_seen);
  for (int i = 0; i < 40; ++i) w = step(w, {0.0, 0.0, 1.0});
  CHECK(w.vehicles[1].speed == 0.0);
}

TEST_CASE("npc follows successor lanes through the intersection") {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_fourway(false));
  const int north_in = w.map->lane_by_name("north_in")->id;
  const int north_out = w.map->lane_by_name("north_out")->id;
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego, 0, 5.0, 0.0));
  w.vehicles.push_back(
      spawn_vehicle(w, 1, BehaviorTag::ConstantSpeed, north_in, 80.0, 8.0));
  for (int i = 0; i < 50; ++i) w = step(w, {});
  CHECK(w.vehicles[1].lane_id == north_out);  // straight through, deterministic
  CHECK(w.vehicles[1].pos.x == doctest::Approx(1.75).epsilon(0.01));
}

TEST_CASE("clearance windows flag occupied neighbor lanes") {
  WorldState w;
  w.map = std::make_shared<RoadMap>(make_highway());
  w.vehicles.push_back(spawn_vehicle(w, 0, BehaviorTag::Ego, 0, 50.0, 5.0));
  w.ego().target = Waypoint{{100.0, 0.0}, 0, 0.0};
  CHECK(sense(w, 0).clear_left);
  // Exactly abreast on lane1: blocks the window.
  w.vehicles.push_back(spawn_vehicle(w, 1, BehaviorTag::ConstantSpeed, 1, 50.0, 5.0));
  CHECK_FALSE(sense(w, 0).clear_left);
  // Far ahead on lane1: clear again.
  w.vehicles[1] = spawn_vehicle(w, 1, BehaviorTag::ConstantSpeed, 1, 80.0, 5.0);
  CHECK(sense(w, 0).clear_left);
}
