#pragma once

// Episode traces and their JSON Lines serialization: a schema-version header
// line, then one object per simulation tick.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hprl/ltl.hpp"
#include "hprl/shield.hpp"
#include "hprl/world.hpp"

namespace hprl {

struct TraceRecord {
  long tick = 0;
  // Ego pose the decision was made from (pre-step).
  double x = 0.0, y = 0.0, yaw = 0.0, v = 0.0;
  Control control;
  std::optional<int> spec_triggered;  // null => neural control
  PropositionFrame props;
  int subtask = 0;
  std::vector<std::string> events;  // collision / goal / off_road
};

struct EpisodeTrace {
  std::string scenario_id = "custom";
  std::uint64_t seed = 0;
  bool shield_enabled = true;
  bool completed = false;
  bool collision = false;
  bool budget_exhausted = false;
  std::vector<TraceRecord> records;

  std::set<int> specs_triggered() const {
    std::set<int> out;
    for (const auto& r : records)
      if (r.spec_triggered) out.insert(*r.spec_triggered);
    return out;
  }

  std::vector<ltl::Assignment> proposition_trace() const {
    std::vector<ltl::Assignment> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.props.to_assignment());
    return out;
  }
};

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace trace_detail {

inline nlohmann::json props_to_json(const PropositionFrame& p) {
  return {{"T_red", p.T_red},
          {"D_lon", p.D_lon},
          {"D_lat", p.D_lat},
          {"J_ev", p.J_ev},
          {"prio_v_gt_e", p.prio_v_gt_e},
          {"L_e", p.L_e},
          {"L_ev", p.L_ev},
          {"C_eps", p.C_eps},
          {"e_stop", p.e_stop},
          {"e_stop_lon", p.e_stop_lon},
          {"e_stop_lat", p.e_stop_lat}};
}

inline PropositionFrame props_from_json(const nlohmann::json& j) {
  PropositionFrame p;
  p.T_red = j.at("T_red").get<bool>();
  p.D_lon = j.at("D_lon").get<bool>();
  p.D_lat = j.at("D_lat").get<bool>();
  p.J_ev = j.at("J_ev").get<bool>();
  p.prio_v_gt_e = j.at("prio_v_gt_e").get<bool>();
  p.L_e = j.at("L_e").get<bool>();
  p.L_ev = j.at("L_ev").get<bool>();
  p.C_eps = j.at("C_eps").get<bool>();
  p.e_stop = j.at("e_stop").get<bool>();
  p.e_stop_lon = j.at("e_stop_lon").get<bool>();
  p.e_stop_lat = j.at("e_stop_lat").get<bool>();
  return p;
}

}  // namespace trace_detail

inline void write_trace(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TraceError("trace: cannot write " + path);
  nlohmann::json header = {{"schema", "hprl-trace"},
                           {"version", 1},
                           {"scenario", trace.scenario_id},
                           {"seed", trace.seed},
                           {"shield", trace.shield_enabled},
                           {"completed", trace.completed},
                           {"collision", trace.collision},
                           {"budget_exhausted", trace.budget_exhausted}};
  out << header.dump() << "\n";
  for (const auto& r : trace.records) {
    nlohmann::json j = {
        {"t", r.tick},
        {"ego", {{"x", r.x}, {"y", r.y}, {"yaw", r.yaw}, {"v", r.v}}},
        {"control",
         {{"throttle", r.control.throttle},
          {"steer", r.control.steer},
          {"brake", r.control.brake}}},
        {"source",
         r.spec_triggered ? "spec" + std::to_string(*r.spec_triggered)
                          : std::string("neural")},
        {"spec_triggered",
         r.spec_triggered ? nlohmann::json(*r.spec_triggered)
                          : nlohmann::json(nullptr)},
        {"props", trace_detail::props_to_json(r.props)},
        {"subtask", r.subtask},
        {"events", r.events}};
    out << j.dump() << "\n";
  }
}

inline EpisodeTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("trace: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw TraceError("trace: empty file " + path);
  EpisodeTrace trace;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("schema", "") != "hprl-trace" || header.value("version", 0) != 1)
      throw TraceError("trace: unsupported schema in " + path);
    trace.scenario_id = header.value("scenario", "custom");
    trace.seed = header.value("seed", 0ull);
    trace.shield_enabled = header.value("shield", true);
    trace.completed = header.value("completed", false);
    trace.collision = header.value("collision", false);
    trace.budget_exhausted = header.value("budget_exhausted", false);
  } catch (const nlohmann::json::exception& e) {
    throw TraceError("trace: bad header in " + path + ": " + e.what());
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      TraceRecord r;
      r.tick = j.at("t").get<long>();
      r.x = j.at("ego").at("x").get<double>();
      r.y = j.at("ego").at("y").get<double>();
      r.yaw = j.at("ego").at("yaw").get<double>();
      r.v = j.at("ego").at("v").get<double>();
      r.control.throttle = j.at("control").at("throttle").get<double>();
      r.control.steer = j.at("control").at("steer").get<double>();
      r.control.brake = j.at("control").at("brake").get<double>();
      if (!j.at("spec_triggered").is_null())
        r.spec_triggered = j.at("spec_triggered").get<int>();
      r.props = trace_detail::props_from_json(j.at("props"));
      r.subtask = j.at("subtask").get<int>();
      for (const auto& e : j.at("events")) r.events.push_back(e.get<std::string>());
      trace.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw TraceError("trace: malformed record at " + path + ":" +
                       std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace hprl
