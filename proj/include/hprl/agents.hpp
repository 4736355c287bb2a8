#pragma once

// The five manoeuvre agents: observation builders, reward functions, the
// restricted per-manoeuvre action grids, epsilon-greedy selection, training
// environments, the training loop, and the checkpoint format.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hprl/map.hpp"
#include "hprl/nn.hpp"
#include "hprl/rng.hpp"
#include "hprl/world.hpp"

namespace hprl {

enum class AgentKind {
  DriveStraight,
  RightTurn,
  LeftTurn,
  ChangeLeftLane,
  ChangeRightLane,
};

inline constexpr std::array<AgentKind, 5> kAllAgentKinds = {
    AgentKind::DriveStraight, AgentKind::RightTurn, AgentKind::LeftTurn,
    AgentKind::ChangeLeftLane, AgentKind::ChangeRightLane};

inline const char* to_string(AgentKind k) {
  switch (k) {
    case AgentKind::DriveStraight: return "drive_straight";
    case AgentKind::RightTurn: return "right_turn";
    case AgentKind::LeftTurn: return "left_turn";
    case AgentKind::ChangeLeftLane: return "change_left_lane";
    case AgentKind::ChangeRightLane: return "change_right_lane";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
  for (AgentKind k : kAllAgentKinds)
    if (s == to_string(k)) return k;
  throw std::invalid_argument("agents: unknown agent kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Observations

inline int observation_size(AgentKind k) {
  switch (k) {
    case AgentKind::DriveStraight: return 4;
    case AgentKind::RightTurn:
    case AgentKind::LeftTurn: return 5;
    default: return 4;
  }
}

// Fixed per-component normalization scales.
inline constexpr double kScaleTarget = 50.0;   // dx_t
inline constexpr double kScaleCenter = kLaneWidth;
inline constexpr double kScaleSpeed = 10.0;    // v_ego
inline constexpr double kScaleRange = kSensorRange;  // dx_lon, dx_n
inline constexpr double kScaleAngle = std::numbers::pi;
inline constexpr double kScaleYawRate = 1.0;

/// Assembles the manoeuvre-specific observation vector:
///   straight:     (dx_t, dx_c, v_ego, dx_lon)
///   turns:        (dx_c, dx_t, dx_n, v_ego, d_angle)
///   lane changes: (yaw_rate, d_yaw, dx_t, v_ego)
inline std::vector<double> build_observation(AgentKind kind, const SensorFrame& f) {
  switch (kind) {
    case AgentKind::DriveStraight:
      return {f.dx_t / kScaleTarget, f.dx_c / kScaleCenter, f.v / kScaleSpeed,
              f.dx_lon / kScaleRange};
    case AgentKind::RightTurn:
    case AgentKind::LeftTurn:
      return {f.dx_c / kScaleCenter, f.dx_t / kScaleTarget, f.dx_n / kScaleRange,
              f.v / kScaleSpeed, f.d_angle / kScaleAngle};
    default:
      return {f.yaw_rate / kScaleYawRate, f.d_yaw / kScaleAngle,
              f.dx_t / kScaleTarget, f.v / kScaleSpeed};
  }
}

// ---------------------------------------------------------------------------
// Rewards

struct RewardConfig {
  double c1 = 100.0;        // collision penalty
  double c2 = 5.0;          // incorrect-lane penalty per tick
  double c3 = 10.0;         // undesired-steer penalty weight
  double r_sub_goal = 100.0;
  double v_target = 8.0;    // m/s
};

struct EventFlags {
  bool collision = false;
  bool goal_reached = false;
  bool off_road = false;
};

/// r = r_c + r_l + r_v + r_lon + r_t (+ r_sub_goal on goal).
/// r_v = beta * (v_target - v_ego) with beta = -1 when v_target >= v_ego and
/// +1 otherwise, i.e. tracking error always costs.
inline double reward_straight(const SensorFrame& f, const EventFlags& ev,
                              const RewardConfig& cfg) {
  const double r_c = ev.collision ? -cfg.c1 : 0.0;
  const double r_l = -std::abs(f.dx_c);
  const double beta = cfg.v_target >= f.v ? -1.0 : 1.0;
  const double r_v = beta * (cfg.v_target - f.v);
  const double r_lon = f.dx_lon;  // already clamped to the sensor range
  const double r_t = -f.dx_t;
  const double r_goal = ev.goal_reached ? cfg.r_sub_goal : 0.0;
  return r_c + r_l + r_v + r_lon + r_t + r_goal;
}

/// r = r_c + r_l + r_n + r_a + r_t (+ r_sub_goal on goal).
inline double reward_turn(const SensorFrame& f, const EventFlags& ev,
                          const RewardConfig& cfg) {
  const double r_c = ev.collision ? -cfg.c1 : 0.0;
  const double r_l = -std::abs(f.dx_c);
  const double r_n = f.dx_n;
  const double r_a = -std::abs(f.d_angle);
  const double r_t = -f.dx_t;
  const double r_goal = ev.goal_reached ? cfg.r_sub_goal : 0.0;
  return r_c + r_l + r_n + r_a + r_t + r_goal;
}

/// r = r_c + r_ch + r_st + r_yaw (+ r_sub_goal on goal). direction is +1 for
/// a right change, -1 for a left change. Steering costs when it points away
/// from the target lane, or keeps pushing in the change direction after the
/// target lane has been reached.
inline double reward_lane_change(const SensorFrame& f, const EventFlags& ev,
                                 const Control& control, const RewardConfig& cfg,
                                 bool in_target_lane, int direction) {
  const double r_c = ev.collision ? -cfg.c1 : 0.0;
  const double r_ch = in_target_lane ? 0.0 : -cfg.c2;
  double r_st = 0.0;
  const double steer_dir = control.steer > 0.0 ? 1.0 : (control.steer < 0.0 ? -1.0 : 0.0);
  if (steer_dir != 0.0) {
    const bool past = in_target_lane && steer_dir == direction;
    const bool away = !in_target_lane && steer_dir == -direction;
    if (past || away) r_st = -cfg.c3 * std::abs(control.steer);
  }
  const double r_yaw = -std::abs(f.d_yaw);
  const double r_goal = ev.goal_reached ? cfg.r_sub_goal : 0.0;
  return r_c + r_ch + r_st + r_yaw + r_goal;
}

// ---------------------------------------------------------------------------
// Action codecs (discretized per-manoeuvre grids)

inline int action_count(AgentKind k) {
  switch (k) {
    case AgentKind::DriveStraight: return 10;  // 3x3 grid + brake
    case AgentKind::RightTurn:
    case AgentKind::LeftTurn: return 9;
    default: return 10;  // 2x5 grid
  }
}

/// Decodes an action index into a Control inside the manoeuvre's range:
///   straight:     throttle {0.2, 0.6, 1.0} x steer {-0.1, 0, 0.1} + brake
///   right turn:   throttle {0.3, 0.45, 0.6} x steer {0.2, 0.35, 0.5}
///   left turn:    throttle {0.3, 0.45, 0.6} x steer {-0.2, -0.35, -0.5}
///   lane changes: throttle {0.4, 0.5} x steer {-0.3, -0.1, 0, 0.1, 0.3}
inline Control decode_action(AgentKind kind, int index) {
  if (index < 0 || index >= action_count(kind))
    throw std::out_of_range("decode_action: index " + std::to_string(index) +
                            " out of range for " + to_string(kind));
  switch (kind) {
    case AgentKind::DriveStraight: {
      if (index == 9) return {0.0, 0.0, 1.0};  // dedicated brake action
      static constexpr double throttles[3] = {0.2, 0.6, 1.0};
      static constexpr double steers[3] = {-0.1, 0.0, 0.1};
      return {throttles[index / 3], steers[index % 3], 0.0};
    }
    case AgentKind::RightTurn:
    case AgentKind::LeftTurn: {
      static constexpr double throttles[3] = {0.3, 0.45, 0.6};
      static constexpr double steers[3] = {0.2, 0.35, 0.5};
      const double s = steers[index % 3];
      return {throttles[index / 3], kind == AgentKind::RightTurn ? s : -s, 0.0};
    }
    default: {
      static constexpr double throttles[2] = {0.4, 0.5};
      static constexpr double steers[5] = {-0.3, -0.1, 0.0, 0.1, 0.3};
      return {throttles[index / 5], steers[index % 5], 0.0};
    }
  }
}

// ---------------------------------------------------------------------------
// Exploration

struct TrainingConfig {
  double gamma = 0.99;
  double eps0 = 1.0;
  double lambda_decay = 0.995;
  double eps_min = 0.03;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int target_sync_period = 1000;  // steps
  int max_episodes = 400;
  int max_ticks = 300;
  std::size_t buffer_capacity = 50000;
  double grad_clip = 1.0;
  // TD targets are regressed on scaled rewards to keep Q magnitudes near
  // unit scale; logged returns stay unscaled.
  double reward_scale = 0.02;

  void check() const {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma in [0,1]");
    if (eps_min <= 0.0 || eps_min > eps0 || eps0 > 1.0)
      throw std::invalid_argument("need 0 < eps_min <= eps0 <= 1");
    if (lambda_decay <= 0.0 || lambda_decay > 1.0)
      throw std::invalid_argument("need 0 < lambda_decay <= 1");
  }
};

/// eps_k = max(eps_min, eps0 * lambda^k), advanced per episode.
inline double epsilon_at(const TrainingConfig& cfg, int episode) {
  return std::max(cfg.eps_min, cfg.eps0 * std::pow(cfg.lambda_decay, episode));
}

/// Epsilon-greedy: uniform with probability eps, otherwise the greedy action
/// with ties broken toward the lowest index.
inline int select_action(const QNetwork& net, const std::vector<double>& obs,
                         double eps, Rng& rng) {
  if (eps > 0.0 && rng.next_double() < eps)
    return static_cast<int>(rng.next_below(net.output_size()));
  const std::vector<double> q = q_forward(net, obs);
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  int format_version = 1;
  AgentKind kind = AgentKind::DriveStraight;
  std::uint64_t seed = 0;
  QNetwork net;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "hprl-checkpoint v" << ck.format_version << "\n";
  out << "kind " << to_string(ck.kind) << "\n";
  out << "seed " << ck.seed << "\n";
  out << "topology";
  for (int s : ck.net.layer_sizes) out << " " << s;
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t l = 0; l < ck.net.num_layers(); ++l) {
    out << "layer " << l << "\n";
    for (double w : ck.net.weights[l]) out << w << "\n";
    for (double b : ck.net.biases[l]) out << b << "\n";
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string line, word;
  Checkpoint ck;
  std::getline(in, line);
  if (line.rfind("hprl-checkpoint v", 0) != 0)
    throw std::runtime_error("checkpoint: bad header in " + path);
  ck.format_version = std::stoi(line.substr(17));
  if (ck.format_version != 1)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  in >> word;
  if (word != "kind") throw std::runtime_error("checkpoint: expected kind");
  in >> word;
  ck.kind = agent_kind_from_string(word);
  in >> word;
  if (word != "seed") throw std::runtime_error("checkpoint: expected seed");
  in >> ck.seed;
  in >> word;
  if (word != "topology") throw std::runtime_error("checkpoint: expected topology");
  std::getline(in, line);
  std::istringstream topo(line);
  std::vector<int> sizes;
  int s;
  while (topo >> s) sizes.push_back(s);
  ck.net = QNetwork::zeros(sizes);
  for (std::size_t l = 0; l < ck.net.num_layers(); ++l) {
    std::size_t idx;
    in >> word >> idx;
    if (word != "layer" || idx != l)
      throw std::runtime_error("checkpoint: malformed layer section");
    for (double& w : ck.net.weights[l]) in >> w;
    for (double& b : ck.net.biases[l]) in >> b;
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return ck;
}

/// Network topology for a manoeuvre agent: observation x 64 x 32 x actions.
inline std::vector<int> topology_for(AgentKind kind) {
  return {observation_size(kind), 64, 32, action_count(kind)};
}

// ---------------------------------------------------------------------------
// Training environments

struct EnvStep {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;  // done other than by the tick budget
  bool success = false;
};

/// Purpose-built single-manoeuvre episodes: an empty corridor for straight
/// driving, the intersection connectors for turns, and the two-lane highway
/// for lane changes. Deterministic given the reset seed.
class ManoeuvreEnv {
 public:
  ManoeuvreEnv(AgentKind kind, RewardConfig reward_cfg, int max_ticks = 300)
      : kind_(kind), reward_cfg_(reward_cfg), max_ticks_(max_ticks) {
    switch (kind) {
      case AgentKind::DriveStraight:
        base_map_ = std::make_shared<RoadMap>(make_corridor());
        break;
      case AgentKind::RightTurn:
      case AgentKind::LeftTurn:
        base_map_ = std::make_shared<RoadMap>(make_fourway(false));
        break;
      default:
        base_map_ = std::make_shared<RoadMap>(make_highway());
        break;
    }
  }

  AgentKind kind() const { return kind_; }
  const WorldState& world() const { return world_; }
  int ticks() const { return ticks_; }

  std::vector<double> reset(std::uint64_t episode_seed) {
    Rng rng(episode_seed);
    world_ = WorldState{};
    world_.map = base_map_;
    world_.rng_seed = episode_seed;
    ticks_ = 0;

    switch (kind_) {
      case AgentKind::DriveStraight: {
        // Near-aligned spawns: the manoeuvre is speed tracking and lane
        // holding, and the observation tuple carries no heading error, so
        // strong initial yaw cannot be damped by any policy over it.
        const double s0 = rng.uniform(5.0, 10.0);
        const double v0 = rng.uniform(5.0, 8.0);
        world_.vehicles.push_back(spawn_vehicle(world_, 0, BehaviorTag::Ego, 0, s0,
                                                v0, rng.uniform(-0.3, 0.3),
                                                rng.uniform(-0.04, 0.04)));
        set_target(0, s0 + 60.0);
        break;
      }
      case AgentKind::RightTurn:
      case AgentKind::LeftTurn: {
        const int in = base_map_->lane_by_name("east_in")->id;
        const int conn = base_map_
                             ->lane_by_name(kind_ == AgentKind::RightTurn
                                                ? "east_right"
                                                : "east_left")
                             ->id;
        const int out = base_map_
                            ->lane_by_name(kind_ == AgentKind::RightTurn
                                               ? "south_out"
                                               : "north_out")
                            ->id;
        const Lane& in_lane = base_map_->lane(in);
        const double s0 = in_lane.centerline.length() - rng.uniform(4.0, 8.0);
        world_.vehicles.push_back(spawn_vehicle(world_, 0, BehaviorTag::Ego, in, s0,
                                                rng.uniform(2.5, 4.0)));
        world_.ego().route_hint = {in, conn, out};
        set_target(out, 6.0);
        break;
      }
      default: {
        const bool to_left = kind_ == AgentKind::ChangeLeftLane;
        const int from = base_map_->lane_by_name(to_left ? "lane0" : "lane1")->id;
        target_lane_ = base_map_->lane_by_name(to_left ? "lane1" : "lane0")->id;
        const double s0 = rng.uniform(35.0, 45.0);
        world_.vehicles.push_back(spawn_vehicle(world_, 0, BehaviorTag::Ego, from,
                                                s0, rng.uniform(4.0, 6.5)));
        set_target(target_lane_, s0 + 25.0);
        break;
      }
    }
    return build_observation(kind_, sense(world_, 0));
  }

  EnvStep step(int action_index) {
    const Control control = decode_action(kind_, action_index);
    const Vec2 before = world_.ego().pos;
    world_ = hprl::step(world_, control);
    ++ticks_;

    const SensorFrame frame = sense(world_, 0);
    EventFlags ev;
    for (const auto& pair : detect_collisions(world_)) {
      ev.collision = ev.collision || pair.first == 0 || pair.second == 0;
    }
    // Goal test against the swept segment so fast passes between tick
    // samples still count as reaching the waypoint.
    ev.goal_reached =
        segment_point_distance(before, world_.ego().pos,
                               world_.ego().target->pos) <= 2.0;
    ev.off_road = std::abs(frame.dx_c) > 2.0 * kLaneWidth;

    EnvStep out;
    out.success = ev.goal_reached && !ev.collision;
    out.terminal = ev.collision || ev.goal_reached || ev.off_road;
    out.done = out.terminal || ticks_ >= max_ticks_;
    out.reward = compute_reward(frame, ev, control);
    out.obs = build_observation(kind_, frame);
    return out;
  }

 private:
  void set_target(int lane_id, double s) {
    const Lane& lane = base_map_->lane(lane_id);
    world_.ego().target = Waypoint{lane.centerline.point_at(s), lane_id,
                                   lane.centerline.heading_at(s)};
  }

  double compute_reward(const SensorFrame& f, const EventFlags& ev,
                        const Control& c) const {
    switch (kind_) {
      case AgentKind::DriveStraight:
        return reward_straight(f, ev, reward_cfg_);
      case AgentKind::RightTurn:
      case AgentKind::LeftTurn:
        return reward_turn(f, ev, reward_cfg_);
      default:
        return reward_lane_change(f, ev, c, reward_cfg_,
                                  f.lane_id == target_lane_,
                                  kind_ == AgentKind::ChangeRightLane ? 1 : -1);
    }
  }

  AgentKind kind_;
  RewardConfig reward_cfg_;
  int max_ticks_;
  std::shared_ptr<const RoadMap> base_map_;
  WorldState world_;
  int ticks_ = 0;
  int target_lane_ = -1;
};

// ---------------------------------------------------------------------------
// Training

struct EpisodeMetric {
  int episode = 0;
  double episode_return = 0.0;
  bool success = false;
  double epsilon = 0.0;
  double loss_mean = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpisodeMetric> metrics;
  long env_steps = 0;
};

/// DQN training loop: epsilon-greedy exploration, replay once the buffer
/// covers a batch, an update per environment step, and a hard target sync
/// every target_sync_period steps. Deterministic for a given seed.
inline TrainResult train_agent(AgentKind kind, const TrainingConfig& cfg,
                               const RewardConfig& reward_cfg, std::uint64_t seed) {
  cfg.check();
  Rng init_rng(split_seed(seed, 0x11a0 + static_cast<int>(kind)));
  TrainResult result;
  result.checkpoint.kind = kind;
  result.checkpoint.seed = seed;
  result.checkpoint.net = QNetwork::randomized(topology_for(kind), init_rng);

  if (cfg.max_episodes <= 0) return result;

  QNetwork& net = result.checkpoint.net;
  QNetwork target = net;
  ReplayBuffer buffer(cfg.buffer_capacity);
  ManoeuvreEnv env(kind, reward_cfg, cfg.max_ticks);
  Rng explore_rng(split_seed(seed, 0x2b0 + static_cast<int>(kind)));
  const DqnConfig dqn{cfg.gamma, cfg.learning_rate, cfg.grad_clip};

  long steps = 0;
  for (int ep = 0; ep < cfg.max_episodes; ++ep) {
    const double eps = epsilon_at(cfg, ep);
    std::vector<double> obs = env.reset(split_seed(seed, 0x9000 + ep));
    double ep_return = 0.0;
    double loss_sum = 0.0;
    long loss_count = 0;
    bool success = false;

    for (int t = 0; t < cfg.max_ticks; ++t) {
      const int action = select_action(net, obs, eps, explore_rng);
      const EnvStep sr = env.step(action);
      ep_return += sr.reward;
      // Episodes are the task horizon: the tick budget ends the reward
      // stream, so budget exhaustion is terminal for the TD target too.
      buffer.push({obs, action, sr.reward * cfg.reward_scale, sr.obs, sr.done});
      obs = sr.obs;
      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        loss_sum += dqn_update(net, target,
                               buffer.sample(cfg.batch_size, explore_rng), dqn);
        ++loss_count;
      }
      ++steps;
      if (cfg.target_sync_period > 0 && steps % cfg.target_sync_period == 0)
        target = net;
      if (sr.done) {
        success = sr.success;
        break;
      }
    }
    result.metrics.push_back({ep, ep_return, success, eps,
                              loss_count > 0 ? loss_sum / loss_count : 0.0});
  }
  result.env_steps = steps;
  return result;
}

/// Success rate over the trailing `window` episodes of a metrics series.
inline double trailing_success_rate(const std::vector<EpisodeMetric>& metrics,
                                    std::size_t window = 50) {
  if (metrics.empty()) return 0.0;
  const std::size_t n = std::min(window, metrics.size());
  std::size_t wins = 0;
  for (std::size_t i = metrics.size() - n; i < metrics.size(); ++i)
    wins += metrics[i].success ? 1 : 0;
  return static_cast<double>(wins) / n;
}

}  // namespace hprl
