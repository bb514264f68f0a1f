#pragma once

// Episode interface around the traffic and sensor modules: reset builds a
// scenario from a config, step applies one ego action for one time step and
// reports termination, observe reads road-aligned neighbor features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avsim/error.hpp"
#include "avsim/road_network.hpp"
#include "avsim/rng.hpp"
#include "avsim/sensors.hpp"
#include "avsim/traffic.hpp"

namespace avsim {

inline constexpr std::string_view kEnvFormat = "avsim-env/1";

enum class EgoRule { kRandom, kById };
enum class EpisodeEnd { kContinuous, kRouteComplete };

struct EnvConfig {
  std::string network = "highway";  ///< built-in name or network file path
  std::filesystem::path base_dir;   ///< relative paths resolve against this
  DemandConfig demand;
  SensorSuite sensors;
  bool sensors_enabled = true;
  int sensor_every = 1;  ///< render on steps divisible by this
  SceneryCondition condition = SceneryCondition::morning();
  double dt = kDefaultDt;
  int max_steps = 300;
  std::uint64_t seed = 1;
  EgoRule ego_rule = EgoRule::kRandom;
  int ego_id = 0;
  int neighbors = 8;
  double max_a_long = 5.0;
  double max_a_lat = 3.0;
  EpisodeEnd episode_end = EpisodeEnd::kContinuous;
  TrafficOptions traffic;

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (max_steps < 1) throw ValidationError("max_steps must be at least 1");
    if (neighbors < 0) throw ValidationError("neighbor count must be non-negative");
    if (sensor_every < 1) throw ValidationError("sensor interval must be at least 1");
    if (!(max_a_long > 0.0) || !(max_a_lat > 0.0)) throw ValidationError("action bounds must be positive");
    demand.validate();
    condition.validate();
    if (sensors_enabled) {
      if (sensors.camera_enabled) sensors.camera.validate();
      if (sensors.lidar_enabled) sensors.lidar.validate();
    }
  }
};

// ---------------------------------------------------------------------------
// Config JSON

inline nlohmann::json camera_to_json(const CameraConfig& c) {
  nlohmann::json j = {{"width", c.width},
                      {"height", c.height},
                      {"horizontal_fov", c.horizontal_fov},
                      {"mount_lateral", c.mount_lateral},
                      {"mount_height", c.mount_height},
                      {"min_area", c.min_area},
                      {"max_depth", c.max_depth}};
  if (c.mount_forward) j["mount_forward"] = *c.mount_forward;
  return j;
}

inline CameraConfig camera_from_json(const nlohmann::json& j) {
  CameraConfig c;
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.horizontal_fov = j.value("horizontal_fov", c.horizontal_fov);
  if (j.contains("mount_forward")) c.mount_forward = j.at("mount_forward").get<double>();
  c.mount_lateral = j.value("mount_lateral", c.mount_lateral);
  c.mount_height = j.value("mount_height", c.mount_height);
  c.min_area = j.value("min_area", c.min_area);
  c.max_depth = j.value("max_depth", c.max_depth);
  return c;
}

inline nlohmann::json lidar_to_json(const LidarConfig& c) {
  return {{"channels", c.channels},
          {"vertical_fov", {c.vertical_fov_min, c.vertical_fov_max}},
          {"horizontal_step", c.horizontal_step},
          {"rotation_rate", c.rotation_rate},
          {"max_range", c.max_range},
          {"I0", c.emitted_intensity},
          {"attenuation", c.attenuation},
          {"mount_height", c.mount_height}};
}

inline LidarConfig lidar_from_json(const nlohmann::json& j) {
  LidarConfig c;
  c.channels = j.value("channels", c.channels);
  if (j.contains("vertical_fov")) {
    const auto& fov = j.at("vertical_fov");
    if (!fov.is_array() || fov.size() != 2) throw ValidationError("lidar vertical_fov must be [min, max]");
    c.vertical_fov_min = fov[0].get<double>();
    c.vertical_fov_max = fov[1].get<double>();
  }
  c.horizontal_step = j.value("horizontal_step", c.horizontal_step);
  c.rotation_rate = j.value("rotation_rate", c.rotation_rate);
  c.max_range = j.value("max_range", c.max_range);
  c.emitted_intensity = j.value("I0", c.emitted_intensity);
  c.attenuation = j.value("attenuation", c.attenuation);
  c.mount_height = j.value("mount_height", c.mount_height);
  return c;
}

inline nlohmann::json condition_to_json(const SceneryCondition& c) {
  return {{"lighting", to_string(c.lighting)},
          {"miss_base", c.miss_base},
          {"miss_per_100m", c.miss_per_100m},
          {"jitter_sigma", c.jitter_sigma},
          {"false_positive_rate", c.false_positive_rate}};
}

/// "morning" / "night", or an object whose missing fields default to the
/// preset of its lighting.
inline SceneryCondition condition_from_json(const nlohmann::json& j) {
  if (j.is_string()) return SceneryCondition::preset(lighting_from_string(j.get<std::string>()));
  SceneryCondition c = SceneryCondition::preset(lighting_from_string(j.value("lighting", std::string{"morning"})));
  c.miss_base = j.value("miss_base", c.miss_base);
  c.miss_per_100m = j.value("miss_per_100m", c.miss_per_100m);
  c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
  c.false_positive_rate = j.value("false_positive_rate", c.false_positive_rate);
  c.validate();
  return c;
}

inline nlohmann::json env_config_to_json(const EnvConfig& c) {
  nlohmann::json ego = {{"rule", c.ego_rule == EgoRule::kRandom ? "random" : "by_id"}};
  if (c.ego_rule == EgoRule::kById) ego["id"] = c.ego_id;
  return {{"format", kEnvFormat},
          {"network", c.network},
          {"demand", demand_to_json(c.demand)},
          {"dt", c.dt},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"ego", ego},
          {"neighbors", c.neighbors},
          {"action_bounds", {{"long", c.max_a_long}, {"lat", c.max_a_lat}}},
          {"sensors",
           {{"enabled", c.sensors_enabled},
            {"every", c.sensor_every},
            {"camera_enabled", c.sensors.camera_enabled},
            {"lidar_enabled", c.sensors.lidar_enabled},
            {"camera", camera_to_json(c.sensors.camera)},
            {"lidar", lidar_to_json(c.sensors.lidar)}}},
          {"condition", condition_to_json(c.condition)},
          {"episode_end", c.episode_end == EpisodeEnd::kContinuous ? "continuous" : "route_complete"},
          {"traffic",
           {{"lane_changes", c.traffic.lane_changes},
            {"lane_change_cooldown", c.traffic.lane_change_cooldown},
            {"approach_distance", c.traffic.approach_distance},
            {"conflict_margin", c.traffic.conflict_margin}}}};
}

inline EnvConfig env_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
  if (!doc.is_object() || doc.value("format", std::string{}) != kEnvFormat)
    throw ParseError("env config format must be \"" + std::string(kEnvFormat) + "\"");
  EnvConfig c;
  c.base_dir = base_dir;
  std::string where = "network";
  try {
    c.network = doc.value("network", c.network);
    where = "demand";
    if (doc.contains("demand")) {
      const auto& d = doc.at("demand");
      if (d.is_string()) {
        std::filesystem::path p = d.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        c.demand = load_demand(p);
      } else {
        c.demand = demand_from_json(d);
      }
    }
    where = "dt";
    c.dt = doc.value("dt", c.dt);
    c.max_steps = doc.value("max_steps", c.max_steps);
    c.seed = doc.value("seed", c.seed);
    where = "ego";
    if (doc.contains("ego")) {
      const auto& e = doc.at("ego");
      const std::string rule = e.value("rule", std::string{"random"});
      if (rule == "random") {
        c.ego_rule = EgoRule::kRandom;
      } else if (rule == "by_id") {
        c.ego_rule = EgoRule::kById;
        c.ego_id = e.at("id").get<int>();
      } else {
        throw ValidationError("unknown ego rule", rule);
      }
    }
    c.neighbors = doc.value("neighbors", c.neighbors);
    where = "action_bounds";
    if (doc.contains("action_bounds")) {
      c.max_a_long = doc.at("action_bounds").value("long", c.max_a_long);
      c.max_a_lat = doc.at("action_bounds").value("lat", c.max_a_lat);
    }
    where = "sensors";
    if (doc.contains("sensors")) {
      const auto& s = doc.at("sensors");
      c.sensors_enabled = s.value("enabled", c.sensors_enabled);
      c.sensor_every = s.value("every", c.sensor_every);
      c.sensors.camera_enabled = s.value("camera_enabled", c.sensors.camera_enabled);
      c.sensors.lidar_enabled = s.value("lidar_enabled", c.sensors.lidar_enabled);
      if (s.contains("camera")) c.sensors.camera = camera_from_json(s.at("camera"));
      if (s.contains("lidar")) c.sensors.lidar = lidar_from_json(s.at("lidar"));
    }
    where = "condition";
    if (doc.contains("condition")) c.condition = condition_from_json(doc.at("condition"));
    where = "episode_end";
    const std::string end = doc.value("episode_end", std::string{"continuous"});
    if (end == "continuous") {
      c.episode_end = EpisodeEnd::kContinuous;
    } else if (end == "route_complete") {
      c.episode_end = EpisodeEnd::kRouteComplete;
    } else {
      throw ValidationError("unknown episode_end", end);
    }
    where = "traffic";
    if (doc.contains("traffic")) {
      const auto& t = doc.at("traffic");
      c.traffic.lane_changes = t.value("lane_changes", c.traffic.lane_changes);
      c.traffic.lane_change_cooldown = t.value("lane_change_cooldown", c.traffic.lane_change_cooldown);
      c.traffic.approach_distance = t.value("approach_distance", c.traffic.approach_distance);
      c.traffic.conflict_margin = t.value("conflict_margin", c.traffic.conflict_margin);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("malformed env config (" + where + "): " + ex.what());
  }
  c.validate();
  return c;
}

inline EnvConfig load_env_config(const std::filesystem::path& path) {
  return env_config_from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Episode types

struct Action {
  double a_long = 0.0;
  double a_lat = 0.0;
};

struct EgoFeatures {
  int id = 0;
  double s = 0.0;
  double d = 0.0;
  double v = 0.0;
  int lane = 0;
};

struct NeighborFeatures {
  bool present = false;
  int id = -1;
  double rel_s = 0.0;
  double rel_d = 0.0;
  double v = 0.0;
  int lane = 0;
};

struct Observation {
  std::uint64_t step = 0;
  double time = 0.0;
  EgoFeatures ego;
  std::vector<NeighborFeatures> neighbors;  ///< exactly K slots, present ones first
  std::shared_ptr<const SensorFrame> frame;  ///< set on steps where sensors rendered
};

enum class Termination { kNone, kCollision, kOffRoad, kRouteComplete, kMaxSteps };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::kCollision: return "collision";
    case Termination::kOffRoad: return "off_road";
    case Termination::kRouteComplete: return "route_complete";
    case Termination::kMaxSteps: return "max_steps";
    case Termination::kNone: break;
  }
  return "";
}

struct StepResult {
  Observation observation;
  Action action;  ///< as applied, after clamping
  bool terminated = false;
  Termination reason = Termination::kNone;
  std::vector<CollisionPair> collision_pairs;
  double time = 0.0;
};

/// Flat numeric layout: ego (s, d, v, lane), then K x (rel_s, rel_d, v, lane),
/// then K presence flags. Length 4 + 5K.
inline std::vector<double> flatten(const Observation& obs) {
  std::vector<double> out{obs.ego.s, obs.ego.d, obs.ego.v, static_cast<double>(obs.ego.lane)};
  out.reserve(4 + 5 * obs.neighbors.size());
  for (const NeighborFeatures& n : obs.neighbors) {
    out.push_back(n.present ? n.rel_s : 0.0);
    out.push_back(n.present ? n.rel_d : 0.0);
    out.push_back(n.present ? n.v : 0.0);
    out.push_back(n.present ? static_cast<double>(n.lane) : 0.0);
  }
  for (const NeighborFeatures& n : obs.neighbors) out.push_back(n.present ? 1.0 : 0.0);
  return out;
}

inline nlohmann::json observation_to_json(const Observation& obs) {
  nlohmann::json nbs = nlohmann::json::array();
  for (const NeighborFeatures& n : obs.neighbors) {
    if (!n.present) {
      nbs.push_back({{"present", false}});
      continue;
    }
    nbs.push_back({{"present", true}, {"id", n.id}, {"rel_s", n.rel_s}, {"rel_d", n.rel_d},
                   {"v", n.v}, {"lane", n.lane}});
  }
  return {{"step", obs.step},
          {"time", obs.time},
          {"ego", {{"id", obs.ego.id}, {"s", obs.ego.s}, {"d", obs.ego.d}, {"v", obs.ego.v}, {"lane", obs.ego.lane}}},
          {"neighbors", nbs},
          {"frame", obs.frame ? nlohmann::json(obs.frame->frame_id) : nlohmann::json(nullptr)}};
}

/// Episode log line: {step, action, ego:{s,d,v}, terminated, reason, collision_pairs}.
inline std::string episode_record(const StepResult& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const CollisionPair& p : r.collision_pairs) pairs.push_back({p.a, p.b});
  const nlohmann::json rec = {
      {"step", r.observation.step},
      {"action", {{"a_long", r.action.a_long}, {"a_lat", r.action.a_lat}}},
      {"ego", {{"s", r.observation.ego.s}, {"d", r.observation.ego.d}, {"v", r.observation.ego.v}}},
      {"terminated", r.terminated},
      {"reason", r.terminated ? nlohmann::json(to_string(r.reason)) : nlohmann::json(nullptr)},
      {"collision_pairs", pairs}};
  return rec.dump();
}

// ---------------------------------------------------------------------------
// Environment

class Environment {
 public:
  explicit Environment(EnvConfig cfg)
      : cfg_(std::move(cfg)),
        net_(std::make_shared<const RoadNetwork>(resolve_network(cfg_.network, cfg_.base_dir))),
        conflicts_(find_conflicts(*net_)) {
    cfg_.validate();
  }

  /// Uses `net` instead of resolving cfg.network.
  Environment(EnvConfig cfg, RoadNetwork net)
      : cfg_(std::move(cfg)),
        net_(std::make_shared<const RoadNetwork>(std::move(net))),
        conflicts_(find_conflicts(*net_)) {
    cfg_.validate();
  }

  const EnvConfig& config() const { return cfg_; }
  const RoadNetwork& network() const { return *net_; }
  const std::vector<ConflictPoint>& conflicts() const { return conflicts_; }
  const TrafficState& traffic() const { return state_; }
  int ego_id() const { return ego_id_; }
  bool active() const { return reset_done_; }
  bool terminated() const { return terminated_; }

  /// Starts an episode; `seed` overrides the configured one. When the ego
  /// enters the road with a delayed departure, background traffic runs until
  /// it is on the road.
  Observation reset(std::optional<std::uint64_t> seed = std::nullopt) {
    const std::uint64_t episode_seed = seed.value_or(cfg_.seed);
    DemandConfig demand = cfg_.demand;
    demand.seed = episode_seed;
    rng::Pcg32 gen(episode_seed, rng::Stream::kDemand);
    std::vector<VehicleState> vehicles = sample_demand(demand, *net_, gen);

    int ego = cfg_.ego_id;
    if (cfg_.ego_rule == EgoRule::kRandom) {
      if (vehicles.empty()) throw ValidationError("random ego rule needs a non-empty demand");
      ego = vehicles[gen.bounded(static_cast<std::uint32_t>(vehicles.size()))].id;
    }
    return start(std::move(vehicles), ego);
  }

  /// Starts an episode from an explicit vehicle list (scripted scenarios).
  /// Every vehicle is on the road at its given pose and speed from t = 0.
  Observation reset_scenario(std::vector<VehicleState> vehicles, int ego) {
    for (VehicleState& v : vehicles) v.prepositioned = true;
    return start(std::move(vehicles), ego);
  }

 private:
  Observation start(std::vector<VehicleState> vehicles, int ego) {
    const auto it = std::find_if(vehicles.begin(), vehicles.end(), [&](const VehicleState& v) { return v.id == ego; });
    if (it == vehicles.end()) throw ValidationError("ego id not in demand", std::to_string(ego));
    for (VehicleState& v : vehicles) v.is_ego = v.id == ego;

    state_ = initial_traffic(std::move(vehicles), *net_, conflicts_, cfg_.traffic);
    constexpr int kMaxWarmup = 1000000;
    for (int i = 0; state_.find(ego) == nullptr; ++i) {
      if (i == kMaxWarmup) throw ValidationError("ego never entered the road", std::to_string(ego));
      state_ = step_traffic(std::move(state_), *net_, cfg_.dt, std::nullopt, conflicts_, cfg_.traffic);
    }
    ego_id_ = ego;
    steps_ = 0;
    terminated_ = false;
    reset_done_ = true;
    start_odometer_ = state_.find(ego)->odometer;
    obs_ = build_observation();
    return obs_;
  }

 public:
  StepResult step(const Action& action) {
    if (!reset_done_) throw ProtocolError("step called before reset");
    if (terminated_) throw ProtocolError("step called after termination");
    if (!std::isfinite(action.a_long) || !std::isfinite(action.a_lat))
      throw ValidationError("action components must be finite");
    const Action applied{std::clamp(action.a_long, -cfg_.max_a_long, cfg_.max_a_long),
                         std::clamp(action.a_lat, -cfg_.max_a_lat, cfg_.max_a_lat)};
    state_ = step_traffic(std::move(state_), *net_, cfg_.dt, EgoAction{applied.a_long, applied.a_lat},
                          conflicts_, cfg_.traffic);
    ++steps_;

    StepResult r;
    r.action = applied;
    r.collision_pairs = state_.collisions;
    r.time = state_.time;
    const VehicleState& ego = *state_.find(ego_id_);
    const Route& route = net_->route(ego.pose.route_id);
    const bool ego_hit = std::any_of(state_.collisions.begin(), state_.collisions.end(),
                                     [&](const CollisionPair& p) { return p.a == ego_id_ || p.b == ego_id_; });
    if (ego_hit) {
      r.reason = Termination::kCollision;
    } else if (std::abs(ego.pose.d) > net_->half_width(route, ego.pose.s)) {
      r.reason = Termination::kOffRoad;
    } else if (route_complete(ego, route)) {
      r.reason = Termination::kRouteComplete;
    } else if (steps_ >= cfg_.max_steps) {
      r.reason = Termination::kMaxSteps;
    }
    r.terminated = r.reason != Termination::kNone;
    terminated_ = r.terminated;
    obs_ = build_observation();
    r.observation = obs_;
    return r;
  }

  /// Latest observation; no side effects.
  const Observation& observe() const {
    if (!reset_done_) throw ProtocolError("observe called before reset");
    return obs_;
  }

  /// Default ego policy: the same car-following rule as background traffic,
  /// lane kept.
  Action idm_action() const {
    if (!reset_done_) throw ProtocolError("policy queried before reset");
    const VehicleState& ego = *state_.find(ego_id_);
    return {background_acceleration(state_, *net_, ego, conflicts_, cfg_.traffic), 0.0};
  }

 private:
  bool route_complete(const VehicleState& ego, const Route& route) const {
    if (!route.closed()) return ego.pose.s >= route.length();
    return cfg_.episode_end == EpisodeEnd::kRouteComplete && ego.odometer - start_odometer_ >= route.length();
  }

  Observation build_observation() const {
    Observation obs;
    obs.step = static_cast<std::uint64_t>(steps_);
    obs.time = state_.time;
    const VehicleState& ego = *state_.find(ego_id_);
    const Route& route = net_->route(ego.pose.route_id);
    obs.ego = {ego.id, ego.pose.s, ego.pose.d, ego.v, ego.pose.lane_index};

    std::vector<NeighborFeatures> all;
    for (const VehicleState& v : state_.vehicles) {
      if (v.id == ego_id_ || v.pose.route_id != ego.pose.route_id) continue;
      all.push_back({true, v.id, route.delta_s(ego.pose.s, v.pose.s), v.pose.d - ego.pose.d, v.v, v.pose.lane_index});
    }
    std::sort(all.begin(), all.end(), [](const NeighborFeatures& a, const NeighborFeatures& b) {
      const double da = std::abs(a.rel_s);
      const double db = std::abs(b.rel_s);
      return da < db || (da == db && a.id < b.id);
    });
    all.resize(static_cast<std::size_t>(cfg_.neighbors));
    obs.neighbors = std::move(all);

    if (cfg_.sensors_enabled && steps_ % cfg_.sensor_every == 0) {
      obs.frame = std::make_shared<const SensorFrame>(
          render_frame(state_, *net_, cfg_.sensors, ego_id_, cfg_.condition, static_cast<std::uint64_t>(steps_)));
    }
    return obs;
  }

  EnvConfig cfg_;
  std::shared_ptr<const RoadNetwork> net_;
  std::vector<ConflictPoint> conflicts_;
  TrafficState state_;
  Observation obs_;
  int ego_id_ = -1;
  int steps_ = 0;
  double start_odometer_ = 0.0;
  bool terminated_ = false;
  bool reset_done_ = false;
};

}  // namespace avsim
