#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "avsim/env.hpp"
#include "avsim/sensor_io.hpp"
#include "test_support.hpp"

using namespace avsim;
using namespace avsim::testing;

namespace {

EnvConfig quiet_config() {
  EnvConfig cfg;
  cfg.sensors_enabled = false;
  cfg.ego_rule = EgoRule::kById;
  cfg.ego_id = 0;
  return cfg;
}

EnvConfig highway_config(int count, bool sensors = false) {
  EnvConfig cfg;
  cfg.network = "highway";
  cfg.demand.routes.push_back({"loop", count, 2.0, Placement::kSpread, default_distributions()});
  cfg.sensors_enabled = sensors;
  cfg.sensors.camera.width = 200;
  cfg.sensors.camera.height = 150;
  cfg.sensors.lidar.horizontal_step = 3.0;
  cfg.seed = 7;
  return cfg;
}

VehicleState ego_at(double s, double d, double v) {
  auto e = make_vehicle(0, "r", s, d, v);
  e.is_ego = true;
  return e;
}

}  // namespace

TEST(Env, ResetIsDeterministic) {
  Environment a(highway_config(50));
  Environment b(highway_config(50));
  const auto oa = a.reset();
  const auto ob = b.reset();
  EXPECT_EQ(a.ego_id(), b.ego_id());
  EXPECT_EQ(flatten(oa), flatten(ob));
  Environment c(highway_config(50));
  c.reset(8);
  // A different seed draws a different scenario (different sampled speeds).
  EXPECT_NE(flatten(c.observe()), flatten(oa));
}

TEST(Env, ResetErrors) {
  auto cfg = highway_config(5);
  cfg.ego_rule = EgoRule::kById;
  cfg.ego_id = 99;
  Environment env(cfg);
  EXPECT_THROW(env.reset(), ValidationError);
  Environment empty(highway_config(0));
  EXPECT_THROW(empty.reset(), ValidationError);
  Environment fresh(highway_config(5));
  EXPECT_THROW(fresh.step({}), ProtocolError);
  EXPECT_THROW(fresh.observe(), ProtocolError);
}

TEST(Env, TwoHundredVehiclesFillNeighborSlotsNearestFirst) {
  Environment env(highway_config(200));
  const auto obs = env.reset();
  ASSERT_EQ(obs.neighbors.size(), 8u);
  for (std::size_t i = 0; i < obs.neighbors.size(); ++i) {
    EXPECT_TRUE(obs.neighbors[i].present);
    if (i > 0) EXPECT_LE(std::abs(obs.neighbors[i - 1].rel_s), std::abs(obs.neighbors[i].rel_s));
  }
  EXPECT_EQ(flatten(obs).size(), 44u);
}

TEST(Env, ZeroActionCoasts) {
  Environment env(quiet_config(), straight_road(1000, 3));
  env.reset_scenario({ego_at(50, 0.4, 12)}, 0);
  for (int i = 0; i < 50; ++i) {
    const auto r = env.step({0, 0});
    EXPECT_FALSE(r.terminated);
    EXPECT_DOUBLE_EQ(r.observation.ego.d, 0.4);
    EXPECT_DOUBLE_EQ(r.observation.ego.v, 12.0);
  }
}

TEST(Env, ConstantAccelerationFromRest) {
  Environment env(quiet_config(), straight_road(2000, 3));
  env.reset_scenario({ego_at(50, 0, 0)}, 0);
  for (int n = 1; n <= 100; ++n) {
    const auto r = env.step({2.0, 0});
    EXPECT_NEAR(r.observation.ego.v, n * 0.1 * 2.0, 1e-9);
  }
}

TEST(Env, ActionsAreClampedAndValidated) {
  Environment env(quiet_config(), straight_road(1000, 3));
  env.reset_scenario({ego_at(50, 0, 10)}, 0);
  const auto r = env.step({100, -100});
  EXPECT_DOUBLE_EQ(r.action.a_long, 5.0);
  EXPECT_DOUBLE_EQ(r.action.a_lat, -3.0);
  EXPECT_THROW(env.step({std::nan(""), 0}), ValidationError);
}

TEST(Env, OffRoadTerminates) {
  Environment env(quiet_config(), straight_road(1000, 3));
  env.reset_scenario({ego_at(50, 0, 10)}, 0);
  StepResult r;
  int steps = 0;
  do {
    r = env.step({0, 3});
    ++steps;
  } while (!r.terminated && steps < 100);
  EXPECT_EQ(r.reason, Termination::kOffRoad);
  EXPECT_GT(std::abs(r.observation.ego.d), 5.25);
  // Previous step was still on the road: d grows by 0.1*lat_speed, lat_speed by 0.3.
  EXPECT_THROW(env.step({}), ProtocolError);
  EXPECT_TRUE(env.terminated());
}

TEST(Env, CollisionOnFirstOverlappingStep) {
  Environment env(quiet_config(), straight_road(1000, 3));
  auto lead = make_vehicle(1, "r", 80, 0, 0);
  lead.params.v0 = 0.1;  // barely moves
  env.reset_scenario({ego_at(50, 0, 10), lead}, 0);
  bool done = false;
  for (int i = 0; i < 200 && !done; ++i) {
    const auto r = env.step({3, 0});
    const auto& st = env.traffic();
    const auto* e = st.find(0);
    const auto* l = st.find(1);
    // Axis-aligned road: boxes overlap iff both center distances are under the half sums.
    const bool overlap = std::abs(e->pose.s - l->pose.s) < 0.5 * (e->length + l->length) &&
                         std::abs(e->pose.d - l->pose.d) < 0.5 * (e->width + l->width);
    EXPECT_EQ(r.terminated, overlap) << i;
    if (r.terminated) {
      EXPECT_EQ(r.reason, Termination::kCollision);
      ASSERT_EQ(r.collision_pairs.size(), 1u);
      EXPECT_EQ(r.collision_pairs[0], (CollisionPair{0, 1}));
    }
    done = r.terminated;
  }
  EXPECT_TRUE(done);
}

TEST(Env, MaxStepsAndRouteComplete) {
  auto cfg = quiet_config();
  cfg.max_steps = 5;
  Environment env(cfg, straight_road(1000, 3));
  env.reset_scenario({ego_at(50, 0, 10)}, 0);
  for (int i = 0; i < 4; ++i) EXPECT_FALSE(env.step({}).terminated);
  EXPECT_EQ(env.step({}).reason, Termination::kMaxSteps);

  cfg.max_steps = 1000;
  Environment open(cfg, straight_road(100, 3));
  open.reset_scenario({ego_at(90, 0, 20)}, 0);
  StepResult r;
  for (int i = 0; i < 10 && !r.terminated; ++i) r = open.step({});
  EXPECT_EQ(r.reason, Termination::kRouteComplete);

  cfg.episode_end = EpisodeEnd::kRouteComplete;
  Environment loop(cfg, ring_road(30, 64, 2));
  auto e = make_vehicle(0, "ring", 0, 1.75, 20);
  loop.reset_scenario({e}, 0);
  const double len = loop.network().route("ring").length();
  int n = 0;
  do {
    r = loop.step({});
    ++n;
  } while (!r.terminated);
  EXPECT_EQ(r.reason, Termination::kRouteComplete);
  EXPECT_EQ(n, static_cast<int>(std::ceil(len / 2.0 - 1e-9)));
}

TEST(Env, NeighborFeatures) {
  Environment env(quiet_config(), straight_road(500, 3));
  auto obs = env.reset_scenario({ego_at(100, 0, 10), make_vehicle(1, "r", 115, 0, 8)}, 0);
  ASSERT_TRUE(obs.neighbors[0].present);
  EXPECT_DOUBLE_EQ(obs.neighbors[0].rel_s, 15.0);
  EXPECT_DOUBLE_EQ(obs.neighbors[0].rel_d, 0.0);
  EXPECT_DOUBLE_EQ(obs.neighbors[0].v, 8.0);
  EXPECT_EQ(obs.neighbors[0].lane, 1);
  for (std::size_t i = 1; i < obs.neighbors.size(); ++i) EXPECT_FALSE(obs.neighbors[i].present);

  obs = env.reset_scenario({ego_at(100, 0, 10), make_vehicle(1, "r", 110, 3.5, 8), make_vehicle(2, "r", 95, -3.5, 8)}, 0);
  EXPECT_EQ(obs.neighbors[0].id, 2);
  EXPECT_DOUBLE_EQ(obs.neighbors[0].rel_s, -5.0);
  EXPECT_DOUBLE_EQ(obs.neighbors[0].rel_d, -3.5);
  EXPECT_EQ(obs.neighbors[1].id, 1);

  obs = env.reset_scenario({ego_at(100, 0, 10)}, 0);
  EXPECT_EQ(obs.neighbors.size(), 8u);
  for (const auto& n : obs.neighbors) EXPECT_FALSE(n.present);
  const auto flat = flatten(obs);
  ASSERT_EQ(flat.size(), 44u);
  for (std::size_t i = 4; i < flat.size(); ++i) EXPECT_EQ(flat[i], 0.0);
}

TEST(Env, ObserveHasNoSideEffects) {
  Environment env(highway_config(30));
  env.reset();
  env.step(env.idm_action());
  std::ostringstream before, after;
  append_trajectory(before, env.traffic());
  const auto o1 = flatten(env.observe());
  const auto o2 = flatten(env.observe());
  append_trajectory(after, env.traffic());
  EXPECT_EQ(o1, o2);
  EXPECT_EQ(before.str(), after.str());
}

TEST(Env, FullEpisodeIsByteDeterministic) {
  auto run = [] {
    auto cfg = highway_config(40, true);
    cfg.sensor_every = 3;
    Environment env(cfg);
    std::string out;
    env.reset();
    for (int i = 0; i < 30; ++i) {
      const auto r = env.step(env.idm_action());
      out += episode_record(r) + "\n";
      if (r.observation.frame) {
        out += gt_record(*r.observation.frame) + "\n";
        out += encode_point_cloud(r.observation.frame->points);
      }
      if (r.terminated) break;
    }
    return out;
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("AVPC"), std::string::npos);
}

TEST(Env, SensorCadence) {
  auto cfg = highway_config(20, true);
  cfg.sensor_every = 4;
  Environment env(cfg);
  EXPECT_TRUE(env.reset().frame);
  for (int i = 1; i <= 8; ++i) {
    const auto r = env.step(env.idm_action());
    EXPECT_EQ(static_cast<bool>(r.observation.frame), i % 4 == 0);
    if (r.observation.frame) EXPECT_EQ(r.observation.frame->frame_id, static_cast<std::uint64_t>(i));
  }
}

TEST(Env, EpisodeRecordLayout) {
  StepResult r;
  r.observation.step = 3;
  r.observation.ego = {0, 12.5, -0.25, 7.0, 1};
  r.action = {1.5, 0.0};
  r.terminated = true;
  r.reason = Termination::kCollision;
  r.collision_pairs = {{0, 4}};
  const auto j = nlohmann::json::parse(episode_record(r));
  EXPECT_EQ(j.at("step"), 3);
  EXPECT_EQ(j.at("action").at("a_long"), 1.5);
  EXPECT_EQ(j.at("ego").at("s"), 12.5);
  EXPECT_EQ(j.at("reason"), "collision");
  EXPECT_EQ(j.at("collision_pairs")[0][1], 4);
  r.terminated = false;
  r.reason = Termination::kNone;
  EXPECT_TRUE(nlohmann::json::parse(episode_record(r)).at("reason").is_null());
}

TEST(EnvConfig, JsonRoundTripAndErrors) {
  auto cfg = highway_config(12, true);
  cfg.ego_rule = EgoRule::kById;
  cfg.ego_id = 3;
  cfg.condition = SceneryCondition::night();
  cfg.episode_end = EpisodeEnd::kRouteComplete;
  const auto j = env_config_to_json(cfg);
  const auto back = env_config_from_json(j);
  EXPECT_EQ(env_config_to_json(back), j);
  EXPECT_EQ(back.ego_id, 3);
  EXPECT_EQ(back.condition.lighting, Lighting::kNight);

  auto bad = j;
  bad["format"] = "avsim-env/2";
  EXPECT_THROW(env_config_from_json(bad), ParseError);
  bad = j;
  bad["dt"] = 0.0;
  EXPECT_THROW(env_config_from_json(bad), ValidationError);
  bad = j;
  bad["max_steps"] = 0;
  EXPECT_THROW(env_config_from_json(bad), ValidationError);
  bad = j;
  bad["ego"] = {{"rule", "oldest"}};
  EXPECT_THROW(env_config_from_json(bad), ValidationError);
  bad = j;
  bad["condition"] = "dusk";
  EXPECT_THROW(env_config_from_json(bad), ValidationError);
}

TEST(EnvConfig, DemandByPathAndShippedConfigs) {
  const auto dir = temp_dir("envcfg");
  DemandConfig d;
  d.routes.push_back({"loop", 4, 2.0, Placement::kSpread, default_distributions()});
  {
    std::ofstream(dir / "demand.json") << demand_to_json(d).dump();
  }
  const nlohmann::json doc = {{"format", "avsim-env/1"}, {"network", "highway"}, {"demand", "demand.json"}};
  const auto cfg = env_config_from_json(doc, dir);
  ASSERT_EQ(cfg.demand.routes.size(), 1u);
  EXPECT_EQ(cfg.demand.routes[0].count, 4);
  for (const char* name : {"highway.json", "highway_200.json", "urban.json"}) {
    const auto path = std::filesystem::path(AVSIM_DATA_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_env_config(path)) << name;
  }
}
