#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "avsim/rng.hpp"
#include "avsim/sensor_io.hpp"
#include "avsim/sensors.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace avsim;
using namespace avsim::testing;

namespace {

OrientedBox random_box(rng::Pcg32& rng) {
  return {{rng.uniform(-20, 20), rng.uniform(-20, 20)}, rng.uniform(-3.2, 3.2), rng.uniform(1, 12),
          rng.uniform(1, 3), rng.uniform(0.5, 4)};
}

/// Reference LiDAR: every object tested against every ray.
std::vector<LidarPoint> brute_lidar(const std::vector<SceneObject>& scene, const LidarConfig& cfg,
                                    const WorldPose& pose, double h) {
  std::vector<LidarPoint> out;
  const double step = deg2rad(cfg.horizontal_step);
  for (int ch = 0; ch < cfg.channels; ++ch) {
    const double el = deg2rad(cfg.elevation(ch));
    for (int col = 0; col < cfg.columns(); ++col) {
      const double az = pose.heading + col * step;
      const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
      const Vec3 o{pose.x, pose.y, h};
      double best = std::numeric_limits<double>::infinity();
      std::optional<int> id;
      if (dir.z < 0 && h / -dir.z <= cfg.max_range) best = h / -dir.z;
      for (const auto& obj : scene) {
        const auto t = face_plane_hit(o, dir, obj.box);
        if (t && *t < best && *t <= cfg.max_range) {
          best = *t;
          id = obj.id;
        }
      }
      if (std::isfinite(best)) out.push_back({0, 0, 0, best, ch, col, id});
    }
  }
  return out;
}

SensorSuite small_suite() {
  SensorSuite s;
  s.camera.width = 160;
  s.camera.height = 120;
  s.camera.min_area = 1.0;
  s.lidar.horizontal_step = 2.0;
  return s;
}

}  // namespace

TEST(Intensity, FormulaAndExamples) {
  EXPECT_DOUBLE_EQ(point_intensity(1.0, 0.004, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(point_intensity(2.5, 0.0, 73.0), 2.5);
  EXPECT_NEAR(point_intensity(1.0, 0.004, 100.0), 0.670320046035639, 1e-12);
  EXPECT_LT(point_intensity(1.0, 0.004, 10.0), point_intensity(1.0, 0.004, 9.0));
  EXPECT_THROW(point_intensity(1.0, 0.004, -1.0), ValidationError);
  EXPECT_THROW(point_intensity(1.0, -0.1, 1.0), ValidationError);
  EXPECT_THROW(point_intensity(0.0, 0.1, 1.0), ValidationError);
}

TEST(LidarConfig, Validation) {
  LidarConfig c;
  EXPECT_EQ(c.columns(), 1000);
  EXPECT_DOUBLE_EQ(c.elevation(0), -25.0);
  EXPECT_DOUBLE_EQ(c.elevation(31), 5.0);
  c.channels = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.vertical_fov_min = 5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.horizontal_step = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.attenuation = -1;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Lidar, EmptySceneHitsGroundOnly) {
  LidarConfig cfg;
  const WorldPose pose{3.0, -4.0, 0.7};
  const auto pts = cast_lidar({}, cfg, pose, 2.0);
  ASSERT_FALSE(pts.empty());
  int expected = 0;
  for (int ch = 0; ch < cfg.channels; ++ch) {
    const double el = deg2rad(cfg.elevation(ch));
    if (el < 0 && 2.0 / std::sin(-el) <= cfg.max_range) expected += cfg.columns();
  }
  EXPECT_EQ(static_cast<int>(pts.size()), expected);
  for (const auto& p : pts) {
    EXPECT_NEAR(p.z + 2.0, 0.0, 1e-9);
    EXPECT_FALSE(p.hit_vehicle_id);
  }
}

TEST(Lidar, VehicleDeadAhead) {
  LidarConfig cfg;
  cfg.channels = 31;
  cfg.vertical_fov_min = -25;
  cfg.vertical_fov_max = 5;  // 1 degree spacing, channel 25 is horizontal
  ASSERT_DOUBLE_EQ(cfg.elevation(25), 0.0);
  const OrientedBox car{{10.0, 0.0}, 0.0, 4.6, 1.85, 1.5};
  const std::vector<SceneObject> scene{{7, car}};
  const auto pts = cast_lidar(scene, cfg, {0, 0, 0}, 1.0);
  bool found = false;
  for (const auto& p : pts) {
    if (p.channel == 25 && p.column == 0) {
      found = true;
      const double d = std::hypot(p.x, p.y, p.z);
      EXPECT_GE(d, 10.0 - 2.3 - 1e-9);
      EXPECT_LE(d, 10.0);
      EXPECT_NEAR(d, 7.7, 1e-9);
      ASSERT_TRUE(p.hit_vehicle_id);
      EXPECT_EQ(*p.hit_vehicle_id, 7);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Lidar, OrderingBoundsAndIntensity) {
  rng::Pcg32 rng(11U, std::uint64_t{1});
  LidarConfig cfg;
  cfg.horizontal_step = 1.0;
  std::vector<SceneObject> scene;
  for (int i = 0; i < 12; ++i) scene.push_back({i, random_box(rng)});
  const auto pts = cast_lidar(scene, cfg, {0.5, 0.5, 0.3}, 2.0);
  EXPECT_LE(pts.size(), static_cast<std::size_t>(cfg.channels * cfg.columns()));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const bool ordered = pts[i - 1].channel < pts[i].channel ||
                         (pts[i - 1].channel == pts[i].channel && pts[i - 1].column < pts[i].column);
    EXPECT_TRUE(ordered);
  }
  for (const auto& p : pts) {
    const double d = std::hypot(p.x, p.y, p.z);
    EXPECT_LE(d, cfg.max_range + 1e-9);
    EXPECT_NEAR(p.intensity, std::exp(-cfg.attenuation * d), 1e-12);
  }
  const auto again = cast_lidar(scene, cfg, {0.5, 0.5, 0.3}, 2.0);
  ASSERT_EQ(again.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(again[i].x, pts[i].x);
}

TEST(Lidar, MatchesBruteForceAndLiesOnSurfaces) {
  rng::Pcg32 rng(5U, std::uint64_t{3});
  LidarConfig cfg;
  cfg.horizontal_step = 1.5;
  cfg.max_range = 40;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<SceneObject> scene;
    for (int i = 0; i < 10; ++i) scene.push_back({i, random_box(rng)});
    const WorldPose pose{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3)};
    // Sensor must not start inside a box.
    bool inside = false;
    for (const auto& o : scene) {
      const Vec3 l = o.box.to_local({pose.x, pose.y, 2.0});
      inside |= std::abs(l.x) <= o.box.length / 2 && std::abs(l.y) <= o.box.width / 2 && l.z <= o.box.height;
    }
    if (inside) continue;
    const auto pts = cast_lidar(scene, cfg, pose, 2.0);
    const auto ref = brute_lidar(scene, cfg, pose, 2.0);
    ASSERT_EQ(pts.size(), ref.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_EQ(pts[i].channel, ref[i].channel);
      EXPECT_EQ(pts[i].column, ref[i].column);
      EXPECT_EQ(pts[i].hit_vehicle_id, ref[i].hit_vehicle_id);
      EXPECT_NEAR(std::hypot(pts[i].x, pts[i].y, pts[i].z), ref[i].intensity, 1e-6);
      const double c = std::cos(pose.heading), s = std::sin(pose.heading);
      const Vec3 world{pose.x + c * pts[i].x - s * pts[i].y, pose.y + s * pts[i].x + c * pts[i].y,
                       pts[i].z + 2.0};
      if (pts[i].hit_vehicle_id) {
        EXPECT_LT(surface_residual(world, scene[*pts[i].hit_vehicle_id].box), 1e-6);
      } else {
        EXPECT_NEAR(world.z, 0.0, 1e-6);
      }
    }
  }
}

TEST(RayBox, SlabMatchesFacePlaneOracle) {
  rng::Pcg32 rng(99U, std::uint64_t{2});
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const OrientedBox box = random_box(rng);
    const Vec3 o{rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(0, 6)};
    const Vec3 l = box.to_local(o);
    if (std::abs(l.x) <= box.length / 2 && std::abs(l.y) <= box.width / 2 && l.z <= box.height) continue;
    const Vec3 target{box.center.x + rng.uniform(-6, 6), box.center.y + rng.uniform(-6, 6), rng.uniform(-1, 5)};
    const Vec3 d = target - o;
    const Vec3 dir = (1.0 / norm(d)) * d;
    const auto a = intersect_box({o, dir}, box, 1e9);
    const auto b = face_plane_hit(o, dir, box);
    ASSERT_EQ(a.has_value(), b.has_value()) << i;
    if (a) {
      ++hits;
      EXPECT_NEAR(*a, *b, 1e-6);
    }
  }
  EXPECT_GT(hits, 1000);
}

TEST(Camera, FocalAndValidation) {
  CameraConfig cam;
  EXPECT_NEAR(cam.focal(), 400.0, 1e-9);
  cam.horizontal_fov = 180;
  EXPECT_THROW(cam.validate(), ValidationError);
  cam = {};
  cam.width = 0;
  EXPECT_THROW(cam.validate(), ValidationError);
}

TEST(Camera, ProjectDeadAhead) {
  CameraConfig cam;
  const CameraPose pose{{0, 0, 1.5}, 0.0};
  // Rear face 20 m in front of the camera.
  const OrientedBox target{{20.0 + 2.3, 0.0}, 0.0, 4.6, 2.0, 1.5};
  const auto box = project_bbox(cam, pose, target);
  ASSERT_TRUE(box);
  EXPECT_NEAR(box->x_min, 380.0, 1e-9);
  EXPECT_NEAR(box->x_max, 420.0, 1e-9);
  EXPECT_NEAR(0.5 * (box->x_min + box->x_max), 400.0, 1e-9);
  // Top edge at camera height projects onto the horizon row; bottom at 300 + f*1.5/20.
  EXPECT_NEAR(box->y_min, 300.0, 1e-9);
  EXPECT_NEAR(box->y_max, 330.0, 1e-9);
}

TEST(Camera, BehindAndSymmetryAndClipping) {
  CameraConfig cam;
  const CameraPose pose{{0, 0, 1.5}, 0.3};
  const Vec2 fwd{std::cos(0.3), std::sin(0.3)};
  EXPECT_FALSE(project_bbox(cam, pose, {-20.0 * fwd, 0.3, 4.6, 1.85, 1.5}));
  const auto sym = project_bbox(cam, pose, {35.0 * fwd, 0.3, 4.6, 1.85, 1.5});
  ASSERT_TRUE(sym);
  EXPECT_NEAR(sym->x_min + sym->x_max, 800.0, 1.0);
  // Straddling the camera: clipped to the image and still reported.
  const auto near = project_bbox(cam, pose, {1.0 * fwd, 0.3, 4.6, 1.85, 1.5});
  ASSERT_TRUE(near);
  EXPECT_GE(near->x_min, 0.0);
  EXPECT_LE(near->x_max, 800.0);
  EXPECT_LE(near->y_max, 600.0);
  // Far away: below the area threshold.
  EXPECT_FALSE(project_bbox(cam, pose, {3000.0 * fwd, 0.3, 4.6, 1.85, 1.5}));
}

TEST(RenderFrame, EgoOnly) {
  const auto net = straight_road(200, 3);
  auto ego = make_vehicle(0, "r", 20, 0, 10);
  ego.is_ego = true;
  const auto state = make_state({ego}, net);
  const auto frame = render_frame(state, net, small_suite(), 0, SceneryCondition::morning(), 4);
  EXPECT_EQ(frame.frame_id, 4u);
  EXPECT_TRUE(frame.gt_boxes.empty());
  for (const int id : frame.instance) EXPECT_EQ(id, -1);
  for (const auto& p : frame.points) EXPECT_FALSE(p.hit_vehicle_id);
  EXPECT_THROW(render_frame(state, net, small_suite(), 9, SceneryCondition::morning(), 0), ValidationError);
}

TEST(RenderFrame, OneVehicleAheadIsConsistent) {
  const auto net = straight_road(200, 3);
  auto ego = make_vehicle(0, "r", 20, 0, 10);
  ego.is_ego = true;
  const auto state = make_state({ego, make_vehicle(1, "r", 40, 0, 10)}, net);
  const auto frame = render_frame(state, net, small_suite(), 0, SceneryCondition::morning(), 0);
  ASSERT_EQ(frame.gt_boxes.size(), 1u);
  const auto& gt = frame.gt_boxes[0];
  EXPECT_EQ(gt.vehicle_id, 1);
  EXPECT_NEAR(gt.distance, 40 - 22.3, 1e-9);
  int count = 0;
  for (int v = 0; v < frame.height; ++v)
    for (int u = 0; u < frame.width; ++u)
      if (frame.instance[v * frame.width + u] == 1) {
        ++count;
        EXPECT_TRUE(gt.box.contains(u + 0.5, v + 0.5, 1e-9));
      }
  EXPECT_EQ(count, gt.visible_pixels);
  EXPECT_GT(count, 0);
}

TEST(RenderFrame, OccludedVehicleIsDropped) {
  const auto net = straight_road(200, 3);
  auto ego = make_vehicle(0, "r", 20, 0, 10);
  ego.is_ego = true;
  auto truck = make_vehicle(1, "r", 37.5, 0, 10);
  truck.length = 10;
  truck.width = 2.5;
  truck.height = 4;
  const auto state = make_state({ego, truck, make_vehicle(2, "r", 52.3, 0, 10)}, net);
  const auto frame = render_frame(state, net, small_suite(), 0, SceneryCondition::morning(), 0);
  ASSERT_EQ(frame.gt_boxes.size(), 1u);
  EXPECT_EQ(frame.gt_boxes[0].vehicle_id, 1);
  // Without the truck the car is visible.
  const auto alone = make_state({ego, make_vehicle(2, "r", 52.3, 0, 10)}, net);
  const auto f2 = render_frame(alone, net, small_suite(), 0, SceneryCondition::morning(), 0);
  ASSERT_EQ(f2.gt_boxes.size(), 1u);
  EXPECT_EQ(f2.gt_boxes[0].vehicle_id, 2);
}

TEST(RenderFrame, RastersMatchPerPixelOracle) {
  const auto net = straight_road(300, 3);
  rng::Pcg32 rng(8U, std::uint64_t{8});
  std::vector<VehicleState> vs;
  auto ego = make_vehicle(0, "r", 30, 0, 10);
  ego.is_ego = true;
  vs.push_back(ego);
  for (int i = 1; i <= 10; ++i)
    vs.push_back(make_vehicle(i, "r", 36 + 8.0 * i + rng.uniform(0, 2), 3.5 * (i % 3 - 1), 10));
  const auto state = make_state(vs, net);
  const SensorSuite suite = small_suite();
  const auto frame = render_frame(state, net, suite, 0, SceneryCondition::morning(), 0);
  const auto scene = build_scene(state, net, 0);
  const auto pose = camera_pose(suite.camera, frenet_to_world(net, state.vehicles[0].pose), 4.6);
  const double f = suite.camera.focal();
  std::set<int> visible;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const double xc = (u + 0.5 - 80) / f, yc = (v + 0.5 - 60) / f;
      Vec3 d{1.0, -xc, -yc};
      d = (1.0 / norm(d)) * d;
      double best = std::numeric_limits<double>::infinity();
      int id = -1;
      for (const auto& o : scene) {
        const auto t = face_plane_hit(pose.position, d, o.box);
        if (t && *t < best) {
          best = *t;
          id = o.id;
        }
      }
      const std::size_t idx = static_cast<std::size_t>(v) * frame.width + u;
      ASSERT_EQ(frame.instance[idx], id) << u << "," << v;
      if (id >= 0) {
        visible.insert(id);
        EXPECT_NEAR(frame.depth[idx], best, 1e-6);
      } else if (d.z < 0) {
        const double g = 1.5 / -d.z;
        EXPECT_NEAR(frame.depth[idx], g <= suite.camera.max_depth ? g : 0.0, 1e-9);
      }
    }
  }
  std::set<int> reported;
  for (const auto& b : frame.gt_boxes) reported.insert(b.vehicle_id);
  for (const int id : reported) EXPECT_TRUE(visible.count(id));
  EXPECT_FALSE(reported.empty());
}

TEST(SensorIo, PointCloudRoundTrip) {
  std::vector<LidarPoint> pts{{1.5, -2.25, 0.125, 0.9, 0, 0, {}}, {100.0, 3.0, -2.0, 0.67032, 3, 7, 4}};
  const auto bytes = encode_point_cloud(pts);
  EXPECT_EQ(bytes.size(), 12u + 32u);
  EXPECT_EQ(bytes.substr(0, 4), "AVPC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  const auto back = decode_point_cloud(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0][1], -2.25f);
  EXPECT_EQ(back[1][3], static_cast<float>(0.67032));
  EXPECT_THROW(decode_point_cloud("AVPX"), ParseError);
  EXPECT_THROW(decode_point_cloud(bytes.substr(0, 20)), ParseError);
}

TEST(SensorIo, GroundTruthRoundTrip) {
  SensorFrame f;
  f.frame_id = 12;
  f.time = 1.2;
  f.gt_boxes = {{3, {1.5, 2, 30, 40.25}, 17.5, 9}};
  const std::string line = gt_record(f);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  const auto rec = parse_gt_record(line);
  EXPECT_EQ(rec.frame_id, 12u);
  ASSERT_EQ(rec.boxes.size(), 1u);
  EXPECT_EQ(rec.boxes[0].box, f.gt_boxes[0].box);
  EXPECT_EQ(rec.boxes[0].vehicle_id, 3);
  EXPECT_DOUBLE_EQ(rec.boxes[0].distance, 17.5);
  EXPECT_THROW(parse_gt_record("{\"frame_id\":1}"), ParseError);
  EXPECT_THROW(parse_gt_record("{\"frame_id\":1,\"boxes\":[{\"x_min\":5,\"y_min\":0,\"x_max\":1,\"y_max\":1}]}"),
               ValidationError);
}

TEST(SensorIo, PgmRasters) {
  SensorFrame f;
  f.width = 2;
  f.height = 1;
  f.depth = {12.345, 1000.0};
  f.instance = {-1, 6};
  const auto depth = encode_depth_pgm(f);
  const std::string header = "P5\n2 1\n65535\n";
  ASSERT_EQ(depth.substr(0, header.size()), header);
  auto sample = [&](const std::string& s, int i) {
    return (static_cast<unsigned char>(s[header.size() + 2 * i]) << 8) |
           static_cast<unsigned char>(s[header.size() + 2 * i + 1]);
  };
  EXPECT_EQ(sample(depth, 0), 1235);
  EXPECT_EQ(sample(depth, 1), 65535);
  const auto inst = encode_instance_pgm(f);
  EXPECT_EQ(sample(inst, 0), 0);
  EXPECT_EQ(sample(inst, 1), 7);
}
