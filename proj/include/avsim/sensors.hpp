#pragma once

// Geometric sensors for the ego vehicle: a rotating ray-cast LiDAR with
// exponential intensity attenuation and a pinhole camera producing depth and
// instance rasters plus occlusion-aware ground-truth boxes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avsim/error.hpp"
#include "avsim/geometry.hpp"
#include "avsim/road_network.hpp"
#include "avsim/traffic.hpp"

namespace avsim {

struct LidarConfig {
  int channels = 32;
  double vertical_fov_min = -25.0;  ///< degrees
  double vertical_fov_max = 5.0;    ///< degrees
  double horizontal_step = 0.36;    ///< degrees per column
  double rotation_rate = 10.0;      ///< Hz
  double max_range = 100.0;         ///< m
  double emitted_intensity = 1.0;   ///< I0
  double attenuation = 0.004;       ///< a, 1/m
  double mount_height = 2.0;        ///< sensor height above ground, m

  void validate() const {
    if (channels < 1) throw ValidationError("lidar needs at least one channel");
    if (!(vertical_fov_min < vertical_fov_max)) throw ValidationError("lidar vertical fov must have min < max");
    if (!(horizontal_step > 0.0 && horizontal_step <= 360.0))
      throw ValidationError("lidar horizontal step must be in (0, 360]");
    if (!(max_range > 0.0)) throw ValidationError("lidar range must be positive");
    if (!(attenuation >= 0.0)) throw ValidationError("lidar attenuation must be non-negative");
    if (!(emitted_intensity > 0.0)) throw ValidationError("lidar intensity must be positive");
    if (!(rotation_rate > 0.0)) throw ValidationError("lidar rotation rate must be positive");
  }

  int columns() const { return static_cast<int>(std::ceil(360.0 / horizontal_step - 1e-9)); }

  /// Channel elevation in degrees; channels are evenly spaced over the fov, ends included.
  double elevation(int channel) const {
    if (channels == 1) return 0.5 * (vertical_fov_min + vertical_fov_max);
    return vertical_fov_min + (vertical_fov_max - vertical_fov_min) * channel / (channels - 1);
  }
};

struct LidarPoint {
  double x = 0.0;  ///< sensor frame: forward
  double y = 0.0;  ///< left
  double z = 0.0;  ///< up
  double intensity = 0.0;
  int channel = 0;
  int column = 0;
  std::optional<int> hit_vehicle_id;
};

struct CameraConfig {
  int width = 800;
  int height = 600;
  double horizontal_fov = 90.0;  ///< degrees
  /// Mount offset along the ego heading from the body center; front bumper when unset.
  std::optional<double> mount_forward;
  double mount_lateral = 0.0;
  double mount_height = 1.5;
  double min_area = 25.0;   ///< px^2; smaller ground-truth boxes are dropped
  double max_depth = 200.0; ///< ground beyond this depth is left empty in the raster

  void validate() const {
    if (width < 1 || height < 1) throw ValidationError("camera image must be at least 1x1");
    if (!(horizontal_fov > 0.0 && horizontal_fov < 180.0))
      throw ValidationError("camera fov must be in (0, 180)");
  }

  double focal() const { return 0.5 * width / std::tan(0.5 * deg2rad(horizontal_fov)); }
};

/// Image-space axis-aligned box, origin at the top-left corner.
struct BBox2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double area() const { return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  bool contains(double x, double y, double tol = 0.0) const {
    return x >= x_min - tol && x <= x_max + tol && y >= y_min - tol && y <= y_max + tol;
  }
  friend bool operator==(const BBox2D&, const BBox2D&) = default;
};

enum class Lighting { kMorning, kNight };

inline std::string to_string(Lighting l) { return l == Lighting::kMorning ? "morning" : "night"; }

inline Lighting lighting_from_string(const std::string& s) {
  if (s == "morning") return Lighting::kMorning;
  if (s == "night") return Lighting::kNight;
  throw ValidationError("unknown lighting condition", s);
}

/// Lighting tag plus the degradation it induces in the synthetic detector:
/// miss probability clamp(miss_base + miss_per_100m * d / 100, 0, 1), Gaussian
/// corner jitter, and a Poisson rate of spurious boxes per frame.
struct SceneryCondition {
  Lighting lighting = Lighting::kMorning;
  double miss_base = 0.05;
  double miss_per_100m = 0.25;
  double jitter_sigma = 2.0;  ///< px
  double false_positive_rate = 0.1;

  static SceneryCondition morning() { return {Lighting::kMorning, 0.05, 0.25, 2.0, 0.1}; }
  static SceneryCondition night() { return {Lighting::kNight, 0.25, 0.55, 5.0, 0.15}; }
  /// No degradation at all.
  static SceneryCondition ideal(Lighting l = Lighting::kMorning) { return {l, 0.0, 0.0, 0.0, 0.0}; }

  static SceneryCondition preset(Lighting l) { return l == Lighting::kMorning ? morning() : night(); }

  double miss_probability(double distance) const {
    return std::clamp(miss_base + miss_per_100m * distance / 100.0, 0.0, 1.0);
  }

  void validate() const {
    if (!(miss_base >= 0.0 && miss_base <= 1.0)) throw ValidationError("miss rate must be in [0, 1]");
    if (!(false_positive_rate >= 0.0)) throw ValidationError("false-positive rate must be non-negative");
    if (!(jitter_sigma >= 0.0)) throw ValidationError("jitter sigma must be non-negative");
  }
};

struct GroundTruthBox {
  int vehicle_id = 0;
  BBox2D box;
  double distance = 0.0;  ///< camera to vehicle center, horizontal, m
  int visible_pixels = 0;
};

struct SensorFrame {
  std::uint64_t frame_id = 0;
  double time = 0.0;
  Lighting lighting = Lighting::kMorning;
  std::vector<LidarPoint> points;
  int width = 0;
  int height = 0;
  std::vector<double> depth;    ///< m along the pixel ray; 0 where nothing was hit
  std::vector<int> instance;    ///< vehicle id, -1 for background
  std::vector<GroundTruthBox> gt_boxes;  ///< ascending vehicle id
};

struct SceneObject {
  int id = 0;
  OrientedBox box;
};

/// World boxes for every active vehicle except `exclude_id`.
inline std::vector<SceneObject> build_scene(const TrafficState& state, const RoadNetwork& net,
                                            std::optional<int> exclude_id = std::nullopt) {
  std::vector<SceneObject> out;
  out.reserve(state.vehicles.size());
  for (const VehicleState& v : state.vehicles) {
    if (exclude_id && v.id == *exclude_id) continue;
    out.push_back({v.id, vehicle_box(net, v)});
  }
  return out;
}

/// Received LiDAR intensity I0 * exp(-a d).
inline double point_intensity(double emitted, double attenuation, double distance) {
  if (!(distance >= 0.0) || !(attenuation >= 0.0) || !(emitted > 0.0))
    throw ValidationError("intensity needs d >= 0, a >= 0 and I0 > 0");
  return emitted * std::exp(-attenuation * distance);
}

// ---------------------------------------------------------------------------
// LiDAR

/// One full revolution: channels x columns rays, each intersected with the
/// ground plane z = 0 and every vehicle box; the nearest hit within range
/// becomes a point. Output is channel-major, then ascending column.
inline std::vector<LidarPoint> cast_lidar(std::span<const SceneObject> scene, const LidarConfig& cfg,
                                          const WorldPose& sensor, double sensor_height) {
  cfg.validate();
  const int columns = cfg.columns();
  const double step = deg2rad(cfg.horizontal_step);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  // Broad phase: columns whose azimuth can meet each object's bounding circle.
  std::vector<std::vector<std::size_t>> candidates(static_cast<std::size_t>(columns));
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const OrientedBox& box = scene[i].box;
    const Vec2 rel = box.center - Vec2{sensor.x, sensor.y};
    const double dist = norm(rel);
    const double radius = box.bounding_radius();
    if (dist - radius > cfg.max_range) continue;
    if (dist <= radius + 1e-9) {
      for (auto& c : candidates) c.push_back(i);
      continue;
    }
    const double half = std::asin(radius / dist);
    double center = std::atan2(rel.y, rel.x) - sensor.heading;
    center = std::fmod(center, two_pi);
    if (center < 0.0) center += two_pi;
    const auto first = static_cast<long>(std::floor((center - half) / step)) - 1;
    const auto last = static_cast<long>(std::ceil((center + half) / step)) + 1;
    const long span_cols = std::min<long>(last - first + 1, columns);
    for (long k = 0; k < span_cols; ++k) {
      long col = (first + k) % columns;
      if (col < 0) col += columns;
      candidates[static_cast<std::size_t>(col)].push_back(i);
    }
  }

  std::vector<LidarPoint> points;
  const double ch = std::cos(sensor.heading);
  const double sh = std::sin(sensor.heading);
  const Vec3 origin{sensor.x, sensor.y, sensor_height};
  for (int channel = 0; channel < cfg.channels; ++channel) {
    const double el = deg2rad(cfg.elevation(channel));
    const double cos_el = std::cos(el);
    const double sin_el = std::sin(el);
    for (int col = 0; col < columns; ++col) {
      const double az = col * step;
      const Vec3 local{cos_el * std::cos(az), cos_el * std::sin(az), sin_el};
      const Ray ray{origin, {ch * local.x - sh * local.y, sh * local.x + ch * local.y, local.z}};
      double best = std::numeric_limits<double>::infinity();
      std::optional<int> hit_id;
      if (ray.dir.z < 0.0) {
        const double t = sensor_height / -ray.dir.z;
        if (t <= cfg.max_range) best = t;
      }
      for (const std::size_t i : candidates[static_cast<std::size_t>(col)]) {
        const auto t = intersect_box(ray, scene[i].box, std::min(best, cfg.max_range));
        if (t && *t < best) {
          best = *t;
          hit_id = scene[i].id;
        }
      }
      if (!std::isfinite(best)) continue;
      points.push_back({best * local.x, best * local.y, best * local.z,
                        point_intensity(cfg.emitted_intensity, cfg.attenuation, best), channel, col,
                        hit_id});
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// Camera

struct CameraPose {
  Vec3 position;
  double heading = 0.0;

  Vec3 forward() const { return {std::cos(heading), std::sin(heading), 0.0}; }
  Vec3 right() const { return {std::sin(heading), -std::cos(heading), 0.0}; }
};

inline CameraPose camera_pose(const CameraConfig& cam, const WorldPose& ego, double ego_length) {
  const double fwd = cam.mount_forward.value_or(0.5 * ego_length);
  const double c = std::cos(ego.heading);
  const double s = std::sin(ego.heading);
  return {{ego.x + fwd * c - cam.mount_lateral * s, ego.y + fwd * s + cam.mount_lateral * c,
           cam.mount_height},
          ego.heading};
}

namespace detail {

inline constexpr double kNearPlane = 0.05;

/// Camera coordinates: x right, y down, z along the optical axis.
inline Vec3 to_camera(const CameraPose& pose, Vec3 world) {
  const Vec3 rel = world - pose.position;
  return {dot(rel, pose.right()), -rel.z, dot(rel, pose.forward())};
}

/// Axis-aligned hull of the box portion in front of the near plane, in pixel
/// coordinates and not yet clipped to the image.
inline std::optional<BBox2D> projected_hull(const CameraConfig& cam, const CameraPose& pose,
                                            const OrientedBox& box) {
  static constexpr int kEdges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                        {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  const auto corners = box.corners();
  std::array<Vec3, 8> c{};
  for (std::size_t i = 0; i < 8; ++i) c[i] = to_camera(pose, corners[i]);
  const double f = cam.focal();
  const double cx = 0.5 * cam.width;
  const double cy = 0.5 * cam.height;
  BBox2D hull{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  auto add = [&](const Vec3& p) {
    const double u = cx + f * p.x / p.z;
    const double v = cy + f * p.y / p.z;
    hull = {std::min(hull.x_min, u), std::min(hull.y_min, v), std::max(hull.x_max, u),
            std::max(hull.y_max, v)};
    any = true;
  };
  for (const Vec3& p : c)
    if (p.z >= kNearPlane) add(p);
  for (const auto& e : kEdges) {
    const Vec3& a = c[e[0]];
    const Vec3& b = c[e[1]];
    if ((a.z >= kNearPlane) == (b.z >= kNearPlane)) continue;
    const double t = (kNearPlane - a.z) / (b.z - a.z);
    add(a + t * (b - a));
  }
  if (!any) return std::nullopt;
  return hull;
}

/// Unit world direction through the center of pixel (u, v).
inline Vec3 pixel_ray(const CameraConfig& cam, const Vec3& fwd, const Vec3& right, double f, int u,
                      int v) {
  const double xc = (u + 0.5 - 0.5 * cam.width) / f;
  const double yc = (v + 0.5 - 0.5 * cam.height) / f;
  const Vec3 d{fwd.x + xc * right.x, fwd.y + xc * right.y, -yc};
  return (1.0 / norm(d)) * d;
}

}  // namespace detail

/// Ground-truth box of a vehicle: the hull of its projected 3D box (clipped at
/// the near plane), clipped to the image. None when the vehicle is entirely
/// behind the camera or the clipped area is below min_area.
inline std::optional<BBox2D> project_bbox(const CameraConfig& cam, const CameraPose& pose,
                                          const OrientedBox& target) {
  const auto hull = detail::projected_hull(cam, pose, target);
  if (!hull) return std::nullopt;
  const BBox2D clipped{std::clamp(hull->x_min, 0.0, double(cam.width)),
                       std::clamp(hull->y_min, 0.0, double(cam.height)),
                       std::clamp(hull->x_max, 0.0, double(cam.width)),
                       std::clamp(hull->y_max, 0.0, double(cam.height))};
  if (!(clipped.x_max > clipped.x_min && clipped.y_max > clipped.y_min)) return std::nullopt;
  if (clipped.area() < cam.min_area) return std::nullopt;
  return clipped;
}

/// Per-pixel ray casting through the pinhole model. Fills depth and instance
/// rasters; every vehicle with at least one surviving pixel and a ground-truth
/// box of sufficient area is reported in gt_boxes.
inline void rasterize_camera(SensorFrame& frame, std::span<const SceneObject> scene,
                             const CameraConfig& cam, const CameraPose& pose) {
  cam.validate();
  const int w = cam.width;
  const int h = cam.height;
  const double f = cam.focal();
  frame.width = w;
  frame.height = h;
  const auto pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  frame.depth.assign(pixels, std::numeric_limits<double>::infinity());
  frame.instance.assign(pixels, -1);
  const Vec3 fwd = pose.forward();
  const Vec3 right = pose.right();

  for (const SceneObject& obj : scene) {
    const auto hull = detail::projected_hull(cam, pose, obj.box);
    if (!hull) continue;
    const int u0 = std::max(0, static_cast<int>(std::floor(hull->x_min - 1.0)));
    const int u1 = std::min(w - 1, static_cast<int>(std::ceil(hull->x_max + 1.0)));
    const int v0 = std::max(0, static_cast<int>(std::floor(hull->y_min - 1.0)));
    const int v1 = std::min(h - 1, static_cast<int>(std::ceil(hull->y_max + 1.0)));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        const Ray ray{pose.position, detail::pixel_ray(cam, fwd, right, f, u, v)};
        const auto t = intersect_box(ray, obj.box, frame.depth[idx]);
        if (t && *t < frame.depth[idx]) {
          frame.depth[idx] = *t;
          frame.instance[idx] = obj.id;
        }
      }
    }
  }

  // Ground plane: along the pixel ray z drops by yc per unit of the
  // unnormalized direction (1, xc, yc), so the hit distance is h * |dir| / yc.
  std::map<int, int> visible;
  for (int v = 0; v < h; ++v) {
    const double yc = (v + 0.5 - 0.5 * h) / f;
    for (int u = 0; u < w; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      double ground = std::numeric_limits<double>::infinity();
      if (yc > 0.0) {
        const double xc = (u + 0.5 - 0.5 * w) / f;
        ground = pose.position.z * std::sqrt(1.0 + xc * xc + yc * yc) / yc;
      }
      if (frame.instance[idx] >= 0 && ground < frame.depth[idx]) frame.instance[idx] = -1;
      if (frame.instance[idx] >= 0) {
        ++visible[frame.instance[idx]];
      } else {
        frame.depth[idx] = ground <= cam.max_depth ? ground : 0.0;
      }
    }
  }

  frame.gt_boxes.clear();
  for (const SceneObject& obj : scene) {
    const auto it = visible.find(obj.id);
    if (it == visible.end()) continue;
    const auto box = project_bbox(cam, pose, obj.box);
    if (!box) continue;
    const double distance = norm(obj.box.center - Vec2{pose.position.x, pose.position.y});
    frame.gt_boxes.push_back({obj.id, *box, distance, it->second});
  }
  std::sort(frame.gt_boxes.begin(), frame.gt_boxes.end(),
            [](const GroundTruthBox& a, const GroundTruthBox& b) { return a.vehicle_id < b.vehicle_id; });
}

struct SensorSuite {
  CameraConfig camera;
  LidarConfig lidar;
  bool camera_enabled = true;
  bool lidar_enabled = true;
};

/// Renders one frame for the ego vehicle `ego_id` (which must be active).
inline SensorFrame render_frame(const TrafficState& state, const RoadNetwork& net,
                                const SensorSuite& sensors, int ego_id,
                                const SceneryCondition& condition, std::uint64_t frame_id) {
  const VehicleState* ego = state.find(ego_id);
  if (ego == nullptr) throw ValidationError("ego vehicle is not active", std::to_string(ego_id));
  const WorldPose ego_pose = frenet_to_world(net, ego->pose);
  const auto scene = build_scene(state, net, ego_id);
  SensorFrame frame;
  frame.frame_id = frame_id;
  frame.time = state.time;
  frame.lighting = condition.lighting;
  if (sensors.lidar_enabled)
    frame.points = cast_lidar(scene, sensors.lidar, ego_pose, sensors.lidar.mount_height);
  if (sensors.camera_enabled)
    rasterize_camera(frame, scene, sensors.camera, camera_pose(sensors.camera, ego_pose, ego->length));
  return frame;
}

}  // namespace avsim
