#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace avsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 left_normal(Vec2 a) { return {-a.y, a.x}; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double k, Vec3 a) { return {k * a.x, k * a.y, k * a.z}; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Vehicle body: yaw-rotated box resting on the ground plane, z in [0, height].
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;

  Vec2 axis_long() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 axis_lat() const { return {-std::sin(heading), std::cos(heading)}; }

  /// World point expressed in the box frame (x forward, y left, z up, origin at
  /// the ground-level center).
  Vec3 to_local(Vec3 p) const {
    const double c = std::cos(heading);
    const double s = std::sin(heading);
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    return {c * dx + s * dy, -s * dx + c * dy, p.z};
  }

  /// Footprint corners, counter-clockwise starting front-left.
  std::array<Vec2, 4> footprint() const {
    const Vec2 f = (0.5 * length) * axis_long();
    const Vec2 l = (0.5 * width) * axis_lat();
    return {center + f + l, center - f + l, center - f - l, center + f - l};
  }

  std::array<Vec3, 8> corners() const {
    const auto fp = footprint();
    std::array<Vec3, 8> out{};
    for (std::size_t i = 0; i < 4; ++i) {
      out[i] = {fp[i].x, fp[i].y, 0.0};
      out[i + 4] = {fp[i].x, fp[i].y, height};
    }
    return out;
  }

  double bounding_radius() const { return 0.5 * std::hypot(length, width); }
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

/// Entry distance of a ray into an oriented box (slab method in the box frame).
/// Returns nothing on a miss, when the entry lies beyond t_max, or when the ray
/// starts inside the box.
inline std::optional<double> intersect_box(const Ray& ray, const OrientedBox& box,
                                           double t_max) {
  const Vec3 o = box.to_local(ray.origin);
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const Vec3 d{c * ray.dir.x + s * ray.dir.y, -s * ray.dir.x + c * ray.dir.y, ray.dir.z};

  const std::array<double, 3> origin{o.x, o.y, o.z};
  const std::array<double, 3> dir{d.x, d.y, d.z};
  const std::array<double, 3> lo{-0.5 * box.length, -0.5 * box.width, 0.0};
  const std::array<double, 3> hi{0.5 * box.length, 0.5 * box.width, box.height};

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-15) {
      if (origin[k] < lo[k] || origin[k] > hi[k]) return std::nullopt;
      continue;
    }
    double t0 = (lo[k] - origin[k]) / dir[k];
    double t1 = (hi[k] - origin[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near < 0.0 || t_near > t_max) return std::nullopt;
  return t_near;
}

/// Separating-axis overlap test for two footprints (touching counts as overlap).
inline bool footprints_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.footprint();
  const auto cb = b.footprint();
  const std::array<Vec2, 4> axes{a.axis_long(), a.axis_lat(), b.axis_long(), b.axis_lat()};
  for (const Vec2& axis : axes) {
    double a_min = std::numeric_limits<double>::infinity();
    double a_max = -a_min;
    double b_min = a_min;
    double b_max = -a_min;
    for (std::size_t i = 0; i < 4; ++i) {
      const double pa = dot(ca[i], axis);
      const double pb = dot(cb[i], axis);
      a_min = std::min(a_min, pa);
      a_max = std::max(a_max, pa);
      b_min = std::min(b_min, pb);
      b_max = std::max(b_max, pb);
    }
    if (a_max < b_min || b_max < a_min) return false;
  }
  return true;
}

}  // namespace avsim
