#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace park {

constexpr double kPi = 3.14159265358979323846;

// wrap to (-pi, pi]
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// absolute yaw difference in [0, pi]
inline double yaw_difference(double a, double b) {
  return std::fabs(wrap_angle(a - b));
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  Vec2 rotated(double a) const {
    const double c = std::cos(a), s = std::sin(a);
    return {c * x - s * y, s * x + c * y};
  }
  Vec2 perp() const { return {-y, x}; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

// Rectangle with arbitrary planar orientation, described by center,
// half-extents along its local axes, and heading of the local x axis.
struct OrientedBox {
  Vec2 center;
  double half_length = 0.0;  // along heading
  double half_width = 0.0;   // across heading
  double heading = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 ax = Vec2{1, 0}.rotated(heading) * half_length;
    const Vec2 ay = Vec2{0, 1}.rotated(heading) * half_width;
    return {center + ax + ay, center + ax - ay, center - ax - ay,
            center - ax + ay};
  }

  OrientedBox inflated(double margin) const {
    return {center, half_length + margin, half_width + margin, heading};
  }

  bool contains(const Vec2& p) const {
    const Vec2 d = p - center;
    const Vec2 local = d.rotated(-heading);
    return std::fabs(local.x) <= half_length && std::fabs(local.y) <= half_width;
  }
};

namespace detail {

inline void project_onto(const std::array<Vec2, 4>& corners, const Vec2& axis,
                         double& lo, double& hi) {
  lo = hi = corners[0].dot(axis);
  for (int i = 1; i < 4; ++i) {
    const double v = corners[i].dot(axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

}  // namespace detail

// Separating-axis overlap test. Touching edges count as overlap.
inline bool check_collision(const OrientedBox& a, const OrientedBox& b) {
  if (a.half_length <= 0.0 || a.half_width <= 0.0 || b.half_length <= 0.0 ||
      b.half_width <= 0.0) {
    throw std::invalid_argument("check_collision: degenerate zero-area box");
  }
  const std::array<Vec2, 4> ca = a.corners();
  const std::array<Vec2, 4> cb = b.corners();
  const std::array<Vec2, 4> axes = {
      Vec2{1, 0}.rotated(a.heading), Vec2{0, 1}.rotated(a.heading),
      Vec2{1, 0}.rotated(b.heading), Vec2{0, 1}.rotated(b.heading)};
  for (const Vec2& axis : axes) {
    double alo, ahi, blo, bhi;
    detail::project_onto(ca, axis, alo, ahi);
    detail::project_onto(cb, axis, blo, bhi);
    if (ahi < blo || bhi < alo) return false;
  }
  return true;
}

}  // namespace park
