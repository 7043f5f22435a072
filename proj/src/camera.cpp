#include "park/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace park {

namespace {

constexpr double kCamHeight = 1.6;
constexpr double kCamPitchDown = 15.0 * kPi / 180.0;
constexpr double kCamOutwardOffset = 0.6;  // from footprint center
constexpr double kHorizontalFovDeg = 100.0;
constexpr double kVehicleBoxHeight = 1.5;
constexpr double kPedestrianHeight = 1.7;
constexpr double kMarkingWidth = 0.12;
constexpr double kCullDistance = 20.0;

Rgb palette(int r, int g, int b) {
  return {r / 255.0, g / 255.0, b / 255.0};
}

struct Box3 {
  Vec2 center;
  double half_l, half_w, heading;
  double half_h, center_z;
  Rgb color;
};

// slab intersection; ray p(s) = o + d*s, s in camera-depth units
std::optional<double> ray_box(const Vec3& o, const Vec3& d, const Box3& box) {
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double ox = c * (o.x - box.center.x) + s * (o.y - box.center.y);
  const double oy = -s * (o.x - box.center.x) + c * (o.y - box.center.y);
  const double oz = o.z - box.center_z;
  const double dx = c * d.x + s * d.y;
  const double dy = -s * d.x + c * d.y;
  const double dz = d.z;
  double tmin = 0.0, tmax = 1e30;
  const double org[3] = {ox, oy, oz};
  const double dir[3] = {dx, dy, dz};
  const double half[3] = {box.half_l, box.half_w, box.half_h};
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(dir[i]) < 1e-12) {
      if (std::fabs(org[i]) > half[i]) return std::nullopt;
      continue;
    }
    double t0 = (-half[i] - org[i]) / dir[i];
    double t1 = (half[i] - org[i]) / dir[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin <= 1e-9) return std::nullopt;  // origin inside or behind
  return tmin;
}

Vec3 world_to_ego(const Vec3& p, const VehiclePose& ego) {
  const double c = std::cos(ego.psi), s = std::sin(ego.psi);
  const double dx = p.x - ego.x, dy = p.y - ego.y;
  return {c * dx + s * dy, -s * dx + c * dy, p.z};
}

Vec3 ego_to_world(const Vec3& p, const VehiclePose& ego) {
  const double c = std::cos(ego.psi), s = std::sin(ego.psi);
  return {ego.x + c * p.x - s * p.y, ego.y + s * p.x + c * p.y, p.z};
}

}  // namespace

Rgb ground_color() { return palette(60, 60, 60); }
Rgb marking_color() { return palette(220, 220, 220); }
Rgb vehicle_color() { return palette(30, 90, 200); }
Rgb pedestrian_color() { return palette(230, 60, 40); }

Vec3 CameraExtrinsics::ego_to_cam(const Vec3& p) const {
  const auto& r = rotation;
  return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation.x,
          r[3] * p.x + r[4] * p.y + r[5] * p.z + translation.y,
          r[6] * p.x + r[7] * p.y + r[8] * p.z + translation.z};
}

Vec3 CameraExtrinsics::cam_to_ego(const Vec3& p) const {
  const Vec3 q = {p.x - translation.x, p.y - translation.y,
                  p.z - translation.z};
  const auto& r = rotation;
  return {r[0] * q.x + r[3] * q.y + r[6] * q.z,
          r[1] * q.x + r[4] * q.y + r[7] * q.z,
          r[2] * q.x + r[5] * q.y + r[8] * q.z};
}

Vec3 CameraExtrinsics::cam_dir_to_ego(const Vec3& d) const {
  const auto& r = rotation;
  return {r[0] * d.x + r[3] * d.y + r[6] * d.z,
          r[1] * d.x + r[4] * d.y + r[7] * d.z,
          r[2] * d.x + r[5] * d.y + r[8] * d.z};
}

Vec3 CameraExtrinsics::position_in_ego() const { return cam_to_ego({0, 0, 0}); }

std::vector<Camera> default_rig() {
  std::vector<Camera> rig;
  const double fx =
      (kImageSize / 2.0) / std::tan(kHorizontalFovDeg * kPi / 360.0);
  for (int i = 0; i < kCameraCount; ++i) {
    Camera cam;
    cam.id = i;
    cam.intr = {fx, fx, kImageSize / 2.0, kImageSize / 2.0, kImageSize,
                kImageSize};
    const double yaw = i * kPi / 2.0;  // front, left, rear, right
    const double ca = std::cos(yaw), sa = std::sin(yaw);
    const double cb = std::cos(kCamPitchDown), sb = std::sin(kCamPitchDown);
    // ego frame: x forward, y left, z up
    const Vec3 fwd = {ca * cb, sa * cb, -sb};
    const Vec3 right = {sa, -ca, 0.0};
    const Vec3 down = {fwd.y * right.z - fwd.z * right.y,
                       fwd.z * right.x - fwd.x * right.z,
                       fwd.x * right.y - fwd.y * right.x};
    cam.extr.rotation = {right.x, right.y, right.z, down.x, down.y,
                         down.z,  fwd.x,   fwd.y,   fwd.z};
    const Vec3 center = {kRearAxleToCenter + kCamOutwardOffset * ca,
                         kCamOutwardOffset * sa, kCamHeight};
    const auto& r = cam.extr.rotation;
    cam.extr.translation = {
        -(r[0] * center.x + r[1] * center.y + r[2] * center.z),
        -(r[3] * center.x + r[4] * center.y + r[5] * center.z),
        -(r[6] * center.x + r[7] * center.y + r[8] * center.z)};
    rig.push_back(cam);
  }
  return rig;
}

Projection project(const Vec3& world, const CameraIntrinsics& intr,
                   const CameraExtrinsics& extr, const VehiclePose& ego) {
  const Vec3 cam = extr.ego_to_cam(world_to_ego(world, ego));
  Projection out;
  if (cam.z <= 0.0) return out;  // behind-camera marker
  out.in_front = true;
  out.u = intr.fx * cam.x / cam.z + intr.cx;
  out.v = intr.fy * cam.y / cam.z + intr.cy;
  out.depth = cam.z;
  return out;
}

Vec3 unproject_to_ego(double u, double v, double depth,
                      const CameraIntrinsics& intr,
                      const CameraExtrinsics& extr) {
  if (depth <= 0.0)
    throw std::invalid_argument("unproject: depth must be positive");
  const Vec3 cam = {(u - intr.cx) / intr.fx * depth,
                    (v - intr.cy) / intr.fy * depth, depth};
  return extr.cam_to_ego(cam);
}

Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& intr,
               const CameraExtrinsics& extr, const VehiclePose& ego) {
  return ego_to_world(unproject_to_ego(u, v, depth, intr, extr), ego);
}

std::vector<CameraFrame> render(const WorldState& world,
                                const std::vector<Camera>& rig) {
  if (rig.empty()) throw std::invalid_argument("render: empty rig");

  std::vector<Box3> boxes;
  for (const auto& v : world.static_vehicles)
    boxes.push_back({v.center, v.half_length, v.half_width, v.heading,
                     kVehicleBoxHeight / 2.0, kVehicleBoxHeight / 2.0,
                     vehicle_color()});
  for (const auto& p : world.pedestrians)
    if (p.present)
      boxes.push_back({p.pos, kPedHalfExtent, kPedHalfExtent, 0.0,
                       kPedestrianHeight / 2.0, kPedestrianHeight / 2.0,
                       pedestrian_color()});

  std::vector<CameraFrame> frames(rig.size());
  for (size_t ci = 0; ci < rig.size(); ++ci) {
    const Camera& cam = rig[ci];
    CameraFrame& frame = frames[ci];
    frame.camera_id = cam.id;
    frame.width = cam.intr.width;
    frame.height = cam.intr.height;
    frame.image.assign(static_cast<size_t>(frame.width) * frame.height * 3,
                       0.0);
    frame.depth.assign(static_cast<size_t>(frame.width) * frame.height, 0.0);

    const Vec3 cam_pos =
        ego_to_world(cam.extr.position_in_ego(), world.ego.pose);
    std::vector<const Box3*> candidates;
    for (const auto& b : boxes)
      if (std::hypot(b.center.x - cam_pos.x, b.center.y - cam_pos.y) <
          kCullDistance)
        candidates.push_back(&b);
    std::vector<const Slot*> near_slots;
    for (const auto& s : world.slots)
      if (std::hypot(s.center.x - cam_pos.x, s.center.y - cam_pos.y) <
          kCullDistance)
        near_slots.push_back(&s);

    const int w = frame.width, h = frame.height;
    const double cpsi = std::cos(world.ego.pose.psi);
    const double spsi = std::sin(world.ego.pose.psi);
#pragma omp parallel for schedule(static)
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        // ray parametrized by camera depth: unit camera-z component
        const Vec3 dir_cam = {(px + 0.5 - cam.intr.cx) / cam.intr.fx,
                              (py + 0.5 - cam.intr.cy) / cam.intr.fy, 1.0};
        const Vec3 dir_ego = cam.extr.cam_dir_to_ego(dir_cam);
        const Vec3 dir = {cpsi * dir_ego.x - spsi * dir_ego.y,
                          spsi * dir_ego.x + cpsi * dir_ego.y, dir_ego.z};

        double best = 1e30;
        Rgb color = ground_color();
        bool hit = false;

        if (dir.z < -1e-12) {
          const double sg = -cam_pos.z / dir.z;
          if (sg > 0.0) {
            best = sg;
            hit = true;
            const Vec2 gp = {cam_pos.x + dir.x * sg, cam_pos.y + dir.y * sg};
            for (const Slot* slot : near_slots) {
              const OrientedBox outer =
                  slot->box().inflated(kMarkingWidth / 2.0);
              if (!outer.contains(gp)) continue;
              const OrientedBox inner =
                  slot->box().inflated(-kMarkingWidth / 2.0);
              if (!inner.contains(gp)) {
                color = marking_color();
                break;
              }
            }
          }
        }
        for (const Box3* b : candidates) {
          const auto t = ray_box(cam_pos, dir, *b);
          if (t && *t < best) {
            best = *t;
            color = b->color;
            hit = true;
          }
        }

        const size_t pix = static_cast<size_t>(py) * w + px;
        frame.image[pix * 3 + 0] = color.r;
        frame.image[pix * 3 + 1] = color.g;
        frame.image[pix * 3 + 2] = color.b;
        frame.depth[pix] = hit ? best : 0.0;
      }
    }
  }
  return frames;
}

}  // namespace park
