#pragma once

#include <array>
#include <optional>
#include <vector>

#include "park/geometry.hpp"
#include "park/world.hpp"

namespace park {

constexpr int kCameraCount = 4;
constexpr int kImageSize = 128;

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
};

// Maps ego-frame points into the camera frame: p_cam = R * p_ego + t.
// Camera axes follow the usual convention (x right, y down, z forward).
struct CameraExtrinsics {
  std::array<double, 9> rotation{};  // row-major
  Vec3 translation;

  Vec3 ego_to_cam(const Vec3& p) const;
  Vec3 cam_to_ego(const Vec3& p) const;
  Vec3 cam_dir_to_ego(const Vec3& d) const;
  Vec3 position_in_ego() const;  // camera center, ego frame
};

struct Camera {
  int id = 0;
  CameraIntrinsics intr;
  CameraExtrinsics extr;
};

// Four-view rig: front/left/rear/right at 90 degree yaw spacing, pitched
// down to see the near ground, ~100 degree horizontal field of view.
std::vector<Camera> default_rig();

struct CameraFrame {
  int camera_id = 0;
  int width = 0, height = 0;
  std::vector<double> image;  // H*W*3, values in [0,1] (exact multiples of 1/255)
  std::vector<double> depth;  // H*W meters, 0 where no surface is hit

  double depth_at(int y, int x) const { return depth[y * width + x]; }
};

struct Projection {
  double u = 0.0, v = 0.0, depth = 0.0;
  bool in_front = false;  // false marks a behind-camera point
};

Projection project(const Vec3& world, const CameraIntrinsics& intr,
                   const CameraExtrinsics& extr, const VehiclePose& ego);

Vec3 unproject(double u, double v, double depth, const CameraIntrinsics& intr,
               const CameraExtrinsics& extr, const VehiclePose& ego);

// Camera-frame pixel ray lifted into the ego frame (ego pose independent);
// the lift-splat stage bins these points directly.
Vec3 unproject_to_ego(double u, double v, double depth,
                      const CameraIntrinsics& intr,
                      const CameraExtrinsics& extr);

// Semantic flat-color rendering with per-pixel nearest-hit depth.
std::vector<CameraFrame> render(const WorldState& world,
                                const std::vector<Camera>& rig);

// Palette (exact 8-bit values over 255)
struct Rgb {
  double r, g, b;
};
Rgb ground_color();
Rgb marking_color();
Rgb vehicle_color();
Rgb pedestrian_color();

}  // namespace park
