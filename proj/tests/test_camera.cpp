#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "park/camera.hpp"
#include "park/rng.hpp"

using namespace park;

namespace {

VehiclePose origin_pose() { return {0.0, 0.0, 0.0}; }

}  // namespace

TEST_CASE("extrinsic rotations are orthonormal with determinant +1") {
  for (const Camera& cam : default_rig()) {
    const auto& r = cam.extr.rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-9);
      }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) -
                       r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    CHECK(det == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("point on the optical axis projects to the principal point") {
  const Camera cam = default_rig()[0];
  const double d = 5.0;
  // walk d meters along the camera forward axis from the camera center
  const Vec3 p_ego = cam.extr.cam_to_ego({0.0, 0.0, d});
  const Projection pr = project(p_ego, cam.intr, cam.extr, origin_pose());
  REQUIRE(pr.in_front);
  CHECK(pr.u == doctest::Approx(cam.intr.cx).epsilon(1e-12));
  CHECK(pr.v == doctest::Approx(cam.intr.cy).epsilon(1e-12));
  CHECK(pr.depth == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("unproject inverts project for random in-frustum points") {
  Rng rng(3);
  VehiclePose ego{2.5, -1.0, 0.8};
  for (const Camera& cam : default_rig()) {
    for (int i = 0; i < 50; ++i) {
      const double u = rng.uniform(2.0, 126.0);
      const double v = rng.uniform(2.0, 126.0);
      const double d = rng.uniform(0.7, 11.0);
      const Vec3 w = unproject(u, v, d, cam.intr, cam.extr, ego);
      const Projection pr = project(w, cam.intr, cam.extr, ego);
      REQUIRE(pr.in_front);
      CHECK(std::fabs(pr.u - u) < 1e-9);
      CHECK(std::fabs(pr.v - v) < 1e-9);
      CHECK(std::fabs(pr.depth - d) < 1e-9);
    }
  }
}

TEST_CASE("behind-camera points are marked, not errors") {
  const Camera cam = default_rig()[0];
  const Vec3 p_ego = cam.extr.cam_to_ego({0.0, 0.0, -3.0});
  const Projection pr = project(p_ego, cam.intr, cam.extr, origin_pose());
  CHECK_FALSE(pr.in_front);
  CHECK_THROWS_AS(unproject(64, 64, -1.0, cam.intr, cam.extr, origin_pose()),
                  std::invalid_argument);
}

TEST_CASE("projection matches an independent homogeneous-matrix oracle") {
  Rng rng(4);
  const Camera cam = default_rig()[1];
  VehiclePose ego{1.0, 2.0, -0.4};
  for (int i = 0; i < 30; ++i) {
    const Vec3 w = {rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(0, 2)};
    // oracle: explicit 3x4 composition [K][R|t][world->ego]
    const double c = std::cos(ego.psi), s = std::sin(ego.psi);
    const double pe[3] = {c * (w.x - ego.x) + s * (w.y - ego.y),
                          -s * (w.x - ego.x) + c * (w.y - ego.y), w.z};
    const auto& r = cam.extr.rotation;
    const double pc[3] = {
        r[0] * pe[0] + r[1] * pe[1] + r[2] * pe[2] + cam.extr.translation.x,
        r[3] * pe[0] + r[4] * pe[1] + r[5] * pe[2] + cam.extr.translation.y,
        r[6] * pe[0] + r[7] * pe[1] + r[8] * pe[2] + cam.extr.translation.z};
    const Projection pr = project(w, cam.intr, cam.extr, ego);
    if (pc[2] <= 0.0) {
      CHECK_FALSE(pr.in_front);
      continue;
    }
    CHECK(pr.u == doctest::Approx(cam.intr.fx * pc[0] / pc[2] + cam.intr.cx));
    CHECK(pr.v == doctest::Approx(cam.intr.fy * pc[1] / pc[2] + cam.intr.cy));
  }
}

TEST_CASE("image corners at fixed depth span the expected frustum aspect") {
  const Camera cam = default_rig()[0];
  const double d = 6.0;
  const Vec3 tl = unproject_to_ego(0, 0, d, cam.intr, cam.extr);
  const Vec3 tr = unproject_to_ego(128, 0, d, cam.intr, cam.extr);
  const Vec3 bl = unproject_to_ego(0, 128, d, cam.intr, cam.extr);
  // similar triangles: width/height = (W/fx)/(H/fy)
  const double width = (tr - tl).norm();
  const double height = (bl - tl).norm();
  const double expect = (128.0 / cam.intr.fx) / (128.0 / cam.intr.fy);
  CHECK(width / height == doctest::Approx(expect).epsilon(1e-9));
  CHECK(width == doctest::Approx(d * 128.0 / cam.intr.fx).epsilon(1e-9));
}

TEST_CASE("empty scene renders ground color with ground-plane depths") {
  WorldState w = spawn_episode(2, SlotKind::kVertical);
  w.static_vehicles.clear();
  w.slots.clear();
  for (auto& p : w.pedestrians) p.present = false;
  const auto rig = default_rig();
  const auto frames = render(w, rig);
  REQUIRE(frames.size() == 4);
  const Rgb g = ground_color();
  for (size_t ci = 0; ci < frames.size(); ++ci) {
    const CameraFrame& f = frames[ci];
    for (int py = 0; py < f.height; py += 13)
      for (int px = 0; px < f.width; px += 13) {
        const size_t pix = static_cast<size_t>(py) * f.width + px;
        CHECK(f.image[pix * 3 + 0] == g.r);
        CHECK(f.image[pix * 3 + 1] == g.g);
        CHECK(f.image[pix * 3 + 2] == g.b);
        const double d = f.depth[pix];
        if (d > 0.0) {
          // unprojected hit must land on the ground plane
          const Vec3 p = unproject(px + 0.5, py + 0.5, d, rig[ci].intr,
                                   rig[ci].extr, w.ego.pose);
          CHECK(std::fabs(p.z) < 1e-6);
        }
      }
  }
}

TEST_CASE("a vehicle box renders as a blob centered near its projection") {
  WorldState w = spawn_episode(2, SlotKind::kVertical);
  w.static_vehicles.clear();
  w.slots.clear();
  for (auto& p : w.pedestrians) p.present = false;
  w.ego.pose = {0, 0, 0};
  // box 6 m ahead of the front camera
  w.static_vehicles.push_back({{8.0, 0.0}, 1.0, 0.6, 0.0});
  const auto rig = default_rig();
  const auto frames = render(w, rig);
  const CameraFrame& f = frames[0];
  const Rgb vc = vehicle_color();
  double cx = 0.0, cy = 0.0;
  int count = 0;
  for (int py = 0; py < f.height; ++py)
    for (int px = 0; px < f.width; ++px) {
      const size_t pix = static_cast<size_t>(py) * f.width + px;
      if (f.image[pix * 3] == vc.r && f.image[pix * 3 + 1] == vc.g &&
          f.image[pix * 3 + 2] == vc.b) {
        cx += px + 0.5;
        cy += py + 0.5;
        ++count;
      }
    }
  REQUIRE(count > 20);
  cx /= count;
  cy /= count;
  const Projection pr =
      project({8.0, 0.0, 0.75}, rig[0].intr, rig[0].extr, w.ego.pose);
  REQUIRE(pr.in_front);
  // the blob is the visible face, not the full volume; centroid lands close
  CHECK(std::fabs(cx - pr.u) < 6.0);
  CHECK(std::fabs(cy - pr.v) < 6.0);
}

TEST_CASE("rendering is bit-deterministic") {
  WorldState w = spawn_episode(9, SlotKind::kParallel);
  const auto rig = default_rig();
  const auto a = render(w, rig);
  const auto b = render(w, rig);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].depth == b[i].depth);
  }
}

TEST_CASE("rendered depths reproject onto the same pixel") {
  WorldState w = spawn_episode(4, SlotKind::kVertical);
  const auto rig = default_rig();
  const auto frames = render(w, rig);
  for (size_t ci = 0; ci < rig.size(); ++ci) {
    const CameraFrame& f = frames[ci];
    for (int py = 1; py < f.height; py += 7)
      for (int px = 1; px < f.width; px += 7) {
        const double d = f.depth_at(py, px);
        if (d <= 0.0) continue;
        const Vec3 p = unproject(px + 0.5, py + 0.5, d, rig[ci].intr,
                                 rig[ci].extr, w.ego.pose);
        const Projection pr = project(p, rig[ci].intr, rig[ci].extr, w.ego.pose);
        REQUIRE(pr.in_front);
        CHECK(std::fabs(pr.u - (px + 0.5)) < 0.5);
        CHECK(std::fabs(pr.v - (py + 0.5)) < 0.5);
      }
  }
}

TEST_CASE("nearer of two stacked boxes wins the depth test") {
  WorldState w = spawn_episode(2, SlotKind::kVertical);
  w.static_vehicles.clear();
  w.slots.clear();
  for (auto& p : w.pedestrians) p.present = false;
  w.ego.pose = {0, 0, 0};
  w.static_vehicles.push_back({{9.0, 0.0}, 1.0, 0.8, 0.0});  // far
  const auto rig = default_rig();
  const auto far_only = render(w, rig);
  w.pedestrians[0].present = true;  // near, smaller
  w.pedestrians[0].pos = {5.0, 0.0};
  const auto both = render(w, rig);
  const CameraFrame& f = both[0];
  const Rgb pc = pedestrian_color();
  int compared = 0;
  for (int py = 0; py < f.height; ++py)
    for (int px = 0; px < f.width; ++px) {
      const size_t pix = static_cast<size_t>(py) * f.width + px;
      if (f.image[pix * 3] == pc.r && f.image[pix * 3 + 1] == pc.g &&
          far_only[0].depth[pix] > 0.0) {
        CHECK(f.depth[pix] < far_only[0].depth[pix]);
        ++compared;
      }
    }
  CHECK(compared > 10);
}
