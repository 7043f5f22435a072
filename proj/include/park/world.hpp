#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "park/command.hpp"
#include "park/geometry.hpp"
#include "park/rng.hpp"

namespace park {

constexpr double kWheelbase = 2.9;
constexpr double kVehicleLength = 4.6;
constexpr double kVehicleWidth = 1.9;
constexpr double kRearAxleToCenter = 1.45;  // rear axle sits behind the footprint center
constexpr double kMaxSpeed = 4.0;
constexpr double kTick = 0.1;  // 10 Hz
constexpr double kAttemptRadius = 7.0;
constexpr int kMaxPedestrians = 8;
constexpr double kMaxPedSpeed = 2.5;
constexpr double kPedHalfExtent = 0.25;

enum class SlotKind : int { kVertical = 0, kParallel = 1 };

inline const char* slot_kind_name(SlotKind k) {
  return k == SlotKind::kVertical ? "vertical" : "parallel";
}
SlotKind parse_slot_kind(const std::string& s);

struct VehiclePose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  // wrapped to (-pi, pi]

  Vec2 position() const { return {x, y}; }
  Vec2 heading_dir() const { return {std::cos(psi), std::sin(psi)}; }
};

struct EgoState {
  VehiclePose pose;
  double v = 0.0;  // m/s, signed by gear
  double a = 0.0;  // m/s^2, last applied command
  Gear gear = Gear::kForward;
};

struct Pedestrian {
  Vec2 pos, vel, acc;
  bool present = false;
};

struct Slot {
  Vec2 center;
  double heading = 0.0;     // direction a parked car's nose points (toward lane)
  double half_depth = 0.0;  // along heading
  double half_width = 0.0;
  bool occupied = false;

  OrientedBox box() const { return {center, half_depth, half_width, heading}; }
};

struct GoalSlot {
  double x = 0.0, y = 0.0, psi = 0.0;
  SlotKind kind = SlotKind::kVertical;
  Vec2 position() const { return {x, y}; }
};

struct LaneInfo {
  double center_y = 0.0;  // lane centerline (y for vertical rows, parallel street)
  double half_width = 3.5;
};

struct WorldState {
  EgoState ego;
  std::array<Pedestrian, kMaxPedestrians> pedestrians;
  std::vector<OrientedBox> static_vehicles;
  std::vector<Slot> slots;
  int goal_index = -1;
  GoalSlot goal;
  SlotKind kind = SlotKind::kVertical;
  LaneInfo goal_lane;
  double time = 0.0;
  uint64_t tick = 0;
  uint64_t rng_seed = 0;
  double ped_accel_noise = 0.5;  // random-walk stddev; zero gives scripted constant-velocity walkers
  Vec2 world_min, world_max;

  int pedestrian_count() const {
    int n = 0;
    for (const auto& p : pedestrians) n += p.present ? 1 : 0;
    return n;
  }
};

// Scenario descriptor (key-value text file) for reproducible spawns.
struct ScenarioDesc {
  uint64_t seed = 0;
  SlotKind kind = SlotKind::kVertical;
  int pedestrian_count = -1;  // -1 draws 0..4 from the seed
  double occupancy = 0.6;
};
ScenarioDesc load_scenario(const std::string& path);
void save_scenario(const ScenarioDesc& d, const std::string& path);

OrientedBox ego_footprint(const VehiclePose& pose);

// Rear-axle kinematic bicycle step with exact constant-steer arc
// integration and trapezoidal speed. Speed is clamped to [0, kMaxSpeed] and
// signed by gear; heading stays wrapped. A gear change is honored only near
// standstill; at speed the request is treated as a brake.
EgoState step_bicycle(const EgoState& ego, double accel_cmd, double steer_cmd,
                      Gear gear, double dt);

// Advances pedestrians one step: integrate with current acceleration, then
// resample acceleration from a seeded bounded random walk. A pedestrian whose
// proposed position would enter a vehicle stays put for the tick.
WorldState step_pedestrians(const WorldState& state, double dt, Rng& rng);

bool attempt_triggered(const VehiclePose& ego, const GoalSlot& goal);

// Full simulator tick shared by recording, replay, and closed-loop
// evaluation: ego update + pedestrian update + clocks.
WorldState advance(const WorldState& state, const ControlCommand& cmd);

// True when the ego footprint intersects any static vehicle or pedestrian.
bool ego_collides(const WorldState& state);

WorldState spawn_episode(uint64_t seed, SlotKind kind);
WorldState spawn_episode(const ScenarioDesc& desc, int attempt = 0);

// Geometry needed by the approach planner: the lane-aligned approach line
// the ego spawns on, and the travel direction toward the goal.
struct ApproachInfo {
  double line_y = 0.0;     // near-side approach line
  double far_line_y = 0.0; // shifted line the reverse maneuver stages from
  double direction = 1.0;  // +1 driving +x, -1 driving -x
};
ApproachInfo approach_info(const WorldState& state);

double position_error(const VehiclePose& pose, const GoalSlot& goal);
double orientation_error_deg(const VehiclePose& pose, const GoalSlot& goal);

}  // namespace park
