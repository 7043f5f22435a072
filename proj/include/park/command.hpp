#pragma once

#include <cmath>
#include <stdexcept>

namespace park {

enum class Gear : int { kForward = 0, kReverse = 1 };

inline double gear_sign(Gear g) { return g == Gear::kForward ? 1.0 : -1.0; }

constexpr double kMaxAccel = 3.0;   // m/s^2
constexpr double kMaxSteer = 0.61;  // rad

// One control step: longitudinal acceleration, steering angle, drive
// direction. Ranges are enforced at construction.
struct ControlCommand {
  double accel = 0.0;
  double steer = 0.0;
  Gear gear = Gear::kForward;

  ControlCommand() = default;
  ControlCommand(double accel_, double steer_, Gear gear_)
      : accel(accel_), steer(steer_), gear(gear_) {
    if (!std::isfinite(accel) || !std::isfinite(steer))
      throw std::invalid_argument("ControlCommand: non-finite field");
    if (std::fabs(accel) > kMaxAccel + 1e-12)
      throw std::invalid_argument("ControlCommand: accel out of range");
    if (std::fabs(steer) > kMaxSteer + 1e-12)
      throw std::invalid_argument("ControlCommand: steer out of range");
  }
};

}  // namespace park
