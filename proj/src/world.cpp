#include "park/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace park {

namespace {

// Vertical lot: four rows of 16 slots around two driving lanes,
// [row0] lane0 [row1][row2] lane1 [row3].
constexpr int kVertRows = 4;
constexpr int kVertCols = 16;
constexpr double kVertSlotWidth = 2.8;
constexpr double kVertSlotDepth = 5.6;
constexpr double kLaneWidth = 7.0;

// Parallel street: six curb-side slots along one street edge.
constexpr int kParSlots = 6;
constexpr double kParSlotLength = 7.0;
constexpr double kParSlotDepth = 2.5;

constexpr double kNearLineOffsetVertical = 1.2;
constexpr double kNearLineOffsetParallel = 1.0;

struct RowSpec {
  double center_y;
  double heading;  // outward, toward the serving lane
  double lane_y;
};

std::array<RowSpec, kVertRows> vertical_rows() {
  const double half = kVertSlotDepth / 2.0;        // 2.8
  const double lane0 = 0.0;
  const double row0 = lane0 + kLaneWidth / 2.0 + half;   // +6.3
  const double row1 = lane0 - kLaneWidth / 2.0 - half;   // -6.3
  const double row2 = row1 - kVertSlotDepth;              // -11.9
  const double lane1 = row2 - half - kLaneWidth / 2.0;    // -18.2
  const double row3 = lane1 - kLaneWidth / 2.0 - half;    // -24.5
  return {RowSpec{row0, -kPi / 2.0, lane0}, RowSpec{row1, kPi / 2.0, lane0},
          RowSpec{row2, -kPi / 2.0, lane1}, RowSpec{row3, kPi / 2.0, lane1}};
}

OrientedBox parked_car_box(const Slot& s) {
  return {s.center, kVehicleLength / 2.0, kVehicleWidth / 2.0, s.heading};
}

OrientedBox pedestrian_box(const Vec2& pos) {
  return {pos, kPedHalfExtent, kPedHalfExtent, 0.0};
}

}  // namespace

SlotKind parse_slot_kind(const std::string& s) {
  if (s == "vertical") return SlotKind::kVertical;
  if (s == "parallel") return SlotKind::kParallel;
  throw std::invalid_argument("unknown slot kind: " + s);
}

OrientedBox ego_footprint(const VehiclePose& pose) {
  const Vec2 center =
      pose.position() + pose.heading_dir() * kRearAxleToCenter;
  return {center, kVehicleLength / 2.0, kVehicleWidth / 2.0, pose.psi};
}

EgoState step_bicycle(const EgoState& ego, double accel_cmd, double steer_cmd,
                      Gear gear, double dt) {
  if (!std::isfinite(accel_cmd) || !std::isfinite(steer_cmd))
    throw std::invalid_argument("step_bicycle: non-finite command");
  if (!(dt > 0.0 && dt <= 0.2))
    throw std::invalid_argument("step_bicycle: dt outside (0, 0.2]");
  if (std::fabs(steer_cmd) > kMaxSteer + 1e-12)
    throw std::invalid_argument("step_bicycle: steer beyond limit");

  EgoState out = ego;
  double speed = std::fabs(ego.v);
  Gear active = gear;
  double accel = accel_cmd;
  if (gear != ego.gear && speed > 0.2) {
    // gear change requested at speed: brake instead, switch later
    active = ego.gear;
    accel = -kMaxAccel;
  }

  // distance covered under constant acceleration with clamping at 0 and vmax
  double dist = 0.0;
  {
    double s = speed, t_left = dt;
    if (accel != 0.0) {
      const double bound = accel > 0.0 ? kMaxSpeed : 0.0;
      const double t_hit = (bound - s) / accel;
      const double t1 = std::clamp(t_hit, 0.0, t_left);
      dist += s * t1 + 0.5 * accel * t1 * t1;
      s = (t1 == t_left) ? s + accel * t1 : bound;
      t_left -= t1;
    }
    dist += s * t_left;
    speed = std::clamp(s, 0.0, kMaxSpeed);
  }

  const double signed_dist = gear_sign(active) * dist;
  const double psi = ego.pose.psi;
  if (std::fabs(steer_cmd) > 1e-9) {
    const double radius = kWheelbase / std::tan(steer_cmd);
    const double dpsi = signed_dist / radius;
    out.pose.x = ego.pose.x + radius * (std::sin(psi + dpsi) - std::sin(psi));
    out.pose.y = ego.pose.y - radius * (std::cos(psi + dpsi) - std::cos(psi));
    out.pose.psi = wrap_angle(psi + dpsi);
  } else {
    out.pose.x = ego.pose.x + signed_dist * std::cos(psi);
    out.pose.y = ego.pose.y + signed_dist * std::sin(psi);
    out.pose.psi = psi;
  }
  out.v = gear_sign(active) * speed;
  out.a = accel_cmd;
  out.gear = active;
  return out;
}

WorldState step_pedestrians(const WorldState& state, double dt, Rng& rng) {
  if (!(dt > 0.0 && dt <= 0.2))
    throw std::invalid_argument("step_pedestrians: dt outside (0, 0.2]");
  WorldState out = state;
  const OrientedBox ego_box = ego_footprint(state.ego.pose).inflated(0.2);
  for (int i = 0; i < kMaxPedestrians; ++i) {
    Pedestrian& p = out.pedestrians[i];
    // every slot consumes the same number of draws, present or not, so the
    // stream layout is independent of the mask
    const double nx = rng.normal();
    const double ny = rng.normal();
    if (!p.present) continue;

    const Vec2 proposed =
        p.pos + p.vel * dt + p.acc * (0.5 * dt * dt);
    bool blocked = ego_box.contains(proposed);
    for (const auto& box : state.static_vehicles) {
      if (blocked) break;
      blocked = box.inflated(0.2).contains(proposed);
    }
    if (blocked) {
      p.vel = {0.0, 0.0};
    } else {
      p.pos = proposed;
      p.vel = p.vel + p.acc * dt;
      const double speed = p.vel.norm();
      if (speed > kMaxPedSpeed) p.vel = p.vel * (kMaxPedSpeed / speed);
    }
    // reflect at world bounds
    if (p.pos.x < state.world_min.x) { p.pos.x = state.world_min.x; p.vel.x = std::fabs(p.vel.x); }
    if (p.pos.x > state.world_max.x) { p.pos.x = state.world_max.x; p.vel.x = -std::fabs(p.vel.x); }
    if (p.pos.y < state.world_min.y) { p.pos.y = state.world_min.y; p.vel.y = std::fabs(p.vel.y); }
    if (p.pos.y > state.world_max.y) { p.pos.y = state.world_max.y; p.vel.y = -std::fabs(p.vel.y); }

    // bounded random walk on acceleration
    const double sigma = state.ped_accel_noise;
    p.acc.x = std::clamp(0.85 * p.acc.x + sigma * nx, -1.5, 1.5);
    p.acc.y = std::clamp(0.85 * p.acc.y + sigma * ny, -1.5, 1.5);
  }
  return out;
}

bool attempt_triggered(const VehiclePose& ego, const GoalSlot& goal) {
  return distance(ego.position(), goal.position()) <= kAttemptRadius;
}

WorldState advance(const WorldState& state, const ControlCommand& cmd) {
  WorldState mid = state;
  mid.ego = step_bicycle(state.ego, cmd.accel, cmd.steer, cmd.gear, kTick);
  Rng rng = Rng::keyed(state.rng_seed, 0xbead0000ULL + state.tick);
  WorldState out = step_pedestrians(mid, kTick, rng);
  out.time = state.time + kTick;
  out.tick = state.tick + 1;
  return out;
}

bool ego_collides(const WorldState& state) {
  const OrientedBox ego = ego_footprint(state.ego.pose);
  for (const auto& box : state.static_vehicles)
    if (check_collision(ego, box)) return true;
  for (const auto& p : state.pedestrians)
    if (p.present && check_collision(ego, pedestrian_box(p.pos))) return true;
  return false;
}

ApproachInfo approach_info(const WorldState& state) {
  ApproachInfo info;
  const double toward_lane =
      state.goal_lane.center_y >= state.goal.y ? 1.0 : -1.0;
  const double off = state.kind == SlotKind::kVertical
                         ? kNearLineOffsetVertical
                         : kNearLineOffsetParallel;
  info.line_y = state.goal_lane.center_y - toward_lane * off;
  info.far_line_y = state.kind == SlotKind::kVertical
                        ? state.goal_lane.center_y + toward_lane * off
                        : info.line_y;
  info.direction = std::cos(state.ego.pose.psi) >= 0.0 ? 1.0 : -1.0;
  return info;
}

WorldState spawn_episode(uint64_t seed, SlotKind kind) {
  ScenarioDesc d;
  d.seed = seed;
  d.kind = kind;
  return spawn_episode(d, 0);
}

WorldState spawn_episode(const ScenarioDesc& desc, int attempt) {
  Rng rng = Rng::keyed(desc.seed, 0x5eed0000ULL + static_cast<uint64_t>(attempt));
  WorldState w;
  w.rng_seed = desc.seed;
  w.kind = desc.kind;
  w.ped_accel_noise = 0.5;

  if (desc.kind == SlotKind::kVertical) {
    w.world_min = {-36.0, -31.0};
    w.world_max = {36.0, 13.0};
    const auto rows = vertical_rows();
    for (int r = 0; r < kVertRows; ++r)
      for (int c = 0; c < kVertCols; ++c) {
        Slot s;
        s.center = {-(kVertCols - 1) * kVertSlotWidth / 2.0 +
                        c * kVertSlotWidth,
                    rows[r].center_y};
        s.heading = rows[r].heading;
        s.half_depth = kVertSlotDepth / 2.0;
        s.half_width = kVertSlotWidth / 2.0;
        w.slots.push_back(s);
      }
    const int goal = static_cast<int>(rng.below(w.slots.size()));
    w.goal_index = goal;
    w.goal_lane.center_y = rows[goal / kVertCols].lane_y;
  } else {
    w.world_min = {-36.0, -9.0};
    w.world_max = {36.0, 6.0};
    for (int c = 0; c < kParSlots; ++c) {
      Slot s;
      s.center = {-(kParSlots - 1) * kParSlotLength / 2.0 + c * kParSlotLength,
                  -kLaneWidth / 2.0 - kParSlotDepth / 2.0};
      s.heading = 0.0;
      s.half_depth = kParSlotLength / 2.0;  // along heading
      s.half_width = kParSlotDepth / 2.0;
      w.slots.push_back(s);
    }
    const int goal = static_cast<int>(rng.below(w.slots.size()));
    w.goal_index = goal;
    w.goal_lane.center_y = 0.0;
  }

  Slot& gslot = w.slots[w.goal_index];
  w.goal = {gslot.center.x, gslot.center.y, gslot.heading, desc.kind};

  for (int i = 0; i < static_cast<int>(w.slots.size()); ++i) {
    if (i == w.goal_index) continue;
    if (rng.chance(desc.occupancy)) {
      w.slots[i].occupied = true;
      w.static_vehicles.push_back(parked_car_box(w.slots[i]));
    }
  }

  // ego spawn: lane-aligned on the near-side approach line, before the goal
  const double toward_lane = w.goal_lane.center_y >= w.goal.y ? 1.0 : -1.0;
  const double near_off = desc.kind == SlotKind::kVertical
                              ? kNearLineOffsetVertical
                              : kNearLineOffsetParallel;
  const double line_y = w.goal_lane.center_y - toward_lane * near_off;
  const double lateral = std::fabs(line_y - w.goal.y);
  const double dir = rng.chance(0.5) ? 1.0 : -1.0;
  const double dmin = std::max(4.0, std::sqrt(lateral * lateral + 1.0));
  const double d = rng.uniform(dmin, 10.0);
  const double x_off = std::sqrt(std::max(0.0, d * d - lateral * lateral));
  w.ego.pose = {w.goal.x - dir * x_off, line_y, dir > 0.0 ? 0.0 : kPi};
  w.ego.v = 0.0;
  w.ego.gear = Gear::kForward;

  // pedestrians in the lane band near the goal
  const int ped_count =
      desc.pedestrian_count >= 0
          ? std::min(desc.pedestrian_count, kMaxPedestrians)
          : static_cast<int>(rng.below(5));
  const OrientedBox spawn_keepout = ego_footprint(w.ego.pose).inflated(1.0);
  const OrientedBox goal_keepout = gslot.box().inflated(0.3);
  int placed = 0;
  int guard = 0;
  while (placed < ped_count && guard++ < 200) {
    Vec2 pos = {w.goal.x + rng.uniform(-9.0, 9.0),
                w.goal_lane.center_y + rng.uniform(-3.2, 3.2)};
    bool bad = spawn_keepout.contains(pos) || goal_keepout.contains(pos);
    for (const auto& box : w.static_vehicles)
      bad = bad || box.inflated(0.4).contains(pos);
    if (bad) continue;
    Pedestrian& p = w.pedestrians[placed];
    p.present = true;
    p.pos = pos;
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const double speed = rng.uniform(0.3, 1.4);
    p.vel = {speed * std::cos(ang), speed * std::sin(ang)};
    p.acc = {0.0, 0.0};
    ++placed;
  }
  return w;
}

double position_error(const VehiclePose& pose, const GoalSlot& goal) {
  return distance(pose.position(), goal.position());
}

double orientation_error_deg(const VehiclePose& pose, const GoalSlot& goal) {
  return yaw_difference(pose.psi, goal.psi) * 180.0 / kPi;
}

ScenarioDesc load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  ScenarioDesc d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("scenario line missing '=': " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "seed") d.seed = std::stoull(val);
    else if (key == "kind") d.kind = parse_slot_kind(val);
    else if (key == "pedestrians") d.pedestrian_count = std::stoi(val);
    else if (key == "occupancy") d.occupancy = std::stod(val);
    else throw std::runtime_error("unknown scenario key: " + key);
  }
  return d;
}

void save_scenario(const ScenarioDesc& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << "seed = " << d.seed << "\n";
  out << "kind = " << slot_kind_name(d.kind) << "\n";
  out << "pedestrians = " << d.pedestrian_count << "\n";
  out << "occupancy = " << d.occupancy << "\n";
}

}  // namespace park
