#pragma once

#include <numbers>
#include <vector>

#include "ndem/pose.hpp"
#include "ndem/rng.hpp"
#include "ndem/terrain.hpp"

namespace ndem {

struct LidarModel {
  int channels = 16;
  double vfov_min = -15.0 * std::numbers::pi / 180.0;  // radians
  double vfov_max = 15.0 * std::numbers::pi / 180.0;
  double horizontal_resolution = 0.4 * std::numbers::pi / 180.0;  // radians/step
  double max_range = 30.0;  // meters
  double rate_hz = 10.0;
  /// Half-width of the i.i.d. uniform noise added to every point coordinate.
  double point_noise = 0.02;
  /// Bisection iterations after the coarse march (step = half a field cell).
  int bisection_iterations = 10;

  int azimuth_steps() const;
  double channel_elevation(int channel) const;
  /// Throws ConfigError on invalid parameters.
  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;  // odometry frame
  double stamp = 0.0;        // seconds
  Pose reported_pose;        // sensor pose the points were expressed with
};

struct OdometryNoise {
  double translation = 0.02;  // meters, per axis
  double rotation = 0.04;     // radians, per Euler axis
  /// Accumulate offsets as a random walk instead of drawing them per frame.
  bool drift = false;
};

struct TrajectoryConfig {
  /// Closed circular loop around `center`.
  Vec2 center = Vec2::Zero();
  double radius = 5.0;
  Range speed{0.0, 1.0};  // m/s
  /// Half-width of the uniform roll/pitch vibration applied to the true pose.
  double vibration = 0.01;
  OdometryNoise odometry;
  RobotConfig robot;
};

struct TrajectoryState {
  Pose true_pose;
  Pose reported_pose;
  double path = 0.0;  // meters travelled along the loop
  double time = 0.0;  // seconds
  Rng rng;
  /// Accumulated offsets for drift mode (translation xyz, roll, pitch, yaw).
  Vec3 drift_translation = Vec3::Zero();
  Vec3 drift_rotation = Vec3::Zero();
};

/// Trajectory state at path parameter 0, with poses computed from the terrain.
TrajectoryState start_trajectory(const HeightField& field, const TrajectoryConfig& config,
                                 std::uint64_t seed);

/// Advances the path parameter by v * dt with v ~ Uniform(speed), recomputes
/// the footprint pose, applies vibration, and draws a new reported pose.
/// Throws BoundaryError when the robot would leave the field.
TrajectoryState advance_trajectory(const HeightField& field, const TrajectoryState& state,
                                   double dt, const TrajectoryConfig& config);

/// Reported pose = true pose composed with i.i.d. uniform offsets per axis.
Pose perturb_odometry(const Pose& true_pose, Rng& rng, const OdometryNoise& noise = {});

/// One sweep from the true pose. Hits are expressed in the odometry frame via
/// the reported pose, then get uniform noise per coordinate from `rng`.
PointCloud scan(const HeightField& field, const TrajectoryState& state, const LidarModel& model,
                Rng& rng);

}  // namespace ndem
