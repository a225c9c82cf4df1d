#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ndem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// 6-DoF pose. Angles follow the terrain-following convention used by the
/// robot model: yaw about +z, pitch positive nose-up, roll positive when the
/// left side is raised.
struct Pose {
  Vec3 position = Vec3::Zero();
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  /// Rotation taking body-frame vectors to the world frame.
  Mat3 rotation() const {
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
            Eigen::AngleAxisd(-pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
  }

  Vec3 to_world(const Vec3& body) const { return rotation() * body + position; }
  Vec3 to_body(const Vec3& world) const {
    return rotation().transpose() * (world - position);
  }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.position == b.position && a.roll == b.roll && a.pitch == b.pitch &&
           a.yaw == b.yaw;
  }
};

}  // namespace ndem
