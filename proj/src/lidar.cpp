#include "ndem/lidar.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "ndem/errors.hpp"

namespace ndem {

int LidarModel::azimuth_steps() const {
  return static_cast<int>(std::lround(2.0 * std::numbers::pi / horizontal_resolution));
}

double LidarModel::channel_elevation(int channel) const {
  if (channels == 1) return 0.5 * (vfov_min + vfov_max);
  return vfov_min + (vfov_max - vfov_min) * channel / (channels - 1);
}

void LidarModel::validate() const {
  if (channels < 1) throw ConfigError("lidar needs at least one channel");
  if (!(max_range > 0.0)) throw ConfigError("lidar max range must be positive");
  if (!(horizontal_resolution > 0.0)) throw ConfigError("horizontal resolution must be positive");
  if (vfov_min > vfov_max) throw ConfigError("vertical field of view is inverted");
  if (point_noise < 0.0) throw ConfigError("point noise must be non-negative");
  if (bisection_iterations < 0) throw ConfigError("bisection iterations must be non-negative");
}

Pose perturb_odometry(const Pose& true_pose, Rng& rng, const OdometryNoise& noise) {
  Pose out = true_pose;
  for (int i = 0; i < 3; ++i) out.position[i] += rng.uniform(-noise.translation, noise.translation);
  out.roll += rng.uniform(-noise.rotation, noise.rotation);
  out.pitch += rng.uniform(-noise.rotation, noise.rotation);
  out.yaw += rng.uniform(-noise.rotation, noise.rotation);
  return out;
}

namespace {

Pose loop_pose(const HeightField& field, double path, const TrajectoryConfig& config) {
  const double angle = config.radius > 0.0 ? path / config.radius : 0.0;
  const Vec2 position = config.center + config.radius * Vec2(std::cos(angle), std::sin(angle));
  return footprint_pose(field, position, angle + 0.5 * std::numbers::pi, config.robot);
}

void finish_state(const HeightField& field, TrajectoryState& s, const TrajectoryConfig& config) {
  s.true_pose = loop_pose(field, s.path, config);
  s.true_pose.roll += s.rng.uniform(-config.vibration, config.vibration);
  s.true_pose.pitch += s.rng.uniform(-config.vibration, config.vibration);
  if (config.odometry.drift) {
    const double t = config.odometry.translation;
    const double r = config.odometry.rotation;
    for (int i = 0; i < 3; ++i) s.drift_translation[i] += s.rng.uniform(-t, t);
    for (int i = 0; i < 3; ++i) s.drift_rotation[i] += s.rng.uniform(-r, r);
    s.reported_pose = s.true_pose;
    s.reported_pose.position += s.drift_translation;
    s.reported_pose.roll += s.drift_rotation[0];
    s.reported_pose.pitch += s.drift_rotation[1];
    s.reported_pose.yaw += s.drift_rotation[2];
  } else {
    s.reported_pose = perturb_odometry(s.true_pose, s.rng, config.odometry);
  }
}

}  // namespace

TrajectoryState start_trajectory(const HeightField& field, const TrajectoryConfig& config,
                                 std::uint64_t seed) {
  TrajectoryState s;
  s.rng = Rng(seed);
  finish_state(field, s, config);
  return s;
}

TrajectoryState advance_trajectory(const HeightField& field, const TrajectoryState& state,
                                   double dt, const TrajectoryConfig& config) {
  if (!(dt > 0.0)) throw DomainError("trajectory time step must be positive");
  TrajectoryState next = state;
  const double v = next.rng.uniform(config.speed.min, config.speed.max);
  next.path += v * dt;
  next.time += dt;
  finish_state(field, next, config);
  return next;
}

namespace {

class RayCaster {
 public:
  explicit RayCaster(const HeightField& field, int bisections)
      : field_(field), bisections_(bisections) {
    top_ = -std::numeric_limits<double>::infinity();
    for (double h : field.heights.values()) top_ = std::max(top_, h);
  }

  std::optional<Vec3> cast(const Vec3& o, const Vec3& d, double max_range) const {
    const auto start = field_.try_height_at(o.head<2>());
    if (!start || o.z() < *start) return std::nullopt;
    const double step = 0.5 * field_.resolution;
    double prev = 0.0;
    for (double t = step; t <= max_range + 1e-12; t += step) {
      const Vec3 p = o + t * d;
      if (d.z() >= 0.0 && p.z() > top_) return std::nullopt;
      const auto h = field_.try_height_at(p.head<2>());
      if (!h) return std::nullopt;
      if (p.z() < *h) return refine(o, d, prev, t);
      prev = t;
    }
    return std::nullopt;
  }

 private:
  bool below(const Vec3& o, const Vec3& d, double t) const {
    const Vec3 p = o + t * d;
    const auto h = field_.try_height_at(p.head<2>());
    return h && p.z() < *h;
  }

  /// Bisection on [above, below], then an exact intersection with the
  /// piecewise-constant surface inside the final bracket.
  Vec3 refine(const Vec3& o, const Vec3& d, double above, double under) const {
    for (int i = 0; i < bisections_; ++i) {
      const double mid = 0.5 * (above + under);
      (below(o, d, mid) ? under : above) = mid;
    }
    if (auto exact = exact_hit(o, d, above, under)) return *exact;
    return o + under * d;
  }

  /// Walks the cells crossed on [t0, t1]. A ray entering a cell whose top is
  /// above it hits the wall at the entry point; otherwise it may hit the top
  /// face inside the cell.
  std::optional<Vec3> exact_hit(const Vec3& o, const Vec3& d, double t0, double t1) const {
    const double res = field_.resolution;
    auto cell = field_.cell_at((o + t0 * d).head<2>());
    if (!cell) return std::nullopt;
    int cx = (*cell)[0];
    int cy = (*cell)[1];
    const int sx = d.x() > 0.0 ? 1 : -1;
    const int sy = d.y() > 0.0 ? 1 : -1;
    const auto boundary_t = [&](int c, int s, double org, double od, double comp) {
      if (comp == 0.0) return std::numeric_limits<double>::infinity();
      const double line = org + (s > 0 ? c + 1 : c) * res;
      return (line - od) / comp;
    };
    double next_x = boundary_t(cx, sx, field_.origin.x(), o.x(), d.x());
    double next_y = boundary_t(cy, sy, field_.origin.y(), o.y(), d.y());
    double enter = t0;
    bool first = true;
    for (int guard = 0; guard < 64 && enter <= t1; ++guard) {
      if (!field_.heights.contains(cx, cy)) return std::nullopt;
      const double hc = field_.heights(cx, cy);
      const double exit = std::min({next_x, next_y, t1});
      const double z_enter = o.z() + enter * d.z();
      if (!first && z_enter < hc) {
        return o + enter * d;
      }
      if (d.z() < 0.0) {
        const double t_top = (hc - o.z()) / d.z();
        if (t_top >= enter && t_top <= exit) {
          Vec3 p = o + t_top * d;
          p.z() = hc;
          return p;
        }
      }
      if (exit >= t1) break;
      first = false;
      enter = exit;
      if (next_x <= next_y) {
        cx += sx;
        next_x += res / std::abs(d.x());
      } else {
        cy += sy;
        next_y += res / std::abs(d.y());
      }
    }
    return std::nullopt;
  }

  const HeightField& field_;
  int bisections_;
  double top_;
};

}  // namespace

PointCloud scan(const HeightField& field, const TrajectoryState& state, const LidarModel& model,
                Rng& rng) {
  model.validate();
  PointCloud cloud;
  cloud.stamp = state.time;
  cloud.reported_pose = state.reported_pose;

  const RayCaster caster(field, model.bisection_iterations);
  const Mat3 true_rot = state.true_pose.rotation();
  const Mat3 rep_rot = state.reported_pose.rotation();
  const Vec3& true_org = state.true_pose.position;
  const Vec3& rep_org = state.reported_pose.position;
  const int steps = model.azimuth_steps();
  cloud.points.reserve(static_cast<std::size_t>(model.channels) * steps / 2);

  for (int ch = 0; ch < model.channels; ++ch) {
    const double el = model.channel_elevation(ch);
    const double ce = std::cos(el);
    const double se = std::sin(el);
    for (int k = 0; k < steps; ++k) {
      const double az = k * model.horizontal_resolution;
      const Vec3 dir_body(ce * std::cos(az), ce * std::sin(az), se);
      const Vec3 dir = true_rot * dir_body;
      const auto hit = caster.cast(true_org, dir, model.max_range);
      if (!hit) continue;
      const Vec3 in_sensor = true_rot.transpose() * (*hit - true_org);
      Vec3 p = rep_rot * in_sensor + rep_org;
      for (int i = 0; i < 3; ++i) p[i] += rng.uniform(-model.point_noise, model.point_noise);
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

}  // namespace ndem
