#include "ndem/terrain.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "ndem/errors.hpp"
#include "ndem/rng.hpp"

namespace ndem {

HeightField::HeightField(int width_cells, int height_cells, double res, Vec2 org,
                         double fill)
    : resolution(res), origin(std::move(org)), heights(width_cells, height_cells, fill) {}

std::optional<std::array<int, 2>> HeightField::cell_at(const Vec2& p) const {
  const double fx = std::floor((p.x() - origin.x()) / resolution);
  const double fy = std::floor((p.y() - origin.y()) / resolution);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_cells() && fy < height_cells())) {
    return std::nullopt;
  }
  return std::array<int, 2>{static_cast<int>(fx), static_cast<int>(fy)};
}

std::optional<double> HeightField::try_height_at(const Vec2& p) const {
  const auto cell = cell_at(p);
  if (!cell) return std::nullopt;
  return heights((*cell)[0], (*cell)[1]);
}

double HeightField::height_at(const Vec2& p) const {
  const auto h = try_height_at(p);
  if (!h) {
    std::ostringstream os;
    os << "point (" << p.x() << ", " << p.y() << ") lies outside the height field";
    throw BoundaryError(os.str());
  }
  return *h;
}

double HeightField::height_bilinear(const Vec2& p) const {
  if (!contains(p)) {
    std::ostringstream os;
    os << "point (" << p.x() << ", " << p.y() << ") lies outside the height field";
    throw BoundaryError(os.str());
  }
  const double fx = (p.x() - origin.x()) / resolution - 0.5;
  const double fy = (p.y() - origin.y()) / resolution - 0.5;
  const int w = width_cells();
  const int h = height_cells();
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  double tx = fx - x0;
  double ty = fy - y0;
  if (x0 < 0) { x0 = 0; tx = 0.0; }
  if (y0 < 0) { y0 = 0; ty = 0.0; }
  if (x0 >= w - 1) { x0 = w - 1; tx = 0.0; }
  if (y0 >= h - 1) { y0 = h - 1; ty = 0.0; }
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double top = heights(x0, y0) + tx * (heights(x1, y0) - heights(x0, y0));
  const double bottom = heights(x0, y1) + tx * (heights(x1, y1) - heights(x0, y1));
  return top + ty * (bottom - top);
}

void HeightField::validate() const {
  if (!(resolution > 0.0)) throw DataError("height field resolution must be positive");
  if (width_cells() < 1 || height_cells() < 1) {
    throw DataError("height field must have at least one cell");
  }
  for (double v : heights.values()) {
    if (!std::isfinite(v)) throw DataError("height field contains non-finite heights");
  }
}

const char* feature_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::flat: return "flat region";
    case FeatureKind::staircase: return "staircase";
    case FeatureKind::slope: return "slope";
    case FeatureKind::corridor: return "corridor";
    case FeatureKind::obstacle: return "obstacle";
  }
  return "unknown";
}

int GeneratedTerrain::count(FeatureKind kind) const {
  int n = 0;
  for (const auto& f : features) n += f.kind == kind ? 1 : 0;
  return n;
}

namespace {

void check_range(const Range& r, const char* name, bool positive) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max) {
    throw ConfigError(std::string("range '") + name + "' is empty or non-finite");
  }
  if (positive && !(r.min > 0.0)) {
    throw ConfigError(std::string("range '") + name + "' must be positive");
  }
}

}  // namespace

void TerrainSpec::validate() const {
  if (!(extent_x > 0.0) || !(extent_y > 0.0)) throw ConfigError("extent must be positive");
  if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
  if (flat_regions < 0 || staircases < 0 || slopes < 0 || corridors < 0 || obstacles < 0) {
    throw ConfigError("feature counts must be non-negative");
  }
  check_range(height_range, "height_range", false);
  check_range(flat_size, "flat_size", true);
  check_range(stair_rise, "stair_rise", true);
  check_range(stair_run, "stair_run", true);
  check_range(stair_steps, "stair_steps", true);
  check_range(stair_width, "stair_width", true);
  check_range(slope_grade, "slope_grade", false);
  check_range(slope_length, "slope_length", true);
  check_range(slope_width, "slope_width", true);
  check_range(corridor_width, "corridor_width", true);
  check_range(corridor_length, "corridor_length", true);
  check_range(wall_height, "wall_height", false);
  check_range(obstacle_height, "obstacle_height", false);
  check_range(obstacle_radius, "obstacle_radius", true);
  if (base_height < height_range.min || base_height > height_range.max) {
    throw ConfigError("base_height lies outside height_range");
  }
  if (path_radius < 0.0 || path_clearance < 0.0) {
    throw ConfigError("path_radius and path_clearance must be non-negative");
  }
}

namespace {

constexpr int kMaxPlacementAttempts = 400;
constexpr double kWallThickness = 0.2;
constexpr double kSlopePlateau = 1.0;
constexpr double kPathBand = 3.0;
constexpr double kCorridorClearance = 0.3;

/// A primitive in its local frame: u along yaw, v to the left. Returns the
/// stamped height at a local coordinate, or nullopt when outside.
struct Primitive {
  PlacedFeature placed;
  double half_u = 0.0;
  double half_v = 0.0;
  bool tall = false;
  /// Overrides TerrainSpec::path_clearance when set (corridors straddle the
  /// path and only need to clear the robot body).
  std::optional<double> clearance;
  std::function<std::optional<double>(double u, double v)> height;

  double bounding_radius() const { return std::hypot(half_u, half_v); }
};

class Composer {
 public:
  Composer(const TerrainSpec& spec, HeightField& field, Rng& rng)
      : spec_(spec), field_(field), rng_(rng) {}

  double draw(const Range& r) { return rng_.uniform(r.min, r.max); }
  int draw_int(const Range& r) {
    return static_cast<int>(rng_.uniform_int(static_cast<std::int64_t>(std::lround(r.min)),
                                              static_cast<std::int64_t>(std::lround(r.max))));
  }

  /// Places `prim` at a random pose that fits in the field (and keeps tall
  /// primitives off the path), stamps it, and records it.
  void place(Primitive prim, bool on_path, std::vector<PlacedFeature>& out) {
    const char* name = feature_name(prim.placed.kind);
    const Vec2 lo = field_.origin;
    const Vec2 hi = field_.origin + field_.extent();
    const double r = prim.bounding_radius();
    if (2.0 * r > hi.x() - lo.x() || 2.0 * r > hi.y() - lo.y()) {
      throw PlacementError(name, std::string("extent too small to place ") + name);
    }
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      Vec2 center;
      double yaw = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec2 mid = 0.5 * (lo + hi);
      if (spec_.path_radius > 0.0) {
        const double theta = rng_.uniform(0.0, 2.0 * std::numbers::pi);
        const double radial =
            on_path ? spec_.path_radius
                    : spec_.path_radius + rng_.uniform(-kPathBand, kPathBand);
        center = mid + radial * Vec2(std::cos(theta), std::sin(theta));
        if (on_path) yaw = theta + 0.5 * std::numbers::pi;
      } else {
        center = Vec2(rng_.uniform(lo.x() + r, hi.x() - r), rng_.uniform(lo.y() + r, hi.y() - r));
      }
      if (center.x() - r < lo.x() || center.x() + r > hi.x() || center.y() - r < lo.y() ||
          center.y() + r > hi.y()) {
        continue;
      }
      prim.placed.center = center;
      prim.placed.yaw = yaw;
      if (prim.tall && spec_.path_radius > 0.0 && blocks_path(prim)) continue;
      stamp(prim);
      out.push_back(prim.placed);
      return;
    }
    throw PlacementError(name, std::string("could not place ") + name +
                                   " without blocking the trajectory");
  }

 private:
  template <typename Fn>
  void for_each_cell(const Primitive& prim, Fn&& fn) const {
    const double r = prim.bounding_radius();
    const Vec2& c = prim.placed.center;
    const double res = field_.resolution;
    const int x0 = std::max(0, static_cast<int>(std::floor((c.x() - r - field_.origin.x()) / res)));
    const int x1 = std::min(field_.width_cells() - 1,
                            static_cast<int>(std::floor((c.x() + r - field_.origin.x()) / res)));
    const int y0 = std::max(0, static_cast<int>(std::floor((c.y() - r - field_.origin.y()) / res)));
    const int y1 = std::min(field_.height_cells() - 1,
                            static_cast<int>(std::floor((c.y() + r - field_.origin.y()) / res)));
    const double cs = std::cos(prim.placed.yaw);
    const double sn = std::sin(prim.placed.yaw);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 d = field_.cell_center(x, y) - c;
        const double u = cs * d.x() + sn * d.y();
        const double v = -sn * d.x() + cs * d.y();
        if (std::abs(u) > prim.half_u || std::abs(v) > prim.half_v) continue;
        if (auto h = prim.height(u, v)) fn(x, y, *h);
      }
    }
  }

  bool blocks_path(const Primitive& prim) const {
    const Vec2 mid = field_.origin + 0.5 * field_.extent();
    bool blocked = false;
    for_each_cell(prim, [&](int x, int y, double) {
      const double radial = (field_.cell_center(x, y) - mid).norm();
      if (std::abs(radial - spec_.path_radius) < prim.clearance.value_or(spec_.path_clearance)) {
        blocked = true;
      }
    });
    return blocked;
  }

  void stamp(const Primitive& prim) {
    for_each_cell(prim, [&](int x, int y, double h) { field_.heights(x, y) = h; });
  }

  const TerrainSpec& spec_;
  HeightField& field_;
  Rng& rng_;
};

Primitive make_flat(Composer& comp, const TerrainSpec& spec) {
  Primitive p;
  p.placed.kind = FeatureKind::flat;
  p.half_u = 0.5 * comp.draw(spec.flat_size);
  p.half_v = 0.5 * comp.draw(spec.flat_size);
  const double base = spec.base_height;
  p.placed.param_a = base;
  p.height = [base](double, double) { return std::optional<double>(base); };
  return p;
}

/// Up-flight of `steps` levels, a landing at the top level, and a mirrored
/// down-flight. Level k (1-based) sits at base + k * rise.
Primitive make_staircase(Composer& comp, const TerrainSpec& spec) {
  Primitive p;
  p.placed.kind = FeatureKind::staircase;
  const double rise = comp.draw(spec.stair_rise);
  const double run = comp.draw(spec.stair_run);
  const int steps = comp.draw_int(spec.stair_steps);
  const double width = comp.draw(spec.stair_width);
  const double landing = std::max(run, 1.0);
  const double flight = (steps - 1) * run;
  p.half_u = flight + 0.5 * landing;
  p.half_v = 0.5 * width;
  p.placed.param_a = rise;
  p.placed.param_b = steps;
  const double base = spec.base_height;
  const double half_landing = 0.5 * landing;
  p.height = [=](double u, double) -> std::optional<double> {
    const double from_top = std::abs(u) - half_landing;  // distance into a flight
    int level = steps;
    if (from_top > 0.0) {
      level = steps - 1 - static_cast<int>(std::floor(from_top / run));
      if (level < 1) level = 1;
    }
    return base + level * rise;
  };
  return p;
}

/// Ramp up, plateau, ramp down.
Primitive make_slope(Composer& comp, const TerrainSpec& spec) {
  Primitive p;
  p.placed.kind = FeatureKind::slope;
  const double grade = comp.draw(spec.slope_grade);
  const double length = comp.draw(spec.slope_length);
  const double width = comp.draw(spec.slope_width);
  p.half_u = length + 0.5 * kSlopePlateau;
  p.half_v = 0.5 * width;
  p.placed.param_a = grade;
  const double base = spec.base_height;
  p.height = [=](double u, double) -> std::optional<double> {
    const double into_ramp = std::max(0.0, std::abs(u) - 0.5 * kSlopePlateau);
    return base + grade * (length - into_ramp);
  };
  return p;
}

/// Two parallel walls; the floor between them is left untouched.
Primitive make_corridor(Composer& comp, const TerrainSpec& spec) {
  Primitive p;
  p.placed.kind = FeatureKind::corridor;
  p.tall = true;
  p.clearance = kCorridorClearance;
  const double gap = comp.draw(spec.corridor_width);
  const double length = comp.draw(spec.corridor_length);
  const double wall = comp.draw(spec.wall_height);
  p.half_u = 0.5 * length;
  p.half_v = 0.5 * gap + kWallThickness;
  p.placed.param_a = wall;
  p.placed.param_b = gap;
  const double base = spec.base_height;
  const double inner = 0.5 * gap;
  p.height = [=](double, double v) -> std::optional<double> {
    if (std::abs(v) < inner) return std::nullopt;
    return base + wall;
  };
  return p;
}

/// Star-shaped polygon with 5 to 9 jittered vertices.
Primitive make_obstacle(Composer& comp, const TerrainSpec& spec, Rng& rng) {
  Primitive p;
  p.placed.kind = FeatureKind::obstacle;
  p.tall = true;
  const double radius = comp.draw(spec.obstacle_radius);
  const double height = comp.draw(spec.obstacle_height);
  const int n = static_cast<int>(rng.uniform_int(5, 9));
  std::vector<Vec2> poly;
  poly.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = (i + rng.uniform(-0.3, 0.3)) * 2.0 * std::numbers::pi / n;
    const double r = radius * rng.uniform(0.5, 1.0);
    poly.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  p.half_u = radius;
  p.half_v = radius;
  p.placed.param_a = height;
  const double base = spec.base_height;
  p.height = [poly = std::move(poly), base, height](double u, double v) -> std::optional<double> {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[j];
      if ((a.y() > v) != (b.y() > v) &&
          u < (b.x() - a.x()) * (v - a.y()) / (b.y() - a.y()) + a.x()) {
        inside = !inside;
      }
    }
    if (!inside) return std::nullopt;
    return base + height;
  };
  return p;
}

}  // namespace

GeneratedTerrain generate_terrain(const TerrainSpec& spec) {
  spec.validate();
  const int w = std::max(1, static_cast<int>(std::lround(spec.extent_x / spec.resolution)));
  const int h = std::max(1, static_cast<int>(std::lround(spec.extent_y / spec.resolution)));
  const Vec2 origin(-(w / 2) * spec.resolution, -(h / 2) * spec.resolution);

  GeneratedTerrain out;
  out.field = HeightField(w, h, spec.resolution, origin, spec.base_height);
  Rng rng(spec.seed);
  Composer comp(spec, out.field, rng);

  for (int i = 0; i < spec.flat_regions; ++i) comp.place(make_flat(comp, spec), false, out.features);
  for (int i = 0; i < spec.slopes; ++i) comp.place(make_slope(comp, spec), false, out.features);
  for (int i = 0; i < spec.staircases; ++i) {
    comp.place(make_staircase(comp, spec), false, out.features);
  }
  for (int i = 0; i < spec.corridors; ++i) comp.place(make_corridor(comp, spec), true, out.features);
  for (int i = 0; i < spec.obstacles; ++i) {
    comp.place(make_obstacle(comp, spec, rng), false, out.features);
  }

  for (double& v : out.field.heights.values()) {
    v = std::clamp(v, spec.height_range.min, spec.height_range.max);
  }
  return out;
}

GridD extract_patch(const HeightField& field, const Vec2& center, double size,
                    double resolution) {
  if (!(size > 0.0) || !(resolution > 0.0)) {
    throw DomainError("patch size and resolution must be positive");
  }
  const int n = static_cast<int>(std::lround(size / resolution));
  if (n < 1) throw DomainError("patch must contain at least one cell");
  const Vec2 corner = center - Vec2::Constant(0.5 * n * resolution);
  const Vec2 far = corner + Vec2::Constant(n * resolution);
  const Vec2 lo = field.origin;
  const Vec2 hi = field.origin + field.extent();
  // Small slack so patches aligned exactly with the field edge are accepted.
  const double eps = 1e-9 * std::max(1.0, hi.cwiseAbs().maxCoeff());
  if (corner.x() < lo.x() - eps || corner.y() < lo.y() - eps || far.x() > hi.x() + eps ||
      far.y() > hi.y() + eps) {
    std::ostringstream os;
    os << "patch of " << size << " m at (" << center.x() << ", " << center.y()
       << ") exceeds the height field bounds";
    throw BoundaryError(os.str());
  }
  GridD patch(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Vec2 p = corner + Vec2((x + 0.5) * resolution, (y + 0.5) * resolution);
      patch(x, y) = field.height_at(p);
    }
  }
  return patch;
}

Pose footprint_pose(const HeightField& field, const Vec2& position, double heading,
                    const RobotConfig& robot) {
  const double cs = std::cos(heading);
  const double sn = std::sin(heading);
  const std::array<Vec2, 4> local{Vec2(robot.half_length, robot.half_width),
                                  Vec2(robot.half_length, -robot.half_width),
                                  Vec2(-robot.half_length, robot.half_width),
                                  Vec2(-robot.half_length, -robot.half_width)};
  double sum_z = 0.0;
  double sum_uz = 0.0;
  double sum_vz = 0.0;
  double sum_uu = 0.0;
  double sum_vv = 0.0;
  for (const Vec2& f : local) {
    const Vec2 world = position + Vec2(cs * f.x() - sn * f.y(), sn * f.x() + cs * f.y());
    if (!field.contains(world)) {
      std::ostringstream os;
      os << "foot at (" << world.x() << ", " << world.y() << ") lies outside the height field";
      throw BoundaryError(os.str());
    }
    const double z = field.height_bilinear(world);
    sum_z += z;
    sum_uz += f.x() * z;
    sum_vz += f.y() * z;
    sum_uu += f.x() * f.x();
    sum_vv += f.y() * f.y();
  }
  // The foot layout is symmetric, so the normal equations decouple.
  const double mean = 0.25 * sum_z;
  const double slope_u = sum_uu > 0.0 ? sum_uz / sum_uu : 0.0;
  const double slope_v = sum_vv > 0.0 ? sum_vz / sum_vv : 0.0;

  Pose pose;
  pose.yaw = heading;
  pose.pitch = std::atan(slope_u);
  pose.roll = std::atan(slope_v / std::sqrt(1.0 + slope_u * slope_u));
  pose.position = Vec3(position.x(), position.y(), mean + robot.clearance + robot.mount_height);
  return pose;
}

}  // namespace ndem
