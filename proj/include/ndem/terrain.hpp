#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ndem/grid.hpp"
#include "ndem/pose.hpp"

namespace ndem {

/// Dense terrain heightmap. Cell (x, y) covers the world square
/// [origin + (x, y) * resolution, origin + (x + 1, y + 1) * resolution).
struct HeightField {
  double resolution = 0.04;
  Vec2 origin = Vec2::Zero();
  GridD heights;

  HeightField() = default;
  HeightField(int width_cells, int height_cells, double resolution, Vec2 origin,
              double fill = 0.0);

  int width_cells() const noexcept { return heights.width(); }
  int height_cells() const noexcept { return heights.height(); }
  Vec2 extent() const {
    return {width_cells() * resolution, height_cells() * resolution};
  }

  /// Cell containing a world point, if inside the field.
  std::optional<std::array<int, 2>> cell_at(const Vec2& p) const;
  bool contains(const Vec2& p) const { return cell_at(p).has_value(); }

  /// Nearest-cell height; throws BoundaryError outside the field.
  double height_at(const Vec2& p) const;
  /// Nearest-cell height, or nullopt outside the field.
  std::optional<double> try_height_at(const Vec2& p) const;
  /// Bilinear interpolation between cell centers (clamped at the border).
  /// Throws BoundaryError outside the field.
  double height_bilinear(const Vec2& p) const;

  Vec2 cell_center(int x, int y) const {
    return origin + Vec2((x + 0.5) * resolution, (y + 0.5) * resolution);
  }

  /// Throws DataError when the invariants (finite heights, positive
  /// resolution, non-empty grid) do not hold.
  void validate() const;
};

enum class FeatureKind { flat, staircase, slope, corridor, obstacle };

const char* feature_name(FeatureKind kind);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

struct TerrainSpec {
  double extent_x = 20.0;
  double extent_y = 20.0;
  double resolution = 0.04;
  double base_height = 0.0;
  Range height_range{-0.5, 2.0};

  int flat_regions = 2;
  int staircases = 3;
  int slopes = 2;
  int corridors = 3;
  int obstacles = 20;

  Range flat_size{1.5, 3.0};
  Range stair_rise{0.12, 0.20};
  Range stair_run{0.25, 0.40};
  Range stair_steps{3, 6};
  Range stair_width{1.5, 3.0};
  Range slope_grade{0.10, 0.35};
  Range slope_length{1.0, 2.5};
  Range slope_width{1.5, 3.0};
  Range corridor_width{1.4, 2.0};
  Range corridor_length{2.0, 3.5};
  Range wall_height{0.5, 1.5};
  Range obstacle_height{0.1, 1.0};
  Range obstacle_radius{0.2, 0.8};

  /// When > 0, tall features (walls and obstacles) keep clear of the circle
  /// of this radius around the map center, and corridors straddle it. This is
  /// where the default trajectory runs.
  double path_radius = 5.0;
  double path_clearance = 0.6;

  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// One stamped primitive, kept for summaries and tests.
struct PlacedFeature {
  FeatureKind kind;
  Vec2 center;
  double yaw = 0.0;
  /// Staircases: rise per step and step count; slopes: grade; obstacles and
  /// walls: height.
  double param_a = 0.0;
  double param_b = 0.0;
};

struct GeneratedTerrain {
  HeightField field;
  std::vector<PlacedFeature> features;

  int count(FeatureKind kind) const;
};

/// Composes a terrain on a fixed grid centered on the world origin by stamping
/// feature primitives in family order (flat, slope, staircase, corridor,
/// obstacle); later stamps overwrite earlier ones.
GeneratedTerrain generate_terrain(const TerrainSpec& spec);

/// Reads a key = value terrain spec. Unknown keys and malformed values throw
/// ConfigError.
TerrainSpec parse_terrain_spec(std::istream& in);
TerrainSpec load_terrain_spec(const std::string& path);

/// Square patch of round(size / resolution) cells centered at `center`,
/// sampled by nearest-cell lookup.
GridD extract_patch(const HeightField& field, const Vec2& center, double size,
                    double resolution);

struct EdgeParams {
  double smoothing_sigma = 1.0;  // cells
  double low_ratio = 0.10;
  double high_ratio = 0.20;
};

/// Canny-style binary edge map of a height patch.
GridU8 edge_map(const GridD& patch, const EdgeParams& params = {});

struct RobotConfig {
  /// Feet sit at (+-half_length, +-half_width) in the heading frame.
  double half_length = 0.20;
  double half_width = 0.12;
  double clearance = 0.0;
  double mount_height = 0.50;
};

/// Sensor pose of a robot standing at `position` facing `heading`: body height
/// is the mean terrain height under the feet plus clearance, roll and pitch
/// come from a least-squares plane through the four feet, and the sensor sits
/// mount_height above the body origin.
Pose footprint_pose(const HeightField& field, const Vec2& position, double heading,
                    const RobotConfig& robot = {});

}  // namespace ndem
