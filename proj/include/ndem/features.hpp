#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ndem/grid.hpp"
#include "ndem/lidar.hpp"
#include "ndem/pose.hpp"

namespace ndem {

/// Square robot-centric grid. The origin is the world position of the corner
/// of cell (0, 0), kept as an integer cell index so that it is always an exact
/// multiple of the resolution.
struct GridSpec {
  int cells = 125;
  double resolution = 0.04;
  std::int64_t origin_x = 0;  // in cells
  std::int64_t origin_y = 0;

  Vec2 origin() const { return {origin_x * resolution, origin_y * resolution}; }
  /// Grid whose center cell contains `body`.
  static GridSpec centered_on(const Vec2& body, int cells, double resolution);

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Per-frame aggregates of the points falling into each cell.
struct FrameFeatures {
  GridSpec grid;
  Grid<std::uint32_t> count;
  GridD sum_z;
  GridD sum_z2;
  GridD z_max;
  GridD z_min;

  explicit FrameFeatures(const GridSpec& spec = {});
};

struct RasterizeOptions {
  /// When set, points with |z - reference| > band are dropped as outliers.
  std::optional<double> z_reference;
  double band = 2.0;
};

/// Bins points into cells floor((p - origin) / resolution); out-of-grid points
/// are dropped.
FrameFeatures rasterize(const PointCloud& cloud, const GridSpec& grid,
                        const RasterizeOptions& options = {});

struct DecayConfig {
  double gamma = 0.90;
  double c_max = 100.0;

  /// gamma = 1 and no cap: the map reproduces batch statistics exactly.
  static DecayConfig disabled() { return {1.0, std::numeric_limits<double>::infinity()}; }
};

/// Rolling per-cell statistics. All statistics are 64-bit; `frames` is the
/// decayed number of frames that observed the cell and weights the extrema
/// statistics.
class MaintainedFeatureMap {
 public:
  explicit MaintainedFeatureMap(const GridSpec& grid = {}, const DecayConfig& decay = {});

  const GridSpec& grid() const noexcept { return grid_; }
  const DecayConfig& decay() const noexcept { return decay_; }
  int cells() const noexcept { return grid_.cells; }

  GridD count;
  GridD mean;
  GridD var;
  GridD max_mean;
  GridD max_var;
  GridD min_mean;
  GridD min_var;
  GridD frames;

  bool observed(int x, int y) const { return frames(x, y) >= 1.0; }

 private:
  GridSpec grid_;
  DecayConfig decay_;
};

/// Shifts the window by a whole number of cells so `body` lies in the center
/// cell. Surviving cells move verbatim; entering cells are zero.
MaintainedFeatureMap recenter(const MaintainedFeatureMap& map, const Vec2& body);
/// Same, to an explicit target grid (must share cells and resolution).
MaintainedFeatureMap recenter_to(const MaintainedFeatureMap& map, const GridSpec& target);

/// Folds a frame into the map in place. Only cells with new points change:
/// counts decay first, then the running mean and variance of heights, maxima
/// and minima absorb the frame. Throws AlignmentError on GridSpec mismatch.
void integrate_inplace(MaintainedFeatureMap& map, const FrameFeatures& frame);
MaintainedFeatureMap integrate(const MaintainedFeatureMap& map, const FrameFeatures& frame);

/// Count update alone: C <- min(C_max, gamma * C + c) where c > 0; F likewise
/// with one frame.
MaintainedFeatureMap decay_counts(const MaintainedFeatureMap& map, const FrameFeatures& frame);

/// Half-open cell rectangle [x, x + width) x [y, y + height).
struct CellRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Fraction of cells in `region` with at least one observation. Throws
/// DomainError for an empty region or one that leaves the grid.
double observation_rate(const MaintainedFeatureMap& map, const CellRect& region);
double observation_rate(const MaintainedFeatureMap& map);

constexpr int kFeatureChannels = 7;

enum Channel : int {
  kCount = 0,
  kMeanZ = 1,
  kVarZ = 2,
  kMeanMax = 3,
  kVarMax = 4,
  kMeanMin = 5,
  kVarMin = 6,
};

struct NormalizationConfig {
  /// Heights are expressed relative to this value (meters).
  double height_reference = 0.0;
  /// Count channel divisor. Unset: the map's C_max, or 100 when C_max is
  /// infinite.
  std::optional<double> count_scale;
};

/// Network input: 7 x H x W, channel-major, 32-bit.
struct FeatureTensor {
  int height = 0;
  int width = 0;
  std::vector<float> data;
  double height_reference = 0.0;
  double count_scale = 1.0;

  FeatureTensor() = default;
  FeatureTensor(int h, int w) : height(h), width(w), data(std::size_t(kFeatureChannels) * h * w, 0.0f) {}

  float& at(int channel, int x, int y) {
    return data[(std::size_t(channel) * height + y) * width + x];
  }
  float at(int channel, int x, int y) const {
    return data[(std::size_t(channel) * height + y) * width + x];
  }
};

/// Count / scale, heights shifted by the reference on observed cells only,
/// variances clamped at zero. Throws DataError on non-finite cells.
FeatureTensor to_network_input(const MaintainedFeatureMap& map, const NormalizationConfig& norm);

/// Inverse of to_network_input for the seven exported channels (F is rebuilt
/// as 1 on observed cells).
MaintainedFeatureMap from_network_input(const FeatureTensor& tensor, const GridSpec& grid,
                                        const DecayConfig& decay = {});

}  // namespace ndem
