#include "ndem/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ndem/errors.hpp"

namespace ndem {

GridSpec GridSpec::centered_on(const Vec2& body, int cells, double resolution) {
  GridSpec g;
  g.cells = cells;
  g.resolution = resolution;
  g.origin_x = static_cast<std::int64_t>(std::floor(body.x() / resolution)) - cells / 2;
  g.origin_y = static_cast<std::int64_t>(std::floor(body.y() / resolution)) - cells / 2;
  return g;
}

FrameFeatures::FrameFeatures(const GridSpec& spec)
    : grid(spec),
      count(spec.cells, spec.cells, 0u),
      sum_z(spec.cells, spec.cells, 0.0),
      sum_z2(spec.cells, spec.cells, 0.0),
      z_max(spec.cells, spec.cells, 0.0),
      z_min(spec.cells, spec.cells, 0.0) {}

FrameFeatures rasterize(const PointCloud& cloud, const GridSpec& grid,
                        const RasterizeOptions& options) {
  FrameFeatures f(grid);
  const Vec2 origin = grid.origin();
  const double inv = 1.0 / grid.resolution;
  for (const Vec3& p : cloud.points) {
    if (options.z_reference && std::abs(p.z() - *options.z_reference) > options.band) continue;
    const double fx = std::floor((p.x() - origin.x()) * inv);
    const double fy = std::floor((p.y() - origin.y()) * inv);
    if (!(fx >= 0.0 && fy >= 0.0 && fx < grid.cells && fy < grid.cells)) continue;
    const std::size_t i = f.count.index(static_cast<int>(fx), static_cast<int>(fy));
    const double z = p.z();
    if (f.count[i] == 0) {
      f.z_max[i] = z;
      f.z_min[i] = z;
    } else {
      f.z_max[i] = std::max(f.z_max[i], z);
      f.z_min[i] = std::min(f.z_min[i], z);
    }
    ++f.count[i];
    f.sum_z[i] += z;
    f.sum_z2[i] += z * z;
  }
  return f;
}

MaintainedFeatureMap::MaintainedFeatureMap(const GridSpec& grid, const DecayConfig& decay)
    : count(grid.cells, grid.cells, 0.0),
      mean(grid.cells, grid.cells, 0.0),
      var(grid.cells, grid.cells, 0.0),
      max_mean(grid.cells, grid.cells, 0.0),
      max_var(grid.cells, grid.cells, 0.0),
      min_mean(grid.cells, grid.cells, 0.0),
      min_var(grid.cells, grid.cells, 0.0),
      frames(grid.cells, grid.cells, 0.0),
      grid_(grid),
      decay_(decay) {}

MaintainedFeatureMap recenter_to(const MaintainedFeatureMap& map, const GridSpec& target) {
  const GridSpec& src = map.grid();
  if (target.cells != src.cells || target.resolution != src.resolution) {
    throw AlignmentError("recenter target must share cell count and resolution");
  }
  if (target == src) return map;
  MaintainedFeatureMap out(target, map.decay());
  const std::int64_t dx = target.origin_x - src.origin_x;
  const std::int64_t dy = target.origin_y - src.origin_y;
  const int n = src.cells;
  if (std::abs(dx) >= n || std::abs(dy) >= n) return out;
  GridD MaintainedFeatureMap::*const layers[] = {
      &MaintainedFeatureMap::count,    &MaintainedFeatureMap::mean,
      &MaintainedFeatureMap::var,      &MaintainedFeatureMap::max_mean,
      &MaintainedFeatureMap::max_var,  &MaintainedFeatureMap::min_mean,
      &MaintainedFeatureMap::min_var,  &MaintainedFeatureMap::frames};
  const int x0 = static_cast<int>(std::max<std::int64_t>(0, -dx));
  const int x1 = static_cast<int>(std::min<std::int64_t>(n, n - dx));
  const int y0 = static_cast<int>(std::max<std::int64_t>(0, -dy));
  const int y1 = static_cast<int>(std::min<std::int64_t>(n, n - dy));
  for (const auto layer : layers) {
    const GridD& from = map.*layer;
    GridD& to = out.*layer;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        to(x, y) = from(x + static_cast<int>(dx), y + static_cast<int>(dy));
      }
    }
  }
  return out;
}

MaintainedFeatureMap recenter(const MaintainedFeatureMap& map, const Vec2& body) {
  return recenter_to(map, GridSpec::centered_on(body, map.grid().cells, map.grid().resolution));
}

namespace {

void check_aligned(const MaintainedFeatureMap& map, const FrameFeatures& frame) {
  if (!(map.grid() == frame.grid)) {
    std::ostringstream os;
    os << "frame grid (origin " << frame.grid.origin_x << ", " << frame.grid.origin_y
       << ") does not match map grid (origin " << map.grid().origin_x << ", "
       << map.grid().origin_y << ")";
    throw AlignmentError(os.str());
  }
}

/// Running mean/variance update with `weight` prior samples (already decayed)
/// absorbing `n` new samples with the given sums.
inline void absorb(double weight, double n, double sum, double sum_sq, double& mean, double& var) {
  const double total = weight + n;
  const double second = var + mean * mean;
  const double new_mean = (weight * mean + sum) / total;
  const double new_second = (weight * second + sum_sq) / total;
  mean = new_mean;
  var = new_second - new_mean * new_mean;
}

}  // namespace

void integrate_inplace(MaintainedFeatureMap& map, const FrameFeatures& frame) {
  check_aligned(map, frame);
  const double gamma = map.decay().gamma;
  const double c_max = map.decay().c_max;
  const std::size_t n = frame.count.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t c = frame.count[i];
    if (c == 0) continue;
    const double prior = gamma * map.count[i];
    absorb(prior, c, frame.sum_z[i], frame.sum_z2[i], map.mean[i], map.var[i]);
    map.count[i] = std::min(c_max, prior + c);

    const double prior_frames = gamma * map.frames[i];
    const double zmax = frame.z_max[i];
    const double zmin = frame.z_min[i];
    absorb(prior_frames, 1.0, zmax, zmax * zmax, map.max_mean[i], map.max_var[i]);
    absorb(prior_frames, 1.0, zmin, zmin * zmin, map.min_mean[i], map.min_var[i]);
    map.frames[i] = std::min(c_max, prior_frames + 1.0);
  }
}

MaintainedFeatureMap integrate(const MaintainedFeatureMap& map, const FrameFeatures& frame) {
  MaintainedFeatureMap out = map;
  integrate_inplace(out, frame);
  return out;
}

MaintainedFeatureMap decay_counts(const MaintainedFeatureMap& map, const FrameFeatures& frame) {
  check_aligned(map, frame);
  MaintainedFeatureMap out = map;
  const double gamma = map.decay().gamma;
  const double c_max = map.decay().c_max;
  for (std::size_t i = 0; i < frame.count.size(); ++i) {
    if (frame.count[i] == 0) continue;
    out.count[i] = std::min(c_max, gamma * map.count[i] + frame.count[i]);
    out.frames[i] = std::min(c_max, gamma * map.frames[i] + 1.0);
  }
  return out;
}

double observation_rate(const MaintainedFeatureMap& map, const CellRect& region) {
  if (region.width <= 0 || region.height <= 0) {
    throw DomainError("observation rate of an empty region is undefined");
  }
  if (region.x < 0 || region.y < 0 || region.x + region.width > map.cells() ||
      region.y + region.height > map.cells()) {
    throw DomainError("observation rate region leaves the grid");
  }
  std::size_t seen = 0;
  for (int y = region.y; y < region.y + region.height; ++y) {
    for (int x = region.x; x < region.x + region.width; ++x) seen += map.observed(x, y) ? 1 : 0;
  }
  return static_cast<double>(seen) / (static_cast<double>(region.width) * region.height);
}

double observation_rate(const MaintainedFeatureMap& map) {
  return observation_rate(map, CellRect{0, 0, map.cells(), map.cells()});
}

namespace {

double count_scale_for(const MaintainedFeatureMap& map, const NormalizationConfig& norm) {
  if (norm.count_scale) return *norm.count_scale;
  return std::isfinite(map.decay().c_max) ? map.decay().c_max : 100.0;
}

}  // namespace

FeatureTensor to_network_input(const MaintainedFeatureMap& map, const NormalizationConfig& norm) {
  const int n = map.cells();
  FeatureTensor t(n, n);
  t.height_reference = norm.height_reference;
  t.count_scale = count_scale_for(map, norm);
  if (!(t.count_scale > 0.0)) throw DataError("count scale must be positive");
  const double ref = norm.height_reference;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double values[kFeatureChannels] = {
          map.count(x, y),    map.mean(x, y),     map.var(x, y),    map.max_mean(x, y),
          map.max_var(x, y),  map.min_mean(x, y), map.min_var(x, y)};
      for (double v : values) {
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite feature at cell (" << x << ", " << y << ")";
          throw DataError(os.str());
        }
      }
      if (!(values[kCount] > 0.0)) continue;
      t.at(kCount, x, y) = static_cast<float>(values[kCount] / t.count_scale);
      for (int ch : {kMeanZ, kMeanMax, kMeanMin}) {
        t.at(ch, x, y) = static_cast<float>(values[ch] - ref);
      }
      for (int ch : {kVarZ, kVarMax, kVarMin}) {
        t.at(ch, x, y) = static_cast<float>(std::max(0.0, values[ch]));
      }
    }
  }
  return t;
}

MaintainedFeatureMap from_network_input(const FeatureTensor& tensor, const GridSpec& grid,
                                        const DecayConfig& decay) {
  if (tensor.height != grid.cells || tensor.width != grid.cells) {
    throw AlignmentError("tensor shape does not match grid");
  }
  MaintainedFeatureMap map(grid, decay);
  const double ref = tensor.height_reference;
  for (int y = 0; y < grid.cells; ++y) {
    for (int x = 0; x < grid.cells; ++x) {
      const double c = tensor.at(kCount, x, y);
      if (!(c > 0.0)) continue;
      map.count(x, y) = c * tensor.count_scale;
      map.mean(x, y) = tensor.at(kMeanZ, x, y) + ref;
      map.var(x, y) = tensor.at(kVarZ, x, y);
      map.max_mean(x, y) = tensor.at(kMeanMax, x, y) + ref;
      map.max_var(x, y) = tensor.at(kVarMax, x, y);
      map.min_mean(x, y) = tensor.at(kMeanMin, x, y) + ref;
      map.min_var(x, y) = tensor.at(kVarMin, x, y);
      map.frames(x, y) = 1.0;
    }
  }
  return map;
}

}  // namespace ndem
