#pragma once

#include <cstdint>
#include <functional>

#include "ndem/dataset.hpp"
#include "ndem/features.hpp"
#include "ndem/lidar.hpp"
#include "ndem/terrain.hpp"

namespace ndem {

struct MappingConfig {
  TrajectoryConfig trajectory;
  LidarModel lidar;
  DecayConfig decay;
  double patch_size = 5.0;   // meters
  double resolution = 0.04;  // meters/cell
  double dt = 0.1;           // seconds per frame (10 Hz)
  double outlier_band = 2.0;
  EdgeParams edges;
  std::uint64_t seed = 0;

  int cells() const;
};

/// Trajectory config centered on the field with the default loop radius.
MappingConfig default_mapping_config(const HeightField& field);

/// Sequential sensor -> features loop over a simulated terrain.
class MappingSession {
 public:
  MappingSession(const HeightField& field, const MappingConfig& config);

  struct Step {
    PointCloud cloud;
    double preprocess_ms = 0.0;  // recenter + rasterize + integrate
    double observation_rate = 0.0;
  };

  /// Advances the robot one frame, scans, and folds the scan into the map.
  Step step();

  const MaintainedFeatureMap& map() const noexcept { return map_; }
  const TrajectoryState& state() const noexcept { return state_; }
  double height_reference() const;
  FeatureTensor network_input() const;
  /// Ground truth patch aligned cell-for-cell with the current map window.
  GridD ground_truth() const;
  DatasetRecord record(double observation_rate) const;

 private:
  const HeightField& field_;
  MappingConfig config_;
  TrajectoryState state_;
  Rng scan_rng_;
  MaintainedFeatureMap map_;
};

struct CollectStats {
  int frames = 0;
  int kept = 0;
  int dropped = 0;
  double mean_kept_rate = 0.0;
  double mean_rate = 0.0;
  double max_preprocess_ms = 0.0;
  double mean_preprocess_ms = 0.0;
};

/// Runs `frames` steps and hands every record passing filter_frame to `sink`.
CollectStats collect(const HeightField& field, const MappingConfig& config, int frames,
                     double min_obs_rate,
                     const std::function<void(const DatasetRecord&)>& sink);

}  // namespace ndem
