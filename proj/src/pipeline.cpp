#include "ndem/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "ndem/errors.hpp"

namespace ndem {

int MappingConfig::cells() const { return static_cast<int>(std::lround(patch_size / resolution)); }

MappingConfig default_mapping_config(const HeightField& field) {
  MappingConfig c;
  c.trajectory.center = field.origin + 0.5 * field.extent();
  c.resolution = field.resolution;
  return c;
}

MappingSession::MappingSession(const HeightField& field, const MappingConfig& config)
    : field_(field),
      config_(config),
      state_(start_trajectory(field, config.trajectory, config.seed)),
      scan_rng_(config.seed ^ 0x9e3779b97f4a7c15ull),
      map_(GridSpec::centered_on(state_.reported_pose.position.head<2>(), config.cells(),
                                 config.resolution),
           config.decay) {
  config_.lidar.validate();
}

double MappingSession::height_reference() const {
  return state_.reported_pose.position.z() - config_.trajectory.robot.mount_height;
}

MappingSession::Step MappingSession::step() {
  state_ = advance_trajectory(field_, state_, config_.dt, config_.trajectory);
  Step out;
  out.cloud = scan(field_, state_, config_.lidar, scan_rng_);

  const auto start = std::chrono::steady_clock::now();
  map_ = recenter(map_, state_.reported_pose.position.head<2>());
  RasterizeOptions opts;
  opts.z_reference = height_reference();
  opts.band = config_.outlier_band;
  const FrameFeatures frame = rasterize(out.cloud, map_.grid(), opts);
  integrate_inplace(map_, frame);
  const auto stop = std::chrono::steady_clock::now();

  out.preprocess_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  out.observation_rate = observation_rate(map_);
  return out;
}

FeatureTensor MappingSession::network_input() const {
  NormalizationConfig norm;
  norm.height_reference = height_reference();
  return to_network_input(map_, norm);
}

GridD MappingSession::ground_truth() const {
  const GridSpec& g = map_.grid();
  const double side = g.cells * g.resolution;
  const Vec2 center = g.origin() + Vec2::Constant(0.5 * side);
  return extract_patch(field_, center, side, g.resolution);
}

DatasetRecord MappingSession::record(double rate) const {
  DatasetRecord r;
  r.x = network_input();
  const GridD truth = ground_truth();
  r.y_h = GridF(truth.width(), truth.height());
  for (std::size_t i = 0; i < truth.size(); ++i) r.y_h[i] = static_cast<float>(truth[i]);
  r.y_e = edge_map(truth, config_.edges);
  const int n = map_.cells();
  r.observed = GridU8(n, n, 0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) r.observed(x, y) = map_.observed(x, y) ? 1 : 0;
  }
  const Pose& p = state_.reported_pose;
  r.pose = {p.position.x(), p.position.y(), p.position.z(), p.roll, p.pitch, p.yaw};
  r.observation_rate = static_cast<float>(rate);
  return r;
}

CollectStats collect(const HeightField& field, const MappingConfig& config, int frames,
                     double min_obs_rate,
                     const std::function<void(const DatasetRecord&)>& sink) {
  if (frames < 0) throw DomainError("frame count must be non-negative");
  CollectStats stats;
  if (frames == 0) return stats;
  MappingSession session(field, config);
  double kept_rate_sum = 0.0;
  double rate_sum = 0.0;
  double ms_sum = 0.0;
  for (int i = 0; i < frames; ++i) {
    const auto step = session.step();
    ++stats.frames;
    rate_sum += step.observation_rate;
    ms_sum += step.preprocess_ms;
    stats.max_preprocess_ms = std::max(stats.max_preprocess_ms, step.preprocess_ms);
    if (!filter_frame(step.observation_rate, min_obs_rate)) {
      ++stats.dropped;
      continue;
    }
    ++stats.kept;
    kept_rate_sum += step.observation_rate;
    sink(session.record(step.observation_rate));
  }
  stats.mean_rate = rate_sum / stats.frames;
  stats.mean_preprocess_ms = ms_sum / stats.frames;
  stats.mean_kept_rate = stats.kept > 0 ? kept_rate_sum / stats.kept : 0.0;
  return stats;
}

}  // namespace ndem
