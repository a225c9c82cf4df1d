#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ndem/baseline.hpp"
#include "ndem/dataset.hpp"
#include "ndem/errors.hpp"
#include "ndem/metrics.hpp"
#include "ndem/pgm.hpp"
#include "ndem/pipeline.hpp"
#include "ndem/recon.hpp"
#include "ndem/terrain.hpp"

namespace ndem::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::uint64_t seed = 0;
  std::string spec;
  std::string terrain;
  std::string shard;
  std::string out;
  std::string endpoint;
  std::string source = "baseline";
  int frames = 500;
  double min_obs_rate = 0.25;
  double patch_size = 5.0;
  double resolution = 0.04;
  double mount_height = RobotConfig{}.mount_height;
  double render_lo = -0.5;
  double render_band = 2.0;
  int timeout_ms = 10000;
};

/// Height renders share one gray scale so frames can be diffed.
void render_height(const GridD& h, const Options& o, const std::string& path) {
  write_pgm(h, o.render_lo, o.render_lo + o.render_band, path);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

HeightField load_terrain(const Options& o) {
  require(!o.terrain.empty(), "--terrain is required");
  if (!fs::exists(o.terrain)) throw ConfigError("terrain file '" + o.terrain + "' does not exist");
  return read_height_field(o.terrain);
}

MappingConfig mapping_config(const HeightField& field, const Options& o) {
  MappingConfig c = default_mapping_config(field);
  require(o.resolution > 0.0, "--resolution must be positive");
  require(o.patch_size > 0.0, "--patch-size must be positive");
  if (std::abs(o.resolution - field.resolution) > 1e-12) {
    throw ConfigError("--resolution " + std::to_string(o.resolution) +
                      " does not match the terrain resolution " + std::to_string(field.resolution));
  }
  c.resolution = o.resolution;
  c.patch_size = o.patch_size;
  c.seed = o.seed;
  return c;
}

int cmd_generate(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  TerrainSpec spec = o.spec.empty() ? TerrainSpec{} : load_terrain_spec(o.spec);
  spec.seed = o.seed;
  const auto t = generate_terrain(spec);
  write_height_field(t.field, o.out);
  render_height(t.field.heights, o, o.out + ".pgm");
  const Vec2 ext = t.field.extent();
  out << "terrain " << o.out << ": " << t.field.width_cells() << " x " << t.field.height_cells()
      << " cells, " << ext.x() << " x " << ext.y() << " m at " << t.field.resolution << " m\n";
  for (auto kind : {FeatureKind::flat, FeatureKind::staircase, FeatureKind::slope,
                    FeatureKind::corridor, FeatureKind::obstacle}) {
    out << "  " << feature_name(kind) << ": " << t.count(kind) << '\n';
  }
  return kOk;
}

int cmd_collect(const Options& o, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.frames >= 0, "--frames must be non-negative");
  const HeightField field = load_terrain(o);
  const MappingConfig cfg = mapping_config(field, o);
  const auto n = static_cast<std::uint32_t>(cfg.cells());
  ShardWriter writer(o.out, static_cast<float>(cfg.resolution), n, n);
  const auto stats =
      collect(field, cfg, o.frames, o.min_obs_rate, [&](const DatasetRecord& r) { writer.append(r); });
  writer.finish();
  out << "frames " << stats.frames << "  kept " << stats.kept << "  dropped " << stats.dropped
      << '\n'
      << "mean observation rate (kept) " << std::fixed << std::setprecision(4)
      << stats.mean_kept_rate << "  (all frames) " << stats.mean_rate << '\n'
      << "preprocess ms mean " << std::setprecision(3) << stats.mean_preprocess_ms << "  max "
      << stats.max_preprocess_ms << '\n';
  out.unsetf(std::ios_base::floatfield);
  return kOk;
}

std::unique_ptr<Reconstructor> make_reconstructor(const Options& o) {
  if (o.source == "baseline") return std::make_unique<BaselineReconstructor>();
  if (o.source == "endpoint") {
    require(!o.endpoint.empty(), "--endpoint is required for --source endpoint");
    return std::make_unique<EndpointReconstructor>(Endpoint::parse(o.endpoint), o.timeout_ms);
  }
  throw ConfigError("unknown source '" + o.source + "'");
}

/// Height reference of a stored record: reported sensor z minus the mount.
double record_reference(const DatasetRecord& r, const Options& o) { return r.pose[2] - o.mount_height; }

int cmd_eval(const Options& o, std::ostream& out) {
  require(!o.shard.empty(), "--shard is required");
  if (!fs::exists(o.shard)) throw ConfigError("shard '" + o.shard + "' does not exist");
  ShardReader reader(o.shard);
  std::unique_ptr<Reconstructor> model;
  if (o.source != "truth" && o.source != "naive") model = make_reconstructor(o);

  MetricReport report;
  int skipped = 0;
  for (std::uint32_t i = 0; i < reader.size(); ++i) {
    DatasetRecord rec = reader.read(i);
    rec.x.height_reference = record_reference(rec, o);
    const int w = rec.y_h.width();
    const int h = rec.y_h.height();
    GridD truth(w, h);
    for (std::size_t k = 0; k < truth.size(); ++k) truth[k] = rec.y_h[k];

    GridD pred;
    if (o.source == "truth") {
      pred = truth;
    } else if (o.source == "naive") {
      GridD sparse(w, h, std::nan(""));
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (rec.observed(x, y)) sparse(x, y) = rec.x.at(kMeanZ, x, y) + rec.x.height_reference;
        }
      }
      bool any = false;
      for (auto v : rec.observed.values()) any = any || v;
      pred = any ? densify_bilinear(sparse) : GridD(w, h, rec.x.height_reference);
    } else {
      pred = model->reconstruct(rec.x).height;
    }

    const EvalMask mask = build_mask(rec.observed, reader.header().resolution);
    try {
      report.patches.push_back(evaluate_patch(pred, truth, mask));
    } catch (const DomainError&) {
      ++skipped;  // every cell masked
    }
  }

  if (o.out.empty()) {
    report.write_text(out);
  } else {
    std::ofstream text(o.out);
    report.write_text(text);
    std::ofstream kv(o.out + ".kv");
    report.write_key_values(kv);
    if (!text || !kv) throw Error("failed writing report '" + o.out + "'");
    const auto mean = report.aggregate();
    out << "evaluated " << report.patches.size() << " patches with " << o.source << ": mMAE "
        << mean.mmae_cm << " cm, mMGD " << mean.mmgd << ", PSNR " << mean.psnr_db << " dB, SSIM "
        << mean.ssim << '\n';
  }
  if (skipped > 0) out << "skipped " << skipped << " fully masked records\n";
  return kOk;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  require(!o.out.empty(), "--out is required");
  require(o.frames >= 0, "--frames must be non-negative");
  const HeightField field = load_terrain(o);
  const MappingConfig cfg = mapping_config(field, o);
  Options opts = o;
  if (o.source == "baseline" && !o.endpoint.empty()) opts.source = "endpoint";
  auto model = make_reconstructor(opts);
  fs::create_directories(o.out);

  std::ofstream log(fs::path(o.out) / "timing.log");
  log << "# step preprocess_ms inference_ms observation_rate\n";
  MappingSession session(field, cfg);
  int written = 0;
  for (int step = 0; step < o.frames; ++step) {
    const auto s = session.step();
    const FeatureTensor x = session.network_input();
    const auto t0 = std::chrono::steady_clock::now();
    ReconResult r;
    try {
      r = model->reconstruct(x);
    } catch (const EndpointError& e) {
      err << "endpoint failed at step " << step << ": " << e.what() << '\n'
          << "stopping; " << written << " frames written to " << o.out << '\n';
      return kEndpointError;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double infer_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    char stem[32];
    std::snprintf(stem, sizeof(stem), "frame_%05d", step);
    const fs::path base = fs::path(o.out) / stem;
    HeightField frame(r.height.width(), r.height.height(), cfg.resolution, session.map().grid().origin());
    frame.heights = r.height;
    write_height_field(frame, base.string() + "_height.ndhf");
    render_height(r.height, o, base.string() + "_height.pgm");
    GridD sigma = r.log_sigma;
    for (double& v : sigma.values()) v = std::exp(v);
    write_pgm(sigma, 0.0, 1.0, base.string() + "_sigma.pgm");
    ++written;

    log << step << ' ' << s.preprocess_ms << ' ' << infer_ms << ' ' << s.observation_rate << '\n';
  }
  out << "wrote " << written << " frames to " << o.out << " using " << model->name() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robot-centric elevation mapping: terrain, LiDAR simulation, datasets, evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");

  Options o;
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--spec", o.spec, "Terrain spec file (generate)");
  app.add_option("--terrain", o.terrain, "Terrain height field file");
  app.add_option("--shard", o.shard, "Dataset shard (eval)");
  app.add_option("--out", o.out, "Output path or directory");
  app.add_option("--endpoint", o.endpoint, "Reconstruction endpoint host:port");
  app.add_option("--source", o.source, "Prediction source for eval/run")
      ->check(CLI::IsMember({"baseline", "naive", "truth", "endpoint"}));
  app.add_option("--frames,--steps", o.frames, "Frames to simulate");
  app.add_option("--min-obs-rate", o.min_obs_rate, "Keep frames observed at least this much");
  app.add_option("--patch-size", o.patch_size, "Patch side in meters");
  app.add_option("--resolution", o.resolution, "Grid resolution in meters");
  app.add_option("--mount-height", o.mount_height, "Sensor height above the body (eval)");
  app.add_option("--timeout-ms", o.timeout_ms, "Endpoint connect/receive timeout");
  app.fallthrough();

  auto* generate = app.add_subcommand("generate", "Generate a terrain height field");
  auto* collect_cmd = app.add_subcommand("collect", "Simulate a trajectory and write a dataset shard");
  auto* eval = app.add_subcommand("eval", "Evaluate a prediction source on a shard");
  auto* run_cmd = app.add_subcommand("run", "Live mapping loop against a reconstructor");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (generate->parsed()) return cmd_generate(o, out);
    if (collect_cmd->parsed()) return cmd_collect(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (run_cmd->parsed()) return cmd_run(o, out, err);
  } catch (const EndpointError& e) {
    err << "endpoint error: " << e.what() << '\n';
    return kEndpointError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInputError;
}

}  // namespace ndem::cli
