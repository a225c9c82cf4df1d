#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "ndem/dataset.hpp"
#include "ndem/pipeline.hpp"
#include "support/stub_server.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ndem::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::map<std::string, double> read_kv(const std::string& path) {
  std::map<std::string, double> kv;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return kv;
}

int count_files(const fs::path& dir, const std::string& suffix) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) ++n;
  }
  return n;
}

/// Shared terrain for the slower commands, generated once.
const std::string& shared_terrain() {
  static TempDir dir;
  static const std::string path = [] {
    const auto p = dir.file("terrain.ndhf");
    REQUIRE(run({"generate", "--seed", "11", "--out", p}).code == 0);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("cli generate") {
  TempDir dir;
  const auto a = dir.file("a.ndhf");
  const auto b = dir.file("b.ndhf");
  const auto r = run({"generate", "--seed", "4", "--out", a});
  CHECK(r.code == 0);
  CHECK(fs::exists(a));
  CHECK(fs::exists(a + ".pgm"));
  CHECK(r.out.find("staircase: 3") != std::string::npos);
  CHECK(run({"generate", "--seed", "4", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));

  std::ofstream(dir.file("bad.spec")) << "obstacles = many\n";
  CHECK(run({"generate", "--spec", dir.file("bad.spec"), "--out", dir.file("c.ndhf")}).code == 2);
  std::ofstream(dir.file("unknown.spec")) << "wormholes = 3\n";
  CHECK(run({"generate", "--spec", dir.file("unknown.spec"), "--out", dir.file("c.ndhf")}).code == 2);
  CHECK(run({"generate", "--spec", dir.file("missing.spec"), "--out", dir.file("c.ndhf")}).code == 2);
  CHECK(run({"generate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"generate", "--frames", "notanumber", "--out", a}).code == 2);
}

TEST_CASE("cli collect") {
  TempDir dir;
  const auto& terrain = shared_terrain();
  SUBCASE("zero frames gives a header-only shard") {
    const auto s = dir.file("empty.ndem");
    CHECK(run({"collect", "--terrain", terrain, "--frames", "0", "--out", s}).code == 0);
    CHECK(fs::file_size(s) == 28u);
  }
  SUBCASE("impossible threshold keeps nothing") {
    const auto s = dir.file("none.ndem");
    const auto r = run({"collect", "--terrain", terrain, "--frames", "10", "--min-obs-rate", "1.01", "--out", s});
    CHECK(r.code == 0);
    CHECK(r.out.find("kept 0") != std::string::npos);
    CHECK(ndem::ShardReader(s).size() == 0u);
  }
  SUBCASE("kept records all pass the filter and runs are reproducible") {
    const auto a = dir.file("a.ndem");
    const auto b = dir.file("b.ndem");
    CHECK(run({"collect", "--terrain", terrain, "--frames", "25", "--seed", "3", "--out", a}).code == 0);
    CHECK(run({"collect", "--terrain", terrain, "--frames", "25", "--seed", "3", "--out", b}).code == 0);
    CHECK(slurp(a) == slurp(b));
    for (const auto& rec : ndem::read_shard(a)) CHECK(rec.observation_rate >= 0.25f);
  }
  SUBCASE("config file, overridden by flags") {
    const auto cfg = dir.file("run.ini");
    std::ofstream(cfg) << "frames = 7\nmin-obs-rate = 1.01\n";
    auto r = run({"collect", "--config", cfg, "--terrain", terrain, "--out", dir.file("c.ndem")});
    CHECK(r.out.find("frames 7 ") != std::string::npos);
    r = run({"collect", "--config", cfg, "--frames", "2", "--terrain", terrain, "--out", dir.file("c.ndem")});
    CHECK(r.out.find("frames 2 ") != std::string::npos);
  }
  SUBCASE("input errors") {
    CHECK(run({"collect", "--terrain", dir.file("missing.ndhf"), "--out", dir.file("x.ndem")}).code == 2);
    CHECK(run({"collect", "--terrain", terrain, "--resolution", "0.05", "--out", dir.file("x.ndem")}).code == 2);
    std::ofstream(dir.file("junk.ndhf")) << "not a terrain";
    CHECK(run({"collect", "--terrain", dir.file("junk.ndhf"), "--out", dir.file("x.ndem")}).code == 2);
  }
}

TEST_CASE("cli eval") {
  TempDir dir;
  const auto& terrain = shared_terrain();
  const auto shard = dir.file("s.ndem");
  REQUIRE(run({"collect", "--terrain", terrain, "--frames", "20", "--seed", "2", "--out", shard}).code == 0);

  SUBCASE("truth injected") {
    const auto report = dir.file("truth.txt");
    CHECK(run({"eval", "--source", "truth", "--shard", shard, "--out", report}).code == 0);
    const auto kv = read_kv(report + ".kv");
    CHECK(kv.at("patches") > 0);
    CHECK(kv.at("mean.mmae_cm") == 0.0);
    CHECK(kv.at("mean.mmgd") == 0.0);
    CHECK(kv.at("mean.ssim") == 1.0);
  }
  SUBCASE("baseline is deterministic") {
    CHECK(run({"eval", "--shard", shard, "--out", dir.file("a.txt")}).code == 0);
    CHECK(run({"eval", "--shard", shard, "--out", dir.file("b.txt")}).code == 0);
    CHECK(slurp(dir.file("a.txt.kv")) == slurp(dir.file("b.txt.kv")));
    CHECK(slurp(dir.file("a.txt")).find("mean over") != std::string::npos);
  }
  SUBCASE("endpoint source against the stub matches the reference plane") {
    StubServer server(StubServer::Mode::zeros);
    const auto ep = "127.0.0.1:" + std::to_string(server.port());
    CHECK(run({"eval", "--source", "endpoint", "--endpoint", ep, "--shard", shard, "--out", dir.file("e.txt")}).code == 0);
    CHECK(server.requests() == static_cast<int>(ndem::ShardReader(shard).size()));
  }
  SUBCASE("errors") {
    CHECK(run({"eval", "--shard", dir.file("missing.ndem")}).code == 2);
    CHECK(run({"eval", "--shard", shard, "--source", "oracle"}).code == 2);
    CHECK(run({"eval", "--shard", shard, "--source", "endpoint"}).code == 2);
    CHECK(run({"eval", "--shard", shard, "--source", "endpoint", "--endpoint", "127.0.0.1:1"}).code == 3);
  }
}

TEST_CASE("cli eval: baseline on flat ground is within 2 cm") {
  // Point noise (+-2 cm) at its default; odometry noise off. With the default
  // 0.04 rad tilt noise the far cells of a 5 m patch move by up to 10 cm per
  // frame and the flat-ground error is dominated by pose error instead.
  TempDir dir;
  ndem::HeightField field(500, 500, 0.04, ndem::Vec2(-10.0, -10.0), 0.3);
  auto cfg = ndem::default_mapping_config(field);
  cfg.trajectory.odometry = {0.0, 0.0, false};
  const auto shard = dir.file("flat.ndem");
  {
    ndem::ShardWriter writer(shard, 0.04f, 125, 125);
    ndem::collect(field, cfg, 40, 0.25, [&](const ndem::DatasetRecord& r) { writer.append(r); });
  }
  const auto report = dir.file("flat.txt");
  REQUIRE(run({"eval", "--shard", shard, "--out", report}).code == 0);
  const auto kv = read_kv(report + ".kv");
  CHECK(kv.at("patches") > 0);
  CHECK(kv.at("mean.mmae_cm") < 2.0);
}

TEST_CASE("cli generate: flat spec gives a constant field") {
  TempDir dir;
  const auto spec = dir.file("flat.spec");
  std::ofstream(spec) << "flat_regions = 0\nstaircases = 0\nslopes = 0\ncorridors = 0\nobstacles = 0\nbase_height = 0.3\n";
  const auto terrain = dir.file("flat.ndhf");
  REQUIRE(run({"generate", "--spec", spec, "--out", terrain}).code == 0);
  const auto field = ndem::read_height_field(terrain);
  for (double v : field.heights.values()) CHECK(v == 0.3);
}

TEST_CASE("cli run") {
  TempDir dir;
  const auto& terrain = shared_terrain();
  SUBCASE("zero steps") {
    const auto out = dir.file("zero");
    CHECK(run({"run", "--terrain", terrain, "--frames", "0", "--out", out}).code == 0);
    CHECK(count_files(out, "_height.ndhf") == 0);
  }
  SUBCASE("50 steps against a zero stub") {
    StubServer server(StubServer::Mode::zeros);
    const auto out = dir.file("live");
    const auto r = run({"run", "--terrain", terrain, "--steps", "50", "--endpoint",
                        "127.0.0.1:" + std::to_string(server.port()), "--out", out});
    CHECK(r.code == 0);
    CHECK(count_files(out, "_height.ndhf") == 50);
    CHECK(count_files(out, "_height.pgm") == 50);
    CHECK(count_files(out, "_sigma.pgm") == 50);
    std::ifstream log(fs::path(out) / "timing.log");
    std::string line;
    std::getline(log, line);  // header
    int rows = 0;
    double sum_ms = 0.0;
    while (std::getline(log, line)) {
      std::istringstream fields(line);
      int step;
      double pre;
      fields >> step >> pre;
      sum_ms += pre;
      ++rows;
    }
    CHECK(rows == 50);
    CHECK(sum_ms / rows < 5.0);
  }
  SUBCASE("endpoint failure mid-run keeps partial output") {
    StubServer server(StubServer::Mode::zeros);
    server.close_after(5);
    const auto out = dir.file("partial");
    const auto r = run({"run", "--terrain", terrain, "--steps", "20", "--endpoint",
                        "127.0.0.1:" + std::to_string(server.port()), "--out", out});
    CHECK(r.code == 3);
    CHECK(count_files(out, "_height.ndhf") == 5);
    CHECK(r.err.find("5 frames written") != std::string::npos);
  }
  SUBCASE("baseline source without an endpoint") {
    const auto out = dir.file("baseline");
    CHECK(run({"run", "--terrain", terrain, "--steps", "3", "--out", out}).code == 0);
    CHECK(count_files(out, "_height.ndhf") == 3);
  }
}
