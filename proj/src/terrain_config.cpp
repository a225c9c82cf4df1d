#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "ndem/errors.hpp"
#include "ndem/terrain.hpp"

namespace ndem {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ConfigError("key '" + key + "': '" + t + "' is not a number");
  }
  return v;
}

Range parse_range(const std::string& key, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw ConfigError("key '" + key + "': expected 'min, max'");
  }
  return {parse_number(key, text.substr(0, comma)), parse_number(key, text.substr(comma + 1))};
}

int parse_count(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v < 0.0 || v != std::floor(v) || v > 1e6) {
    throw ConfigError("key '" + key + "': expected a non-negative integer");
  }
  return static_cast<int>(v);
}

}  // namespace

TerrainSpec parse_terrain_spec(std::istream& in) {
  TerrainSpec spec;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto num = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_number(k, v); };
  };
  const auto range = [](Range& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_range(k, v); };
  };
  const auto count = [](int& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_count(k, v); };
  };
  const std::map<std::string, Setter> setters{
      {"extent_x", num(spec.extent_x)},
      {"extent_y", num(spec.extent_y)},
      {"resolution", num(spec.resolution)},
      {"base_height", num(spec.base_height)},
      {"height_range", range(spec.height_range)},
      {"flat_regions", count(spec.flat_regions)},
      {"staircases", count(spec.staircases)},
      {"slopes", count(spec.slopes)},
      {"corridors", count(spec.corridors)},
      {"obstacles", count(spec.obstacles)},
      {"flat_size", range(spec.flat_size)},
      {"stair_rise", range(spec.stair_rise)},
      {"stair_run", range(spec.stair_run)},
      {"stair_steps", range(spec.stair_steps)},
      {"stair_width", range(spec.stair_width)},
      {"slope_grade", range(spec.slope_grade)},
      {"slope_length", range(spec.slope_length)},
      {"slope_width", range(spec.slope_width)},
      {"corridor_width", range(spec.corridor_width)},
      {"corridor_length", range(spec.corridor_length)},
      {"wall_height", range(spec.wall_height)},
      {"obstacle_height", range(spec.obstacle_height)},
      {"obstacle_radius", range(spec.obstacle_radius)},
      {"path_radius", num(spec.path_radius)},
      {"path_clearance", num(spec.path_clearance)},
      {"seed",
       [&spec](const std::string& k, const std::string& v) {
         spec.seed = static_cast<std::uint64_t>(parse_count(k, v));
       }},
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(key, line.substr(eq + 1));
  }
  spec.validate();
  return spec;
}

TerrainSpec load_terrain_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open terrain spec '" + path + "'");
  return parse_terrain_spec(in);
}

}  // namespace ndem
