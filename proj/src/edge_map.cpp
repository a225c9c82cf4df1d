#include <cmath>
#include <numbers>
#include <vector>

#include "ndem/terrain.hpp"

namespace ndem {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

GridD gaussian_blur(const GridD& in, double sigma) {
  if (!(sigma > 0.0)) return in;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int w = in.width();
  const int h = in.height();
  GridD tmp(w, h);
  GridD out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * in(clampi(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(x, clampi(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

GridU8 edge_map(const GridD& patch, const EdgeParams& params) {
  const int w = patch.width();
  const int h = patch.height();
  GridU8 edges(w, h, 0);
  if (patch.empty()) return edges;

  double lo = patch[0];
  double hi = patch[0];
  for (double v : patch.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  if (!(range > 0.0)) return edges;

  // Normalize by dynamic range, then snap to a 2^-30 lattice so that
  // constant offsets (which perturb the last bits of h - lo) give identical maps.
  GridD norm(w, h);
  for (std::size_t i = 0; i < patch.size(); ++i) {
    norm[i] = std::nearbyint((patch[i] - lo) / range * 0x1.0p30) * 0x1.0p-30;
  }
  const GridD smooth = gaussian_blur(norm, params.smoothing_sigma);

  GridD mag(w, h);
  Grid<int> dir(w, h);
  double max_mag = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto s = [&](int dx, int dy) {
        return smooth(clampi(x + dx, 0, w - 1), clampi(y + dy, 0, h - 1));
      };
      const double gx = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
      const double gy = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
      const double m = std::hypot(gx, gy);
      mag(x, y) = m;
      max_mag = std::max(max_mag, m);
      // Quantize the gradient direction to 0, 45, 90 or 135 degrees.
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      dir(x, y) = angle < 22.5 || angle >= 157.5 ? 0 : angle < 67.5 ? 1 : angle < 112.5 ? 2 : 3;
    }
  }
  if (!(max_mag > 0.0)) return edges;

  // Non-maximum suppression; ties go to the cell further along the gradient.
  static constexpr int kOffsets[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  GridD thin(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(x, y);
      if (m <= 0.0) continue;
      const int dx = kOffsets[dir(x, y)][0];
      const int dy = kOffsets[dir(x, y)][1];
      const auto at = [&](int xx, int yy) { return mag.contains(xx, yy) ? mag(xx, yy) : 0.0; };
      if (m > at(x + dx, y + dy) && m >= at(x - dx, y - dy)) thin(x, y) = m;
    }
  }

  const double high = params.high_ratio * max_mag;
  const double low = params.low_ratio * max_mag;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(x, y) >= high && !edges(x, y)) {
        edges(x, y) = 1;
        stack.emplace_back(x, y);
      }
    }
  }
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (!edges.contains(nx, ny) || edges(nx, ny) || thin(nx, ny) < low || thin(nx, ny) <= 0.0) {
          continue;
        }
        edges(nx, ny) = 1;
        stack.emplace_back(nx, ny);
      }
    }
  }
  return edges;
}

}  // namespace ndem
