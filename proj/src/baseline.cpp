#include "ndem/baseline.hpp"

#include <cmath>
#include <limits>

#include "ndem/errors.hpp"

namespace ndem {

GridD naive_height(const MaintainedFeatureMap& map) {
  const int n = map.cells();
  GridD out(n, n, std::numeric_limits<double>::quiet_NaN());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (map.observed(x, y)) out(x, y) = map.mean(x, y);
    }
  }
  return out;
}

GridD inpaint_iterative(const GridD& sparse, int iterations) {
  std::size_t empty = 0;
  for (double v : sparse.values()) empty += std::isnan(v) ? 1 : 0;
  if (empty == sparse.size()) throw DomainError("inpaint_iterative: map has no observed cells");

  GridD current = sparse;
  const int w = sparse.width();
  const int h = sparse.height();
  static constexpr int kNeighbors[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (int it = 0; it < iterations && empty > 0; ++it) {
    GridD next = current;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!std::isnan(current(x, y))) continue;
        double sum = 0.0;
        int n = 0;
        for (const auto& d : kNeighbors) {
          const int nx = x + d[0];
          const int ny = y + d[1];
          if (!current.contains(nx, ny) || std::isnan(current(nx, ny))) continue;
          sum += current(nx, ny);
          ++n;
        }
        if (n == 0) continue;
        next(x, y) = sum / n;
        --empty;
      }
    }
    current = std::move(next);
  }
  return current;
}

}  // namespace ndem
