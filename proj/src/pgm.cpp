#include "ndem/pgm.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "ndem/errors.hpp"

namespace ndem {

void write_pgm(const GridD& grid, double lo, double hi, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "P5\n" << grid.width() << ' ' << grid.height() << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<unsigned char> row(static_cast<std::size_t>(grid.width()));
  for (int y = grid.height() - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double v = grid(x, y);
      const double t = std::isfinite(v) ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(255.0 * t));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace ndem
