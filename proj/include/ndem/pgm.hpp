#pragma once

#include <string>

#include "ndem/grid.hpp"

namespace ndem {

/// 8-bit binary PGM; values map linearly from [lo, hi] to [0, 255] and clamp.
/// Row 0 of the image is the grid's last row so +y points up.
void write_pgm(const GridD& grid, double lo, double hi, const std::string& path);

}  // namespace ndem
