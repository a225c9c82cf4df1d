#pragma once

#include "ndem/features.hpp"
#include "ndem/grid.hpp"

namespace ndem {

/// E(Z) on observed cells, NaN elsewhere.
GridD naive_height(const MaintainedFeatureMap& map);

/// Jacobi hole filling: every iteration sets each empty cell that has filled
/// 4-neighbors to their mean, using the values from the previous iteration.
/// Stops when dense or after `iterations`; cells still unreached stay NaN.
/// Throws DomainError when the input has no filled cell.
GridD inpaint_iterative(const GridD& sparse, int iterations);

/// Iteration count that always reaches every cell of a grid.
inline int dense_iteration_cap(const GridD& g) { return g.width() + g.height(); }

}  // namespace ndem
