#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ndem/features.hpp"
#include "ndem/grid.hpp"

namespace ndem {

/// 1 = masked (excluded from mMAE / mMGD), 0 = evaluated.
using EvalMask = GridU8;

struct MaskParams {
  double window = 1.0;     // meters, square, centered on the cell
  double min_rate = 0.5;   // cells whose window is observed below this are masked
};

/// Masks each cell of `region` whose surrounding window (clipped at the map
/// border) is less than `min_rate` observed.
EvalMask build_mask(const MaintainedFeatureMap& map, const CellRect& region,
                    const MaskParams& params = {});
EvalMask build_mask(const MaintainedFeatureMap& map, const MaskParams& params = {});
/// Same rule over an explicit observed grid (nonzero = observed).
EvalMask build_mask(const GridU8& observed, double resolution, const MaskParams& params = {});

/// Mean absolute error over unmasked cells, in centimeters.
double mmae(const GridD& pred, const GridD& truth, const EvalMask& mask);

/// Mean L2 norm of the forward-difference gradient difference over unmasked
/// cells, excluding the last row and column. Units: meters per cell.
double mmgd(const GridD& pred, const GridD& truth, const EvalMask& mask);

constexpr double kPsnrCap = 150.0;

/// 10 log10(peak^2 / MSE) over all cells, capped at kPsnrCap.
double psnr(const GridD& pred, const GridD& truth, double peak = 2.0);

struct SsimParams {
  double peak = 2.0;
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-windowed SSIM averaged over all cells; windows are truncated and
/// renormalized at the border.
double ssim(const GridD& pred, const GridD& truth, const SsimParams& params = {});

/// Fills NaN cells from the nearest observed cells along their row and
/// column: linear interpolation between bracketing cells, clamped to the
/// nearest value when only one side exists. Throws DomainError if every cell
/// is empty.
GridD densify_bilinear(const GridD& sparse);

struct PatchMetrics {
  double mmae_cm = 0.0;
  double mmgd = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct EvalParams {
  double peak = 2.0;
  SsimParams ssim;
};

PatchMetrics evaluate_patch(const GridD& pred, const GridD& truth, const EvalMask& mask,
                            const EvalParams& params = {});

struct MetricReport {
  std::vector<PatchMetrics> patches;

  /// Mean over patches (zero when empty).
  PatchMetrics aggregate() const;
  /// One line per patch followed by the aggregate line.
  void write_text(std::ostream& out) const;
  /// key=value lines: patches, mean.*, patch.<i>.*.
  void write_key_values(std::ostream& out) const;
};

}  // namespace ndem
