#include "ndem/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "ndem/errors.hpp"

namespace ndem {

namespace {

void require_same_shape(const GridD& a, const GridD& b, const char* op) {
  if (!a.same_shape(b)) throw DomainError(std::string(op) + ": grids differ in shape");
}

void require_mask(const GridD& a, const EvalMask& mask, const char* op) {
  if (!a.same_shape(mask)) throw DomainError(std::string(op) + ": mask differs in shape");
}

/// Summed-area table with a zero guard row/column.
std::vector<std::int64_t> integral(const GridU8& g) {
  const int w = g.width();
  const int h = g.height();
  std::vector<std::int64_t> s(std::size_t(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < w; ++x) {
      row += g(x, y) ? 1 : 0;
      s[std::size_t(y + 1) * (w + 1) + x + 1] = s[std::size_t(y) * (w + 1) + x + 1] + row;
    }
  }
  return s;
}

EvalMask mask_from_observed(const GridU8& observed, double resolution, const CellRect& region,
                            const MaskParams& params) {
  const int w = observed.width();
  const int h = observed.height();
  const int half = static_cast<int>(std::lround(params.window / resolution)) / 2;
  const auto sat = integral(observed);
  const auto at = [&](int x, int y) { return sat[std::size_t(y) * (w + 1) + x]; };
  EvalMask mask(region.width, region.height, 0);
  for (int ry = 0; ry < region.height; ++ry) {
    for (int rx = 0; rx < region.width; ++rx) {
      const int cx = region.x + rx;
      const int cy = region.y + ry;
      const int x0 = std::max(0, cx - half);
      const int y0 = std::max(0, cy - half);
      const int x1 = std::min(w, cx + half + 1);
      const int y1 = std::min(h, cy + half + 1);
      const auto seen = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
      const auto total = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
      // seen / total < min_rate, without the division.
      mask(rx, ry) = static_cast<double>(seen) < params.min_rate * static_cast<double>(total) ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace

EvalMask build_mask(const MaintainedFeatureMap& map, const CellRect& region,
                    const MaskParams& params) {
  if (region.x < 0 || region.y < 0 || region.x + region.width > map.cells() ||
      region.y + region.height > map.cells()) {
    throw DomainError("mask region leaves the grid");
  }
  GridU8 observed(map.cells(), map.cells(), 0);
  for (int y = 0; y < map.cells(); ++y) {
    for (int x = 0; x < map.cells(); ++x) observed(x, y) = map.observed(x, y) ? 1 : 0;
  }
  return mask_from_observed(observed, map.grid().resolution, region, params);
}

EvalMask build_mask(const MaintainedFeatureMap& map, const MaskParams& params) {
  return build_mask(map, CellRect{0, 0, map.cells(), map.cells()}, params);
}

EvalMask build_mask(const GridU8& observed, double resolution, const MaskParams& params) {
  return mask_from_observed(observed, resolution,
                            CellRect{0, 0, observed.width(), observed.height()}, params);
}

double mmae(const GridD& pred, const GridD& truth, const EvalMask& mask) {
  require_same_shape(pred, truth, "mmae");
  require_mask(pred, mask, "mmae");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i]) continue;
    sum += std::abs(pred[i] - truth[i]);
    ++n;
  }
  if (n == 0) throw DomainError("mmae: every cell is masked");
  return 100.0 * sum / static_cast<double>(n);
}

double mmgd(const GridD& pred, const GridD& truth, const EvalMask& mask) {
  require_same_shape(pred, truth, "mmgd");
  require_mask(pred, mask, "mmgd");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y + 1 < pred.height(); ++y) {
    for (int x = 0; x + 1 < pred.width(); ++x) {
      if (mask(x, y)) continue;
      const double dx = (pred(x + 1, y) - pred(x, y)) - (truth(x + 1, y) - truth(x, y));
      const double dy = (pred(x, y + 1) - pred(x, y)) - (truth(x, y + 1) - truth(x, y));
      sum += std::sqrt(dx * dx + dy * dy);
      ++n;
    }
  }
  if (n == 0) throw DomainError("mmgd: every interior cell is masked");
  return sum / static_cast<double>(n);
}

double psnr(const GridD& pred, const GridD& truth, double peak) {
  require_same_shape(pred, truth, "psnr");
  if (pred.empty()) throw DomainError("psnr: empty grids");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(pred.size());
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

/// Separable Gaussian filter with truncated, renormalized border windows.
GridD window_mean(const GridD& in, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = in.width();
  const int h = in.height();
  GridD tmp(w, h);
  GridD out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int i = std::max(-radius, -x); i <= std::min(radius, w - 1 - x); ++i) {
        acc += kernel[i + radius] * in(x + i, y);
        norm += kernel[i + radius];
      }
      tmp(x, y) = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int i = std::max(-radius, -y); i <= std::min(radius, h - 1 - y); ++i) {
        acc += kernel[i + radius] * tmp(x, y + i);
        norm += kernel[i + radius];
      }
      out(x, y) = acc / norm;
    }
  }
  return out;
}

}  // namespace

double ssim(const GridD& pred, const GridD& truth, const SsimParams& params) {
  require_same_shape(pred, truth, "ssim");
  if (pred.empty()) throw DomainError("ssim: empty grids");
  const int radius = params.window / 2;
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (params.sigma * params.sigma));
  }
  const int w = pred.width();
  const int h = pred.height();
  GridD xx(w, h);
  GridD yy(w, h);
  GridD xy(w, h);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    xx[i] = pred[i] * pred[i];
    yy[i] = truth[i] * truth[i];
    xy[i] = pred[i] * truth[i];
  }
  const GridD mu_x = window_mean(pred, kernel);
  const GridD mu_y = window_mean(truth, kernel);
  const GridD e_xx = window_mean(xx, kernel);
  const GridD e_yy = window_mean(yy, kernel);
  const GridD e_xy = window_mean(xy, kernel);

  const double c1 = (params.k1 * params.peak) * (params.k1 * params.peak);
  const double c2 = (params.k2 * params.peak) * (params.k2 * params.peak);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double mxy = mu_x[i] * mu_y[i];
    const double mxx = mu_x[i] * mu_x[i];
    const double myy = mu_y[i] * mu_y[i];
    const double cov = e_xy[i] - mxy;
    const double vx = e_xx[i] - mxx;
    const double vy = e_yy[i] - myy;
    total += ((2.0 * mxy + c1) * (2.0 * cov + c2)) / ((mxx + myy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(pred.size());
}

namespace {

/// One densification pass: fills every empty cell that has an observed cell
/// in its row or column. Returns the number of cells filled.
std::size_t densify_pass(const GridD& src, GridD& dst) {
  const int w = src.width();
  const int h = src.height();
  constexpr int kNone = -1;
  Grid<int> left(w, h, kNone), right(w, h, kNone), up(w, h, kNone), down(w, h, kNone);
  for (int y = 0; y < h; ++y) {
    int last = kNone;
    for (int x = 0; x < w; ++x) {
      left(x, y) = last;
      if (!std::isnan(src(x, y))) last = x;
    }
    last = kNone;
    for (int x = w - 1; x >= 0; --x) {
      right(x, y) = last;
      if (!std::isnan(src(x, y))) last = x;
    }
  }
  for (int x = 0; x < w; ++x) {
    int last = kNone;
    for (int y = 0; y < h; ++y) {
      up(x, y) = last;
      if (!std::isnan(src(x, y))) last = y;
    }
    last = kNone;
    for (int y = h - 1; y >= 0; --y) {
      down(x, y) = last;
      if (!std::isnan(src(x, y))) last = y;
    }
  }

  std::size_t filled = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!std::isnan(src(x, y))) continue;
      double interp_sum = 0.0;
      double interp_weight = 0.0;
      double nearest = std::numeric_limits<double>::quiet_NaN();
      int nearest_dist = std::numeric_limits<int>::max();
      const auto one_sided = [&](double v, int dist) {
        if (dist < nearest_dist) {
          nearest_dist = dist;
          nearest = v;
        }
      };
      const int l = left(x, y), r = right(x, y), u = up(x, y), d = down(x, y);
      if (l != kNone && r != kNone) {
        const double a = src(l, y);
        const double b = src(r, y);
        const double span = r - l;
        interp_sum += (a + (b - a) * (x - l) / span) / span;
        interp_weight += 1.0 / span;
      } else if (l != kNone) {
        one_sided(src(l, y), x - l);
      } else if (r != kNone) {
        one_sided(src(r, y), r - x);
      }
      if (u != kNone && d != kNone) {
        const double a = src(x, u);
        const double b = src(x, d);
        const double span = d - u;
        interp_sum += (a + (b - a) * (y - u) / span) / span;
        interp_weight += 1.0 / span;
      } else if (u != kNone) {
        one_sided(src(x, u), y - u);
      } else if (d != kNone) {
        one_sided(src(x, d), d - y);
      }
      if (interp_weight > 0.0) {
        dst(x, y) = interp_sum / interp_weight;
      } else if (!std::isnan(nearest)) {
        dst(x, y) = nearest;
      } else {
        continue;
      }
      ++filled;
    }
  }
  return filled;
}

}  // namespace

GridD densify_bilinear(const GridD& sparse) {
  std::size_t empty = 0;
  for (double v : sparse.values()) empty += std::isnan(v) ? 1 : 0;
  if (empty == 0) return sparse;
  if (empty == sparse.size()) throw DomainError("densify_bilinear: map has no observed cells");
  GridD current = sparse;
  while (empty > 0) {
    GridD next = current;
    const std::size_t filled = densify_pass(current, next);
    if (filled == 0) throw DomainError("densify_bilinear: no progress");
    empty -= filled;
    current = std::move(next);
  }
  return current;
}

PatchMetrics evaluate_patch(const GridD& pred, const GridD& truth, const EvalMask& mask,
                            const EvalParams& params) {
  PatchMetrics m;
  m.mmae_cm = mmae(pred, truth, mask);
  m.mmgd = mmgd(pred, truth, mask);
  m.psnr_db = psnr(pred, truth, params.peak);
  m.ssim = ssim(pred, truth, params.ssim);
  return m;
}

PatchMetrics MetricReport::aggregate() const {
  PatchMetrics mean;
  if (patches.empty()) return mean;
  for (const auto& p : patches) {
    mean.mmae_cm += p.mmae_cm;
    mean.mmgd += p.mmgd;
    mean.psnr_db += p.psnr_db;
    mean.ssim += p.ssim;
  }
  const double n = static_cast<double>(patches.size());
  mean.mmae_cm /= n;
  mean.mmgd /= n;
  mean.psnr_db /= n;
  mean.ssim /= n;
  return mean;
}

void MetricReport::write_text(std::ostream& out) const {
  const auto line = [&out](const PatchMetrics& m) {
    out << "mMAE " << std::fixed << std::setprecision(3) << m.mmae_cm << " cm  mMGD "
        << std::setprecision(5) << m.mmgd << "  PSNR " << std::setprecision(2) << m.psnr_db
        << " dB  SSIM " << std::setprecision(4) << m.ssim << '\n';
  };
  for (std::size_t i = 0; i < patches.size(); ++i) {
    out << "patch " << i << ": ";
    line(patches[i]);
  }
  out << "mean over " << patches.size() << " patches: ";
  line(aggregate());
  out.unsetf(std::ios_base::floatfield);
}

void MetricReport::write_key_values(std::ostream& out) const {
  const auto block = [&out](const std::string& prefix, const PatchMetrics& m) {
    out << prefix << "mmae_cm=" << m.mmae_cm << '\n'
        << prefix << "mmgd=" << m.mmgd << '\n'
        << prefix << "psnr_db=" << m.psnr_db << '\n'
        << prefix << "ssim=" << m.ssim << '\n';
  };
  out << std::setprecision(17);
  out << "patches=" << patches.size() << '\n';
  block("mean.", aggregate());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    block("patch." + std::to_string(i) + ".", patches[i]);
  }
}

}  // namespace ndem
