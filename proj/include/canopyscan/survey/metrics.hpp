#pragma once

#include "canopyscan/common/raster.hpp"

namespace canopyscan::survey {

inline constexpr double kPsnrCap = 100.0;

struct EvalMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double psnr = kPsnrCap;  // dB
  double ssim = 1.0;
};

/// Pixel metrics between a generated raster and its reference, both in the
/// same physical units. `data_range` is the channel's physical span (1 for
/// reflectance, thermal_max - thermal_min for degrees C); it sets the PSNR
/// peak and the SSIM constants.
///
/// SSIM: 11x11 Gaussian window (sigma 1.5), population statistics, K1 = 0.01,
/// K2 = 0.03, averaged over fully-contained windows only. Rasters smaller
/// than the window on either axis throw DimensionError, as does a shape
/// mismatch.
EvalMetrics eval_metrics(const Raster& generated, const Raster& reference, double data_range);

double ssim(const Raster& a, const Raster& b, double data_range);

}  // namespace canopyscan::survey
