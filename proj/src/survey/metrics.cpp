#include "canopyscan/survey/metrics.hpp"

#include <array>
#include <cmath>

#include "canopyscan/common/errors.hpp"

namespace canopyscan::survey {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

std::array<double, kWin> gaussian_1d() {
  std::array<double, kWin> w{};
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    w[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

void check_shapes(const Raster& a, const Raster& b) {
  if (!a.same_shape(b))
    throw DimensionError("raster shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  if (a.size() == 0) throw DimensionError("empty rasters");
}

}  // namespace

double ssim(const Raster& a, const Raster& b, double data_range) {
  check_shapes(a, b);
  if (a.width < kWin || a.height < kWin)
    throw DimensionError("SSIM needs at least " + std::to_string(kWin) + "x" + std::to_string(kWin) + " pixels");
  static const auto g = gaussian_1d();
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + kWin <= a.height; ++y0) {
    for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (int j = 0; j < kWin; ++j) {
        for (int i = 0; i < kWin; ++i) {
          const double w = g[j] * g[i];
          const double va = a.at(x0 + i, y0 + j), vb = b.at(x0 + i, y0 + j);
          ma += w * va;
          mb += w * vb;
          aa += w * va * va;
          bb += w * vb * vb;
          ab += w * va * vb;
        }
      }
      const double var_a = aa - ma * ma, var_b = bb - mb * mb, cov = ab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  return total / windows;
}

EvalMetrics eval_metrics(const Raster& generated, const Raster& reference, double data_range) {
  check_shapes(generated, reference);
  if (!(data_range > 0)) throw ValidationError("data range must be positive");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const double d = generated.values[i] - reference.values[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(generated.size());
  EvalMetrics m;
  m.mae = abs_sum / n;
  const double mse = sq_sum / n;
  m.rmse = std::sqrt(mse);
  m.psnr = mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
  m.ssim = ssim(generated, reference, data_range);
  return m;
}

}  // namespace canopyscan::survey
