#pragma once

// Independent reference implementations used only by tests.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <vector>

#include "canopyscan/tensor/tensor.hpp"

namespace oracle {

using canopyscan::tensor::Shape;
using canopyscan::tensor::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data) v = u(rng);
  return t;
}

/// Cross-correlation over an explicitly zero-padded copy of the input.
/// Accumulates channel, kernel row, kernel column; bias added last.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int stride, int pad) {
  const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int K = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int Hp = H + 2 * pad, Wp = W + 2 * pad;
  std::vector<double> xp(static_cast<std::size_t>(N) * C * Hp * Wp, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx)
          xp[((static_cast<std::size_t>(n) * C + c) * Hp + y + pad) * Wp + xx + pad] =
              x.data[((static_cast<std::size_t>(n) * C + c) * H + y) * W + xx];
  const int Ho = (Hp - kh) / stride + 1, Wo = (Wp - kw) / stride + 1;
  Tensor out({N, K, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j)
                acc += w.data[((static_cast<std::size_t>(k) * C + c) * kh + i) * kw + j] *
                       xp[((static_cast<std::size_t>(n) * C + c) * Hp + oy * stride + i) * Wp + ox * stride + j];
          if (bias) acc += bias->data[static_cast<std::size_t>(k)];
          out.data[((static_cast<std::size_t>(n) * K + k) * Ho + oy) * Wo + ox] = acc;
        }
  return out;
}

/// Scatter-accumulate transposed convolution: every input pixel adds
/// in * w into the output window it touches. Loop order (channel, kernel
/// row, kernel column, input row, input column, output channel).
inline Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, int stride,
                               int pad) {
  const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int K = w.shape[1], kh = w.shape[2], kw = w.shape[3];
  const int Ho = (H - 1) * stride - 2 * pad + kh, Wo = (W - 1) * stride - 2 * pad + kw;
  Tensor out({N, K, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < kh; ++i)
        for (int j = 0; j < kw; ++j)
          for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx)
              for (int k = 0; k < K; ++k) {
                const int oy = y * stride - pad + i, ox = xx * stride - pad + j;
                if (oy < 0 || oy >= Ho || ox < 0 || ox >= Wo) continue;
                out.data[((static_cast<std::size_t>(n) * K + k) * Ho + oy) * Wo + ox] +=
                    x.data[((static_cast<std::size_t>(n) * C + c) * H + y) * W + xx] *
                    w.data[((static_cast<std::size_t>(c) * K + k) * kh + i) * kw + j];
              }
  if (bias)
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        for (int p = 0; p < Ho * Wo; ++p)
          out.data[(static_cast<std::size_t>(n) * K + k) * Ho * Wo + p] += bias->data[static_cast<std::size_t>(k)];
  return out;
}

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
