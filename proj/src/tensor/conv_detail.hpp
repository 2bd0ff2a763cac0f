#pragma once

// Per-sample / per-plane building blocks shared by the serial and OpenMP
// kernels. Work decomposition differs between the two; these routines do not.

#include <algorithm>
#include <cstddef>

#include "canopyscan/tensor/kernels.hpp"

namespace canopyscan::tensor::kernels::detail {

inline std::size_t patch_len(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.in_channels) * g.kernel_h * g.kernel_w;
}
inline std::size_t out_plane(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.out_h) * g.out_w;
}
inline std::size_t in_plane(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.in_h) * g.in_w;
}

// Output columns [lo, hi) whose tap at kernel offset `k` lands inside [0, extent).
inline void valid_range(int k, int pad, int stride, int extent, int out_extent, int& lo, int& hi) {
  // need 0 <= o*stride - pad + k <= extent - 1
  const int first = pad - k;
  lo = first <= 0 ? 0 : (first + stride - 1) / stride;
  const int last = extent - 1 + pad - k;
  hi = last < 0 ? 0 : std::min(out_extent, last / stride + 1);
  if (hi < lo) hi = lo;
}

// cols[r][p], r = (c, ki, kj), p = (oy, ox); zero where the tap hits padding.
inline void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const std::size_t P = out_plane(g);
  std::size_t r = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    const double* xc = x + static_cast<std::size_t>(c) * in_plane(g);
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj, ++r) {
        double* row = cols + r * P;
        std::fill(row, row + P, 0.0);
        int ylo, yhi, xlo, xhi;
        valid_range(ki, g.pad, g.stride, g.in_h, g.out_h, ylo, yhi);
        valid_range(kj, g.pad, g.stride, g.in_w, g.out_w, xlo, xhi);
        for (int oy = ylo; oy < yhi; ++oy) {
          const double* src = xc + static_cast<std::size_t>(oy * g.stride - g.pad + ki) * g.in_w;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          const int off = kj - g.pad;
          for (int ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * g.stride + off];
        }
      }
    }
  }
}

// colsT[p][r]; same content as im2col, transposed.
inline void im2col_transposed(const ConvGeometry& g, const double* x, double* cols_t) {
  const std::size_t R = patch_len(g);
  std::fill(cols_t, cols_t + R * out_plane(g), 0.0);
  std::size_t r = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    const double* xc = x + static_cast<std::size_t>(c) * in_plane(g);
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj, ++r) {
        int ylo, yhi, xlo, xhi;
        valid_range(ki, g.pad, g.stride, g.in_h, g.out_h, ylo, yhi);
        valid_range(kj, g.pad, g.stride, g.in_w, g.out_w, xlo, xhi);
        for (int oy = ylo; oy < yhi; ++oy) {
          const double* src = xc + static_cast<std::size_t>(oy * g.stride - g.pad + ki) * g.in_w;
          const int off = kj - g.pad;
          for (int ox = xlo; ox < xhi; ++ox)
            cols_t[(static_cast<std::size_t>(oy) * g.out_w + ox) * R + r] = src[ox * g.stride + off];
        }
      }
    }
  }
}

// y[k][:] = sum_r w[k][r] * cols[r][:], accumulated in r order.
inline void gemm_row(const ConvGeometry& g, const double* weight, const double* cols, double* y, int k) {
  const std::size_t P = out_plane(g);
  const std::size_t R = patch_len(g);
  double* out = y + static_cast<std::size_t>(k) * P;
  std::fill(out, out + P, 0.0);
  const double* wk = weight + static_cast<std::size_t>(k) * R;
  for (std::size_t r = 0; r < R; ++r) {
    const double wv = wk[r];
    const double* col = cols + r * P;
    for (std::size_t p = 0; p < P; ++p) out[p] += wv * col[p];
  }
}

// gw[k][:] += sum_p gy[k][p] * colsT[p][:] for one sample, in p order.
inline void weight_grad_row(const ConvGeometry& g, const double* gy, const double* cols_t, double* gw, int k) {
  const std::size_t P = out_plane(g);
  const std::size_t R = patch_len(g);
  double* gwk = gw + static_cast<std::size_t>(k) * R;
  const double* gyk = gy + static_cast<std::size_t>(k) * P;
  for (std::size_t p = 0; p < P; ++p) {
    const double gv = gyk[p];
    const double* col = cols_t + p * R;
    for (std::size_t r = 0; r < R; ++r) gwk[r] += gv * col[r];
  }
}

// Scratch size for scatter_plane: one block per stride phase.
inline std::size_t scatter_scratch(const ConvGeometry& g) {
  return in_plane(g) + static_cast<std::size_t>(g.stride) * g.stride * (g.in_w + 1);
}

// gx[c] plane of one sample: sum over (k, ki, kj) of gy[k] scattered through
// w[k][c][ki][kj]. Targets are split into stride x stride phase blocks so that
// for a fixed tap the writes along a row are contiguous; each target element
// still receives its contributions in (k, ki, kj) order.
inline void scatter_plane(const ConvGeometry& g, const double* gy, const double* weight, double* gx, int c,
                          double* scratch) {
  const int s = g.stride;
  double* plane = gx + static_cast<std::size_t>(c) * in_plane(g);
  // Phase (ry, rx) holds targets iy = s*qy + ry, ix = s*qx + rx.
  double* block[8][8];
  int block_cols[8];
  std::size_t offset = 0;
  for (int rx = 0; rx < s; ++rx) block_cols[rx] = (g.in_w - rx + s - 1) / s;
  for (int ry = 0; ry < s; ++ry) {
    const int rows = (g.in_h - ry + s - 1) / s;
    for (int rx = 0; rx < s; ++rx) {
      block[ry][rx] = scratch + offset;
      offset += static_cast<std::size_t>(rows) * block_cols[rx];
    }
  }
  std::fill(scratch, scratch + offset, 0.0);

  const std::size_t taps = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  for (int k = 0; k < g.out_channels; ++k) {
    const double* gyk = gy + static_cast<std::size_t>(k) * out_plane(g);
    const double* wkc = weight + (static_cast<std::size_t>(k) * g.in_channels + c) * taps;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      int ylo, yhi;
      valid_range(ki, g.pad, s, g.in_h, g.out_h, ylo, yhi);
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        const double wv = wkc[ki * g.kernel_w + kj];
        int xlo, xhi;
        valid_range(kj, g.pad, s, g.in_w, g.out_w, xlo, xhi);
        if (xlo >= xhi) continue;
        const int dx = kj - g.pad;
        const int rx = ((dx % s) + s) % s;
        const int qx_shift = (dx - rx) / s;
        for (int oy = ylo; oy < yhi; ++oy) {
          const int iy = oy * s - g.pad + ki;
          const int ry = iy % s, qy = iy / s;
          double* __restrict dst = block[ry][rx] + static_cast<std::ptrdiff_t>(qy) * block_cols[rx] + qx_shift;
          const double* __restrict src = gyk + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = xlo; ox < xhi; ++ox) dst[ox] += src[ox] * wv;
        }
      }
    }
  }

  for (int iy = 0; iy < g.in_h; ++iy) {
    const int ry = iy % s, qy = iy / s;
    double* row = plane + static_cast<std::size_t>(iy) * g.in_w;
    for (int rx = 0; rx < s; ++rx) {
      const double* src = block[ry][rx] + static_cast<std::size_t>(qy) * block_cols[rx];
      for (int qx = 0, ix = rx; ix < g.in_w; ++qx, ix += s) row[ix] = src[qx];
    }
  }
}

// Small output planes: vectorizing the scatter along the spatial axis leaves
// loops of a handful of iterations, so this variant runs along channels
// instead. The per-element accumulation order is the same as scatter_plane.
inline bool prefer_channels_last(const ConvGeometry& g) {
  return out_plane(g) <= 64;
}

// weight [K][C][taps] -> [K][taps][C]
inline void transpose_weight_taps(const ConvGeometry& g, const double* weight, double* weight_t) {
  const std::size_t C = static_cast<std::size_t>(g.in_channels);
  const std::size_t T = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  for (int k = 0; k < g.out_channels; ++k)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t) weight_t[(k * T + t) * C + c] = weight[(k * C + c) * T + t];
}

inline std::size_t channels_last_scratch(const ConvGeometry& g) {
  return in_plane(g) * g.in_channels;
}

// Whole-sample input gradient, channels innermost; per element order (k, ki, kj).
inline void scatter_channels_last(const ConvGeometry& g, const double* gy, const double* weight_t, double* gx,
                                  double* scratch) {
  const std::size_t C = static_cast<std::size_t>(g.in_channels);
  const std::size_t T = static_cast<std::size_t>(g.kernel_h) * g.kernel_w;
  std::fill(scratch, scratch + in_plane(g) * C, 0.0);
  for (int k = 0; k < g.out_channels; ++k) {
    const double* gyk = gy + static_cast<std::size_t>(k) * out_plane(g);
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      int ylo, yhi;
      valid_range(ki, g.pad, g.stride, g.in_h, g.out_h, ylo, yhi);
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        int xlo, xhi;
        valid_range(kj, g.pad, g.stride, g.in_w, g.out_w, xlo, xhi);
        const double* __restrict wt = weight_t + (static_cast<std::size_t>(k) * T + ki * g.kernel_w + kj) * C;
        for (int oy = ylo; oy < yhi; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          for (int ox = xlo; ox < xhi; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            const double gv = gyk[oy * g.out_w + ox];
            double* __restrict acc = scratch + (static_cast<std::size_t>(iy) * g.in_w + ix) * C;
            for (std::size_t c = 0; c < C; ++c) acc[c] += gv * wt[c];
          }
        }
      }
    }
  }
  const std::size_t HW = in_plane(g);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < HW; ++p) gx[c * HW + p] = scratch[p * C + c];
}

}  // namespace canopyscan::tensor::kernels::detail
