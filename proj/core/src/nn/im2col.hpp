#pragma once

#include <algorithm>
#include <cstring>

#include "gazegan/nn/layers.hpp"

namespace gazegan::nn::detail {

/// Geometry of a convolution read from an image of `channels` x in_h x in_w
/// producing out_h x out_w positions.
struct ConvGeometry {
  int channels;
  int in_h, in_w;
  int kernel, stride, pad;
  Padding padding;
  int out_h, out_w;

  int rows() const noexcept { return channels * kernel * kernel; }
  int positions() const noexcept { return out_h * out_w; }
};

/// Maps a padded coordinate into the image; returns -1 for zero padding.
inline int source_index(int i, int n, Padding padding) noexcept {
  if (i >= 0 && i < n) return i;
  if (padding == Padding::Zero) return -1;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return std::clamp(i, 0, n - 1);
}

/// Columns per GEMM tile; bounds the im2col scratch buffer.
inline int tile_columns(const ConvGeometry& g) {
  const int budget = 1 << 18;
  int cols = std::max(256, budget / std::max(1, g.rows()));
  return std::min(cols, g.positions());
}

/// Scatter (Add=false) or gather-add (Add=true) between an image and the
/// column matrix for positions [p0, p1). cols is row-major rows() x (p1-p0).
template <bool ToCols, typename T>
void transfer(std::conditional_t<ToCols, const T*, T*> img, const ConvGeometry& g, int p0, int p1,
              std::conditional_t<ToCols, T*, const T*> cols) {
  const int len = p1 - p0;
  const int k = g.kernel;
  const int s = g.stride;
  int r = 0;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++r) {
        auto row = cols + static_cast<std::ptrdiff_t>(r) * len;
        int p = p0;
        int oy = p0 / g.out_w;
        int ox = p0 % g.out_w;
        int idx = 0;
        // Range of ox for which ix = ox*s - pad + kx lies inside [0, in_w).
        const int lo_num = g.pad - kx;
        const int ox_lo = lo_num <= 0 ? 0 : (lo_num + s - 1) / s;
        const int hi_num = g.in_w - 1 + g.pad - kx;
        const int ox_hi = hi_num < 0 ? -1 : std::min(g.out_w - 1, hi_num / s);
        while (p < p1) {
          const int count = std::min(g.out_w - ox, p1 - p);
          const int sy = source_index(oy * s - g.pad + ky, g.in_h, g.padding);
          if (sy < 0) {
            if constexpr (ToCols) std::fill(row + idx, row + idx + count, T(0));
          } else {
            auto src = img + (static_cast<std::ptrdiff_t>(c) * g.in_h + sy) * g.in_w;
            const int end = ox + count;
            const int mid_lo = std::max(ox, ox_lo);
            const int mid_hi = std::min(end - 1, ox_hi);
            const int left_end = std::min(end, mid_lo);
            for (int j = ox; j < left_end; ++j) {
              const int sx = source_index(j * s - g.pad + kx, g.in_w, g.padding);
              if constexpr (ToCols) {
                row[idx + j - ox] = sx < 0 ? T(0) : src[sx];
              } else if (sx >= 0) {
                src[sx] += row[idx + j - ox];
              }
            }
            if (mid_lo <= mid_hi) {
              const int base = mid_lo * s - g.pad + kx;
              const int n = mid_hi - mid_lo + 1;
              if constexpr (ToCols) {
                T* dst = row + idx + mid_lo - ox;
                if (s == 1) {
                  std::memcpy(dst, src + base, sizeof(T) * n);
                } else {
                  for (int j = 0; j < n; ++j) dst[j] = src[base + j * s];
                }
              } else {
                const T* from = row + idx + mid_lo - ox;
                for (int j = 0; j < n; ++j) src[base + j * s] += from[j];
              }
            }
            for (int j = std::max(left_end, mid_hi + 1); j < end; ++j) {
              const int sx = source_index(j * s - g.pad + kx, g.in_w, g.padding);
              if constexpr (ToCols) {
                row[idx + j - ox] = sx < 0 ? T(0) : src[sx];
              } else if (sx >= 0) {
                src[sx] += row[idx + j - ox];
              }
            }
          }
          idx += count;
          p += count;
          ox = 0;
          ++oy;
        }
      }
    }
  }
}

template <typename T>
void im2col(const T* img, const ConvGeometry& g, int p0, int p1, T* cols) {
  transfer<true, T>(img, g, p0, p1, cols);
}

/// Accumulates columns back into the image (adjoint of im2col).
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, int p0, int p1, T* img) {
  transfer<false, T>(img, g, p0, p1, cols);
}

}  // namespace gazegan::nn::detail
