// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernels.hpp"

#include <algorithm>
#include <cstring>

namespace psl::nn::kernels {
namespace {

struct Range {
  std::size_t lo, hi;  // [lo, hi)
};

// Output positions o with 0 <= o*stride + k - pad < in_len.
Range valid_outputs(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in_len,
                    std::size_t out_len) {
  const auto kk = static_cast<std::ptrdiff_t>(k);
  const auto pp = static_cast<std::ptrdiff_t>(pad);
  const auto ss = static_cast<std::ptrdiff_t>(stride);
  const auto n = static_cast<std::ptrdiff_t>(in_len);
  std::ptrdiff_t lo = 0;
  if (pp > kk) lo = (pp - kk + ss - 1) / ss;
  const std::ptrdiff_t top = n - 1 + pp - kk;
  if (top < 0) return {0, 0};
  std::ptrdiff_t hi = top / ss + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len));
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

void dense_forward(const double* x, const double* w, const double* b, double* y,
                   std::size_t batch, std::size_t in, std::size_t out) {
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x + n * in;
    double* yr = y + n * out;
    for (std::size_t u = 0; u < out; ++u) {
      const double* wr = w + u * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[u] = acc + b[u];
    }
  }
}

void dense_backward(const double* x, const double* w, const double* gy, double* gx, double* gw,
                    double* gb, std::size_t batch, std::size_t in, std::size_t out) {
  std::fill_n(gx, batch * in, 0.0);
  std::fill_n(gw, out * in, 0.0);
  std::fill_n(gb, out, 0.0);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x + n * in;
    const double* gr = gy + n * out;
    double* gxr = gx + n * in;
    for (std::size_t u = 0; u < out; ++u) {
      const double g = gr[u];
      const double* wr = w + u * in;
      double* gwr = gw + u * in;
      gb[u] += g;
      for (std::size_t i = 0; i < in; ++i) {
        gwr[i] += g * xr[i];
        gxr[i] += g * wr[i];
      }
    }
  }
}

void conv_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* y) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
      double* yp = y + (n * g.out_ch + oc) * out_plane;
      std::fill_n(yp, out_plane, b[oc]);
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const double* xp = x + (n * g.in_ch + c) * in_plane;
        const double* wk = w + (oc * g.in_ch + c) * g.kernel_h * g.kernel_w;
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
          const Range rh = valid_outputs(kh, g.pad_h, g.stride, g.in_h, g.out_h);
          for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
            const Range rw = valid_outputs(kw, g.pad_w, g.stride, g.in_w, g.out_w);
            const double wv = wk[kh * g.kernel_w + kw];
            for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
              const std::size_t ih = oh * g.stride + kh - g.pad_h;
              const double* xrow = xp + ih * g.in_w;
              double* yrow = yp + oh * g.out_w;
              if (g.stride == 1) {
                const double* xs = xrow + kw - g.pad_w;
                for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) yrow[ow] += wv * xs[ow];
              } else {
                for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                  yrow[ow] += wv * xrow[ow * g.stride + kw - g.pad_w];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const ConvGeom& g, const double* x, const double* w, const double* gy,
                   double* gx, double* gw, double* gb) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t ksize = g.kernel_h * g.kernel_w;
  std::fill_n(gx, g.batch * g.in_ch * in_plane, 0.0);
  std::fill_n(gw, g.out_ch * g.in_ch * ksize, 0.0);
  std::fill_n(gb, g.out_ch, 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
      const double* gp = gy + (n * g.out_ch + oc) * out_plane;
      double bsum = 0.0;
      for (std::size_t i = 0; i < out_plane; ++i) bsum += gp[i];
      gb[oc] += bsum;
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const double* xp = x + (n * g.in_ch + c) * in_plane;
        double* gxp = gx + (n * g.in_ch + c) * in_plane;
        const double* wk = w + (oc * g.in_ch + c) * ksize;
        double* gwk = gw + (oc * g.in_ch + c) * ksize;
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
          const Range rh = valid_outputs(kh, g.pad_h, g.stride, g.in_h, g.out_h);
          for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
            const Range rw = valid_outputs(kw, g.pad_w, g.stride, g.in_w, g.out_w);
            const double wv = wk[kh * g.kernel_w + kw];
            double wacc = 0.0;
            for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
              const std::size_t ih = oh * g.stride + kh - g.pad_h;
              const double* xrow = xp + ih * g.in_w;
              double* gxrow = gxp + ih * g.in_w;
              const double* grow = gp + oh * g.out_w;
              for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                const std::size_t iw = ow * g.stride + kw - g.pad_w;
                wacc += grow[ow] * xrow[iw];
                gxrow[iw] += wv * grow[ow];
              }
            }
            gwk[kh * g.kernel_w + kw] += wacc;
          }
        }
      }
    }
  }
}

void maxpool_forward(const double* x, double* y, std::uint32_t* argmax, std::size_t planes,
                     std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w,
                     std::size_t kernel, std::size_t stride) {
  const std::size_t in_plane = in_h * in_w;
  const std::size_t out_plane = out_h * out_w;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* xp = x + p * in_plane;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow) {
        std::size_t best = (oh * stride) * in_w + ow * stride;
        double best_v = xp[best];
        for (std::size_t kh = 0; kh < kernel; ++kh) {
          for (std::size_t kw = 0; kw < kernel; ++kw) {
            const std::size_t idx = (oh * stride + kh) * in_w + ow * stride + kw;
            if (xp[idx] > best_v) {
              best_v = xp[idx];
              best = idx;
            }
          }
        }
        y[p * out_plane + oh * out_w + ow] = best_v;
        argmax[p * out_plane + oh * out_w + ow] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool_backward(const double* gy, const std::uint32_t* argmax, double* gx,
                      std::size_t planes, std::size_t in_plane, std::size_t out_plane) {
  std::fill_n(gx, planes * in_plane, 0.0);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t o = 0; o < out_plane; ++o) {
      gx[p * in_plane + argmax[p * out_plane + o]] += gy[p * out_plane + o];
    }
  }
}

}  // namespace psl::nn::kernels
