// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace psl::nn::kernels {

// Raw loops over contiguous buffers. All reductions run in a fixed order so
// results are reproducible bit-for-bit.

struct ConvGeom {
  std::size_t batch, in_ch, out_ch;
  std::size_t in_h, in_w;  // in_h == 1 for 1-D
  std::size_t out_h, out_w;
  std::size_t kernel_h, kernel_w;
  std::size_t stride, pad_h, pad_w;
};

void dense_forward(const double* x, const double* w, const double* b, double* y,
                   std::size_t batch, std::size_t in, std::size_t out);
void dense_backward(const double* x, const double* w, const double* gy, double* gx, double* gw,
                    double* gb, std::size_t batch, std::size_t in, std::size_t out);

void conv_forward(const ConvGeom& g, const double* x, const double* w, const double* b, double* y);
void conv_backward(const ConvGeom& g, const double* x, const double* w, const double* gy,
                   double* gx, double* gw, double* gb);

void maxpool_forward(const double* x, double* y, std::uint32_t* argmax, std::size_t planes,
                     std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w,
                     std::size_t kernel, std::size_t stride);
void maxpool_backward(const double* gy, const std::uint32_t* argmax, double* gx,
                      std::size_t planes, std::size_t in_plane, std::size_t out_plane);

}  // namespace psl::nn::kernels
