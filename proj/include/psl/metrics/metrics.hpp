// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "psl/nn/network.hpp"
#include "psl/nn/tensor.hpp"

namespace psl::metrics {

/// Gaussian-window SSIM (11 taps, sigma 1.5, unit dynamic range). Accepts
/// [L], [H,W] or [C,H,W]; channels are averaged. An axis shorter than the
/// window shrinks the window along that axis, so [1,L] series use a 1x11
/// window.
double ssim(const nn::Tensor& reference, const nn::Tensor& candidate);

double mse(const nn::Tensor& reference, const nn::Tensor& candidate);

/// Sample distance correlation. Rank-1 inputs are n scalar samples; otherwise
/// the leading axis indexes samples and the rest is flattened. Returns 0 when
/// either side has zero distance variance.
double distance_correlation(const nn::Tensor& x, const nn::Tensor& y);

/// DTW with |a-b| local cost, unconstrained, steps (1,0), (0,1), (1,1).
double dtw(std::span<const double> a, std::span<const double> b);

/// Top-1 accuracy; argmax ties resolve to the lowest class index.
double accuracy(const nn::Tensor& logits, std::span<const nn::Label> labels);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> row);

}  // namespace psl::metrics
