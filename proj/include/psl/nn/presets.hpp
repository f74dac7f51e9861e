// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "psl/nn/network.hpp"

namespace psl::nn {

// Named desk-scale architectures.
//   tiny-mlp     any input      flatten dense64 relu | dense C
//   tiny-conv2   [C, H, W]      conv4 relu conv4 relu | conv8 relu pool conv8 relu pool flatten dense C
//   tiny-conv1d  [C, L]         conv1d4 relu | conv1d8 relu flatten dense C
std::vector<std::string> preset_names();
SplitModelSpec make_preset(const std::string& name, const Shape& input_shape, std::size_t classes);

}  // namespace psl::nn
