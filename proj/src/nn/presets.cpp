// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/nn/presets.hpp"

#include "psl/common/errors.hpp"

namespace psl::nn {

std::vector<std::string> preset_names() { return {"tiny-mlp", "tiny-conv2", "tiny-conv1d"}; }

SplitModelSpec make_preset(const std::string& name, const Shape& input_shape,
                           std::size_t classes) {
  if (classes < 2) throw ConfigError("dataset.classes", "need at least two classes");
  using L = LayerSpec;
  if (name == "tiny-mlp") {
    return SplitModelSpec(
        NetworkSpec(input_shape, {L::flatten(), L::dense(64), L::relu(), L::dense(classes)}), 3);
  }
  if (name == "tiny-conv2") {
    if (input_shape.size() != 3 || input_shape[1] < 4 || input_shape[2] < 4) {
      throw ConfigError("model.preset", "tiny-conv2 needs [channels, H, W] input with H, W >= 4");
    }
    return SplitModelSpec(
        NetworkSpec(input_shape,
                    {L::conv2d(4, 3, 1, 1), L::relu(), L::conv2d(4, 3, 1, 1), L::relu(),
                     L::conv2d(8, 3, 1, 1), L::relu(), L::maxpool2d(2), L::conv2d(8, 3, 1, 1),
                     L::relu(), L::maxpool2d(2), L::flatten(), L::dense(classes)}),
        4);
  }
  if (name == "tiny-conv1d") {
    if (input_shape.size() != 2) {
      throw ConfigError("model.preset", "tiny-conv1d needs [channels, length] input");
    }
    return SplitModelSpec(NetworkSpec(input_shape, {L::conv1d(4, 5, 1, 2), L::relu(),
                                                    L::conv1d(8, 5, 1, 2), L::relu(), L::flatten(),
                                                    L::dense(classes)}),
                          2);
  }
  throw ConfigError("model.preset", "unknown preset '" + name + "'");
}

}  // namespace psl::nn
