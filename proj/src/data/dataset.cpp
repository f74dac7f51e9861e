// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/data/dataset.hpp"

#include <string>

#include "psl/common/errors.hpp"

namespace psl::data {

Dataset::Dataset(nn::Tensor inputs, std::vector<Label> labels, std::size_t class_count)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), class_count_(class_count) {
  if (inputs_.rank() < 2) throw ShapeError("dataset inputs need a sample axis and a sample shape");
  if (inputs_.dim(0) != labels_.size()) {
    throw ShapeError("dataset has " + std::to_string(inputs_.dim(0)) + " inputs but " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (class_count_ == 0) throw DomainError("dataset class count must be positive");
  for (auto l : labels_) {
    if (l >= class_count_) {
      throw DomainError("label " + std::to_string(l) + " >= class count " +
                        std::to_string(class_count_));
    }
  }
}

nn::Shape Dataset::sample_shape() const {
  return nn::Shape(inputs_.shape().begin() + 1, inputs_.shape().end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  return Dataset(inputs_.gather_rows(indices), labels_at(indices), class_count_);
}

std::vector<Label> Dataset::labels_at(std::span<const std::size_t> indices) const {
  std::vector<Label> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= labels_.size()) throw ShapeError("dataset index out of range");
    out.push_back(labels_[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(class_count_, 0);
  for (auto l : labels_) ++h[l];
  return h;
}

}  // namespace psl::data
