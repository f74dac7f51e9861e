// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "psl/nn/network.hpp"
#include "psl/nn/tensor.hpp"

namespace psl::data {

using nn::Label;

/// Labelled samples; inputs carry a leading sample axis.
class Dataset {
 public:
  Dataset() = default;
  Dataset(nn::Tensor inputs, std::vector<Label> labels, std::size_t class_count);

  const nn::Tensor& inputs() const noexcept { return inputs_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  nn::Shape sample_shape() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<Label> labels_at(std::span<const std::size_t> indices) const;

  /// Samples per class, indexed by label.
  std::vector<std::size_t> class_histogram() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  nn::Tensor inputs_;
  std::vector<Label> labels_;
  std::size_t class_count_ = 0;
};

/// IDX image/label pair (MNIST layout). Pixels are scaled by 1/255 and the
/// result has shape [n, 1, rows, cols]. class_count is max label + 1 unless
/// given explicitly.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t class_count = 0);
Dataset decode_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                   std::size_t class_count = 0);

/// One series per line, label first, comma separated. Shape [n, 1, length].
Dataset load_csv_series(const std::filesystem::path& path, std::size_t class_count = 0);
Dataset parse_csv_series(const std::string& text, std::size_t class_count = 0);

struct ClassificationSynth {
  /// RMS magnitude of class means relative to the unit noise.
  double separation = 0.35;
  double noise = 1.0;
  /// Gaussian blur width (pixels) applied to means and noise of [C,H,W]
  /// samples; 0 disables.
  double smoothness = 0.0;
  friend bool operator==(const ClassificationSynth&, const ClassificationSynth&) = default;
};

/// Class-conditional Gaussian blobs mapped into [0,1]. Class means depend on
/// `seed` only; `stream` picks the noise draw, so stream 0 and stream 1 give a
/// train/test pair from the same distribution. Labels are assigned round-robin.
Dataset synth_classification(std::size_t samples, std::size_t classes,
                             const nn::Shape& sample_shape, std::uint64_t seed,
                             const ClassificationSynth& options = {}, std::uint64_t stream = 0);

struct SeriesSynth {
  double noise = 0.1;
  friend bool operator==(const SeriesSynth&, const SeriesSynth&) = default;
};

/// Waveform templates per class (a sine whose frequency grows with the class
/// plus a Gaussian pulse at a class-specific position), additive Gaussian
/// noise, clamped to [0,1]. Shape [samples, 1, length].
Dataset synth_series(std::size_t samples, std::size_t classes, std::size_t length,
                     std::uint64_t seed, const SeriesSynth& options = {},
                     std::uint64_t stream = 0);

}  // namespace psl::data
