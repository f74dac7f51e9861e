// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "psl/nn/tensor.hpp"

namespace psl::nn {

using Label = std::uint32_t;

enum class LayerKind { dense, conv2d, conv1d, relu, sigmoid, flatten, maxpool2d, reshape };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of a feed-forward stack. Only the fields relevant to `kind` are
/// read; the factory functions fill them consistently.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;     // dense
  std::size_t channels = 0;  // conv output channels
  std::size_t kernel = 0;    // conv / pool window
  std::size_t stride = 1;
  std::size_t padding = 0;
  Shape target;  // reshape

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv2d(std::size_t channels, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
  static LayerSpec conv1d(std::size_t channels, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec flatten();
  static LayerSpec maxpool2d(std::size_t kernel, std::size_t stride = 0);
  static LayerSpec reshape(Shape target);

  bool has_parameters() const noexcept {
    return kind == LayerKind::dense || kind == LayerKind::conv2d || kind == LayerKind::conv1d;
  }

  /// Per-sample output shape; throws ShapeError when `input` is not accepted.
  Shape output_shape(const Shape& input) const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A validated layer stack. Construction checks that consecutive shapes
/// compose and caches the per-layer activation shapes.
class NetworkSpec {
 public:
  NetworkSpec() = default;
  NetworkSpec(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  /// Input shape of layer `i` (i == layer_count() gives the output shape).
  const Shape& activation_shape(std::size_t i) const { return shapes_.at(i); }

  /// Layers [begin, end) as a standalone network.
  NetworkSpec slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_{Shape{}};
};

/// Weights and bias of one parameterized layer.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Parameters keyed by layer index within the owning NetworkSpec.
class ParameterSet {
 public:
  using Map = std::map<std::size_t, LayerParams>;

  ParameterSet() = default;
  explicit ParameterSet(Map layers) : layers_(std::move(layers)) {}

  const Map& layers() const noexcept { return layers_; }
  Map& layers() noexcept { return layers_; }
  const LayerParams& at(std::size_t index) const { return layers_.at(index); }
  LayerParams& at(std::size_t index) { return layers_.at(index); }
  bool contains(std::size_t index) const { return layers_.contains(index); }

  /// Total number of scalars, |U| when applied to a client part.
  std::size_t scalar_count() const noexcept;

  /// True when keys and tensor shapes match exactly.
  bool same_structure(const ParameterSet& other) const noexcept;

  /// Parameter set with the same structure, all zeros.
  ParameterSet zeros_like() const;

  bool all_finite() const noexcept;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  Map layers_;
};

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) noexcept;

/// Throws ShapeError unless `params` matches the structure `spec` requires.
void check_parameters(const NetworkSpec& spec, const ParameterSet& params);

/// A network cut into a client part (layers [0, split)) and a server part
/// (layers [split, n)). The server part re-indexes its layers from zero.
class SplitModelSpec {
 public:
  SplitModelSpec() = default;
  SplitModelSpec(NetworkSpec network, std::size_t split_index);

  const NetworkSpec& network() const noexcept { return network_; }
  std::size_t split_index() const noexcept { return split_index_; }
  const NetworkSpec& client() const noexcept { return client_; }
  const NetworkSpec& server() const noexcept { return server_; }

  /// Per-sample shape of the smashed data.
  const Shape& split_shape() const noexcept { return client_.output_shape(); }
  /// S: scalars per sample crossing the cut.
  std::size_t split_size() const noexcept { return shape_size(split_shape()); }

  std::pair<ParameterSet, ParameterSet> split_parameters(const ParameterSet& full) const;
  ParameterSet join_parameters(const ParameterSet& client, const ParameterSet& server) const;

 private:
  NetworkSpec network_;
  std::size_t split_index_ = 0;
  NetworkSpec client_;
  NetworkSpec server_;
};

/// Recorded activations of one forward pass. Consumed by exactly one backward.
class Tape {
 public:
  bool consumed() const noexcept { return consumed_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  friend struct TapeAccess;
  std::vector<Tensor> activations_;  // input of each layer, then the output
  std::vector<std::vector<std::uint32_t>> argmax_;
  std::size_t batch_ = 0;
  bool consumed_ = false;
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

struct BackwardResult {
  ParameterSet param_grads;
  Tensor input_grad;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// Glorot-uniform weights, zero biases; deterministic per (spec, seed).
ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed);

/// `input` is [batch, input_shape...].
ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input);

/// Forward pass without retaining a tape.
Tensor infer(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input);

/// Reverse-mode pass for the scalar sum(upstream * output). Marks the tape
/// consumed; a second call with the same tape throws StateError.
BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, Tape& tape,
                        const Tensor& upstream_grad);

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
LossResult loss_softmax_ce(const Tensor& logits, std::span<const Label> labels);

/// Mean squared error over all elements and its gradient w.r.t. prediction.
LossResult loss_mse(const Tensor& prediction, const Tensor& target);

ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads,
                      double learning_rate);

/// In-place form of sgd_step; produces bit-identical values.
void sgd_update(ParameterSet& params, const ParameterSet& grads, double learning_rate);

/// Heavy-ball SGD: v = momentum * v + g; params -= lr * v. The velocity starts
/// at zero on the first step.
class MomentumSgd {
 public:
  MomentumSgd(double learning_rate, double momentum);
  void step(ParameterSet& params, const ParameterSet& grads);

 private:
  double lr_;
  double momentum_;
  ParameterSet velocity_;
};

/// Elementwise arithmetic mean of structurally identical sets.
ParameterSet average_parameters(std::span<const ParameterSet> sets);

}  // namespace psl::nn
