// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels.hpp"
#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"

namespace psl::nn {

struct TapeAccess {
  static std::vector<Tensor>& activations(Tape& t) { return t.activations_; }
  static std::vector<std::vector<std::uint32_t>>& argmax(Tape& t) { return t.argmax_; }
  static void set_batch(Tape& t, std::size_t b) { t.batch_ = b; }
  static void consume(Tape& t) { t.consumed_ = true; }
};

// ---------------------------------------------------------------------------
// LayerSpec

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::flatten: return "flatten";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::reshape: return "reshape";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::conv1d, LayerKind::relu,
                 LayerKind::sigmoid, LayerKind::flatten, LayerKind::maxpool2d,
                 LayerKind::reshape}) {
    if (to_string(k) == name) return k;
  }
  throw DomainError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t channels, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.channels = channels;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::conv1d(std::size_t channels, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec l = conv2d(channels, kernel, stride, padding);
  l.kind = LayerKind::conv1d;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::sigmoid() {
  LayerSpec l;
  l.kind = LayerKind::sigmoid;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::flatten;
  return l;
}

LayerSpec LayerSpec::maxpool2d(std::size_t kernel, std::size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::maxpool2d;
  l.kernel = kernel;
  l.stride = stride == 0 ? kernel : stride;
  return l;
}

LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec l;
  l.kind = LayerKind::reshape;
  l.target = std::move(target);
  return l;
}

namespace {

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                     const char* what) {
  if (in + 2 * pad < kernel) {
    throw ShapeError(std::string(what) + ": kernel larger than padded input");
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

Shape LayerSpec::output_shape(const Shape& in) const {
  const auto name = to_string(kind);
  switch (kind) {
    case LayerKind::dense:
      if (units == 0) throw ShapeError("dense: units must be positive");
      if (in.size() != 1) throw ShapeError("dense expects rank-1 input, got " + shape_to_string(in));
      return {units};
    case LayerKind::conv2d:
      if (channels == 0 || kernel == 0 || stride == 0) {
        throw ShapeError("conv2d: channels, kernel and stride must be positive");
      }
      if (in.size() != 3) throw ShapeError("conv2d expects [C,H,W], got " + shape_to_string(in));
      return {channels, conv_out(in[1], kernel, stride, padding, "conv2d"),
              conv_out(in[2], kernel, stride, padding, "conv2d")};
    case LayerKind::conv1d:
      if (channels == 0 || kernel == 0 || stride == 0) {
        throw ShapeError("conv1d: channels, kernel and stride must be positive");
      }
      if (in.size() != 2) throw ShapeError("conv1d expects [C,L], got " + shape_to_string(in));
      return {channels, conv_out(in[1], kernel, stride, padding, "conv1d")};
    case LayerKind::relu:
    case LayerKind::sigmoid:
      return in;
    case LayerKind::flatten:
      return {shape_size(in)};
    case LayerKind::maxpool2d:
      if (kernel == 0 || stride == 0) throw ShapeError("maxpool2d: kernel and stride must be positive");
      if (in.size() != 3) throw ShapeError("maxpool2d expects [C,H,W], got " + shape_to_string(in));
      return {in[0], conv_out(in[1], kernel, stride, 0, "maxpool2d"),
              conv_out(in[2], kernel, stride, 0, "maxpool2d")};
    case LayerKind::reshape:
      if (target.empty() || shape_size(target) != shape_size(in)) {
        throw ShapeError("reshape: " + shape_to_string(in) + " -> " + shape_to_string(target));
      }
      return target;
  }
  throw ShapeError("unsupported layer " + name);
}

// ---------------------------------------------------------------------------
// NetworkSpec

NetworkSpec::NetworkSpec(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw ShapeError("network input shape must be non-empty and positive");
  }
  shapes_.clear();
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shapes_.push_back(layers_[i].output_shape(shapes_.back()));
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
}

NetworkSpec NetworkSpec::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > layers_.size()) throw ShapeError("network slice out of range");
  return NetworkSpec(shapes_[begin], std::vector<LayerSpec>(layers_.begin() + begin,
                                                            layers_.begin() + end));
}

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, p] : layers_) n += p.weight.size() + p.bias.size();
  return n;
}

bool ParameterSet::same_structure(const ParameterSet& other) const noexcept {
  if (layers_.size() != other.layers_.size()) return false;
  auto it = other.layers_.begin();
  for (const auto& [k, p] : layers_) {
    if (it->first != k || it->second.weight.shape() != p.weight.shape() ||
        it->second.bias.shape() != p.bias.shape()) {
      return false;
    }
    ++it;
  }
  return true;
}

ParameterSet ParameterSet::zeros_like() const {
  Map m;
  for (const auto& [k, p] : layers_) {
    m.emplace(k, LayerParams{Tensor(p.weight.shape()), Tensor(p.bias.shape())});
  }
  return ParameterSet(std::move(m));
}

bool ParameterSet::all_finite() const noexcept {
  return std::all_of(layers_.begin(), layers_.end(), [](const auto& kv) {
    return kv.second.weight.all_finite() && kv.second.bias.all_finite();
  });
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) noexcept {
  if (!a.same_structure(b)) return false;
  auto it = b.layers().begin();
  for (const auto& [k, p] : a.layers()) {
    if (!bitwise_equal(p.weight, it->second.weight) || !bitwise_equal(p.bias, it->second.bias)) {
      return false;
    }
    ++it;
  }
  return true;
}

namespace {

std::pair<Shape, Shape> expected_param_shapes(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::dense: return {{layer.units, in[0]}, {layer.units}};
    case LayerKind::conv2d:
      return {{layer.channels, in[0], layer.kernel, layer.kernel}, {layer.channels}};
    case LayerKind::conv1d: return {{layer.channels, in[0], layer.kernel}, {layer.channels}};
    default: return {};
  }
}

}  // namespace

void check_parameters(const NetworkSpec& spec, const ParameterSet& params) {
  std::size_t expected_layers = 0;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const auto& layer = spec.layers()[i];
    if (!layer.has_parameters()) continue;
    ++expected_layers;
    if (!params.contains(i)) {
      throw ShapeError("missing parameters for layer " + std::to_string(i));
    }
    const auto [ws, bs] = expected_param_shapes(layer, spec.activation_shape(i));
    const auto& p = params.at(i);
    if (p.weight.shape() != ws || p.bias.shape() != bs) {
      throw ShapeError("parameter shape mismatch at layer " + std::to_string(i) + ": expected " +
                       shape_to_string(ws) + "/" + shape_to_string(bs) + ", got " +
                       shape_to_string(p.weight.shape()) + "/" + shape_to_string(p.bias.shape()));
    }
  }
  if (params.layers().size() != expected_layers) {
    throw ShapeError("parameter set has unexpected layer entries");
  }
}

// ---------------------------------------------------------------------------
// SplitModelSpec

SplitModelSpec::SplitModelSpec(NetworkSpec network, std::size_t split_index)
    : network_(std::move(network)), split_index_(split_index) {
  if (split_index_ < 1 || split_index_ >= network_.layer_count()) {
    throw ShapeError("split index " + std::to_string(split_index_) + " must be in [1, " +
                     std::to_string(network_.layer_count()) + ")");
  }
  client_ = network_.slice(0, split_index_);
  server_ = network_.slice(split_index_, network_.layer_count());
}

std::pair<ParameterSet, ParameterSet> SplitModelSpec::split_parameters(
    const ParameterSet& full) const {
  ParameterSet::Map client, server;
  for (const auto& [k, p] : full.layers()) {
    if (k < split_index_) {
      client.emplace(k, p);
    } else {
      server.emplace(k - split_index_, p);
    }
  }
  return {ParameterSet(std::move(client)), ParameterSet(std::move(server))};
}

ParameterSet SplitModelSpec::join_parameters(const ParameterSet& client,
                                             const ParameterSet& server) const {
  ParameterSet::Map m = client.layers();
  for (const auto& [k, p] : server.layers()) m.emplace(k + split_index_, p);
  return ParameterSet(std::move(m));
}

// ---------------------------------------------------------------------------
// Initialization

ParameterSet init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  ParameterSet::Map m;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const auto& layer = spec.layers()[i];
    if (!layer.has_parameters()) continue;
    const auto [ws, bs] = expected_param_shapes(layer, spec.activation_shape(i));
    std::size_t fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::dense) {
      fan_in = ws[1];
      fan_out = ws[0];
    } else {
      const std::size_t receptive = shape_size(ws) / (ws[0] * ws[1]);
      fan_in = ws[1] * receptive;
      fan_out = ws[0] * receptive;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(derive_seed(seed, {i}));
    Tensor w(ws);
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
    m.emplace(i, LayerParams{std::move(w), Tensor(bs)});
  }
  return ParameterSet(std::move(m));
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

kernels::ConvGeom conv_geom(const LayerSpec& layer, const Shape& in, const Shape& out,
                            std::size_t batch) {
  kernels::ConvGeom g{};
  g.batch = batch;
  g.in_ch = in[0];
  g.out_ch = out[0];
  g.stride = layer.stride;
  if (layer.kind == LayerKind::conv2d) {
    g.in_h = in[1];
    g.in_w = in[2];
    g.out_h = out[1];
    g.out_w = out[2];
    g.kernel_h = g.kernel_w = layer.kernel;
    g.pad_h = g.pad_w = layer.padding;
  } else {
    g.in_h = 1;
    g.in_w = in[1];
    g.out_h = 1;
    g.out_w = out[1];
    g.kernel_h = 1;
    g.kernel_w = layer.kernel;
    g.pad_h = 0;
    g.pad_w = layer.padding;
  }
  return g;
}

Shape batched(std::size_t batch, const Shape& s) {
  Shape r;
  r.reserve(s.size() + 1);
  r.push_back(batch);
  r.insert(r.end(), s.begin(), s.end());
  return r;
}

std::size_t check_input(const NetworkSpec& spec, const Tensor& input) {
  const auto& s = input.shape();
  if (s.size() != spec.input_shape().size() + 1 ||
      !std::equal(spec.input_shape().begin(), spec.input_shape().end(), s.begin() + 1)) {
    throw ShapeError("input shape " + shape_to_string(s) + " does not match network input [N," +
                     shape_to_string(spec.input_shape()).substr(1));
  }
  return s[0];
}

Tensor layer_forward(const LayerSpec& layer, const LayerParams* p, const Shape& in_shape,
                     const Shape& out_shape, const Tensor& x, std::size_t batch,
                     std::vector<std::uint32_t>* argmax) {
  Tensor y(batched(batch, out_shape));
  switch (layer.kind) {
    case LayerKind::dense:
      kernels::dense_forward(x.data(), p->weight.data(), p->bias.data(), y.data(), batch,
                             in_shape[0], out_shape[0]);
      break;
    case LayerKind::conv2d:
    case LayerKind::conv1d:
      kernels::conv_forward(conv_geom(layer, in_shape, out_shape, batch), x.data(),
                            p->weight.data(), p->bias.data(), y.data());
      break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case LayerKind::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case LayerKind::flatten:
    case LayerKind::reshape:
      std::memcpy(y.data(), x.data(), x.size() * sizeof(double));
      break;
    case LayerKind::maxpool2d: {
      std::vector<std::uint32_t> local;
      auto& am = argmax ? *argmax : local;
      am.assign(y.size(), 0);
      kernels::maxpool_forward(x.data(), y.data(), am.data(), batch * in_shape[0], in_shape[1],
                               in_shape[2], out_shape[1], out_shape[2], layer.kernel,
                               layer.stride);
      break;
    }
  }
  return y;
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input) {
  const std::size_t batch = check_input(spec, input);
  check_parameters(spec, params);
  ForwardResult r;
  auto& acts = TapeAccess::activations(r.tape);
  auto& argmax = TapeAccess::argmax(r.tape);
  TapeAccess::set_batch(r.tape, batch);
  acts.reserve(spec.layer_count() + 1);
  argmax.resize(spec.layer_count());
  acts.push_back(input);
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const auto& layer = spec.layers()[i];
    const LayerParams* p = layer.has_parameters() ? &params.at(i) : nullptr;
    acts.push_back(layer_forward(layer, p, spec.activation_shape(i), spec.activation_shape(i + 1),
                                 acts.back(), batch, &argmax[i]));
  }
  r.output = acts.back();
  return r;
}

Tensor infer(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input) {
  const std::size_t batch = check_input(spec, input);
  check_parameters(spec, params);
  Tensor cur = input;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const auto& layer = spec.layers()[i];
    const LayerParams* p = layer.has_parameters() ? &params.at(i) : nullptr;
    cur = layer_forward(layer, p, spec.activation_shape(i), spec.activation_shape(i + 1), cur,
                        batch, nullptr);
  }
  return cur;
}

BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params, Tape& tape,
                        const Tensor& upstream_grad) {
  if (tape.consumed()) throw StateError("tape already consumed by a previous backward pass");
  auto& acts = TapeAccess::activations(tape);
  auto& argmax = TapeAccess::argmax(tape);
  if (acts.size() != spec.layer_count() + 1) {
    throw StateError("tape was not recorded for this network");
  }
  const std::size_t batch = tape.batch();
  if (upstream_grad.shape() != batched(batch, spec.output_shape())) {
    throw ShapeError("upstream gradient shape " + shape_to_string(upstream_grad.shape()) +
                     " does not match output " +
                     shape_to_string(batched(batch, spec.output_shape())));
  }
  check_parameters(spec, params);
  TapeAccess::consume(tape);

  BackwardResult r;
  r.param_grads = params.zeros_like();
  Tensor grad = upstream_grad;
  for (std::size_t li = spec.layer_count(); li-- > 0;) {
    const auto& layer = spec.layers()[li];
    const Shape& in_shape = spec.activation_shape(li);
    const Shape& out_shape = spec.activation_shape(li + 1);
    const Tensor& x = acts[li];
    Tensor gx(batched(batch, in_shape));
    switch (layer.kind) {
      case LayerKind::dense: {
        auto& g = r.param_grads.at(li);
        kernels::dense_backward(x.data(), params.at(li).weight.data(), grad.data(), gx.data(),
                                g.weight.data(), g.bias.data(), batch, in_shape[0], out_shape[0]);
        break;
      }
      case LayerKind::conv2d:
      case LayerKind::conv1d: {
        auto& g = r.param_grads.at(li);
        kernels::conv_backward(conv_geom(layer, in_shape, out_shape, batch), x.data(),
                               params.at(li).weight.data(), grad.data(), gx.data(),
                               g.weight.data(), g.bias.data());
        break;
      }
      case LayerKind::relu:
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad[i] : 0.0;
        break;
      case LayerKind::sigmoid: {
        const Tensor& y = acts[li + 1];
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = grad[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case LayerKind::flatten:
      case LayerKind::reshape:
        std::memcpy(gx.data(), grad.data(), grad.size() * sizeof(double));
        break;
      case LayerKind::maxpool2d:
        kernels::maxpool_backward(grad.data(), argmax[li].data(), gx.data(), batch * in_shape[0],
                                  in_shape[1] * in_shape[2], out_shape[1] * out_shape[2]);
        break;
    }
    grad = std::move(gx);
  }
  r.input_grad = std::move(grad);
  // Release recorded activations; the tape cannot be replayed.
  acts.clear();
  argmax.clear();
  return r;
}

}  // namespace psl::nn
