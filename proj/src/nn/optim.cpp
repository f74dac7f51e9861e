// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "psl/common/errors.hpp"
#include "psl/nn/network.hpp"

namespace psl::nn {

LossResult loss_softmax_ce(const Tensor& logits, std::span<const Label> labels) {
  if (logits.rank() != 2) throw ShapeError("logits must be [batch, classes]");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch) throw ShapeError("label count does not match batch");
  if (batch == 0) throw ShapeError("empty batch");
  LossResult r{0.0, Tensor(logits.shape())};
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] >= classes) {
      throw DomainError("label " + std::to_string(labels[n]) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
    const double* z = logits.data() + n * classes;
    double* g = r.grad.data() + n * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
    const double log_sum = std::log(sum) + zmax;
    r.loss += (log_sum - z[labels[n]]) * inv_batch;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(z[c] - log_sum);
      g[c] = (p - (c == labels[n] ? 1.0 : 0.0)) * inv_batch;
    }
  }
  return r;
}

LossResult loss_mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mse: prediction " + shape_to_string(prediction.shape()) + " vs target " +
                     shape_to_string(target.shape()));
  }
  if (prediction.size() == 0) throw ShapeError("mse: empty tensors");
  LossResult r{0.0, Tensor(prediction.shape())};
  const double inv = 1.0 / static_cast<double>(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d * inv;
  }
  r.loss *= inv;
  return r;
}

void sgd_update(ParameterSet& params, const ParameterSet& grads, double learning_rate) {
  if (!params.same_structure(grads)) throw ShapeError("sgd: gradient structure mismatch");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("sgd: learning rate must be finite and non-negative");
  }
  auto git = grads.layers().begin();
  for (auto& [k, p] : params.layers()) {
    const auto& g = git->second;
    for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] -= learning_rate * g.weight[i];
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= learning_rate * g.bias[i];
    ++git;
  }
}

ParameterSet sgd_step(const ParameterSet& params, const ParameterSet& grads,
                      double learning_rate) {
  ParameterSet out = params;
  sgd_update(out, grads, learning_rate);
  return out;
}

MomentumSgd::MomentumSgd(double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("momentum sgd: learning rate must be finite and non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must be in [0, 1)");
}

void MomentumSgd::step(ParameterSet& params, const ParameterSet& grads) {
  if (!params.same_structure(grads)) throw ShapeError("sgd: gradient structure mismatch");
  if (velocity_.layers().empty()) velocity_ = grads.zeros_like();
  auto git = grads.layers().begin();
  auto vit = velocity_.layers().begin();
  for (auto& [k, p] : params.layers()) {
    auto update = [&](Tensor& w, const Tensor& g, Tensor& v) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i];
        w[i] -= lr_ * v[i];
      }
    };
    update(p.weight, git->second.weight, vit->second.weight);
    update(p.bias, git->second.bias, vit->second.bias);
    ++git;
    ++vit;
  }
}

ParameterSet average_parameters(std::span<const ParameterSet> sets) {
  if (sets.empty()) throw DomainError("average of an empty parameter list");
  for (const auto& s : sets) {
    if (!s.same_structure(sets.front())) {
      throw DomainError("average of heterogeneous parameter sets");
    }
  }
  ParameterSet acc = sets.front();
  for (std::size_t j = 1; j < sets.size(); ++j) {
    auto it = sets[j].layers().begin();
    for (auto& [k, p] : acc.layers()) {
      for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] += it->second.weight[i];
      for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] += it->second.bias[i];
      ++it;
    }
  }
  if (sets.size() > 1) {
    const auto k = static_cast<double>(sets.size());
    for (auto& [_, p] : acc.layers()) {
      for (auto& v : p.weight.values()) v /= k;
      for (auto& v : p.bias.values()) v /= k;
    }
  }
  return acc;
}

}  // namespace psl::nn
