// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/protocol/cache.hpp"

#include <cmath>
#include <numeric>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"

namespace psl::protocol {

CachePool::CachePool(std::size_t capacity, double sampling_fraction)
    : capacity_(capacity), fraction_(sampling_fraction) {
  if (capacity_ == 0) throw ConfigError("scheme.cache.capacity", "must be positive");
  if (!(fraction_ >= 0.0) || !std::isfinite(fraction_)) {
    throw ConfigError("scheme.cache.sampling_fraction", "must be finite and non-negative");
  }
}

void CachePool::insert(CacheEntry entry) {
  if (shape_.empty()) {
    shape_ = entry.activations.shape();
  } else if (entry.activations.shape() != shape_) {
    throw ProtocolError("cache entry shape " + nn::shape_to_string(entry.activations.shape()) +
                        " does not match pool shape " + nn::shape_to_string(shape_));
  }
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void CachePool::insert_batch(std::size_t client_id, const nn::Tensor& activations,
                             std::span<const nn::Label> labels) {
  if (activations.rank() < 2 || activations.dim(0) != labels.size()) {
    throw ProtocolError("cache insert: activation rows do not match labels");
  }
  const nn::Shape row(activations.shape().begin() + 1, activations.shape().end());
  const std::size_t width = activations.row_size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<double> v(activations.data() + i * width, activations.data() + (i + 1) * width);
    insert({client_id, nn::Tensor(row, std::move(v)), labels[i]});
  }
}

std::vector<CacheEntry> CachePool::sample(std::size_t count, std::uint64_t seed) const {
  const std::size_t n = entries_.size();
  if (count > n) count = n;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<CacheEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(entries_[idx[i]]);
  return out;
}

std::size_t CachePool::sample_count(std::size_t batch) const {
  return static_cast<std::size_t>(std::llround(fraction_ * static_cast<double>(batch)));
}

}  // namespace psl::protocol
