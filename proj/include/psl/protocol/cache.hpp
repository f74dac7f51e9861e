// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "psl/nn/network.hpp"

namespace psl::protocol {

/// One cached sample: a single row of smashed data and its label.
struct CacheEntry {
  std::size_t client_id = 0;
  nn::Tensor activations;  // sample shape, no batch axis
  nn::Label label = 0;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

class CachePool {
 public:
  CachePool(std::size_t capacity, double sampling_fraction);

  std::size_t capacity() const noexcept { return capacity_; }
  double sampling_fraction() const noexcept { return fraction_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::deque<CacheEntry>& entries() const noexcept { return entries_; }

  /// Appends, then evicts oldest entries beyond capacity.
  void insert(CacheEntry entry);
  /// Inserts every row of a smashed batch.
  void insert_batch(std::size_t client_id, const nn::Tensor& activations,
                    std::span<const nn::Label> labels);

  /// Uniform sample without replacement. Asking for more than the pool holds
  /// returns the whole pool (in a seeded order).
  std::vector<CacheEntry> sample(std::size_t count, std::uint64_t seed) const;
  /// Number of cache rows mixed into an incoming batch of `batch` rows.
  std::size_t sample_count(std::size_t batch) const;

 private:
  std::size_t capacity_;
  double fraction_;
  nn::Shape shape_;
  std::deque<CacheEntry> entries_;
};

}  // namespace psl::protocol
