// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/data/dataset.hpp"

namespace psl::data {

enum class PartitionMode { balanced, imbalanced, noniid };

std::string to_string(PartitionMode mode);
PartitionMode partition_mode_from_string(const std::string& s);

struct PartitionSpec {
  PartitionMode mode = PartitionMode::balanced;
  std::size_t client_count = 1;
  std::uint64_t seed = 0;
  /// Imbalanced mode. Empty means the default for client_count.
  std::vector<double> ratios;
  /// Non-IID mode.
  std::size_t classes_per_client = 0;

  /// Throws ConfigError naming the offending field.
  void validate(std::size_t class_count) const;
  /// Ratio vector in effect for imbalanced mode.
  std::vector<double> effective_ratios() const;

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct ClientShard {
  std::size_t client_id = 0;
  std::vector<std::size_t> indices;

  friend bool operator==(const ClientShard&, const ClientShard&) = default;
};

/// The six-client ratio vector used for the reference imbalanced setup.
const std::vector<double>& reference_ratios_six();

/// Standard normal density sampled at N equally spaced points from 2 down to
/// 0, normalized. Strictly increasing.
std::vector<double> default_imbalanced_ratios(std::size_t n);

/// Integer counts summing to `total`, largest-remainder rounding of
/// ratios * total. Ties go to the lower index.
std::vector<std::size_t> largest_remainder_counts(const std::vector<double>& ratios,
                                                  std::size_t total);

std::vector<ClientShard> partition(const Dataset& dataset, const PartitionSpec& spec);

/// Per-client counts and class histograms, plus any samples left unassigned
/// (non-IID specs that do not cover every class).
nlohmann::json shard_summary(const Dataset& dataset, const PartitionSpec& spec,
                             const std::vector<ClientShard>& shards);

}  // namespace psl::data
