// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "psl/protocol/messages.hpp"

namespace psl::protocol {

/// Client-side counters. `items` multiplies C^P (one forward/backward of the
/// client part per sample); `weight_updates` counts C^U events.
struct CostCounters {
  std::uint64_t items = 0;
  std::uint64_t weight_updates = 0;
  std::uint64_t smashed_up = 0;
  std::uint64_t gradients_down = 0;
  std::uint64_t weights_up = 0;
  std::uint64_t weights_down = 0;

  std::uint64_t communication() const {
    return smashed_up + gradients_down + weights_up + weights_down;
  }
  CostCounters& operator+=(const CostCounters& o);
  friend bool operator==(const CostCounters&, const CostCounters&) = default;
};

/// Counters per (epoch bucket, client). Bucket 0 holds setup traffic, buckets
/// 1..E the epochs, and anything after the last epoch (final broadcast) lands
/// in bucket E+1.
class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(std::size_t clients) : clients_(clients) {}

  std::size_t client_count() const noexcept { return clients_; }
  /// Charges a message to the client endpoints it touches.
  void charge(const Envelope& env, std::uint64_t items = 0);
  void merge(const CostLedger& other);

  CostCounters at(std::size_t bucket, std::size_t client) const;
  CostCounters total(std::size_t client) const;
  std::size_t last_bucket() const;
  const std::map<std::size_t, std::vector<CostCounters>>& buckets() const { return buckets_; }

 private:
  std::vector<CostCounters>& bucket(std::size_t b);
  std::size_t clients_ = 0;
  std::map<std::size_t, std::vector<CostCounters>> buckets_;
};

/// One row of the per-client cost table: measured counters against the
/// closed-form per-epoch predictions.
struct CostRow {
  std::size_t client = 0;
  std::size_t epoch = 0;
  CostCounters measured;
  double predicted_items = 0;           // |X|/N
  std::uint64_t predicted_updates = 0;  // C^U multiplier
  double predicted_communication = 0;   // 2(|X|/N)S (+ 2|U|)
  double communication_difference = 0;  // measured - predicted
};

struct CostModel {
  bool shares_weights = false;  // SL and SFL rows carry C^U and 2|U|
  std::size_t clients = 0;
  std::size_t dataset_items = 0;  // |X|
  std::size_t split_size = 0;     // S
  std::size_t client_params = 0;  // |U|
};

std::vector<CostRow> cost_report(const CostLedger& ledger, const CostModel& model,
                                 std::size_t epochs);
nlohmann::json cost_rows_to_json(const std::vector<CostRow>& rows);

}  // namespace psl::protocol
