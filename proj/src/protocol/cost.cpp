// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/protocol/cost.hpp"

#include "psl/common/errors.hpp"

namespace psl::protocol {

CostCounters& CostCounters::operator+=(const CostCounters& o) {
  items += o.items;
  weight_updates += o.weight_updates;
  smashed_up += o.smashed_up;
  gradients_down += o.gradients_down;
  weights_up += o.weights_up;
  weights_down += o.weights_down;
  return *this;
}

std::vector<CostCounters>& CostLedger::bucket(std::size_t b) {
  auto& v = buckets_[b];
  if (v.size() < clients_) v.resize(clients_);
  return v;
}

void CostLedger::charge(const Envelope& env, std::uint64_t items) {
  auto& row = bucket(env.epoch);
  const auto client = [&](const Role& r) -> CostCounters& {
    if (r.index >= clients_) throw ProtocolError("message names unknown " + r.str());
    return row[r.index];
  };
  switch (env.variant) {
    case Variant::smashed_batch:
      if (env.sender.is_client()) {
        auto& c = client(env.sender);
        c.items += items;
        c.smashed_up += env.scalars;
      }
      break;
    case Variant::split_gradients:
      if (env.receiver.is_client()) client(env.receiver).gradients_down += env.scalars;
      break;
    case Variant::weight_snapshot:
      if (env.sender.is_client()) client(env.sender).weights_up += env.scalars;
      if (env.receiver.is_client()) {
        auto& c = client(env.receiver);
        c.weights_down += env.scalars;
        c.weight_updates += 1;
      }
      break;
  }
}

void CostLedger::merge(const CostLedger& other) {
  if (other.clients_ > clients_) clients_ = other.clients_;
  for (const auto& [b, rows] : other.buckets_) {
    auto& mine = bucket(b);
    for (std::size_t i = 0; i < rows.size(); ++i) mine[i] += rows[i];
  }
}

CostCounters CostLedger::at(std::size_t b, std::size_t client) const {
  auto it = buckets_.find(b);
  if (it == buckets_.end() || client >= it->second.size()) return {};
  return it->second[client];
}

CostCounters CostLedger::total(std::size_t client) const {
  CostCounters t;
  for (const auto& [b, rows] : buckets_) {
    if (client < rows.size()) t += rows[client];
  }
  return t;
}

std::size_t CostLedger::last_bucket() const {
  return buckets_.empty() ? 0 : buckets_.rbegin()->first;
}

std::vector<CostRow> cost_report(const CostLedger& ledger, const CostModel& model,
                                 std::size_t epochs) {
  std::vector<CostRow> rows;
  const double per_client =
      static_cast<double>(model.dataset_items) / static_cast<double>(model.clients);
  for (std::size_t e = 1; e <= epochs; ++e) {
    for (std::size_t c = 0; c < model.clients; ++c) {
      CostRow r;
      r.client = c;
      r.epoch = e;
      r.measured = ledger.at(e, c);
      r.predicted_items = per_client;
      r.predicted_updates = model.shares_weights ? 1 : 0;
      r.predicted_communication = 2.0 * per_client * static_cast<double>(model.split_size);
      if (model.shares_weights) {
        r.predicted_communication += 2.0 * static_cast<double>(model.client_params);
      }
      r.communication_difference =
          static_cast<double>(r.measured.communication()) - r.predicted_communication;
      rows.push_back(r);
    }
  }
  return rows;
}

nlohmann::json cost_rows_to_json(const std::vector<CostRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"client", r.client},
                   {"epoch", r.epoch},
                   {"items", r.measured.items},
                   {"weight_updates", r.measured.weight_updates},
                   {"smashed_up", r.measured.smashed_up},
                   {"gradients_down", r.measured.gradients_down},
                   {"weights_up", r.measured.weights_up},
                   {"weights_down", r.measured.weights_down},
                   {"communication", r.measured.communication()},
                   {"predicted_items", r.predicted_items},
                   {"predicted_updates", r.predicted_updates},
                   {"predicted_communication", r.predicted_communication},
                   {"communication_difference", r.communication_difference}});
  }
  return out;
}

}  // namespace psl::protocol
