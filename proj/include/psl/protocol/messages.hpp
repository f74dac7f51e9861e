// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "psl/nn/network.hpp"

namespace psl::protocol {

struct Role {
  enum class Kind { client, server, fed };
  Kind kind = Kind::client;
  std::size_t index = 0;

  static Role client(std::size_t i) { return {Kind::client, i}; }
  static Role server(std::size_t j) { return {Kind::server, j}; }
  static Role fed() { return {Kind::fed, 0}; }
  bool is_client() const { return kind == Kind::client; }

  std::string str() const;  // "client:3", "server:0", "fed"
  static Role parse(const std::string& s);
  friend bool operator==(const Role&, const Role&) = default;
};

enum class Variant { smashed_batch, split_gradients, weight_snapshot };

// Why a WeightSnapshot was sent. Activation traffic uses `none`.
enum class Purpose { none, handoff, wraparound, broadcast, fed_upload, fed_download };

std::string to_string(Variant v);
std::string to_string(Purpose p);
Variant variant_from_string(const std::string& s);
Purpose purpose_from_string(const std::string& s);

struct Envelope {
  std::uint64_t seq = 0;
  Variant variant = Variant::smashed_batch;
  Role sender;
  Role receiver;
  std::size_t epoch = 0;
  std::uint64_t batch_id = 0;
  std::uint64_t scalars = 0;
  Purpose purpose = Purpose::none;
};

struct SmashedPayload {
  nn::Tensor activations;
  std::vector<nn::Label> labels;
  // Positions in the training dataset; lets leakage evaluation line
  // reconstructions up with raw samples.
  std::vector<std::size_t> sample_indices;
};

struct GradientPayload {
  nn::Tensor gradients;
};

struct WeightPayload {
  nn::ParameterSet params;
};

using Payload = std::variant<std::monostate, SmashedPayload, GradientPayload, WeightPayload>;

struct Message {
  Envelope envelope;
  Payload payload;
};

std::uint64_t make_batch_id(std::size_t epoch, std::size_t client, std::size_t batch);

/// Append-only record of every message in a run. Payloads are dropped unless
/// the ledger is verbose; a verbose ledger keeps payloads only for each
/// sender's most recent epoch of each message variant.
class MessageLedger {
 public:
  explicit MessageLedger(bool verbose = false) : verbose_(verbose) {}

  bool verbose() const noexcept { return verbose_; }
  void append(Message message);
  /// Appends another ledger's messages in order, renumbering them.
  void merge(MessageLedger&& other);

  const std::vector<Message>& messages() const noexcept { return messages_; }
  std::size_t size() const noexcept { return messages_.size(); }
  std::size_t count(Variant v) const;
  std::size_t count(Variant v, Purpose p) const;
  /// WeightSnapshot messages whose sender and receiver are both clients.
  std::size_t client_to_client_weight_messages() const;

  void write_jsonl(std::ostream& out) const;
  static MessageLedger read_jsonl(std::istream& in);

 private:
  bool verbose_;
  std::vector<Message> messages_;
  std::map<std::string, std::size_t> latest_epoch_;
};

}  // namespace psl::protocol
