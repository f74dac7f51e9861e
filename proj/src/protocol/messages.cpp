// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/protocol/messages.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "psl/common/errors.hpp"

namespace psl::protocol {

using nlohmann::json;

std::string Role::str() const {
  switch (kind) {
    case Kind::client: return "client:" + std::to_string(index);
    case Kind::server: return "server:" + std::to_string(index);
    case Kind::fed: return "fed";
  }
  return "?";
}

Role Role::parse(const std::string& s) {
  if (s == "fed") return fed();
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw FormatError("bad role '" + s + "'");
  const auto head = s.substr(0, colon);
  std::size_t idx = 0;
  try {
    idx = std::stoul(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw FormatError("bad role index in '" + s + "'");
  }
  if (head == "client") return client(idx);
  if (head == "server") return server(idx);
  throw FormatError("bad role '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::smashed_batch: return "SmashedBatch";
    case Variant::split_gradients: return "SplitGradients";
    case Variant::weight_snapshot: return "WeightSnapshot";
  }
  return "?";
}

std::string to_string(Purpose p) {
  switch (p) {
    case Purpose::none: return "none";
    case Purpose::handoff: return "handoff";
    case Purpose::wraparound: return "wraparound";
    case Purpose::broadcast: return "broadcast";
    case Purpose::fed_upload: return "fed_upload";
    case Purpose::fed_download: return "fed_download";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (auto v : {Variant::smashed_batch, Variant::split_gradients, Variant::weight_snapshot}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown message variant '" + s + "'");
}

Purpose purpose_from_string(const std::string& s) {
  for (auto p : {Purpose::none, Purpose::handoff, Purpose::wraparound, Purpose::broadcast,
                 Purpose::fed_upload, Purpose::fed_download}) {
    if (to_string(p) == s) return p;
  }
  throw FormatError("unknown message purpose '" + s + "'");
}

std::uint64_t make_batch_id(std::size_t epoch, std::size_t client, std::size_t batch) {
  // 24 bits of epoch, 16 of client, 24 of batch.
  if (epoch >= (1ull << 24) || client >= (1ull << 16) || batch >= (1ull << 24)) {
    throw DomainError("batch id field out of range");
  }
  return (static_cast<std::uint64_t>(epoch) << 40) | (static_cast<std::uint64_t>(client) << 24) |
         static_cast<std::uint64_t>(batch);
}

void MessageLedger::append(Message message) {
  message.envelope.seq = messages_.size();
  if (!verbose_) {
    message.payload = std::monostate{};
  } else {
    // Keep payloads for the sender's newest epoch only, per variant, so a
    // final broadcast does not wipe the last epoch's smashed data.
    const auto key = message.envelope.sender.str() + "/" + to_string(message.envelope.variant);
    const auto epoch = message.envelope.epoch;
    auto it = latest_epoch_.find(key);
    if (it == latest_epoch_.end()) {
      latest_epoch_.emplace(key, epoch);
    } else if (epoch > it->second) {
      it->second = epoch;
      for (auto& m : messages_) {
        if (m.envelope.epoch < epoch && m.envelope.sender == message.envelope.sender &&
            m.envelope.variant == message.envelope.variant) {
          m.payload = std::monostate{};
        }
      }
    }
  }
  messages_.push_back(std::move(message));
}

void MessageLedger::merge(MessageLedger&& other) {
  for (auto& m : other.messages_) append(std::move(m));
  other.messages_.clear();
}

std::size_t MessageLedger::count(Variant v) const {
  std::size_t n = 0;
  for (const auto& m : messages_) n += m.envelope.variant == v;
  return n;
}

std::size_t MessageLedger::count(Variant v, Purpose p) const {
  std::size_t n = 0;
  for (const auto& m : messages_) n += m.envelope.variant == v && m.envelope.purpose == p;
  return n;
}

std::size_t MessageLedger::client_to_client_weight_messages() const {
  std::size_t n = 0;
  for (const auto& m : messages_) {
    n += m.envelope.variant == Variant::weight_snapshot && m.envelope.sender.is_client() &&
         m.envelope.receiver.is_client();
  }
  return n;
}

namespace {

json tensor_json(const nn::Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.storage()}};
}

nn::Tensor tensor_from(const json& j) {
  return nn::Tensor(j.at("shape").get<nn::Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace

void MessageLedger::write_jsonl(std::ostream& out) const {
  for (const auto& m : messages_) {
    const auto& e = m.envelope;
    json j{{"seq", e.seq},
           {"variant", to_string(e.variant)},
           {"sender", e.sender.str()},
           {"receiver", e.receiver.str()},
           {"epoch", e.epoch},
           {"batch_id", e.batch_id},
           {"scalars", e.scalars}};
    if (e.purpose != Purpose::none) j["purpose"] = to_string(e.purpose);
    if (const auto* s = std::get_if<SmashedPayload>(&m.payload)) {
      j["payload"] = {{"activations", tensor_json(s->activations)},
                      {"labels", s->labels},
                      {"sample_indices", s->sample_indices}};
    } else if (const auto* g = std::get_if<GradientPayload>(&m.payload)) {
      j["payload"] = {{"gradients", tensor_json(g->gradients)}};
    } else if (const auto* w = std::get_if<WeightPayload>(&m.payload)) {
      json layers = json::object();
      for (const auto& [k, lp] : w->params.layers()) {
        layers[std::to_string(k)] = {{"weight", tensor_json(lp.weight)},
                                     {"bias", tensor_json(lp.bias)}};
      }
      j["payload"] = {{"params", layers}};
    }
    out << j.dump() << '\n';
  }
}

MessageLedger MessageLedger::read_jsonl(std::istream& in) {
  MessageLedger ledger(true);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      Message m;
      m.envelope.variant = variant_from_string(j.at("variant").get<std::string>());
      m.envelope.sender = Role::parse(j.at("sender").get<std::string>());
      m.envelope.receiver = Role::parse(j.at("receiver").get<std::string>());
      m.envelope.epoch = j.at("epoch").get<std::size_t>();
      m.envelope.batch_id = j.at("batch_id").get<std::uint64_t>();
      m.envelope.scalars = j.at("scalars").get<std::uint64_t>();
      if (j.contains("purpose")) {
        m.envelope.purpose = purpose_from_string(j["purpose"].get<std::string>());
      }
      if (j.contains("payload")) {
        const auto& p = j["payload"];
        if (p.contains("activations")) {
          m.payload = SmashedPayload{tensor_from(p["activations"]),
                                     p.at("labels").get<std::vector<nn::Label>>(),
                                     p.at("sample_indices").get<std::vector<std::size_t>>()};
        } else if (p.contains("gradients")) {
          m.payload = GradientPayload{tensor_from(p["gradients"])};
        } else if (p.contains("params")) {
          nn::ParameterSet::Map layers;
          for (const auto& [k, v] : p["params"].items()) {
            layers[std::stoul(k)] = nn::LayerParams{tensor_from(v.at("weight")),
                                                    tensor_from(v.at("bias"))};
          }
          m.payload = WeightPayload{nn::ParameterSet(std::move(layers))};
        }
      }
      // Payloads were already pruned when written; keep them all on load.
      m.envelope.seq = ledger.messages_.size();
      ledger.messages_.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw FormatError("ledger line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ledger;
}

}  // namespace psl::protocol
