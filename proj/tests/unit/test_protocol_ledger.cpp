// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>

#include "psl/common/errors.hpp"
#include "psl/protocol/cost.hpp"
#include "psl/protocol/messages.hpp"
#include "psl/protocol/scheme.hpp"
#include "../support/toy.hpp"

using namespace psl;
using namespace psl::protocol;

TEST_CASE("roles print and parse") {
  CHECK(Role::client(3).str() == "client:3");
  CHECK(Role::server(0).str() == "server:0");
  CHECK(Role::fed().str() == "fed");
  for (auto r : {Role::client(12), Role::server(2), Role::fed()}) CHECK(Role::parse(r.str()) == r);
  CHECK_THROWS_AS(Role::parse("client:"), FormatError);
  CHECK_THROWS_AS(Role::parse("satellite:1"), FormatError);
}

TEST_CASE("batch ids pack epoch, client and batch") {
  CHECK(make_batch_id(0, 0, 0) == 0);
  CHECK(make_batch_id(2, 5, 7) == ((2ull << 40) | (5ull << 24) | 7ull));
  CHECK_THROWS_AS(make_batch_id(0, 1 << 16, 0), DomainError);
  CHECK_THROWS_AS(make_batch_id(0, 0, 1 << 24), DomainError);
}

TEST_CASE("ledger JSONL round trip") {
  auto toy = testing::make_toy("tiny-mlp", 2, 24);
  for (bool verbose : {false, true}) {
    CAPTURE(verbose);
    auto opts = testing::options(Scheme::sfl, 2);
    opts.verbose_ledger = verbose;
    const auto r = run_scheme(toy->fed, opts);
    std::stringstream ss;
    r.state.ledger.write_jsonl(ss);
    const auto text = ss.str();
    CHECK(std::count(text.begin(), text.end(), '\n') ==
          static_cast<std::ptrdiff_t>(r.state.ledger.size()));
    std::stringstream in(text);
    const auto back = MessageLedger::read_jsonl(in);
    REQUIRE(back.size() == r.state.ledger.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      const auto& a = r.state.ledger.messages()[i];
      const auto& b = back.messages()[i];
      CHECK(a.envelope.seq == b.envelope.seq);
      CHECK(a.envelope.variant == b.envelope.variant);
      CHECK(a.envelope.sender == b.envelope.sender);
      CHECK(a.envelope.receiver == b.envelope.receiver);
      CHECK(a.envelope.epoch == b.envelope.epoch);
      CHECK(a.envelope.batch_id == b.envelope.batch_id);
      CHECK(a.envelope.scalars == b.envelope.scalars);
      CHECK(a.envelope.purpose == b.envelope.purpose);
      CHECK(a.payload.index() == b.payload.index());
      if (const auto* s = std::get_if<SmashedPayload>(&a.payload)) {
        const auto& t = std::get<SmashedPayload>(b.payload);
        CHECK(nn::bitwise_equal(s->activations, t.activations));
        CHECK(s->labels == t.labels);
        CHECK(s->sample_indices == t.sample_indices);
      }
    }
    // Non-verbose ledgers never carry payloads.
    if (!verbose) {
      for (const auto& m : r.state.ledger.messages()) CHECK(m.payload.index() == 0);
    }
  }
}

TEST_CASE("verbose ledger keeps payloads for the latest epoch only") {
  auto toy = testing::make_toy("tiny-mlp", 1, 16);
  auto opts = testing::options(Scheme::sl_vanilla, 3);
  opts.verbose_ledger = true;
  const auto r = run_scheme(toy->fed, opts);
  for (const auto& m : r.state.ledger.messages()) {
    CHECK((m.payload.index() != 0) == (m.envelope.epoch == 3));
  }
}

TEST_CASE("malformed JSONL is a format error") {
  std::stringstream a("{\"variant\": \"smashed_batch\"\n");
  CHECK_THROWS_AS(MessageLedger::read_jsonl(a), FormatError);
  std::stringstream b("[1,2]\n");
  CHECK_THROWS_AS(MessageLedger::read_jsonl(b), FormatError);
}

TEST_CASE("cost counters match the closed forms on balanced shards") {
  const std::size_t n = 3, samples = 60, epochs = 3;
  auto toy = testing::make_toy("tiny-conv2", n, samples);
  const auto s = toy->model.split_size();
  const std::size_t per_client = samples / n;

  auto run = [&](Scheme scheme) { return run_scheme(toy->fed, testing::options(scheme, epochs)); };
  const auto psl = run(Scheme::psl);
  const auto sl = run(Scheme::sl_roundrobin);
  const auto sfl = run(Scheme::sfl);
  const auto u = psl.state.clients[0].params.scalar_count();

  for (std::size_t e = 1; e <= epochs; ++e) {
    for (std::size_t c = 0; c < n; ++c) {
      CAPTURE(e);
      CAPTURE(c);
      const auto p = psl.state.costs.at(e, c);
      CHECK(p.items == per_client);
      CHECK(p.smashed_up == per_client * s);
      CHECK(p.gradients_down == per_client * s);
      CHECK(p.weights_up == 0);
      CHECK(p.weights_down == 0);
      CHECK(p.weight_updates == 0);
      CHECK(p.communication() == 2 * per_client * s);

      const auto f = sfl.state.costs.at(e, c);
      CHECK(f.items == per_client);
      CHECK(f.weight_updates == 1);
      CHECK(f.communication() == 2 * per_client * s + 2 * u);
      CHECK(f.communication() - p.communication() == 2 * u);
    }
  }
  // Round-robin is in steady state from epoch 2: every client receives once
  // and sends once. Epoch E's last sender ships in the broadcast bucket.
  for (std::size_t c = 0; c < n; ++c) {
    const auto r = sl.state.costs.at(2, c);
    CHECK(r.communication() == 2 * per_client * s + 2 * u);
    CHECK(r.communication() - psl.state.costs.at(2, c).communication() == 2 * u);
    CHECK(r.weight_updates == 1);
  }
  CHECK(sl.state.costs.last_bucket() == epochs + 1);
  CHECK(sfl.state.costs.at(0, 1).weights_down == u);

  const auto rows = cost_report(psl.state.costs, {false, n, samples, s, u}, epochs);
  CHECK(rows.size() == n * epochs);
  for (const auto& r : rows) {
    CHECK(r.predicted_items == doctest::Approx(per_client));
    CHECK(r.communication_difference == 0.0);
  }
  const auto frows = cost_report(sfl.state.costs, {true, n, samples, s, u}, epochs);
  for (const auto& r : frows) CHECK(r.communication_difference == 0.0);
  const auto j = cost_rows_to_json(frows);
  CHECK(j.size() == rows.size());
  CHECK(j[0]["weights_up"] == u);
}

TEST_CASE("the 60000-sample balanced example has 10000 items per client") {
  CostModel m{false, 6, 60000, 10, 100};
  CostLedger empty(6);
  const auto rows = cost_report(empty, m, 1);
  CHECK(rows[0].predicted_items == 10000.0);
  CHECK(rows[0].predicted_communication == 2.0 * 10000 * 10);
}

TEST_CASE("cost ledger rejects unknown clients") {
  CostLedger l(2);
  Envelope e;
  e.variant = Variant::smashed_batch;
  e.sender = Role::client(2);
  e.receiver = Role::server(0);
  CHECK_THROWS_AS(l.charge(e, 1), ProtocolError);
}

TEST_CASE("the final broadcast does not drop the last epoch's smashed payloads") {
  auto toy = testing::make_toy("tiny-mlp", 3, 30);
  auto opts = testing::options(Scheme::sl_roundrobin, 2);
  opts.verbose_ledger = true;
  const auto r = run_scheme(toy->fed, opts);
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t kept = 0;
    for (const auto& m : r.state.ledger.messages()) {
      if (m.envelope.sender == Role::client(c) && std::holds_alternative<SmashedPayload>(m.payload)) {
        CHECK(m.envelope.epoch == 2);
        kept += std::get<SmashedPayload>(m.payload).labels.size();
      }
    }
    CHECK(kept == toy->fed.shards[c].indices.size());
  }
}
