// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "psl/common/errors.hpp"
#include "psl/protocol/scheme.hpp"
#include "../support/toy.hpp"

using namespace psl;
using namespace psl::protocol;

namespace {

bool same_run(const RunResult& a, const RunResult& b) {
  if (a.state.clients.size() != b.state.clients.size()) return false;
  for (std::size_t i = 0; i < a.state.clients.size(); ++i) {
    if (!nn::bitwise_equal(a.state.clients[i].params, b.state.clients[i].params)) return false;
  }
  for (std::size_t j = 0; j < std::min(a.state.servers.size(), b.state.servers.size()); ++j) {
    if (!nn::bitwise_equal(a.state.servers[j].params, b.state.servers[j].params)) return false;
  }
  return a.final_accuracy == b.final_accuracy;
}

}  // namespace

TEST_CASE("with one client every scheme retraces sl_vanilla") {
  auto toy = testing::make_toy("tiny-mlp", 1, 50);
  const auto ref = run_scheme(toy->fed, testing::options(Scheme::sl_vanilla, 3));
  for (auto s : {Scheme::sl_roundrobin, Scheme::sfl, Scheme::msl, Scheme::psl, Scheme::psl_cache}) {
    CAPTURE(to_string(s));
    auto opts = testing::options(s, 3);
    if (s == Scheme::psl_cache) opts.scheme.cache->sampling_fraction = 0.0;
    CHECK(same_run(run_scheme(toy->fed, opts), ref));
  }
  auto par = testing::options(Scheme::psl_parallel, 3);
  par.scheme.parallel = ParallelConfig{1, 1};
  CHECK(same_run(run_scheme(toy->fed, par), ref));
}

TEST_CASE("sl_vanilla refuses more than one client") {
  auto toy = testing::make_toy("tiny-mlp", 2, 20);
  try {
    run_scheme(toy->fed, testing::options(Scheme::sl_vanilla, 1));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "scheme.scheme");
  }
}

TEST_CASE("scheme config fields must match the scheme") {
  SchemeConfig c;
  c.scheme = Scheme::psl;
  c.parallel = ParallelConfig{};
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c.scheme = Scheme::psl_parallel;
  c.parallel->instances = 0;
  try {
    c.validate(3);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "scheme.parallel.instances");
  }
  c.parallel.reset();
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c.scheme = Scheme::psl_cache;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  c.cache = CacheConfig{};
  CHECK_NOTHROW(c.validate(3));
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(3), ConfigError);
  CHECK(scheme_from_string("psl_parallel") == Scheme::psl_parallel);
  CHECK_THROWS_AS(scheme_from_string("fedavg"), ConfigError);
}

TEST_CASE("batches cover the shard once, last one short") {
  auto toy = testing::make_toy("tiny-mlp", 3, 70);
  const auto opts = testing::options(Scheme::psl, 1, 8);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto batches = make_batches(toy->fed, opts, c, 2);
    std::multiset<std::size_t> seen;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      if (k + 1 < batches.size()) CHECK(batches[k].indices.size() == 8);
      CHECK(batches[k].batch_id == make_batch_id(2, c, k));
      seen.insert(batches[k].indices.begin(), batches[k].indices.end());
    }
    const auto& shard = toy->fed.shards[c].indices;
    CHECK(seen == std::multiset<std::size_t>(shard.begin(), shard.end()));
    // Reshuffled between epochs.
    CHECK(make_batches(toy->fed, opts, c, 3)[0].indices != batches[0].indices);
  }
}

TEST_CASE("random client order is a seeded permutation") {
  auto opts = testing::options(Scheme::psl, 1);
  opts.scheme.order = OrderPolicy::random;
  std::set<std::vector<std::size_t>> distinct;
  for (std::size_t e = 1; e <= 12; ++e) {
    auto o = client_order(opts, 6, e);
    CHECK(o == client_order(opts, 6, e));
    distinct.insert(o);
    std::sort(o.begin(), o.end());
    CHECK(o == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  }
  CHECK(distinct.size() > 1);
  opts.scheme.order = OrderPolicy::fixed;
  CHECK(client_order(opts, 3, 4) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("P-SL keeps clients apart") {
  auto toy = testing::make_toy("tiny-mlp", 2, 60);
  for (auto s : {Scheme::psl, Scheme::psl_parallel, Scheme::psl_cache}) {
    CAPTURE(to_string(s));
    const auto r = run_scheme(toy->fed, testing::options(s, 2));
    CHECK(r.state.ledger.count(Variant::weight_snapshot) == 0);
    CHECK(r.state.ledger.client_to_client_weight_messages() == 0);
    const auto& u0 = r.state.clients[0].params.at(1).weight;
    const auto& u1 = r.state.clients[1].params.at(1).weight;
    for (std::size_t i = 0; i < u0.size(); ++i) CHECK(u0[i] != u1[i]);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(r.final_accuracy[i] >= 0.0);
      CHECK(r.final_accuracy[i] <= 1.0);
    }
  }
}

TEST_CASE("round-robin SL hands weights along and broadcasts at the end") {
  const std::size_t n = 4, epochs = 3;
  auto toy = testing::make_toy("tiny-mlp", n, 64);
  auto opts = testing::options(Scheme::sl_roundrobin, epochs);
  opts.verbose_ledger = true;
  const auto r = run_scheme(toy->fed, opts);
  const auto& led = r.state.ledger;
  CHECK(led.count(Variant::weight_snapshot, Purpose::handoff) == (n - 1) * epochs);
  CHECK(led.count(Variant::weight_snapshot, Purpose::wraparound) == epochs - 1);
  CHECK(led.count(Variant::weight_snapshot, Purpose::broadcast) == n - 1);
  std::vector<std::size_t> per_epoch(epochs + 2, 0);
  for (const auto& m : led.messages()) {
    if (m.envelope.variant != Variant::weight_snapshot) continue;
    CHECK(m.envelope.sender.is_client());
    CHECK(m.envelope.receiver.is_client());
    ++per_epoch[m.envelope.epoch];
  }
  CHECK(per_epoch[1] == n - 1);
  for (std::size_t e = 2; e <= epochs; ++e) CHECK(per_epoch[e] == n);
  CHECK(per_epoch[epochs + 1] == n - 1);
  // Everyone ends with the last trainer's weights, which is what the
  // broadcast carried.
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(nn::bitwise_equal(r.state.clients[i].params, r.state.clients[n - 1].params));
  }
  const auto& last = led.messages().back();
  CHECK(last.envelope.purpose == Purpose::broadcast);
  CHECK(nn::bitwise_equal(std::get<WeightPayload>(last.payload).params,
                          r.state.clients[n - 1].params));
}

TEST_CASE("round-robin hand-off copies the predecessor's weights before training") {
  auto toy = testing::make_toy("tiny-mlp", 3, 48);
  auto opts = testing::options(Scheme::sl_roundrobin, 1);
  opts.scheme.learning_rate = 0.0;
  auto state = init_run(toy->fed, opts);
  // Perturb client 0 so a copy is distinguishable from the shared init.
  state.clients[0].params.at(1).bias[0] = 0.25;
  run_sl_roundrobin_epoch(toy->fed, state, opts);
  CHECK(nn::bitwise_equal(state.clients[1].params, state.clients[0].params));
  CHECK(nn::bitwise_equal(state.clients[2].params, state.clients[0].params));
}

TEST_CASE("SFL synchronizes clients to their mean every epoch") {
  auto toy = testing::make_toy("tiny-conv1d", 3, 45);
  auto opts = testing::options(Scheme::sfl, 1);
  auto state = init_run(toy->fed, opts);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(nn::bitwise_equal(state.clients[i].params, state.clients[0].params));
  }
  run_sfl_epoch(toy->fed, state, opts);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(nn::bitwise_equal(state.clients[i].params, state.clients[0].params));
  }
  CHECK(state.ledger.count(Variant::weight_snapshot, Purpose::fed_upload) == 3);
  CHECK(state.ledger.count(Variant::weight_snapshot, Purpose::fed_download) == 6);
  CHECK(state.ledger.client_to_client_weight_messages() == 0);
  const auto u = state.clients[0].params.scalar_count();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c = state.costs.at(1, i);
    CHECK(c.weights_up + c.weights_down == 2 * u);
    CHECK(c.weight_updates == 1);
  }
}

TEST_CASE("SFL average is the plain mean of local models") {
  auto toy = testing::make_toy("tiny-mlp", 2, 32);
  auto opts = testing::options(Scheme::sfl, 1);
  opts.verbose_ledger = true;
  auto state = init_run(toy->fed, opts);
  run_sfl_epoch(toy->fed, state, opts);
  std::vector<nn::ParameterSet> ups;
  for (const auto& m : state.ledger.messages()) {
    if (m.envelope.purpose == Purpose::fed_upload) {
      ups.push_back(std::get<WeightPayload>(m.payload).params);
    }
  }
  REQUIRE(ups.size() == 2);
  const auto& got = state.clients[0].params.at(1).weight;
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == (ups[0].at(1).weight[i] + ups[1].at(1).weight[i]) / 2.0);
  }
}

TEST_CASE("mSL client k only depends on shard k") {
  auto toy = testing::make_toy("tiny-mlp", 3, 60);
  const auto opts = testing::options(Scheme::msl, 2);
  const auto a = run_scheme(toy->fed, opts);
  for (const auto& m : a.state.ledger.messages()) {
    CHECK(m.envelope.sender.index == m.envelope.receiver.index);
  }
  CHECK(a.state.servers.size() == 3);

  auto shuffled = toy->fed;
  std::swap(shuffled.shards[0].indices, shuffled.shards[2].indices);
  const auto b = run_scheme(shuffled, opts);
  CHECK(nn::bitwise_equal(a.state.clients[1].params, b.state.clients[1].params));
  CHECK(nn::bitwise_equal(a.state.servers[1].params, b.state.servers[1].params));
  CHECK_FALSE(nn::bitwise_equal(a.state.clients[0].params, b.state.clients[0].params));
}

TEST_CASE("parallel P-SL with m=1, K=1 is sequential P-SL") {
  auto toy = testing::make_toy("tiny-conv2", 4, 48);
  auto seq_opts = testing::options(Scheme::psl, 2);
  seq_opts.scheme.order = OrderPolicy::random;
  auto par_opts = testing::options(Scheme::psl_parallel, 2);
  par_opts.scheme.order = OrderPolicy::random;
  par_opts.scheme.parallel = ParallelConfig{1, 1};
  const auto seq = run_scheme(toy->fed, seq_opts);
  const auto par = run_scheme(toy->fed, par_opts);
  CHECK(same_run(seq, par));
  REQUIRE(seq.state.ledger.size() == par.state.ledger.size());
  for (std::size_t i = 0; i < seq.state.ledger.size(); ++i) {
    const auto& x = seq.state.ledger.messages()[i].envelope;
    const auto& y = par.state.ledger.messages()[i].envelope;
    CHECK(x.batch_id == y.batch_id);
    CHECK(x.sender == y.sender);
  }
}

TEST_CASE("threaded parallel P-SL matches the deterministic simulation") {
  auto toy = testing::make_toy("tiny-mlp", 6, 96);
  for (std::size_t k : {std::size_t{0}, std::size_t{2}, std::size_t{5}}) {
    CAPTURE(k);
    auto opts = testing::options(Scheme::psl_parallel, 2);
    opts.scheme.parallel = ParallelConfig{3, k};
    opts.concurrent = false;
    const auto det = run_scheme(toy->fed, opts);
    opts.concurrent = true;
    const auto thr = run_scheme(toy->fed, opts);
    CHECK(same_run(det, thr));
    CHECK(det.state.ledger.size() == thr.state.ledger.size());
    CHECK(det.state.costs.buckets() == thr.state.costs.buckets());
    // Aggregation leaves every instance on the same weights.
    for (const auto& s : det.state.servers) {
      CHECK(nn::bitwise_equal(s.params, det.state.servers[0].params));
      CHECK_FALSE(s.busy);
    }
    CHECK(det.state.snapshot_buffer.empty());
  }
}

TEST_CASE("parallel aggregation averages the snapshots of one round") {
  auto toy = testing::make_toy("tiny-mlp", 2, 32);
  auto opts = testing::options(Scheme::psl_parallel, 1);
  opts.scheme.parallel = ParallelConfig{2, 2};
  auto state = init_run(toy->fed, opts);
  CHECK(nn::bitwise_equal(state.servers[0].params, state.servers[1].params));

  // Replay the two sessions by hand on copies, then average.
  const auto w0 = state.servers[0].params;
  std::vector<nn::ParameterSet> snaps;
  for (std::size_t c = 0; c < 2; ++c) {
    ClientState cl = state.clients[c];
    ServerInstance sv{0, w0, false};
    MessageLedger led;
    CostLedger costs(2);
    for (const auto& b : make_batches(toy->fed, opts, c, 1)) {
      client_step(toy->fed, cl, sv, b, opts.scheme.learning_rate, Channel{&led, &costs});
    }
    snaps.push_back(sv.params);
  }
  run_psl_parallel_epoch(toy->fed, state, opts);
  const auto expect = nn::average_parameters(snaps);
  CHECK(nn::bitwise_equal(state.servers[0].params, expect));
  CHECK(nn::bitwise_equal(state.servers[1].params, expect));
}

TEST_CASE("cache with sampling fraction 0 is plain P-SL") {
  auto toy = testing::make_toy("tiny-mlp", 3, 48);
  auto c = testing::options(Scheme::psl_cache, 2);
  c.scheme.cache = CacheConfig{0, 0.0};
  CHECK(same_run(run_scheme(toy->fed, c), run_scheme(toy->fed, testing::options(Scheme::psl, 2))));
  c.scheme.cache = CacheConfig{0, 1.0};
  CHECK_FALSE(
      same_run(run_scheme(toy->fed, c), run_scheme(toy->fed, testing::options(Scheme::psl, 2))));
}

TEST_CASE("newcomer scenario") {
  auto toy = testing::make_toy("tiny-mlp", 4, 80);
  const auto opts = testing::options(Scheme::psl, 1);
  NewcomerConfig cfg;
  cfg.existing = {0, 2};
  cfg.newcomers = {1, 3};
  cfg.phase1_epochs = 2;
  cfg.phase2_epochs = 1;

  SUBCASE("overlapping ids are a config error") {
    cfg.newcomers = {1, 2};
    CHECK_THROWS_AS(run_newcomer_scenario(toy->fed, opts, cfg), ConfigError);
  }
  SUBCASE("unknown ids are a config error") {
    cfg.newcomers = {7};
    CHECK_THROWS_AS(run_newcomer_scenario(toy->fed, opts, cfg), ConfigError);
  }
  SUBCASE("train_new only touches newcomers in phase 2") {
    cfg.policy = NewcomerPolicy::train_new;
    const auto r = run_newcomer_scenario(toy->fed, opts, cfg);
    CHECK(r.epochs.size() == 3);
    CHECK(r.state.ledger.client_to_client_weight_messages() == 0);
    for (const auto& m : r.state.ledger.messages()) {
      if (m.envelope.epoch <= 2) {
        const auto who = m.envelope.sender.is_client() ? m.envelope.sender : m.envelope.receiver;
        CHECK((who.index == 0 || who.index == 2));
      } else {
        const auto who = m.envelope.sender.is_client() ? m.envelope.sender : m.envelope.receiver;
        CHECK((who.index == 1 || who.index == 3));
      }
    }
    CHECK(r.before.size() == 4);
    CHECK(r.existing_before == doctest::Approx((r.before[0] + r.before[2]) / 2));
    CHECK(r.newcomers_after == doctest::Approx((r.after[1] + r.after[3]) / 2));
  }
  SUBCASE("phase 1 is identical with and without the cache") {
    cfg.phase2_epochs = 0;
    const auto plain = run_newcomer_scenario(toy->fed, opts, cfg);
    cfg.cache_enabled = true;
    const auto cached = run_newcomer_scenario(toy->fed, opts, cfg);
    CHECK(plain.before == cached.before);
    CHECK(nn::bitwise_equal(plain.state.servers[0].params, cached.state.servers[0].params));
    REQUIRE(cached.state.cache.has_value());
    // Two epochs over 40 existing samples, capacity 80: all recorded.
    CHECK(cached.state.cache->size() == 80);
    for (const auto& e : cached.state.cache->entries()) {
      CHECK((e.client_id == 0 || e.client_id == 2));
    }
  }
  SUBCASE("train_all trains everyone in phase 2") {
    cfg.policy = NewcomerPolicy::train_all;
    const auto r = run_newcomer_scenario(toy->fed, opts, cfg);
    std::set<std::size_t> seen;
    for (const auto& m : r.state.ledger.messages()) {
      if (m.envelope.epoch == 3 && m.envelope.sender.is_client()) seen.insert(m.envelope.sender.index);
    }
    CHECK(seen == std::set<std::size_t>{0, 1, 2, 3});
  }
}
