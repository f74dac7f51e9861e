// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"
#include "psl/protocol/cache.hpp"
#include "psl/protocol/scheme.hpp"
#include "../support/toy.hpp"

using namespace psl;
using namespace psl::protocol;

namespace {

CacheEntry entry(std::size_t client, double v, nn::Label y = 0) {
  return {client, nn::Tensor({2}, {v, -v}), y};
}

nn::Tensor random_tensor(const nn::Shape& shape, Rng& rng) {
  nn::Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("FIFO eviction at capacity") {
  CachePool pool(10, 1.0);
  for (int i = 0; i < 11; ++i) pool.insert(entry(0, i));
  CHECK(pool.size() == 10);
  CHECK(pool.entries().front().activations[0] == 1.0);
  CHECK(pool.entries().back().activations[0] == 10.0);
}

TEST_CASE("sampling") {
  CachePool pool(50, 0.5);
  CHECK(pool.sample(5, 1).empty());
  for (int i = 0; i < 20; ++i) pool.insert(entry(i % 3, i, static_cast<nn::Label>(i % 4)));
  const auto s = pool.sample(8, 42);
  CHECK(s.size() == 8);
  std::set<double> keys;
  for (const auto& e : s) {
    keys.insert(e.activations[0]);
    CHECK(std::find(pool.entries().begin(), pool.entries().end(), e) != pool.entries().end());
  }
  CHECK(keys.size() == 8);
  CHECK(pool.sample(8, 42) == s);
  CHECK(pool.sample(8, 43) != s);
  CHECK(pool.sample(100, 1).size() == 20);
  CHECK(pool.sample_count(32) == 16);
  CHECK(pool.sample_count(3) == 2);  // round half away from zero
}

TEST_CASE("sampling is roughly uniform") {
  CachePool pool(10, 1.0);
  for (int i = 0; i < 10; ++i) pool.insert(entry(0, i));
  std::vector<int> hits(10, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (const auto& e : pool.sample(3, seed)) ++hits[static_cast<std::size_t>(e.activations[0])];
  }
  // Expected 1200 each; 5 sigma is about 145.
  for (int h : hits) CHECK(std::abs(h - 1200) < 150);
}

TEST_CASE("cache pool errors") {
  CHECK_THROWS_AS(CachePool(0, 1.0), ConfigError);
  CHECK_THROWS_AS(CachePool(4, -0.1), ConfigError);
  CachePool pool(4, 1.0);
  pool.insert(entry(0, 1));
  CHECK_THROWS_AS(pool.insert({0, nn::Tensor({3}), 0}), ProtocolError);
  CHECK_THROWS_AS(pool.insert_batch(0, nn::Tensor({2, 2}), std::vector<nn::Label>{0}),
                  ProtocolError);
}

TEST_CASE("insert_batch splits rows") {
  CachePool pool(8, 1.0);
  pool.insert_batch(3, nn::Tensor({2, 2, 1}, {1, 2, 3, 4}), std::vector<nn::Label>{5, 6});
  REQUIRE(pool.size() == 2);
  CHECK(pool.entries()[1].client_id == 3);
  CHECK(pool.entries()[1].label == 6);
  CHECK(pool.entries()[1].activations.shape() == nn::Shape{2, 1});
  CHECK(pool.entries()[1].activations.storage() == std::vector<double>{3, 4});
}

TEST_CASE("empty pool: cached step equals the plain step") {
  auto toy = testing::make_toy("tiny-mlp", 1, 16);
  auto state = init_run(toy->fed, testing::options(Scheme::psl, 1));
  Rng rng(9);
  SmashedPayload in{random_tensor({6, 64}, rng), {0, 1, 2, 3, 0, 1}, {}};
  ServerInstance a = state.servers[0], b = state.servers[0];
  CachePool pool(100, 1.0);
  const auto plain = server_step(toy->model, a, in, 0.1);
  const auto cached = server_step_cached(toy->model, b, pool, 0, in, 0.1, 1);
  CHECK(nn::bitwise_equal(plain.gradients.gradients, cached.gradients.gradients));
  CHECK(nn::bitwise_equal(a.params, b.params));
  CHECK(cached.sampled.empty());
  CHECK(pool.size() == 6);
}

TEST_CASE("cached gradients are the leading rows of the concatenated gradient") {
  Rng gen(2024);
  std::size_t nontrivial = 0;
  for (int trial = 0; trial < 60; ++trial) {
    CAPTURE(trial);
    const auto preset = trial % 3 == 0 ? "tiny-conv2" : (trial % 3 == 1 ? "tiny-mlp" : "tiny-conv1d");
    auto toy = testing::make_toy(preset, 1, 8, 11);
    const auto& model = toy->model;
    const auto split = model.split_shape();
    nn::Shape batch_shape{0};
    batch_shape.insert(batch_shape.end(), split.begin(), split.end());
    auto state = init_run(toy->fed, testing::options(Scheme::psl, 1));
    ServerInstance server = state.servers[0];

    const std::size_t capacity = 1 + gen.below(40);
    const double fraction = 0.25 * static_cast<double>(gen.below(9));
    CachePool pool(capacity, fraction);
    const std::size_t prefill = gen.below(50);
    for (std::size_t i = 0; i < prefill; ++i) {
      pool.insert({gen.below(5), random_tensor(split, gen), static_cast<nn::Label>(gen.below(4))});
    }
    const std::size_t b = 1 + gen.below(9);
    batch_shape[0] = b;
    SmashedPayload in{random_tensor(batch_shape, gen), {}, {}};
    for (std::size_t i = 0; i < b; ++i) in.labels.push_back(static_cast<nn::Label>(gen.below(4)));
    const auto seed = gen.next_u64();

    const auto w_before = server.params;
    const auto pool_before = pool.entries();
    const auto r = server_step_cached(model, server, pool, 7, in, 0.05, seed);

    // Independent recomputation straight from the engine.
    CachePool replay(capacity, fraction);
    for (const auto& e : pool_before) replay.insert(e);
    const auto sampled = replay.sample(replay.sample_count(b), seed);
    CHECK(sampled == r.sampled);
    nontrivial += !sampled.empty();
    std::vector<nn::Tensor> parts{in.activations};
    auto labels = in.labels;
    nn::Shape one{1};
    one.insert(one.end(), split.begin(), split.end());
    for (const auto& e : sampled) {
      parts.push_back(e.activations.reshaped(one));
      labels.push_back(e.label);
    }
    auto fr = nn::forward(model.server(), w_before, nn::concat_rows(parts));
    const auto loss = nn::loss_softmax_ce(fr.output, labels);
    const auto br = nn::backward(model.server(), w_before, fr.tape, loss.grad);
    CHECK(nn::bitwise_equal(r.gradients.gradients, br.input_grad.rows(0, b)));
    CHECK(nn::bitwise_equal(server.params, nn::sgd_step(w_before, br.param_grads, 0.05)));

    // The incoming batch is cached after sampling.
    CHECK(pool.size() == std::min(capacity, pool_before.size() + b));
    CHECK(pool.entries().back().client_id == 7);
    CHECK(pool.entries().back().label == in.labels.back());
  }
  CHECK(nontrivial > 30);
}
