// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "psl/common/errors.hpp"
#include "psl/nn/presets.hpp"
#include "psl/protocol/scheme.hpp"
#include "../support/toy.hpp"

using namespace psl;
using namespace psl::protocol;

namespace {

struct StepFixture {
  std::unique_ptr<testing::Toy> toy;
  RunState state;
  Batch batch;
};

StepFixture step_fixture(const std::string& preset, std::size_t batch_rows) {
  StepFixture f;
  f.toy = testing::make_toy(preset, 2, 64);
  const auto opts = testing::options(Scheme::psl, 1);
  f.state = init_run(f.toy->fed, opts);
  const auto& shard = f.toy->fed.shards[1].indices;
  f.batch.indices.assign(shard.begin(), shard.begin() + static_cast<std::ptrdiff_t>(batch_rows));
  f.batch.epoch = 1;
  f.batch.batch_id = make_batch_id(1, 1, 0);
  return f;
}

}  // namespace

TEST_CASE("client_step matches one monolithic SGD step bitwise, every preset") {
  for (const auto& preset : nn::preset_names()) {
    CAPTURE(preset);
    auto f = step_fixture(preset, 7);
    const auto& model = f.toy->model;
    auto& client = f.state.clients[1];
    auto& server = f.state.servers[0];
    const double lr = 0.1;

    // Oracle: the composed network trained as one piece.
    auto full = model.join_parameters(client.params, server.params);
    const auto x = f.toy->train.inputs().gather_rows(f.batch.indices);
    const auto y = f.toy->train.labels_at(f.batch.indices);
    auto fr = nn::forward(model.network(), full, x);
    const auto loss = nn::loss_softmax_ce(fr.output, y);
    const auto br = nn::backward(model.network(), full, fr.tape, loss.grad);
    nn::sgd_update(full, br.param_grads, lr);
    const auto [u, w] = model.split_parameters(full);

    const auto r = client_step(f.toy->fed, client, server, f.batch, lr,
                               Channel{&f.state.ledger, &f.state.costs});
    CHECK(r.loss == loss.loss);
    CHECK(nn::bitwise_equal(client.params, u));
    CHECK(nn::bitwise_equal(server.params, w));
  }
}

TEST_CASE("zero learning rate leaves parameters alone but still ledgers") {
  auto f = step_fixture("tiny-conv2", 5);
  const auto u0 = f.state.clients[1].params;
  const auto w0 = f.state.servers[0].params;
  client_step(f.toy->fed, f.state.clients[1], f.state.servers[0], f.batch, 0.0,
              Channel{&f.state.ledger, &f.state.costs});
  CHECK(nn::bitwise_equal(f.state.clients[1].params, u0));
  CHECK(nn::bitwise_equal(f.state.servers[0].params, w0));
  REQUIRE(f.state.ledger.size() == 2);
  CHECK(f.state.ledger.messages()[0].envelope.variant == Variant::smashed_batch);
  CHECK(f.state.ledger.messages()[1].envelope.variant == Variant::split_gradients);
  CHECK(f.state.ledger.messages()[0].envelope.sender == Role::client(1));
  CHECK(f.state.ledger.messages()[1].envelope.receiver == Role::client(1));
}

TEST_CASE("one batch of 32 uploads 32*S scalars and downloads as many") {
  auto f = step_fixture("tiny-mlp", 32);
  const std::size_t s = f.toy->model.split_size();
  CHECK(s == 64);
  client_step(f.toy->fed, f.state.clients[1], f.state.servers[0], f.batch, 0.05,
              Channel{&f.state.ledger, &f.state.costs});
  const auto c = f.state.costs.at(1, 1);
  CHECK(c.items == 32);
  CHECK(c.smashed_up == 32 * s);
  CHECK(c.gradients_down == 32 * s);
  CHECK(c.weights_up == 0);
  CHECK(f.state.ledger.messages()[0].envelope.scalars == 32 * s);
}

TEST_CASE("server_step rejects smashed data of the wrong shape") {
  auto f = step_fixture("tiny-mlp", 4);
  SmashedPayload bad{nn::Tensor({4, 63}), {0, 1, 2, 3}, {}};
  CHECK_THROWS_AS(server_step(f.toy->model, f.state.servers[0], bad, 0.1), ProtocolError);
  SmashedPayload short_labels{nn::Tensor({4, 64}), {0, 1, 2}, {}};
  CHECK_THROWS_AS(server_step(f.toy->model, f.state.servers[0], short_labels, 0.1),
                  ProtocolError);
  SmashedPayload no_batch{nn::Tensor({64}), {0}, {}};
  CHECK_THROWS_AS(server_step(f.toy->model, f.state.servers[0], no_batch, 0.1), ProtocolError);
}

TEST_CASE("verbose ledger keeps the smashed payload that crossed the cut") {
  auto toy = testing::make_toy("tiny-mlp", 1, 16);
  auto opts = testing::options(Scheme::sl_vanilla, 1, 16);
  opts.verbose_ledger = true;
  auto state = init_run(toy->fed, opts);
  const auto u0 = state.clients[0].params;
  const auto batches = make_batches(toy->fed, opts, 0, 1);
  REQUIRE(batches.size() == 1);
  client_step(toy->fed, state.clients[0], state.servers[0], batches[0], 0.05,
              Channel{&state.ledger, &state.costs});
  const auto& p = std::get<SmashedPayload>(state.ledger.messages()[0].payload);
  const auto z = nn::infer(toy->model.client(), u0, toy->train.inputs().gather_rows(batches[0].indices));
  CHECK(nn::bitwise_equal(p.activations, z));
  CHECK(p.sample_indices == batches[0].indices);
  CHECK(std::holds_alternative<GradientPayload>(state.ledger.messages()[1].payload));
}

TEST_CASE("presets") {
  CHECK_THROWS_AS(nn::make_preset("resnet", {1, 8, 8}, 10), ConfigError);
  CHECK_THROWS_AS(nn::make_preset("tiny-conv2", {8}, 10), ConfigError);
  CHECK_THROWS_AS(nn::make_preset("tiny-conv1d", {1, 8, 8}, 10), ConfigError);
  const auto m = nn::make_preset("tiny-conv2", {1, 16, 16}, 10);
  CHECK(m.split_shape() == nn::Shape{4, 16, 16});
  CHECK(m.network().output_shape() == nn::Shape{10});
  const auto s = nn::make_preset("tiny-conv1d", {1, 64}, 5);
  CHECK(s.split_shape() == nn::Shape{4, 64});
}
