// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "psl/common/errors.hpp"
#include "psl/common/rng.hpp"
#include "psl/nn/network.hpp"
#include "../support/gradcheck.hpp"

using namespace psl::nn;

namespace {

ParameterSet filled(double v) {
  ParameterSet::Map m;
  m[0] = LayerParams{Tensor({2, 2}, v), Tensor({2}, v)};
  m[3] = LayerParams{Tensor({1, 2}, v), Tensor({1}, v)};
  return ParameterSet(m);
}

}  // namespace

TEST_CASE("uniform logits give loss ln(C)") {
  for (std::size_t c : {2u, 5u, 10u}) {
    const Tensor logits({3, c}, 0.7);
    const std::vector<Label> labels{0, static_cast<Label>(c - 1), 1};
    CHECK(loss_softmax_ce(logits, labels).loss == doctest::Approx(std::log(double(c))).epsilon(1e-12));
  }
}

TEST_CASE("confident correct logits drive the loss to zero") {
  const Tensor logits({1, 3}, {60.0, -60.0, -60.0});
  const std::vector<Label> labels{0};
  CHECK(loss_softmax_ce(logits, labels).loss < 1e-20);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  psl::Rng rng(3);
  auto logits = psl::testing::random_tensor({2, 4}, rng, -2, 2);
  const std::vector<Label> labels{1, 3};
  const auto r = loss_softmax_ce(logits, labels);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double o = logits[i];
    logits[i] = o + h;
    const double fp = loss_softmax_ce(logits, labels).loss;
    logits[i] = o - h;
    const double fm = loss_softmax_ce(logits, labels).loss;
    logits[i] = o;
    CHECK(std::abs(r.grad[i] - (fp - fm) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("cross-entropy rejects labels out of range") {
  const std::vector<Label> labels{3};
  CHECK_THROWS_AS(loss_softmax_ce(Tensor({1, 3}), labels), psl::DomainError);
}

TEST_CASE("mse loss and gradient") {
  const Tensor a({1, 2}, {1.0, 3.0});
  const Tensor b({1, 2}, {0.0, 1.0});
  const auto r = loss_mse(a, b);
  CHECK(r.loss == 2.5);
  CHECK(r.grad.storage() == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(loss_mse(a, Tensor({2, 1})), psl::ShapeError);
}

TEST_CASE("sgd step arithmetic") {
  ParameterSet::Map pm, gm;
  pm[0] = LayerParams{Tensor({2}, {1.0, 2.0}), Tensor({1}, 0.0)};
  gm[0] = LayerParams{Tensor({2}, {1.0, 1.0}), Tensor({1}, 4.0)};
  const ParameterSet p(pm), g(gm);
  const auto q = sgd_step(p, g, 0.5);
  CHECK(q.at(0).weight.storage() == std::vector<double>{0.5, 1.5});
  CHECK(q.at(0).bias[0] == -2.0);
  CHECK(bitwise_equal(sgd_step(p, g, 0.0), p));
  ParameterSet inplace = p;
  sgd_update(inplace, g, 0.5);
  CHECK(bitwise_equal(inplace, q));
  CHECK_THROWS_AS(sgd_step(p, filled(1.0), 0.1), psl::ShapeError);
}

TEST_CASE("sgd on a convex quadratic is monotone below the curvature bound") {
  // f(w) = 0.5 * sum_i a_i w_i^2 with max curvature 4; lr < 2/4 is stable.
  const std::vector<double> a{0.5, 1.0, 4.0};
  ParameterSet::Map pm;
  pm[0] = LayerParams{Tensor({3}, {3.0, -2.0, 1.0}), Tensor({1}, 0.0)};
  ParameterSet p(pm);
  auto f = [&](const ParameterSet& q) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += 0.5 * a[i] * q.at(0).weight[i] * q.at(0).weight[i];
    return s;
  };
  double prev = f(p);
  for (int step = 0; step < 50; ++step) {
    ParameterSet::Map gm;
    gm[0] = LayerParams{Tensor({3}), Tensor({1}, 0.0)};
    for (std::size_t i = 0; i < 3; ++i) gm[0].weight[i] = a[i] * p.at(0).weight[i];
    p = sgd_step(p, ParameterSet(gm), 0.45);
    const double cur = f(p);
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("average of identical sets is that set") {
  const std::vector<ParameterSet> sets(4, filled(0.3));
  CHECK(bitwise_equal(average_parameters(sets), filled(0.3)));
}

TEST_CASE("average of a zero set and a two set is a one set") {
  const std::vector<ParameterSet> sets{filled(0.0), filled(2.0)};
  CHECK(bitwise_equal(average_parameters(sets), filled(1.0)));
}

TEST_CASE("average matches a per-scalar loop") {
  psl::Rng rng(8);
  NetworkSpec spec({3}, {LayerSpec::dense(4), LayerSpec::relu(), LayerSpec::dense(2)});
  std::vector<ParameterSet> sets;
  for (int i = 0; i < 5; ++i) sets.push_back(init_parameters(spec, rng.next_u64()));
  const auto avg = average_parameters(sets);
  for (const auto& [k, lp] : avg.layers()) {
    for (std::size_t i = 0; i < lp.weight.size(); ++i) {
      double s = sets[0].at(k).weight[i];
      for (std::size_t j = 1; j < sets.size(); ++j) s += sets[j].at(k).weight[i];
      CHECK(lp.weight[i] == s / 5.0);
    }
  }
}

TEST_CASE("average rejects empty and heterogeneous input") {
  CHECK_THROWS_AS(average_parameters(std::vector<ParameterSet>{}), psl::DomainError);
  ParameterSet::Map m;
  m[0] = LayerParams{Tensor({3}), Tensor({1})};
  const std::vector<ParameterSet> mixed{filled(1.0), ParameterSet(m)};
  CHECK_THROWS_AS(average_parameters(mixed), psl::DomainError);
}
