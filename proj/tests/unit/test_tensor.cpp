// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "psl/common/errors.hpp"
#include "psl/nn/tensor.hpp"

using psl::nn::Tensor;

TEST_CASE("tensor shape and data must agree") {
  CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 1.0)));
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 1.0)), psl::ShapeError);
  Tensor t({2, 2}, 1.5);
  CHECK(t.size() == 4);
  CHECK(t[3] == 1.5);
}

TEST_CASE("row slicing, gathering and concatenation") {
  Tensor t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  CHECK(t.rows(1, 3).storage() == std::vector<double>{2, 3, 4, 5});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(t.gather_rows(idx).storage() == std::vector<double>{4, 5, 0, 1});
  std::vector<Tensor> parts{t.rows(0, 1), t.rows(1, 3)};
  CHECK(psl::nn::bitwise_equal(psl::nn::concat_rows(parts), t));
  std::vector<Tensor> bad{t, Tensor({1, 3})};
  CHECK_THROWS_AS(psl::nn::concat_rows(bad), psl::ShapeError);
  CHECK_THROWS_AS(t.rows(2, 4), psl::ShapeError);
}

TEST_CASE("reshape preserves element count") {
  Tensor t({2, 3});
  CHECK(t.reshaped({3, 2}).shape() == psl::nn::Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4, 2}), psl::ShapeError);
}
