// tests/test_core.cpp

// Copyright 2026  The lipspeech authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include "lipspeech/core/nn_ops.hpp"
#include "lipspeech/core/tensor.hpp"
#include "testing/gradcheck.hpp"

using namespace lipspeech;
using lipspeech::testing::max_rel_grad_err;
using T = Tensor<double>;

namespace {
T randt(Shape shape, Rng& rng, double s = 1.0) { return T::randn(std::move(shape), rng, s); }
}  // namespace

TEST_CASE("rng determinism and fork independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(42);
  auto c1 = c.fork(1);
  Rng d(42);
  auto d1 = d.fork(1);
  for (int i = 0; i < 10; ++i) REQUIRE(c1.next_u64() == d1.next_u64());
  auto c2 = Rng(42).fork(2);
  REQUIRE(c2.next_u64() != Rng(42).fork(1).next_u64());
}

TEST_CASE("rng state round trip") {
  Rng a(7);
  a.normal();
  const auto state = a.save_state();
  const double next = a.normal();
  Rng b;
  b.load_state(state);
  REQUIRE(b.normal() == next);
}

TEST_CASE("elementwise and reduction gradients") {
  Rng rng(1);
  T x = randt({3, 4}, rng), y = randt({3, 4}, rng);
  for (auto& v : y.vec()) v += (v >= 0 ? 0.6 : -0.6);  // keep away from 0 for div
  auto loss = [&]() {
    auto a = mul(tanh_op(x), sigmoid(y));
    auto b = div_op(exp_op(mul_scalar(x, 0.3)), abs_op(y));
    auto c = add(square(a), sqrt_op(add_scalar(square(b), 1.0)));
    return mean(add(c, leaky_relu(sub(x, y), 0.1)));
  };
  REQUIRE(max_rel_grad_err(loss, {x, y}) < 1e-6);
}

TEST_CASE("matmul and linear gradients") {
  Rng rng(2);
  T a = randt({4, 5}, rng), b = randt({5, 3}, rng);
  auto loss1 = [&]() { return mean(square(matmul(a, b))); };
  REQUIRE(max_rel_grad_err(loss1, {a, b}) < 1e-6);

  T x = randt({6, 5}, rng), w = randt({4, 5}, rng), bias = randt({4}, rng);
  auto loss2 = [&]() { return mean(abs_op(linear(x, w, bias))); };
  REQUIRE(max_rel_grad_err(loss2, {x, w, bias}) < 1e-6);
}

TEST_CASE("shape op gradients") {
  Rng rng(3);
  T x = randt({2, 3, 4}, rng);
  auto loss = [&]() {
    auto p = permute(x, {2, 0, 1});
    auto s = slice(p, 0, 1, 2);
    auto f = flip(s, 2);
    auto r = reshape(f, {2, -1});
    auto c = cat<double>({r, mul_scalar(r, 2.0)}, 1);
    return mean(square(c));
  };
  REQUIRE(max_rel_grad_err(loss, {x}) < 1e-6);
}

TEST_CASE("repeat_rows and pad_axis gradients") {
  Rng rng(4);
  T x = randt({2, 3}, rng);
  auto loss = [&]() { return mean(square(repeat_rows(x, 5))); };
  REQUIRE(max_rel_grad_err(loss, {x}) < 1e-6);

  T y = randt({2, 2, 6}, rng);
  auto loss2 = [&]() { return mean(square(pad_axis(y, 2, 3, 2, true))); };
  REQUIRE(max_rel_grad_err(loss2, {y}) < 1e-6);
  auto loss3 = [&]() { return mean(square(pad_axis(y, 2, 3, 2, false))); };
  REQUIRE(max_rel_grad_err(loss3, {y}) < 1e-6);
}

TEST_CASE("conv1d gradients with stride, dilation, groups") {
  Rng rng(5);
  T x = randt({2, 4, 11}, rng);
  T w = randt({6, 2, 3}, rng);  // groups=2
  T b = randt({6}, rng);
  auto loss = [&]() { return mean(square(conv1d(x, w, b, 2, 2, 2, 2))); };
  REQUIRE(max_rel_grad_err(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("conv_transpose1d gradient and length contract") {
  Rng rng(6);
  for (auto [k, s] : std::vector<std::pair<index_t, index_t>>{{16, 1}, {16, 2}, {4, 2}}) {
    T x = randt({1, 3, 7}, rng);
    T w = randt({3, 2, k}, rng, 0.5);
    T b = randt({2}, rng);
    auto y = conv_transpose1d(x, w, b, s);
    REQUIRE(y.shape() == Shape{1, 2, 7 * s});
    auto loss = [&]() { return mean(square(conv_transpose1d(x, w, b, s))); };
    REQUIRE(max_rel_grad_err(loss, {x, w, b}) < 1e-6);
  }
}

TEST_CASE("conv2d gradient") {
  Rng rng(7);
  T x = randt({2, 3, 9, 8}, rng);
  T w = randt({4, 3, 3, 3}, rng);
  T b = randt({4}, rng);
  auto loss = [&]() { return mean(square(conv2d(x, w, b, {2, 1}, {1, 1}))); };
  REQUIRE(max_rel_grad_err(loss, {x, w, b}) < 1e-5);
}

TEST_CASE("conv3d gradient") {
  Rng rng(8);
  T x = randt({2, 2, 5, 7, 6}, rng);
  T w = randt({3, 2, 3, 3, 3}, rng);
  T b = randt({3}, rng);
  auto loss = [&]() { return mean(square(conv3d(x, w, b, {1, 2, 2}, {1, 1, 1}))); };
  REQUIRE(max_rel_grad_err(loss, {x, w, b}) < 1e-6);
}

TEST_CASE("conv3d preserves temporal length with stride 1") {
  Rng rng(9);
  for (index_t t : {1, 4, 9}) {
    T x = randt({1, 2, t, 8, 8}, rng);
    T w = randt({3, 2, 3, 3, 3}, rng);
    auto y = conv3d(x, w, T(), {1, 2, 2}, {1, 1, 1});
    REQUIRE(y.dim(2) == t);
  }
}

TEST_CASE("pool gradients") {
  Rng rng(10);
  T x = randt({2, 3, 6, 8}, rng);
  auto loss = [&]() { return mean(square(maxpool_hw(x))); };
  REQUIRE(max_rel_grad_err(loss, {x}) < 1e-6);

  T x5 = randt({1, 2, 3, 6, 8}, rng);
  auto loss5 = [&]() { return mean(square(maxpool_hw(x5))); };
  REQUIRE(max_rel_grad_err(loss5, {x5}) < 1e-6);

  T z = randt({2, 3, 12}, rng);
  auto loss2 = [&]() { return mean(square(avgpool1d(z, 4, 2, 2))); };
  REQUIRE(max_rel_grad_err(loss2, {z}) < 1e-6);

  auto loss3 = [&]() { return mean(square(global_avg_spatial(x))); };
  REQUIRE(max_rel_grad_err(loss3, {x}) < 1e-6);
}

TEST_CASE("batch_norm training and eval gradients") {
  Rng rng(11);
  T x = randt({3, 4, 5}, rng);
  T gamma = T::full({4}, 1.0), beta = T::zeros({4});
  for (auto& v : gamma.vec()) v += 0.2 * rng.normal();

  SECTION("training mode") {
    auto loss = [&]() {
      std::vector<double> rm(4, 0.0), rv(4, 1.0);
      return mean(square(batch_norm(x, gamma, beta, &rm, &rv, true)));
    };
    REQUIRE(max_rel_grad_err(loss, {x, gamma, beta}) < 1e-5);
  }
  SECTION("eval mode") {
    std::vector<double> rm(4, 0.1), rv(4, 1.3);
    auto loss = [&]() {
      auto rm2 = rm;
      auto rv2 = rv;
      return mean(square(batch_norm(x, gamma, beta, &rm2, &rv2, false)));
    };
    REQUIRE(max_rel_grad_err(loss, {x, gamma, beta}) < 1e-6);
  }
  SECTION("running stats update") {
    std::vector<double> rm(4, 0.0), rv(4, 1.0);
    NoGradGuard ng;
    batch_norm(x, gamma, beta, &rm, &rv, true);
    bool moved = false;
    for (double v : rm)
      if (v != 0.0) moved = true;
    REQUIRE(moved);
  }
}

TEST_CASE("dropout keeps expectation and is deterministic per seed") {
  Rng rng(12);
  T x = T::full({50, 40}, 1.0);
  x.set_requires_grad(true);
  Rng d1(99), d2(99);
  auto y1 = dropout(x, 0.3, d1, true);
  auto y2 = dropout(x, 0.3, d2, true);
  REQUIRE(y1.vec() == y2.vec());
  double m = 0;
  for (double v : y1.vec()) m += v;
  m /= double(y1.numel());
  REQUIRE(std::abs(m - 1.0) < 0.05);
  // eval mode passes through unchanged
  Rng d3(99);
  auto y3 = dropout(x, 0.3, d3, false);
  REQUIRE(y3.vec() == x.vec());
}

TEST_CASE("channel dropout zeroes whole channels") {
  Rng d(5);
  Tensor<float> x = Tensor<float>::full({2, 8, 6}, 1.0f);
  auto y = channel_dropout(x, 0.5, d, true);
  for (index_t b = 0; b < 2; ++b)
    for (index_t c = 0; c < 8; ++c) {
      const float first = y.data()[(b * 8 + c) * 6];
      for (index_t j = 0; j < 6; ++j)
        REQUIRE(y.data()[(b * 8 + c) * 6 + j] == first);
    }
}

TEST_CASE("softmax cross entropy gradient") {
  Rng rng(13);
  T logits = randt({5, 7}, rng);
  std::vector<index_t> labels{0, 3, 6, 2, 2};
  auto loss = [&]() { return softmax_cross_entropy(logits, labels); };
  REQUIRE(max_rel_grad_err(loss, {logits}) < 1e-6);
}

TEST_CASE("no-grad mode builds no tape") {
  Rng rng(14);
  T x = randt({3, 3}, rng);
  x.set_requires_grad(true);
  NoGradGuard ng;
  auto y = mul(x, x);
  REQUIRE_FALSE(y.requires_grad());
}

TEST_CASE("grad accumulates across backward calls on shared parameter") {
  T x = T::full({1}, 2.0);
  x.set_requires_grad(true);
  auto y = mul(x, x);
  y.backward();
  REQUIRE(x.grad_vec()[0] == Catch::Approx(4.0));
  auto z = mul_scalar(x, 3.0);
  z.backward();
  REQUIRE(x.grad_vec()[0] == Catch::Approx(7.0));
}
