// Copyright 2026 The hsiseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include "helpers.hpp"
#include "hsiseg/error.hpp"
#include "hsiseg/ops.hpp"

namespace {

using hsiseg::ErrorKind;
using hsiseg::Rng;
using hsiseg::Shape;
using hsiseg::Tensor;
using hsiseg::testing::max_abs_diff;
using hsiseg::testing::random_tensor;

// Reference convolution written as plain nested loops over explicit
// indices: input [C,H,W,D], kernels [K,C,kh,kw,kd].
Tensor reference_conv(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2), D = x.extent(3);
  const std::size_t K = w.extent(0), kh = w.extent(2), kw = w.extent(3), kd = w.extent(4);
  const std::size_t oh = H - kh + 1, ow = W - kw + 1, od = D - kd + 1;
  Tensor out({K, oh, ow, od});
  auto X = [&](std::size_t c, std::size_t i, std::size_t j, std::size_t l) {
    return x[((c * H + i) * W + j) * D + l];
  };
  auto Wt = [&](std::size_t k, std::size_t c, std::size_t a, std::size_t b, std::size_t e) {
    return w[(((k * C + c) * kh + a) * kw + b) * kd + e];
  };
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j)
        for (std::size_t l = 0; l < od; ++l) {
          double s = bias[k];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t b = 0; b < kw; ++b)
                for (std::size_t e = 0; e < kd; ++e) s += X(c, i + a, j + b, l + e) * Wt(k, c, a, b, e);
          out[((k * oh + i) * ow + j) * od + l] = s;
        }
  return out;
}

}  // namespace

TEST_CASE("conv3d_valid with a unit 1x1x1 kernel reproduces the input") {
  Rng rng(1);
  const Tensor x = random_tensor({4, 3, 5}, rng);
  const Tensor out = hsiseg::ops::conv3d_valid(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}));
  CHECK(out.shape() == Shape{1, 4, 3, 5});
  CHECK(out.values() == x.values());
}

TEST_CASE("conv3d_valid with an all-ones 2x2x2 kernel over a constant input") {
  const double c = 1.75, bias = -0.5;
  const Tensor out =
      hsiseg::ops::conv3d_valid(Tensor({3, 4, 5}, c), Tensor({1, 2, 2, 2}, 1.0), Tensor({1}, bias));
  CHECK(out.shape() == Shape{1, 2, 3, 4});
  for (double v : out.data()) CHECK(v == doctest::Approx(8 * c + bias).epsilon(1e-15));
}

TEST_CASE("conv3d_valid matches the nested-loop reference") {
  Rng rng(2);
  SUBCASE("4x4x5 input, two 3x3x2 kernels") {
    const Tensor x = random_tensor({4, 4, 5}, rng);
    const Tensor w = random_tensor({2, 3, 3, 2}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor out = hsiseg::ops::conv3d_valid(x, w, b);
    const Tensor ref = reference_conv(x.reshaped({1, 4, 4, 5}), w.reshaped({2, 1, 3, 3, 2}), b);
    CHECK(out.shape() == Shape{2, 2, 2, 4});
    CHECK(max_abs_diff(out, ref) < 1e-13);
  }
  SUBCASE("multi-channel input sums over channels") {
    const Tensor x = random_tensor({3, 5, 4, 7}, rng);
    const Tensor w = random_tensor({4, 3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({4}, rng);
    CHECK(max_abs_diff(hsiseg::ops::conv3d_valid(x, w, b), reference_conv(x, w, b)) < 1e-13);
  }
}

TEST_CASE("conv3d_valid rejects kernels larger than the input") {
  try {
    hsiseg::ops::conv3d_valid(Tensor({2, 2, 2}), Tensor({1, 3, 1, 1}), Tensor({1}));
    FAIL("expected a shape error");
  } catch (const hsiseg::Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("conv3d_transpose output extent is input + kernel - 1") {
  Rng rng(3);
  const Tensor y = random_tensor({2, 1, 1, 6}, rng);
  const Tensor w = random_tensor({2, 3, 3, 3, 4}, rng);
  const Tensor out = hsiseg::ops::conv3d_transpose(y, w, Tensor({3}));
  CHECK(out.shape() == Shape{3, 3, 3, 9});
}

TEST_CASE("conv3d_transpose with a 1x1x1 kernel of value 2 scales and shifts") {
  Rng rng(4);
  const Tensor y = random_tensor({1, 2, 3, 4}, rng);
  const Tensor out = hsiseg::ops::conv3d_transpose(y, Tensor({1, 1, 1, 1}, 2.0), Tensor({1}, 0.25));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(out[i] == 2.0 * y[i] + 0.25);
}

TEST_CASE("conv3d_transpose is the adjoint of conv3d_valid on random shapes") {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = 1 + rng.index(3), K = 1 + rng.index(3);
    const std::size_t kh = 1 + rng.index(3), kw = 1 + rng.index(3), kd = 1 + rng.index(4);
    const std::size_t H = kh + rng.index(3), W = kw + rng.index(3), D = kd + rng.index(5);
    const Tensor x = random_tensor({C, H, W, D}, rng);
    const Tensor w = random_tensor({K, C, kh, kw, kd}, rng);
    const Tensor Ax = hsiseg::ops::conv3d_valid(x, w, Tensor({K}));
    const Tensor y = random_tensor(Ax.shape(), rng);
    const Tensor ATy = hsiseg::ops::conv3d_transpose(y, w, Tensor({C}));
    worst = std::max(worst, std::abs(hsiseg::dot(Ax, y) - hsiseg::dot(x, ATy)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("conv3d_valid_backward matches explicit adjoints") {
  Rng rng(6);
  const Tensor x = random_tensor({2, 4, 3, 6}, rng);
  const Tensor w = random_tensor({3, 2, 2, 2, 3}, rng);
  const Tensor g = random_tensor({3, 3, 2, 4}, rng);
  Tensor gx(x.shape()), gw(w.shape()), gb({3});
  hsiseg::ops::conv3d_valid_backward(x, w, g, &gx, &gw, &gb);
  CHECK(max_abs_diff(gx, hsiseg::ops::conv3d_transpose(g, w, Tensor({2}))) < 1e-13);
  // d<g, conv(x, w)>/dw is linear in w: compare against unit-kernel probes.
  for (std::size_t i = 0; i < w.size(); ++i) {
    Tensor e(w.shape());
    e[i] = 1.0;
    const double expected = hsiseg::dot(g, reference_conv(x, e, Tensor({3})));
    CHECK(gw[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3 * 2 * 4; ++i) s += g[k * 24 + i];
    CHECK(gb[k] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("conv3d_transpose_backward matches explicit adjoints") {
  Rng rng(7);
  const Tensor y = random_tensor({3, 2, 2, 4}, rng);
  const Tensor w = random_tensor({3, 2, 2, 3, 3}, rng);
  const Tensor out = hsiseg::ops::conv3d_transpose(y, w, Tensor({2}));
  const Tensor g = random_tensor(out.shape(), rng);
  Tensor gy(y.shape()), gw(w.shape()), gb({2});
  hsiseg::ops::conv3d_transpose_backward(y, w, g, &gy, &gw, &gb);
  CHECK(max_abs_diff(gy, hsiseg::ops::conv3d_valid(g, w, Tensor({3}))) < 1e-13);
  for (std::size_t i = 0; i < w.size(); ++i) {
    Tensor e(w.shape());
    e[i] = 1.0;
    const double expected = hsiseg::dot(g, hsiseg::ops::conv3d_transpose(y, e, Tensor({2})));
    CHECK(gw[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("dense layer") {
  Rng rng(8);
  SUBCASE("identity weights and zero bias") {
    const Tensor x = random_tensor({4}, rng);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    CHECK(hsiseg::ops::dense(x, eye, Tensor({4})).values() == x.values());
  }
  SUBCASE("zero weights return the bias") {
    const Tensor b = random_tensor({3}, rng);
    CHECK(hsiseg::ops::dense(random_tensor({5}, rng), Tensor({3, 5}), b).values() == b.values());
  }
  SUBCASE("3x4 case against a hand matrix multiply") {
    const Tensor w({3, 4}, {1, 2, 3, 4, -1, 0, 1, 0, 0.5, 0.5, -2, 1});
    const Tensor x({4}, {1, -1, 2, 0.5});
    const Tensor b({3}, {0.1, 0.2, 0.3});
    const Tensor out = hsiseg::ops::dense(x, w, b);
    CHECK(out[0] == doctest::Approx(1 - 2 + 6 + 2 + 0.1));
    CHECK(out[1] == doctest::Approx(-1 + 0 + 2 + 0 + 0.2));
    CHECK(out[2] == doctest::Approx(0.5 - 0.5 - 4 + 0.5 + 0.3));
  }
  SUBCASE("mismatched input length is a shape error") {
    CHECK_THROWS_AS(hsiseg::ops::dense(Tensor({3}), Tensor({2, 4}), Tensor({2})), hsiseg::Error);
  }
  SUBCASE("adjoint identity") {
    const Tensor w = random_tensor({6, 9}, rng);
    const Tensor x = random_tensor({9}, rng);
    const Tensor y = random_tensor({6}, rng);
    Tensor gx({9}), gw({6, 9}), gb({6});
    hsiseg::ops::dense_backward(x, w, y, &gx, &gw, &gb);
    CHECK(std::abs(hsiseg::dot(hsiseg::ops::dense(x, w, Tensor({6})), y) - hsiseg::dot(x, gx)) <
          1e-12);
  }
}
