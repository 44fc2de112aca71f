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

#include <cmath>

#include "helpers.hpp"
#include "hsiseg/autodiff.hpp"
#include "hsiseg/cae.hpp"
#include "hsiseg/error.hpp"

namespace {

namespace ad = hsiseg::ad;
using hsiseg::CaeConfig;
using hsiseg::CaeParams;
using hsiseg::ErrorKind;
using hsiseg::Rng;
using hsiseg::Tensor;
using hsiseg::testing::random_tensor;

CaeConfig small_config(std::size_t bands = 8, std::size_t clusters = 3) {
  CaeConfig c;
  c.bands = bands;
  c.kernels_per_layer = 2;
  c.kernel_depth = 3;
  c.embedding_dim = 4;
  c.clusters = clusters;
  return c;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const hsiseg::Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kContract;
}

Tensor row_stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (t.at(r, c) = rng.uniform(0.01, 1.0));
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

double max_row_sum_error(const Tensor& t) {
  double worst = 0.0;
  for (std::size_t r = 0; r < t.extent(0); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.extent(1); ++c) s += t.at(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

}  // namespace

TEST_CASE("build_cae shape arithmetic") {
  Rng rng(1);
  CaeConfig c;
  c.bands = 103;
  c.clusters = 9;
  CHECK(c.latent_depth() == 87);
  CHECK(c.flatten_size() == 2784);
  const auto shapes = hsiseg::parameter_shapes(c);
  CHECK(shapes[CaeParams::kEncConv1W] == hsiseg::Shape{32, 1, 3, 3, 9});
  CHECK(shapes[CaeParams::kEncConv2W] == hsiseg::Shape{32, 32, 3, 3, 9});
  CHECK(shapes[CaeParams::kEncDenseW] == hsiseg::Shape{25, 2784});
  CHECK(shapes[CaeParams::kDecDenseW] == hsiseg::Shape{2784, 25});
  CHECK(shapes[CaeParams::kDecConv1W] == shapes[CaeParams::kEncConv2W]);
  CHECK(shapes[CaeParams::kDecConv2W] == shapes[CaeParams::kEncConv1W]);
  CHECK(shapes[CaeParams::kCenters] == hsiseg::Shape{9, 25});
  c.bands = 200;
  CHECK(c.flatten_size() == 5888);
  c.bands = 16;
  CHECK(kind_of([&] { hsiseg::build_cae(c, rng); }) == ErrorKind::kConfig);
  c.bands = 17;
  CHECK_NOTHROW(c.validate());
  CaeConfig bad_spatial = small_config();
  bad_spatial.kernel_spatial = 2;
  CHECK(kind_of([&] { bad_spatial.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("build_cae initialisation") {
  Rng rng(2);
  const CaeConfig c = small_config(12);
  const CaeParams p = hsiseg::build_cae(c, rng);
  CHECK_FALSE(p.has_centers());
  for (std::size_t s = 0; s < CaeParams::kWeightSlots; ++s) {
    const Tensor& t = p.tensors[s];
    const bool is_bias = t.rank() == 1;
    if (is_bias) {
      for (double v : t.data()) CHECK(v == 0.0);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.size() / t.extent(0)));
      double peak = 0.0;
      for (double v : t.data()) peak = std::max(peak, std::abs(v));
      CHECK(peak > 0.0);
      CHECK(peak <= limit);
    }
  }
}

TEST_CASE("encode and decode contracts") {
  Rng rng(3);
  const CaeConfig c = small_config(10);
  CaeParams p = hsiseg::build_cae(c, rng);
  const Tensor patch = random_tensor({5, 5, 10}, rng);
  SUBCASE("latent has the embedding length and inference is deterministic") {
    const Tensor z = hsiseg::encode(p, patch);
    CHECK(z.size() == 4);
    CHECK(hsiseg::encode(p, patch) == z);
  }
  SUBCASE("zero embedding weights give the bias") {
    p.tensors[CaeParams::kEncDenseW].fill(0.0);
    p.tensors[CaeParams::kEncDenseB] = Tensor({4}, {1, -2, 3, 0.5});
    CHECK(hsiseg::encode(p, patch).values() == p.tensors[CaeParams::kEncDenseB].values());
  }
  SUBCASE("decode restores the patch shape; zero latent maps to zero") {
    const Tensor out = hsiseg::decode(p, hsiseg::encode(p, patch));
    CHECK(out.shape() == patch.shape());
    const Tensor zero = hsiseg::decode(p, Tensor({4}));
    for (double v : zero.data()) CHECK(v == 0.0);
  }
  SUBCASE("wrong patch shape is a shape error") {
    CHECK(kind_of([&] { hsiseg::encode(p, Tensor({5, 5, 9})); }) == ErrorKind::kShape);
  }
  SUBCASE("train-mode encode uses dropout") {
    Rng drop(4);
    CHECK(hsiseg::encode(p, patch, ad::Mode::kTrain, &drop) != hsiseg::encode(p, patch));
  }
}

TEST_CASE("reconstruction loss") {
  const Tensor zeros({5, 5, 4}), ones({5, 5, 4}, 1.0);
  CHECK(hsiseg::reconstruction_loss(std::vector{ones}, std::vector{ones}) == 0.0);
  CHECK(hsiseg::reconstruction_loss(std::vector{zeros}, std::vector{ones}) == 100.0);
  Tensor a({2}), b({2}, {2.0, 0.0}), c({2}), d({2}, {0.0, std::sqrt(6.0)});
  CHECK(hsiseg::reconstruction_loss(std::vector{a, c}, std::vector{b, d}) ==
        doctest::Approx(5.0).epsilon(1e-15));
  CHECK(kind_of([&] {
          hsiseg::reconstruction_loss(std::vector{a}, std::vector{b, d});
        }) == ErrorKind::kContract);
}

TEST_CASE("soft assignment") {
  Rng rng(5);
  SUBCASE("a single cluster takes everything") {
    const Tensor q = hsiseg::soft_assign(random_tensor({6, 3}, rng), random_tensor({1, 3}, rng));
    for (double v : q.data()) CHECK(v == 1.0);
  }
  SUBCASE("equidistant centers give a uniform row") {
    const Tensor z({1, 2}, {0, 0});
    const Tensor mu({4, 2}, {1, 0, 0, 1, -1, 0, 0, -1});
    const Tensor q = hsiseg::soft_assign(z, mu);
    for (double v : q.data()) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("hand evaluation with squared distance 3") {
    const Tensor mu({2, 3}, {1, 1, 1, 2, 2, 2});
    const Tensor z({1, 3}, {1, 1, 1});
    const Tensor q = hsiseg::soft_assign(z, mu);
    CHECK(q[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(q[1] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("missing centers are a state error") {
    CHECK(kind_of([&] { hsiseg::soft_assign(Tensor({1, 2}), Tensor()); }) == ErrorKind::kState);
  }
  SUBCASE("translation leaves assignments unchanged") {
    const Tensor z = random_tensor({10, 3}, rng), mu = random_tensor({4, 3}, rng);
    Tensor zs = z, ms = mu;
    const double shift[3] = {3.0, -1.5, 0.25};
    for (std::size_t i = 0; i < zs.size(); ++i) zs[i] += shift[i % 3];
    for (std::size_t i = 0; i < ms.size(); ++i) ms[i] += shift[i % 3];
    CHECK(hsiseg::testing::max_abs_diff(hsiseg::soft_assign(z, mu), hsiseg::soft_assign(zs, ms)) <
          1e-12);
  }
}

TEST_CASE("target distribution") {
  Rng rng(6);
  SUBCASE("uniform q gives uniform t") {
    const Tensor t = hsiseg::target_distribution(Tensor({4, 3}, 1.0 / 3.0));
    for (double v : t.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("a single row is its own target") {
    const Tensor t = hsiseg::target_distribution(Tensor({1, 2}, {0.8, 0.2}));
    CHECK(t[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(t[1] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("a zero-mass cluster is degenerate") {
    CHECK(kind_of([&] { hsiseg::target_distribution(Tensor({2, 2}, {1, 0, 1, 0})); }) ==
          ErrorKind::kDegenerate);
  }
  SUBCASE("sharpening with equal cluster frequencies") {
    // Rows are cyclic shifts of one another, so every column sums alike.
    const Tensor q({3, 3}, {0.6, 0.3, 0.1, 0.1, 0.6, 0.3, 0.3, 0.1, 0.6});
    const Tensor t = hsiseg::target_distribution(q);
    for (std::size_t r = 0; r < 3; ++r) CHECK(t.at(r, r) >= q.at(r, r));
  }
}

TEST_CASE("clustering loss") {
  Rng rng(7);
  const Tensor q = row_stochastic(rng, 5, 3);
  CHECK(hsiseg::clustering_loss(q, q) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(hsiseg::clustering_loss(Tensor({1, 2}, {1, 0}), Tensor({1, 2}, {0.5, 0.5})) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (int trial = 0; trial < 100; ++trial)
    CHECK(hsiseg::clustering_loss(row_stochastic(rng, 4, 3), row_stochastic(rng, 4, 3)) >= 0.0);
  // Nearly uniform assignments: t matches q to rounding, never below zero.
  std::size_t negative = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t p = 1 + rng.index(20), n = 1 + rng.index(10), j = 1 + rng.index(6);
    const Tensor q2 = hsiseg::soft_assign(random_tensor({p, n}, rng, -1e-3, 1e-3),
                                          random_tensor({j, n}, rng, -1e-3, 1e-3));
    negative += hsiseg::clustering_loss(hsiseg::target_distribution(q2), q2) < 0.0;
  }
  CHECK(negative == 0);
}

TEST_CASE("total loss") {
  CHECK(hsiseg::total_loss(1.0, 2.0, 0.1) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(hsiseg::total_loss(3.5, 0.0) == 3.5);
  CHECK(kind_of([] { hsiseg::total_loss(1.0, 1.0, 1.0); }) == ErrorKind::kParameter);
  CHECK(kind_of([] { hsiseg::total_loss(1.0, 1.0, 0.0); }) == ErrorKind::kParameter);
}

TEST_CASE("rows of q and t sum to one on random inputs") {
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + rng.index(20), j = 1 + rng.index(6), n = 1 + rng.index(5);
    const Tensor q = hsiseg::soft_assign(random_tensor({p, n}, rng, -3, 3),
                                         random_tensor({j, n}, rng, -3, 3));
    worst = std::max({worst, max_row_sum_error(q),
                      max_row_sum_error(hsiseg::target_distribution(q))});
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("every parameter gradient of the full loss passes a central-difference check") {
  Rng rng(9);
  const CaeConfig c = small_config(8, 3);
  CaeParams p = hsiseg::build_cae(c, rng);
  p.set_centers(random_tensor({3, 4}, rng));
  // Non-zero biases so their gradients are exercised at a generic point.
  for (std::size_t s = 0; s < CaeParams::kWeightSlots; ++s)
    if (p.tensors[s].rank() == 1) p.tensors[s] = random_tensor(p.tensors[s].shape(), rng, -0.1, 0.1);
  const Tensor patch = random_tensor({5, 5, 8}, rng, 0, 1);
  const Tensor target({3}, {0.5, 0.3, 0.2});
  for (std::size_t slot = 0; slot < CaeParams::kSlotCount; ++slot) {
    CAPTURE(CaeParams::slot_name(slot));
    const double err = ad::grad_check(
        [&](ad::Tape& tape, ad::Var v) {
          hsiseg::ParamVars vars = hsiseg::bind_constants(tape, p);
          vars[slot] = v;
          return hsiseg::patch_loss_graph(tape, c, vars, patch, 2, &target, 0.1, ad::Mode::kInfer,
                                          nullptr)
              .total;
        },
        p.tensors[slot], 1e-3);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("gradient of the total is grad L_r + alpha grad L_c") {
  Rng rng(10);
  const CaeConfig c = small_config(8, 3);
  CaeParams p = hsiseg::build_cae(c, rng);
  p.set_centers(random_tensor({3, 4}, rng));
  const Tensor patch = random_tensor({5, 5, 8}, rng, 0, 1);
  const Tensor target({3}, {0.2, 0.7, 0.1});

  auto grads_of = [&](double alpha) {
    auto g = p.zeros_like();
    ad::Tape tape;
    const auto vars = hsiseg::bind_parameters(tape, p, g);
    tape.backward(hsiseg::patch_loss_graph(tape, c, vars, patch, 1, &target, alpha,
                                           ad::Mode::kInfer, nullptr)
                      .total);
    return g;
  };
  const auto total = grads_of(0.1);
  const auto recon = grads_of(0.0);
  // Clustering term alone, built from the same pieces.
  auto clus = p.zeros_like();
  {
    ad::Tape tape;
    const auto vars = hsiseg::bind_parameters(tape, p, clus);
    ad::Var z = hsiseg::encode_graph(tape, c, vars, tape.constant(patch), ad::Mode::kInfer, nullptr);
    z = ad::reshape(tape, z, {1, 4});
    tape.backward(ad::kl_divergence(tape, target.reshaped({1, 3}),
                                    ad::soft_assign(tape, z, vars[CaeParams::kCenters])));
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s)
    for (std::size_t i = 0; i < total[s].size(); ++i)
      worst = std::max(worst, std::abs(total[s][i] - (recon[s][i] + 0.1 * clus[s][i])));
  CHECK(worst < 1e-10);
  // Reconstruction never touches the centers.
  for (double v : recon[CaeParams::kCenters].data()) CHECK(v == 0.0);
}

TEST_CASE("center initialisation") {
  Rng rng(11);
  SUBCASE("J distinct latents become the centers") {
    const Tensor z({3, 2}, {0, 0, 4, 4, -3, 2});
    const Tensor mu = hsiseg::init_centers(z, 3, 1);
    for (std::size_t r = 0; r < 3; ++r) {
      bool found = false;
      for (std::size_t k = 0; k < 3; ++k)
        found = found || (mu.at(k, 0) == z.at(r, 0) && mu.at(k, 1) == z.at(r, 1));
      CHECK(found);
    }
  }
  SUBCASE("J = 1 gives the mean") {
    const Tensor z = random_tensor({20, 3}, rng);
    const Tensor mu = hsiseg::init_centers(z, 1, 1);
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0;
      for (std::size_t r = 0; r < 20; ++r) m += z.at(r, c);
      CHECK(mu.at(0, c) == doctest::Approx(m / 20.0).epsilon(1e-12));
    }
  }
  SUBCASE("two separated blobs") {
    Tensor z({200, 2});
    for (std::size_t r = 0; r < 200; ++r) {
      const double base = r < 100 ? -5.0 : 5.0;
      z.at(r, 0) = base + 0.1 * rng.normal();
      z.at(r, 1) = 0.1 * rng.normal();
    }
    const Tensor mu = hsiseg::init_centers(z, 2, 3);
    const std::size_t lo = mu.at(0, 0) < mu.at(1, 0) ? 0 : 1;
    double m[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t r = 0; r < 200; ++r)
      for (std::size_t c = 0; c < 2; ++c) m[r / 100][c] += z.at(r, c) / 100.0;
    CHECK(std::abs(mu.at(lo, 0) - m[0][0]) < 0.1);
    CHECK(std::abs(mu.at(1 - lo, 0) - m[1][0]) < 0.1);
  }
  SUBCASE("fewer distinct latents than clusters is degenerate") {
    CHECK(kind_of([] { hsiseg::init_centers(Tensor({4, 2}, 1.0), 2, 0); }) ==
          ErrorKind::kDegenerate);
  }
}
