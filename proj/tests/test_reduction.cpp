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
#include "hsiseg/error.hpp"
#include "hsiseg/reduction.hpp"

namespace {

using hsiseg::ErrorKind;
using hsiseg::HsiCube;
using hsiseg::Rng;
using hsiseg::Tensor;

// N x B sample with per-axis scales and a random rotation-free correlation.
Tensor correlated_sample(Rng& rng, std::size_t n, std::size_t b) {
  Tensor x({n, b});
  for (std::size_t r = 0; r < n; ++r) {
    double shared = rng.normal();
    for (std::size_t c = 0; c < b; ++c)
      x.at(r, c) = 3.0 + (1.0 + static_cast<double>(c)) * (rng.normal() + 0.5 * shared);
  }
  return x;
}

HsiCube cube_from(const Tensor& x) {
  return HsiCube::from_pixel_matrix(x, x.extent(0), 1);
}

}  // namespace

TEST_CASE("PCA components are orthonormal and sorted") {
  Rng rng(1);
  const Tensor x = correlated_sample(rng, 200, 8);
  const auto m = hsiseg::pca_fit(x, 5);
  REQUIRE(m.components.shape() == hsiseg::Shape{5, 8});
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < 8; ++c) d += m.components.at(i, c) * m.components.at(j, c);
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));
    }
    if (i > 0) CHECK(m.explained_variance[i] <= m.explained_variance[i - 1]);
    // Sign convention: largest-magnitude coordinate positive.
    std::size_t arg = 0;
    for (std::size_t c = 1; c < 8; ++c)
      if (std::abs(m.components.at(i, c)) > std::abs(m.components.at(i, arg))) arg = c;
    CHECK(m.components.at(i, arg) > 0.0);
  }
}

TEST_CASE("PCA of rank-1 data finds the line") {
  Rng rng(2);
  const std::vector<double> dir = {0.6, 0.0, -0.8};
  Tensor x({50, 3});
  for (std::size_t r = 0; r < 50; ++r) {
    const double t = rng.normal();
    for (std::size_t c = 0; c < 3; ++c) x.at(r, c) = 1.0 + t * dir[c];
  }
  const auto m = hsiseg::pca_fit(x, 2);
  const double align = m.components.at(0, 0) * 0.6 - m.components.at(0, 2) * 0.8;
  CHECK(std::abs(align) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m.explained_variance[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("PCA of an isotropic sample has unit variances") {
  Rng rng(3);
  Tensor x({10000, 4});
  for (double& v : x.data()) v = rng.normal();
  const auto m = hsiseg::pca_fit(x, 4);
  for (double v : m.explained_variance) CHECK(std::abs(v - 1.0) < 0.1);
}

TEST_CASE("PCA reconstruction error equals N times the discarded variance") {
  Rng rng(4);
  const std::size_t n = 300, b = 6, k = 3;
  const Tensor x = correlated_sample(rng, n, b);
  const auto full = hsiseg::pca_fit(x, b);
  const auto top = hsiseg::pca_fit(x, k);
  const Tensor z = hsiseg::pca_transform(top, x);
  double err = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < b; ++c) {
      double rec = top.mean[c];
      for (std::size_t j = 0; j < k; ++j) rec += z.at(r, j) * top.components.at(j, c);
      err += (x.at(r, c) - rec) * (x.at(r, c) - rec);
    }
  double discarded = 0.0;
  for (std::size_t j = k; j < b; ++j) discarded += full.explained_variance[j];
  CHECK(err == doctest::Approx(discarded * static_cast<double>(n)).epsilon(1e-6));
}

TEST_CASE("PCA transform centres and decorrelates the fit data") {
  Rng rng(5);
  const Tensor x = correlated_sample(rng, 400, 5);
  const auto m = hsiseg::pca_fit(x, 4);
  Tensor mean_row({1, 5}, m.mean);
  const Tensor zm = hsiseg::pca_transform(m, mean_row);
  for (double v : zm.data()) CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const Tensor z = hsiseg::pca_transform(m, x);
  for (std::size_t i = 0; i < 4; ++i) {
    double mu = 0.0;
    for (std::size_t r = 0; r < 400; ++r) mu += z.at(r, i);
    CHECK(mu / 400.0 == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    for (std::size_t j = 0; j < 4; ++j) {
      double cov = 0.0;
      for (std::size_t r = 0; r < 400; ++r) cov += z.at(r, i) * z.at(r, j);
      cov /= 400.0;
      const double expected = i == j ? m.explained_variance[i] : 0.0;
      CHECK(cov == doctest::Approx(expected).scale(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("PCA is invariant to a constant offset") {
  Rng rng(6);
  Tensor x = correlated_sample(rng, 100, 4);
  const Tensor z = hsiseg::pca_transform(hsiseg::pca_fit(x, 3), x);
  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 4; ++c) x.at(r, c) += 17.0 - static_cast<double>(c);
  const Tensor z2 = hsiseg::pca_transform(hsiseg::pca_fit(x, 3), x);
  CHECK(hsiseg::testing::max_abs_diff(z, z2) < 1e-8);
}

TEST_CASE("PCA contracts") {
  try {
    hsiseg::pca_fit(Tensor({3, 5}), 3);
    FAIL("expected an insufficient-data error");
  } catch (const hsiseg::Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
  Rng rng(7);
  const auto m = hsiseg::pca_fit(correlated_sample(rng, 20, 4), 2);
  try {
    hsiseg::pca_transform(m, Tensor({2, 3}));
    FAIL("expected a shape error");
  } catch (const hsiseg::Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("pca_reduce yields a cube with the requested bands") {
  Rng rng(8);
  const HsiCube c = cube_from(correlated_sample(rng, 60, 7));
  const HsiCube r = hsiseg::pca_reduce(c, 4);
  CHECK(r.bands == 4);
  CHECK(r.width == c.width);
  CHECK(r.height == c.height);
}

TEST_CASE("S-MSI windows follow the leftover rule") {
  const auto w100 = hsiseg::smsi_windows(100, 25);
  REQUIRE(w100.size() == 25);
  for (const auto& [a, b] : w100) CHECK(b - a == 4);
  for (std::size_t bands : {103u, 200u, 224u}) {
    const auto w = hsiseg::smsi_windows(bands, 25);
    REQUIRE(w.size() == 25);
    const std::size_t width = bands / 25;
    for (std::size_t i = 0; i + 1 < 25; ++i) CHECK(w[i].second - w[i].first == width);
    CHECK(w.back().second - w.back().first == bands - 24 * width);
    CHECK(w.back().second == bands);
    for (std::size_t i = 1; i < 25; ++i) CHECK(w[i].first == w[i - 1].second);
  }
  CHECK(hsiseg::smsi_windows(103, 25).back().second - hsiseg::smsi_windows(103, 25).back().first ==
        7);
}

TEST_CASE("S-MSI averaging") {
  Rng rng(9);
  SUBCASE("constant spectrum stays constant") {
    HsiCube c = cube_from(Tensor({4, 30}, 2.5));
    const HsiCube r = hsiseg::smsi_reduce(c, 25);
    CHECK(r.bands == 25);
    for (double v : r.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("each output band is its window mean and scaling commutes") {
    const Tensor x = hsiseg::testing::random_tensor({5, 11}, rng);
    const HsiCube c = cube_from(x);
    const HsiCube r = hsiseg::smsi_reduce(c, 3);
    const auto w = hsiseg::smsi_windows(11, 3);
    for (std::size_t p = 0; p < 5; ++p)
      for (std::size_t o = 0; o < 3; ++o) {
        double s = 0.0;
        for (std::size_t b = w[o].first; b < w[o].second; ++b) s += x.at(p, b);
        CHECK(r.value(p, 0, o) ==
              doctest::Approx(s / static_cast<double>(w[o].second - w[o].first)).epsilon(1e-14));
      }
    HsiCube scaled = c;
    for (double& v : scaled.values) v *= -3.0;
    const HsiCube rs = hsiseg::smsi_reduce(scaled, 3);
    for (std::size_t i = 0; i < r.values.size(); ++i)
      CHECK(rs.values[i] == doctest::Approx(-3.0 * r.values[i]).epsilon(1e-14));
  }
  SUBCASE("fewer bands than requested is a parameter error") {
    try {
      hsiseg::smsi_reduce(cube_from(Tensor({2, 10}, 1.0)), 25);
      FAIL("expected a parameter error");
    } catch (const hsiseg::Error& e) {
      CHECK(e.kind() == ErrorKind::kParameter);
    }
  }
}
