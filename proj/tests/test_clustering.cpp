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

#include <Eigen/Dense>
#include <set>

#include "helpers.hpp"
#include "hsiseg/clustering.hpp"
#include "hsiseg/error.hpp"
#include "hsiseg/metrics.hpp"

namespace {

using hsiseg::ErrorKind;
using hsiseg::Rng;
using hsiseg::Tensor;

// Points from `k` Gaussian blobs in d dimensions; blob g is centred at
// g * spacing on every axis with per-axis standard deviations `sigma`.
struct Blobs {
  Tensor points;
  std::vector<hsiseg::Label> truth;
};

Blobs make_blobs(Rng& rng, std::size_t per_blob, std::size_t k, std::size_t d, double spacing,
                 const std::vector<double>& sigma) {
  Blobs b{Tensor({per_blob * k, d}), {}};
  for (std::size_t g = 0; g < k; ++g)
    for (std::size_t i = 0; i < per_blob; ++i) {
      const std::size_t r = g * per_blob + i;
      for (std::size_t c = 0; c < d; ++c)
        b.points.at(r, c) = static_cast<double>(g) * spacing + sigma[c % sigma.size()] * rng.normal();
      b.truth.push_back(static_cast<hsiseg::Label>(g + 1));
    }
  return b;
}

std::vector<hsiseg::Label> one_based(const std::vector<std::size_t>& labels) {
  std::vector<hsiseg::Label> out;
  for (std::size_t l : labels) out.push_back(static_cast<hsiseg::Label>(l + 1));
  return out;
}

double ars(const std::vector<hsiseg::Label>& a, const std::vector<hsiseg::Label>& b) {
  return hsiseg::ars(hsiseg::pair_counts(hsiseg::contingency(a, b)));
}

std::vector<double> column_means(const Tensor& x) {
  std::vector<double> m(x.extent(1), 0.0);
  for (std::size_t r = 0; r < x.extent(0); ++r)
    for (std::size_t c = 0; c < x.extent(1); ++c) m[c] += x.at(r, c);
  for (double& v : m) v /= static_cast<double>(x.extent(0));
  return m;
}

}  // namespace

TEST_CASE("k-means with N = k distinct points has zero inertia") {
  const Tensor x({3, 2}, {0, 0, 5, 1, -2, 7});
  const auto res = hsiseg::kmeans(x, 3);
  CHECK(res.model.inertia == 0.0);
  std::set<std::size_t> used(res.labels.begin(), res.labels.end());
  CHECK(used.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(res.model.centers.at(res.labels[i], c) == x.at(i, c));
}

TEST_CASE("k-means with k = 1 returns the mean") {
  Rng rng(1);
  const Tensor x = hsiseg::testing::random_tensor({40, 3}, rng);
  const auto res = hsiseg::kmeans(x, 1);
  const auto mean = column_means(x);
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(res.model.centers.at(0, c) == doctest::Approx(mean[c]).epsilon(1e-12));
}

TEST_CASE("k-means separates blobs 10 sigma apart") {
  Rng rng(2);
  const Blobs b = make_blobs(rng, 200, 2, 3, 10.0 / std::sqrt(3.0), {1.0 / std::sqrt(3.0)});
  hsiseg::KmeansOptions opt;
  opt.seed = 5;
  const auto res = hsiseg::kmeans(b.points, 2, opt);
  const auto table = hsiseg::contingency(one_based(res.labels), b.truth);
  const auto s = hsiseg::supervised_scores(hsiseg::majority_vote_table(table));
  CHECK(s.oa >= 0.99);
}

TEST_CASE("k-means inertia never increases and ends at a Lloyd fixed point") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = hsiseg::testing::random_tensor({60, 4}, rng);
    hsiseg::KmeansOptions opt;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto res = hsiseg::kmeans(x, 5, opt);
    const auto& tr = res.model.inertia_trace;
    REQUIRE_FALSE(tr.empty());
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] + 1e-12);
    for (std::size_t i = 0; i < 60; ++i)
      CHECK(hsiseg::nearest_center(res.model.centers, x.data().data() + i * 4) == res.labels[i]);
    CHECK(std::set<std::size_t>(res.labels.begin(), res.labels.end()).size() == 5);
  }
}

TEST_CASE("k-means repairs empty clusters") {
  // Two distinct locations, heavily duplicated, and k = 3.
  Tensor x({12, 1});
  for (std::size_t i = 0; i < 12; ++i) x.at(i, 0) = i < 6 ? 0.0 : (i == 11 ? 10.5 : 10.0);
  const auto res = hsiseg::kmeans(x, 3);
  CHECK(std::set<std::size_t>(res.labels.begin(), res.labels.end()).size() == 3);
}

TEST_CASE("k-means contracts and determinism") {
  Rng rng(4);
  const Tensor x = hsiseg::testing::random_tensor({30, 2}, rng);
  try {
    hsiseg::kmeans(Tensor({2, 2}), 3);
    FAIL("expected an insufficient-data error");
  } catch (const hsiseg::Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientData);
  }
  hsiseg::KmeansOptions opt;
  opt.seed = 9;
  const auto a = hsiseg::kmeans(x, 4, opt);
  const auto b = hsiseg::kmeans(x, 4, opt);
  CHECK(a.labels == b.labels);
  CHECK(a.model.centers == b.model.centers);
}

TEST_CASE("GMM with k = 1 is the sample mean and covariance plus ridge") {
  Rng rng(5);
  const Tensor x = hsiseg::testing::random_tensor({50, 3}, rng);
  hsiseg::GmmOptions opt;
  opt.ridge = 1e-3;
  const auto res = hsiseg::gmm_em(x, 1, opt);
  const auto mean = column_means(x);
  CHECK(res.model.weights[0] == doctest::Approx(1.0));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(res.model.means.at(0, c) == doctest::Approx(mean[c]).epsilon(1e-12));
    for (std::size_t e = 0; e < 3; ++e) {
      double s = 0.0;
      for (std::size_t r = 0; r < 50; ++r) s += (x.at(r, c) - mean[c]) * (x.at(r, e) - mean[e]);
      const double expected = s / 50.0 + (c == e ? opt.ridge : 0.0);
      CHECK(res.model.covariances[0].at(c, e) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
  CHECK(std::set<std::size_t>(res.labels.begin(), res.labels.end()).size() == 1);
}

TEST_CASE("GMM recovers two anisotropic Gaussians") {
  Rng rng(6);
  Blobs b = make_blobs(rng, 300, 2, 2, 0.0, {1.0, 0.1});
  for (std::size_t r = 300; r < 600; ++r) {  // second blob: shifted and stretched the other way
    b.points.at(r, 0) = 4.0 + 0.1 * rng.normal();
    b.points.at(r, 1) = 1.0 + 1.0 * rng.normal();
  }
  hsiseg::GmmOptions opt;
  opt.seed = 3;
  const auto res = hsiseg::gmm_em(b.points, 2, opt);
  CHECK(ars(one_based(res.labels), b.truth) >= 0.95);
  // Match components to blobs by the first mean coordinate.
  const std::size_t first = res.model.means.at(0, 0) < res.model.means.at(1, 0) ? 0 : 1;
  CHECK(std::abs(res.model.means.at(first, 0) - 0.0) < 0.1);
  CHECK(std::abs(res.model.means.at(first, 1) - 0.0) < 0.1);
  CHECK(std::abs(res.model.means.at(1 - first, 0) - 4.0) < 0.1);
  CHECK(std::abs(res.model.means.at(1 - first, 1) - 1.0) < 0.1);
}

TEST_CASE("GMM invariants") {
  Rng rng(7);
  const Blobs b = make_blobs(rng, 80, 3, 3, 3.0, {0.5, 1.0, 0.8});
  hsiseg::GmmOptions opt;
  opt.seed = 1;
  const auto res = hsiseg::gmm_em(b.points, 3, opt);
  const auto& m = res.model;
  CHECK(std::accumulate(m.weights.begin(), m.weights.end(), 0.0) == doctest::Approx(1.0));
  for (const Tensor& cov : m.covariances) {
    Eigen::Matrix3d c;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov.at(i, j);
        CHECK(cov.at(i, j) == cov.at(j, i));
      }
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(c).eigenvalues().minCoeff() >=
          opt.ridge * (1 - 1e-9));
  }
  for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i)
    CHECK(m.log_likelihood_trace[i] >= m.log_likelihood_trace[i - 1] - 1e-8);
  const Tensor resp = hsiseg::gmm_responsibilities(m, b.points);
  double worst = 0.0;
  for (std::size_t r = 0; r < resp.extent(0); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += resp.at(r, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  CHECK(worst <= 1e-12);
  const auto again = hsiseg::gmm_em(b.points, 3, opt);
  CHECK(again.labels == res.labels);
  CHECK(again.model.means == m.means);
}
