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

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hsiseg/clustering.hpp"
#include "hsiseg/error.hpp"

namespace hsiseg {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.extent(0)),
          static_cast<Eigen::Index>(t.extent(1))};
}

struct Component {
  Eigen::LLT<Matrix> chol;
  double log_norm = 0.0;  // log weight - d/2 log(2 pi) - 1/2 log det
};

std::vector<Component> factorize(const GmmModel& model) {
  const std::size_t k = model.weights.size();
  const auto d = static_cast<Eigen::Index>(model.means.extent(1));
  std::vector<Component> comps(k);
  for (std::size_t c = 0; c < k; ++c) {
    const Matrix cov = as_matrix(model.covariances[c]);
    comps[c].chol.compute(cov);
    if (comps[c].chol.info() != Eigen::Success) {
      std::ostringstream os;
      os << "covariance of component " << c
         << " is not positive definite despite the ridge (min diagonal "
         << cov.diagonal().minCoeff() << ")";
      fail(ErrorKind::kNumerical, os.str());
    }
    const Matrix& l = comps[c].chol.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
    comps[c].log_norm = std::log(model.weights[c]) -
                        0.5 * static_cast<double>(d) *
                            std::log(2.0 * std::numbers::pi) -
                        0.5 * log_det;
  }
  return comps;
}

// Fills resp with normalized responsibilities; returns total log-likelihood.
double expectation(const GmmModel& model, const Tensor& points, Tensor& resp) {
  const std::size_t n = points.extent(0), k = model.weights.size();
  const auto x = as_matrix(points);
  const auto mu = as_matrix(model.means);
  const std::vector<Component> comps = factorize(model);
  resp = Tensor({n, k});
  std::vector<double> logp(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const Vector diff =
          (x.row(row) - mu.row(static_cast<Eigen::Index>(c))).transpose();
      const Vector solved = comps[c].chol.matrixL().solve(diff);
      logp[c] = comps[c].log_norm - 0.5 * solved.squaredNorm();
      best = std::max(best, logp[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - best);
    const double log_sum = best + std::log(sum);
    for (std::size_t c = 0; c < k; ++c)
      resp.at(i, c) = std::exp(logp[c] - log_sum);
    total += log_sum;
  }
  if (!std::isfinite(total))
    fail(ErrorKind::kNumerical, "GMM log-likelihood is not finite");
  return total;
}

void maximization(const Tensor& points, const Tensor& resp, double ridge,
                  GmmModel& model) {
  const std::size_t n = points.extent(0), d = points.extent(1);
  const std::size_t k = resp.extent(1);
  const auto x = as_matrix(points);
  for (std::size_t c = 0; c < k; ++c) {
    double mass = 0.0;
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      mass += resp.at(i, c);
      mean += resp.at(i, c) * x.row(static_cast<Eigen::Index>(i)).transpose();
    }
    if (!(mass > 0.0))
      fail(ErrorKind::kNumerical,
           "GMM component " + std::to_string(c) + " lost all responsibility");
    mean /= mass;
    Matrix cov = Matrix::Zero(static_cast<Eigen::Index>(d),
                              static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      const Vector diff = x.row(static_cast<Eigen::Index>(i)).transpose() - mean;
      cov.noalias() += resp.at(i, c) * diff * diff.transpose();
    }
    cov /= mass;
    cov.diagonal().array() += ridge;
    model.weights[c] = mass / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
      model.means.at(c, j) = mean(static_cast<Eigen::Index>(j));
      for (std::size_t l = 0; l < d; ++l)
        model.covariances[c].at(j, l) =
            0.5 * (cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) +
                   cov(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)));
    }
  }
}

}  // namespace

Tensor gmm_responsibilities(const GmmModel& model, const Tensor& points) {
  require(points.rank() == 2 && points.extent(1) == model.means.extent(1),
          ErrorKind::kShape, "points do not match the mixture dimension");
  Tensor resp;
  expectation(model, points, resp);
  return resp;
}

GmmResult gmm_em(const Tensor& points, std::size_t k, const GmmOptions& options) {
  require(points.rank() == 2, ErrorKind::kShape, "gmm expects an [N, d] matrix");
  require(k >= 1, ErrorKind::kParameter, "gmm needs k >= 1");
  require(options.ridge > 0.0, ErrorKind::kParameter, "gmm ridge must be > 0");
  const std::size_t n = points.extent(0), d = points.extent(1);
  require(n >= k, ErrorKind::kInsufficientData,
          "gmm needs at least k = " + std::to_string(k) + " points, got " +
              std::to_string(n));

  KmeansOptions km_opts;
  km_opts.seed = options.seed;
  const KmeansResult init = kmeans(points, k, km_opts);

  GmmResult result;
  GmmModel& model = result.model;
  model.weights.assign(k, 0.0);
  model.means = Tensor({k, d});
  model.covariances.assign(k, Tensor({d, d}));
  // Hard k-means assignments act as the first set of responsibilities.
  Tensor resp({n, k});
  for (std::size_t i = 0; i < n; ++i) resp.at(i, init.labels[i]) = 1.0;
  maximization(points, resp, options.ridge, model);

  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const double ll = expectation(model, points, resp) * scale;
    model.log_likelihood_trace.push_back(ll);
    ++model.iterations;
    const std::size_t t = model.log_likelihood_trace.size();
    if (t > 1 && ll - model.log_likelihood_trace[t - 2] < options.tol) break;
    if (it + 1 == options.max_iter) break;
    maximization(points, resp, options.ridge, model);
  }

  result.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (resp.at(i, c) > resp.at(i, best)) best = c;
    result.labels[i] = best;
  }
  return result;
}

}  // namespace hsiseg
