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

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hsiseg/tensor.hpp"

namespace hsiseg {

struct KmeansOptions {
  std::uint64_t seed = 0;
  double tol = 1e-6;  // stop once every center moves less than this
  std::size_t max_iter = 300;
};

struct KmeansModel {
  Tensor centers;  // [k, d]
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after each assignment step, ending with the final assignment.
  std::vector<double> inertia_trace;
};

struct KmeansResult {
  KmeansModel model;
  std::vector<std::size_t> labels;  // 0-based cluster index per point
};

/// Lloyd's algorithm with k-means++ seeding over the rows of `points`
/// ([N, d]). Clusters that empty out take the point farthest from its
/// current center.
KmeansResult kmeans(const Tensor& points, std::size_t k,
                    const KmeansOptions& options = {});

/// Index of the nearest center (lowest index on ties).
std::size_t nearest_center(const Tensor& centers, const double* point);

struct GmmOptions {
  std::uint64_t seed = 0;
  double ridge = 1e-6;
  /// Stop when the mean per-point log-likelihood improves by less than this.
  double tol = 1e-6;
  std::size_t max_iter = 200;
};

struct GmmModel {
  std::vector<double> weights;     // [k], sums to one
  Tensor means;                    // [k, d]
  std::vector<Tensor> covariances; // k of [d, d]
  /// Mean per-point log-likelihood evaluated at each E-step.
  std::vector<double> log_likelihood_trace;
  std::size_t iterations = 0;
};

struct GmmResult {
  GmmModel model;
  std::vector<std::size_t> labels;  // argmax responsibility
};

/// Full-covariance Gaussian mixture fitted by EM, initialised from k-means.
/// Every covariance gets `ridge` added to its diagonal.
GmmResult gmm_em(const Tensor& points, std::size_t k,
                 const GmmOptions& options = {});

/// Posterior responsibilities [N, k] under `model`.
Tensor gmm_responsibilities(const GmmModel& model, const Tensor& points);

}  // namespace hsiseg
