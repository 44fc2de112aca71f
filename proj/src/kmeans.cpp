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

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsiseg/clustering.hpp"
#include "hsiseg/error.hpp"
#include "hsiseg/rng.hpp"

namespace hsiseg {
namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

Tensor seed_plus_plus(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.extent(0), d = points.extent(1);
  const double* x = points.data().data();
  Tensor centers({k, d});
  auto copy_row = [&](std::size_t dst, std::size_t src) {
    std::copy_n(x + src * d, d, centers.data().begin() + dst * d);
  };
  copy_row(0, rng.index(n));
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i)
    closest[i] = squared_distance(x + i * d, centers.data().data(), d);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : closest) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    copy_row(c, pick);
    const double* cc = centers.data().data() + c * d;
    for (std::size_t i = 0; i < n; ++i)
      closest[i] = std::min(closest[i], squared_distance(x + i * d, cc, d));
  }
  return centers;
}

// Gives each empty cluster the point farthest from its center, taken from
// a cluster that keeps at least one member. The emptied center moves onto
// that point, so inertia cannot grow.
void repair_empty(const Tensor& points, Tensor& centers,
                  std::vector<std::size_t>& labels) {
  const std::size_t n = points.extent(0), d = points.extent(1);
  const std::size_t k = centers.extent(0);
  const double* x = points.data().data();
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t l : labels) ++counts[l];
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[labels[i]] < 2) continue;
      const double di = squared_distance(
          x + i * d, centers.data().data() + labels[i] * d, d);
      if (di > far_d) {
        far_d = di;
        far = i;
      }
    }
    require(far < n, ErrorKind::kInsufficientData,
            "cannot repair an empty cluster: fewer points than clusters");
    --counts[labels[far]];
    labels[far] = c;
    counts[c] = 1;
    std::copy_n(x + far * d, d, centers.data().begin() + c * d);
  }
}

double assign(const Tensor& points, const Tensor& centers,
              std::vector<std::size_t>& labels) {
  const std::size_t n = points.extent(0), d = points.extent(1);
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = points.data().data() + i * d;
    labels[i] = nearest_center(centers, p);
    inertia += squared_distance(p, centers.data().data() + labels[i] * d, d);
  }
  return inertia;
}

double total_inertia(const Tensor& points, const Tensor& centers,
                     const std::vector<std::size_t>& labels) {
  const std::size_t d = points.extent(1);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s += squared_distance(points.data().data() + i * d,
                          centers.data().data() + labels[i] * d, d);
  return s;
}

}  // namespace

std::size_t nearest_center(const Tensor& centers, const double* point) {
  const std::size_t k = centers.extent(0), d = centers.extent(1);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double dc = squared_distance(point, centers.data().data() + c * d, d);
    if (dc < best_d) {
      best_d = dc;
      best = c;
    }
  }
  return best;
}

KmeansResult kmeans(const Tensor& points, std::size_t k,
                    const KmeansOptions& options) {
  require(points.rank() == 2, ErrorKind::kShape, "kmeans expects an [N, d] matrix");
  require(k >= 1, ErrorKind::kParameter, "kmeans needs k >= 1");
  const std::size_t n = points.extent(0), d = points.extent(1);
  require(n >= k, ErrorKind::kInsufficientData,
          "kmeans needs at least k = " + std::to_string(k) + " points, got " +
              std::to_string(n));

  Rng rng(options.seed);
  KmeansResult result;
  KmeansModel& model = result.model;
  model.centers = seed_plus_plus(points, k, rng);
  result.labels.assign(n, 0);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    assign(points, model.centers, result.labels);
    repair_empty(points, model.centers, result.labels);
    model.inertia_trace.push_back(
        total_inertia(points, model.centers, result.labels));
    ++model.iterations;

    Tensor updated({k, d});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.labels[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) updated.at(c, j) += points.at(i, j);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double moved = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        updated.at(c, j) /= static_cast<double>(counts[c]);
        const double diff = updated.at(c, j) - model.centers.at(c, j);
        moved += diff * diff;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    model.centers = std::move(updated);
    if (shift < options.tol) break;
  }

  assign(points, model.centers, result.labels);
  repair_empty(points, model.centers, result.labels);
  model.inertia = total_inertia(points, model.centers, result.labels);
  model.inertia_trace.push_back(model.inertia);
  return result;
}

}  // namespace hsiseg
