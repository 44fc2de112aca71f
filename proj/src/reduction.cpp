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

#include "hsiseg/reduction.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "hsiseg/error.hpp"

namespace hsiseg {

PcaModel pca_fit(const Tensor& pixels, std::size_t dims) {
  require(pixels.rank() == 2, ErrorKind::kShape, "pca expects an [N, B] matrix");
  const std::size_t n = pixels.extent(0), b = pixels.extent(1);
  require(dims >= 1, ErrorKind::kParameter, "pca needs at least one component");
  require(n > dims, ErrorKind::kInsufficientData,
          "pca needs more than " + std::to_string(dims) + " samples, got " +
              std::to_string(n));
  require(b >= dims, ErrorKind::kParameter,
          "cannot keep " + std::to_string(dims) + " components of " +
              std::to_string(b) + " bands");

  PcaModel model;
  model.mean.assign(b, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b; ++j) model.mean[j] += pixels.at(i, j);
  for (double& m : model.mean) m /= static_cast<double>(n);

  const auto eb = static_cast<Eigen::Index>(b);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(eb, eb);
  Eigen::VectorXd row(eb);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j)
      row(static_cast<Eigen::Index>(j)) = pixels.at(i, j) - model.mean[j];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(row);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::kNumerical, "covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  model.components = Tensor({dims, b});
  for (std::size_t c = 0; c < dims; ++c) {
    const auto col = static_cast<Eigen::Index>(b - 1 - c);
    model.explained_variance.push_back(std::max(0.0, solver.eigenvalues()(col)));
    const Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    const double sign = v(arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < b; ++j)
      model.components.at(c, j) = sign * v(static_cast<Eigen::Index>(j));
  }
  return model;
}

Tensor pca_transform(const PcaModel& model, const Tensor& pixels) {
  require(pixels.rank() == 2 && pixels.extent(1) == model.mean.size(),
          ErrorKind::kShape, "pixel band count does not match the PCA model");
  const std::size_t n = pixels.extent(0), b = pixels.extent(1);
  const std::size_t dims = model.components.extent(0);
  Tensor out({n, dims});
  std::vector<double> centred(b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j)
      centred[j] = pixels.at(i, j) - model.mean[j];
    for (std::size_t c = 0; c < dims; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < b; ++j) s += centred[j] * model.components.at(c, j);
      out.at(i, c) = s;
    }
  }
  return out;
}

HsiCube pca_reduce(const HsiCube& cube, std::size_t dims) {
  const Tensor pixels = cube.pixel_matrix();
  const PcaModel model = pca_fit(pixels, dims);
  HsiCube out =
      HsiCube::from_pixel_matrix(pca_transform(model, pixels), cube.width, cube.height);
  out.labels = cube.labels;
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> smsi_windows(std::size_t bands,
                                                              std::size_t target) {
  require(target >= 1, ErrorKind::kParameter, "S-MSI needs at least one band");
  require(bands >= target, ErrorKind::kParameter,
          "S-MSI cannot produce " + std::to_string(target) + " bands from " +
              std::to_string(bands));
  const std::size_t width = bands / target;
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  for (std::size_t w = 0; w + 1 < target; ++w)
    windows.emplace_back(w * width, (w + 1) * width);
  windows.emplace_back((target - 1) * width, bands);
  return windows;
}

HsiCube smsi_reduce(const HsiCube& cube, std::size_t target_bands) {
  const auto windows = smsi_windows(cube.bands, target_bands);
  const std::size_t n = cube.pixels();
  HsiCube out;
  out.width = cube.width;
  out.height = cube.height;
  out.bands = target_bands;
  out.labels = cube.labels;
  out.values.assign(n * target_bands, 0.0);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto [first, last] = windows[w];
    double* dst = out.values.data() + w * n;
    for (std::size_t b = first; b < last; ++b) {
      const double* src = cube.values.data() + b * n;
      for (std::size_t p = 0; p < n; ++p) dst[p] += src[p];
    }
    const double count = static_cast<double>(last - first);
    for (std::size_t p = 0; p < n; ++p) dst[p] /= count;
    if (!cube.wavelengths.empty()) {
      double mean_wl = 0.0;
      for (std::size_t b = first; b < last; ++b) mean_wl += cube.wavelengths[b];
      out.wavelengths.push_back(mean_wl / count);
    }
  }
  return out;
}

}  // namespace hsiseg
