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
#include <utility>
#include <vector>

#include "hsiseg/cube.hpp"
#include "hsiseg/tensor.hpp"

namespace hsiseg {

struct PcaModel {
  std::vector<double> mean;               // [B]
  Tensor components;                      // [dims, B], orthonormal rows
  std::vector<double> explained_variance; // [dims], non-increasing
};

/// Principal axes of the rows of `pixels` ([N, B]) from the eigen-
/// decomposition of the mean-centred covariance (divisor N). Each component
/// is signed so that its largest-magnitude coordinate is positive.
PcaModel pca_fit(const Tensor& pixels, std::size_t dims = 25);

/// (pixels - mean) * components^T, giving [N, dims].
Tensor pca_transform(const PcaModel& model, const Tensor& pixels);

/// Cube-level convenience: fit on every pixel and project.
HsiCube pca_reduce(const HsiCube& cube, std::size_t dims = 25);

/// Band windows used by smsi_reduce as [first, last) ranges: the first
/// target-1 windows hold floor(B / target) bands and the last one absorbs
/// the remainder.
std::vector<std::pair<std::size_t, std::size_t>> smsi_windows(
    std::size_t bands, std::size_t target);

/// Simulated multispectral image: each output band is the mean of one
/// non-overlapping window of input bands.
HsiCube smsi_reduce(const HsiCube& cube, std::size_t target_bands = 25);

}  // namespace hsiseg
