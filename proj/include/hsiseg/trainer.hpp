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
#include <limits>
#include <span>
#include <vector>

#include "hsiseg/cae.hpp"
#include "hsiseg/cube.hpp"
#include "hsiseg/rng.hpp"

namespace hsiseg {

struct AdamState {
  std::size_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  /// First and second moments, one entry per parameter position. Entries
  /// are created as zeros the first time a position is seen.
  std::vector<Tensor> m, v;
};

/// One bias-corrected Adam update of every params[i] by grads[i]. Null
/// entries are skipped; the step counter advances once per call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);

/// Convenience overload over every populated parameter slot.
void adam_step(CaeParams& params,
               const std::array<Tensor, CaeParams::kSlotCount>& grads, AdamState& state);

struct TrainConfig {
  double alpha = 0.1;
  double epsilon = 1e-6;
  std::size_t batch_size = 256;
  std::size_t max_stage1_epochs = 500;
  std::size_t stage2_epochs = 25;
};

/// Hard ceiling on clustering-stage epochs.
inline constexpr std::size_t kMaxStage2Epochs = 25;

/// Optimizer state and the generator that drives shuffling and dropout.
/// Carried from stage 1 into stage 2.
struct TrainingState {
  explicit TrainingState(std::uint64_t seed, double lr = 1e-4) : rng(seed) {
    adam.lr = lr;
  }
  AdamState adam;
  Rng rng;
};

struct Stage1Result {
  std::vector<double> losses;  // epoch-mean L_r
  bool converged = false;      // epsilon rule fired before the cap
};

struct Stage2Epoch {
  double reconstruction = 0.0;
  double clustering = 0.0;
  double total = 0.0;
};

/// Minimizes the reconstruction loss with dropout active. Stops when two
/// consecutive epoch losses differ by less than epsilon, or at the cap.
Stage1Result train_stage1(CaeParams& params, const PatchBatch& data, const TrainConfig& cfg,
                          TrainingState& state);

/// Jointly optimizes L_r + alpha * L_c over the weights and the centers for
/// cfg.stage2_epochs epochs, refreshing the target distribution at the
/// start of each epoch. alpha == 0 is accepted as a diagnostic mode.
std::vector<Stage2Epoch> train_stage2(CaeParams& params, const PatchBatch& data,
                                      const TrainConfig& cfg, TrainingState& state);

/// Cluster label (1-based) of every pixel: argmax_j q_ij of its patch
/// embedding. Background pixels are labelled and flagged.
LabelMap segment(const CaeParams& params, const HsiCube& cube);

}  // namespace hsiseg
