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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hsiseg/autodiff.hpp"
#include "hsiseg/cube.hpp"
#include "hsiseg/rng.hpp"
#include "hsiseg/tensor.hpp"

namespace hsiseg {

/// Architecture of the 3D convolutional autoencoder:
///
///   patch [s, s, B]
///     -> conv  k @ ks x ks x kd          -> [k, s-ks+1, s-ks+1, B-kd+1]
///     -> dropout(p)
///     -> conv  k @ ks x ks x kd          -> [k, 1, 1, B-2kd+2]
///     -> flatten -> dense(n)             -> latent z [n]
///     -> dense(k * (B-2kd+2)) -> reshape -> transposed conv -> transposed conv
///     -> reconstruction [s, s, B]
///
/// The clustering layer holds J centers in latent space.
struct CaeConfig {
  std::size_t patch_spatial = 5;
  std::size_t bands = 0;
  std::size_t kernels_per_layer = 32;
  std::size_t kernel_spatial = 3;
  std::size_t kernel_depth = 9;
  std::size_t embedding_dim = 25;
  double dropout_p = 0.5;
  std::size_t clusters = 0;

  /// Spectral extent after both encoder convolutions.
  std::size_t latent_depth() const { return bands + 2 - 2 * kernel_depth; }
  std::size_t flatten_size() const { return kernels_per_layer * latent_depth(); }

  /// Throws kConfig when the geometry is inconsistent. Clusters are only
  /// checked when `need_clusters` is set.
  void validate(bool need_clusters = false) const;

  bool operator==(const CaeConfig&) const = default;
};

/// All trainable weights. Encoder kernels are [k, c_in, ks, ks, kd]; the
/// decoder's transposed-convolution kernels have the same shapes as their
/// encoder mirrors.
struct CaeParams {
  enum Slot : std::size_t {
    kEncConv1W, kEncConv1B, kEncConv2W, kEncConv2B, kEncDenseW, kEncDenseB,
    kDecDenseW, kDecDenseB, kDecConv1W, kDecConv1B, kDecConv2W, kDecConv2B,
    kCenters, kSlotCount
  };
  static constexpr std::size_t kWeightSlots = kCenters;

  CaeConfig config;
  /// Indexed by Slot. tensors[kCenters] stays empty until centers are set.
  std::array<Tensor, kSlotCount> tensors;

  static std::string_view slot_name(std::size_t slot);

  bool has_centers() const { return !tensors[kCenters].empty(); }
  const Tensor& centers() const { return tensors[kCenters]; }
  /// Installs [J, n] centers; J must match config.clusters when nonzero.
  void set_centers(Tensor centers);

  /// Zero tensors with the shapes of every populated slot.
  std::array<Tensor, kSlotCount> zeros_like() const;
};

/// Expected shape of every slot for `config` (centers need clusters > 0).
std::array<Shape, CaeParams::kSlotCount> parameter_shapes(const CaeConfig& config);

/// Weights drawn uniformly from +-sqrt(6 / fan_in), biases zero, no centers.
CaeParams build_cae(const CaeConfig& config, Rng& rng);

// ---- graph construction -------------------------------------------------------

/// Tape handles for every parameter slot.
using ParamVars = std::array<ad::Var, CaeParams::kSlotCount>;

/// Binds parameters as differentiable leaves accumulating into `grads`.
ParamVars bind_parameters(ad::Tape& tape, const CaeParams& params,
                          std::array<Tensor, CaeParams::kSlotCount>& grads);

/// Binds parameters as constants (inference).
ParamVars bind_constants(ad::Tape& tape, const CaeParams& params);

ad::Var encode_graph(ad::Tape& tape, const CaeConfig& config, const ParamVars& p,
                     ad::Var patch, ad::Mode mode, Rng* rng);
ad::Var decode_graph(ad::Tape& tape, const CaeConfig& config, const ParamVars& p,
                     ad::Var latent);

/// Per-patch training objective
///   (1/p) |x - x'|^2 + alpha * KL(t_row || q_row)
/// where p is the batch size the loss is averaged over. Without a target row
/// the clustering term is skipped; with alpha == 0 it is evaluated for the
/// report but left out of the differentiated total.
struct PatchLoss {
  ad::Var total;
  double reconstruction = 0.0;  // |x - x'|^2, not yet divided by p
  double clustering = 0.0;      // KL(t_row || q_row)
};
PatchLoss patch_loss_graph(ad::Tape& tape, const CaeConfig& config,
                           const ParamVars& p, const Tensor& patch,
                           std::size_t batch_size, const Tensor* target_row,
                           double alpha, ad::Mode mode, Rng* rng);

// ---- plain evaluation -----------------------------------------------------------

/// Latent vector [n] for one [s, s, B] patch.
Tensor encode(const CaeParams& params, const Tensor& patch,
              ad::Mode mode = ad::Mode::kInfer, Rng* rng = nullptr);

/// Reconstructed [s, s, B] patch for a latent vector.
Tensor decode(const CaeParams& params, const Tensor& latent);

/// Inference-mode latents of every patch, as rows of an [N, n] matrix.
Tensor encode_all(const CaeParams& params, const PatchBatch& batch);

// ---- losses and the clustering layer -------------------------------------------

/// (1/p) sum_i |x_i - x'_i|^2 over p patches.
double reconstruction_loss(std::span<const Tensor> inputs,
                           std::span<const Tensor> outputs);

/// q_ij = (1 + |z_i - mu_j|^2)^-1 / sum_j' (1 + |z_i - mu_j'|^2)^-1.
/// latents [p, n], centers [J, n]; result [p, J].
Tensor soft_assign(const Tensor& latents, const Tensor& centers);

/// t_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j'), f_j = sum_i q_ij.
Tensor target_distribution(const Tensor& q);

/// sum_ij t_ij log(t_ij / max(q_ij, 1e-12)), with 0 log 0 = 0. Rounding-level
/// negative sums (t equal to q up to a few ulps) are returned as 0.
double clustering_loss(const Tensor& t, const Tensor& q);

/// L_r + alpha * L_c for 0 < alpha < 1.
double total_loss(double reconstruction, double clustering, double alpha = 0.1);

/// k-means centroids of the latents ([N, n]) used as initial centers.
Tensor init_centers(const Tensor& latents, std::size_t clusters, std::uint64_t seed);

}  // namespace hsiseg
