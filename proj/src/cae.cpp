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

#include "hsiseg/cae.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hsiseg/clustering.hpp"
#include "hsiseg/error.hpp"

namespace hsiseg {

void CaeConfig::validate(bool need_clusters) const {
  require(kernels_per_layer >= 1, ErrorKind::kConfig, "need at least one kernel per layer");
  require(embedding_dim >= 1, ErrorKind::kConfig, "embedding dimension must be >= 1");
  require(kernel_spatial >= 1 && kernel_depth >= 1, ErrorKind::kConfig,
          "kernel extents must be >= 1");
  require(2 * (kernel_spatial - 1) + 1 == patch_spatial, ErrorKind::kConfig,
          "two valid " + std::to_string(kernel_spatial) + "x" +
              std::to_string(kernel_spatial) + " convolutions do not collapse a " +
              std::to_string(patch_spatial) + "x" + std::to_string(patch_spatial) +
              " patch to its central pixel");
  require(bands + 2 >= 2 * kernel_depth + 1, ErrorKind::kConfig,
          "kernel depth " + std::to_string(kernel_depth) + " leaves no spectral extent for " +
              std::to_string(bands) + " bands (need bands - 2*(depth-1) >= 1)");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::kConfig,
          "dropout probability must lie in [0, 1)");
  if (need_clusters)
    require(clusters >= 2, ErrorKind::kConfig, "clustering needs at least two clusters");
}

std::string_view CaeParams::slot_name(std::size_t slot) {
  static constexpr std::array<std::string_view, kSlotCount> names = {
      "enc_conv1.kernels", "enc_conv1.bias", "enc_conv2.kernels", "enc_conv2.bias",
      "enc_dense.weights", "enc_dense.bias", "dec_dense.weights", "dec_dense.bias",
      "dec_conv1.kernels", "dec_conv1.bias", "dec_conv2.kernels", "dec_conv2.bias",
      "centers"};
  return names.at(slot);
}

void CaeParams::set_centers(Tensor centers) {
  require(centers.rank() == 2 && centers.extent(1) == config.embedding_dim,
          ErrorKind::kShape,
          "centers must be [J, " + std::to_string(config.embedding_dim) + "], got " +
              shape_string(centers.shape()));
  require(config.clusters == 0 || centers.extent(0) == config.clusters,
          ErrorKind::kShape, "center count does not match the configured clusters");
  require(centers.all_finite(), ErrorKind::kNumerical, "centers must be finite");
  config.clusters = centers.extent(0);
  tensors[kCenters] = std::move(centers);
}

std::array<Tensor, CaeParams::kSlotCount> CaeParams::zeros_like() const {
  std::array<Tensor, kSlotCount> out;
  for (std::size_t s = 0; s < kSlotCount; ++s)
    if (!tensors[s].empty()) out[s] = Tensor(tensors[s].shape());
  return out;
}

std::array<Shape, CaeParams::kSlotCount> parameter_shapes(const CaeConfig& c) {
  const std::size_t k = c.kernels_per_layer, s = c.kernel_spatial, d = c.kernel_depth;
  const std::size_t flat = c.flatten_size(), n = c.embedding_dim;
  return {Shape{k, 1, s, s, d}, Shape{k},       Shape{k, k, s, s, d}, Shape{k},
          Shape{n, flat},       Shape{n},       Shape{flat, n},       Shape{flat},
          Shape{k, k, s, s, d}, Shape{k},       Shape{k, 1, s, s, d}, Shape{1},
          Shape{c.clusters, n}};
}

CaeParams build_cae(const CaeConfig& config, Rng& rng) {
  config.validate();
  const auto shapes = parameter_shapes(config);
  const std::size_t k = config.kernels_per_layer;
  const std::size_t window = config.kernel_spatial * config.kernel_spatial * config.kernel_depth;
  const std::array<std::size_t, CaeParams::kWeightSlots / 2> fan_in = {
      window, k * window, config.flatten_size(), config.embedding_dim, k * window, k * window};

  CaeParams params;
  params.config = config;
  for (std::size_t layer = 0; layer < fan_in.size(); ++layer) {
    Tensor w(shapes[2 * layer]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in[layer]));
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
    params.tensors[2 * layer] = std::move(w);
    params.tensors[2 * layer + 1] = Tensor(shapes[2 * layer + 1]);
  }
  return params;
}

ParamVars bind_parameters(ad::Tape& tape, const CaeParams& params,
                          std::array<Tensor, CaeParams::kSlotCount>& grads) {
  ParamVars vars;
  for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s) {
    if (params.tensors[s].empty()) continue;
    vars[s] = tape.parameter(params.tensors[s], grads[s]);
  }
  return vars;
}

ParamVars bind_constants(ad::Tape& tape, const CaeParams& params) {
  ParamVars vars;
  for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s) {
    if (params.tensors[s].empty()) continue;
    vars[s] = tape.borrowed(params.tensors[s]);
  }
  return vars;
}

ad::Var encode_graph(ad::Tape& tape, const CaeConfig& config, const ParamVars& p,
                     ad::Var patch, ad::Mode mode, Rng* rng) {
  using P = CaeParams;
  const Shape expected{config.patch_spatial, config.patch_spatial, config.bands};
  require(tape.value(patch).shape() == expected, ErrorKind::kShape,
          "patch has shape " + shape_string(tape.value(patch).shape()) + ", model expects " +
              shape_string(expected));
  ad::Var h = ad::conv3d_valid(tape, patch, p[P::kEncConv1W], p[P::kEncConv1B]);
  h = ad::dropout(tape, h, config.dropout_p, mode, rng);
  h = ad::conv3d_valid(tape, h, p[P::kEncConv2W], p[P::kEncConv2B]);
  h = ad::reshape(tape, h, {config.flatten_size()});
  return ad::dense(tape, h, p[P::kEncDenseW], p[P::kEncDenseB]);
}

ad::Var decode_graph(ad::Tape& tape, const CaeConfig& config, const ParamVars& p,
                     ad::Var latent) {
  using P = CaeParams;
  require(tape.value(latent).size() == config.embedding_dim, ErrorKind::kShape,
          "latent has " + std::to_string(tape.value(latent).size()) + " values, model expects " +
              std::to_string(config.embedding_dim));
  ad::Var h = ad::dense(tape, latent, p[P::kDecDenseW], p[P::kDecDenseB]);
  h = ad::reshape(tape, h, {config.kernels_per_layer, 1, 1, config.latent_depth()});
  h = ad::conv3d_transpose(tape, h, p[P::kDecConv1W], p[P::kDecConv1B]);
  h = ad::conv3d_transpose(tape, h, p[P::kDecConv2W], p[P::kDecConv2B]);
  return ad::reshape(tape, h, {config.patch_spatial, config.patch_spatial, config.bands});
}

PatchLoss patch_loss_graph(ad::Tape& tape, const CaeConfig& config, const ParamVars& p,
                           const Tensor& patch, std::size_t batch_size,
                           const Tensor* target_row, double alpha, ad::Mode mode,
                           Rng* rng) {
  require(batch_size >= 1, ErrorKind::kContract, "batch size must be >= 1");
  const ad::Var x = tape.constant(patch);
  const ad::Var z = encode_graph(tape, config, p, x, mode, rng);
  const ad::Var recon = decode_graph(tape, config, p, z);
  const ad::Var se = ad::squared_error(tape, recon, patch);

  PatchLoss out;
  out.reconstruction = tape.value(se)[0];
  out.total = ad::scale(tape, se, 1.0 / static_cast<double>(batch_size));
  if (target_row != nullptr) {
    const ad::Var q = ad::soft_assign(tape, z, p[CaeParams::kCenters]);
    const ad::Var kl = ad::kl_divergence(tape, *target_row, q);
    out.clustering = tape.value(kl)[0];
    if (alpha != 0.0) out.total = ad::add(tape, out.total, ad::scale(tape, kl, alpha));
  }
  return out;
}

Tensor encode(const CaeParams& params, const Tensor& patch, ad::Mode mode, Rng* rng) {
  ad::Tape tape;
  const ParamVars p = bind_constants(tape, params);
  const ad::Var z = encode_graph(tape, params.config, p, tape.borrowed(patch), mode, rng);
  return tape.value(z);
}

Tensor decode(const CaeParams& params, const Tensor& latent) {
  ad::Tape tape;
  const ParamVars p = bind_constants(tape, params);
  const ad::Var x = decode_graph(tape, params.config, p, tape.borrowed(latent));
  return tape.value(x);
}

Tensor encode_all(const CaeParams& params, const PatchBatch& batch) {
  const std::size_t n = params.config.embedding_dim;
  Tensor latents({batch.size(), n});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor z = encode(params, batch.patch(i));
    std::copy(z.data().begin(), z.data().end(), latents.data().begin() + i * n);
  }
  return latents;
}

double reconstruction_loss(std::span<const Tensor> inputs, std::span<const Tensor> outputs) {
  require(inputs.size() == outputs.size(), ErrorKind::kContract,
          "reconstruction loss needs equal patch counts, got " +
              std::to_string(inputs.size()) + " and " + std::to_string(outputs.size()));
  require(!inputs.empty(), ErrorKind::kContract, "reconstruction loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require(inputs[i].shape() == outputs[i].shape(), ErrorKind::kShape,
            "patch shapes differ in reconstruction loss");
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double d = inputs[i][j] - outputs[i][j];
      total += d * d;
    }
  }
  return total / static_cast<double>(inputs.size());
}

Tensor soft_assign(const Tensor& latents, const Tensor& centers) {
  require(!centers.empty(), ErrorKind::kState, "cluster centers are not initialized");
  require(centers.rank() == 2 && centers.extent(0) >= 1, ErrorKind::kShape,
          "centers must be a non-empty [J, n] matrix");
  ad::Tape tape;
  const ad::Var q =
      ad::soft_assign(tape, tape.borrowed(latents), tape.borrowed(centers));
  return tape.value(q);
}

Tensor target_distribution(const Tensor& q) {
  require(q.rank() == 2, ErrorKind::kShape, "q must be a [p, J] matrix");
  const std::size_t rows = q.extent(0), clusters = q.extent(1);
  std::vector<double> freq(clusters, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < clusters; ++j) freq[j] += q.at(i, j);
  for (std::size_t j = 0; j < clusters; ++j)
    require(freq[j] > 0.0, ErrorKind::kDegenerate,
            "cluster " + std::to_string(j) + " has zero total assignment");
  Tensor t({rows, clusters});
  for (std::size_t i = 0; i < rows; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < clusters; ++j) {
      t.at(i, j) = q.at(i, j) * q.at(i, j) / freq[j];
      norm += t.at(i, j);
    }
    for (std::size_t j = 0; j < clusters; ++j) t.at(i, j) /= norm;
  }
  return t;
}

double clustering_loss(const Tensor& t, const Tensor& q) {
  require(t.size() == q.size(), ErrorKind::kShape, "t and q differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] > 0.0) s += t[i] * std::log(t[i] / std::max(q[i], ad::kAssignmentFloor));
  // For row distributions the divergence is non-negative; when t and q agree
  // to rounding the sum can land a few ulps below zero, which is clamped.
  return std::max(s, 0.0);
}

double total_loss(double reconstruction, double clustering, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::kParameter,
          "loss weight alpha must lie in (0, 1), got " + std::to_string(alpha));
  return reconstruction + alpha * clustering;
}

Tensor init_centers(const Tensor& latents, std::size_t clusters, std::uint64_t seed) {
  require(latents.rank() == 2, ErrorKind::kShape, "latents must be an [N, n] matrix");
  require(clusters >= 1, ErrorKind::kParameter, "need at least one cluster");
  const std::size_t n = latents.extent(0), d = latents.extent(1);
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < n && distinct.size() < clusters; ++i)
    distinct.emplace(latents.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                     latents.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  require(distinct.size() >= clusters, ErrorKind::kDegenerate,
          "need " + std::to_string(clusters) + " distinct latents to seed the centers, found " +
              std::to_string(distinct.size()));
  KmeansOptions opts;
  opts.seed = seed;
  return kmeans(latents, clusters, opts).model.centers;
}

}  // namespace hsiseg
