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

#include "hsiseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "hsiseg/error.hpp"

namespace hsiseg {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state) {
  require(params.size() == grads.size(), ErrorKind::kContract,
          "adam_step needs one gradient per parameter");
  if (state.m.size() < params.size()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(state.beta1, t);
  const double correct2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor* p = params[i];
    const Tensor* g = grads[i];
    if (p == nullptr || p->empty()) continue;
    require(g != nullptr && g->shape() == p->shape(), ErrorKind::kContract,
            "gradient shape does not match parameter " + std::to_string(i));
    if (state.m[i].empty()) {
      state.m[i] = Tensor(p->shape());
      state.v[i] = Tensor(p->shape());
    }
    require(state.m[i].shape() == p->shape(), ErrorKind::kContract,
            "optimizer moments do not match parameter " + std::to_string(i));
    double* pv = p->data().data();
    const double* gv = g->data().data();
    double* m = state.m[i].data().data();
    double* v = state.v[i].data().data();
    for (std::size_t j = 0; j < p->size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gv[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gv[j] * gv[j];
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      pv[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
    }
  }
}

void adam_step(CaeParams& params, const std::array<Tensor, CaeParams::kSlotCount>& grads,
               AdamState& state) {
  std::array<Tensor*, CaeParams::kSlotCount> p{};
  std::array<const Tensor*, CaeParams::kSlotCount> g{};
  for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s) {
    if (params.tensors[s].empty()) continue;
    p[s] = &params.tensors[s];
    g[s] = &grads[s];
  }
  adam_step(p, g, state);
}

namespace {

void check_config(const TrainConfig& cfg) {
  require(cfg.batch_size >= 1, ErrorKind::kConfig, "batch size must be >= 1");
  require(cfg.epsilon >= 0.0, ErrorKind::kConfig, "epsilon must be >= 0");
  require(cfg.max_stage1_epochs >= 1, ErrorKind::kConfig, "stage-1 epoch cap must be >= 1");
  require(cfg.stage2_epochs <= kMaxStage2Epochs, ErrorKind::kConfig,
          "the clustering stage is limited to 25 epochs");
  require(cfg.alpha >= 0.0 && cfg.alpha < 1.0, ErrorKind::kConfig,
          "alpha must lie in (0, 1) (0 only as a diagnostic)");
}

struct EpochTotals {
  double reconstruction = 0.0;
  double clustering = 0.0;
  std::size_t batches = 0;
};

// One pass over `data` in a freshly shuffled order. `targets` (rows of the
// target distribution, indexed like `data`) enables the clustering term.
EpochTotals run_epoch(CaeParams& params, const PatchBatch& data, const TrainConfig& cfg,
                      const Tensor* targets, TrainingState& state) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  state.rng.shuffle(order);

  const std::size_t clusters = targets ? targets->extent(1) : 0;
  Tensor target_row({1, std::max<std::size_t>(clusters, 1)});
  EpochTotals totals;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    const std::size_t p = stop - start;
    auto grads = params.zeros_like();
    double batch_rec = 0.0, batch_clu = 0.0;
    for (std::size_t b = start; b < stop; ++b) {
      const std::size_t idx = order[b];
      ad::Tape tape;
      const ParamVars vars = bind_parameters(tape, params, grads);
      if (targets)
        std::copy_n(targets->data().begin() + static_cast<std::ptrdiff_t>(idx * clusters),
                    clusters, target_row.data().begin());
      const PatchLoss loss =
          patch_loss_graph(tape, params.config, vars, data.patch(idx), p,
                           targets ? &target_row : nullptr, cfg.alpha, ad::Mode::kTrain,
                           &state.rng);
      tape.backward(loss.total);
      batch_rec += loss.reconstruction;
      batch_clu += loss.clustering;
    }
    for (const Tensor& g : grads)
      if (!g.all_finite())
        fail(ErrorKind::kNumerical, "non-finite gradient during training");
    adam_step(params, grads, state.adam);
    totals.reconstruction += batch_rec / static_cast<double>(p);
    totals.clustering += batch_clu;
    ++totals.batches;
  }
  return totals;
}

}  // namespace

Stage1Result train_stage1(CaeParams& params, const PatchBatch& data, const TrainConfig& cfg,
                          TrainingState& state) {
  check_config(cfg);
  require(!data.empty(), ErrorKind::kContract, "stage 1 needs at least one patch");
  Stage1Result result;
  for (std::size_t epoch = 0; epoch < cfg.max_stage1_epochs; ++epoch) {
    const EpochTotals totals = run_epoch(params, data, cfg, nullptr, state);
    const double loss = totals.reconstruction / static_cast<double>(totals.batches);
    if (!std::isfinite(loss)) fail(ErrorKind::kNumerical, "stage-1 loss is not finite");
    result.losses.push_back(loss);
    const std::size_t n = result.losses.size();
    if (n >= 2 && std::abs(result.losses[n - 1] - result.losses[n - 2]) < cfg.epsilon) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<Stage2Epoch> train_stage2(CaeParams& params, const PatchBatch& data,
                                      const TrainConfig& cfg, TrainingState& state) {
  check_config(cfg);
  require(params.has_centers(), ErrorKind::kState,
          "stage 2 needs initialized cluster centers");
  require(!data.empty(), ErrorKind::kContract, "stage 2 needs at least one patch");
  std::vector<Stage2Epoch> epochs;
  for (std::size_t epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
    const Tensor q = soft_assign(encode_all(params, data), params.centers());
    const Tensor t = target_distribution(q);
    const EpochTotals totals = run_epoch(params, data, cfg, &t, state);
    Stage2Epoch e;
    e.reconstruction = totals.reconstruction / static_cast<double>(totals.batches);
    e.clustering = totals.clustering / static_cast<double>(totals.batches);
    e.total = e.reconstruction + cfg.alpha * e.clustering;
    if (!std::isfinite(e.total)) fail(ErrorKind::kNumerical, "stage-2 loss is not finite");
    epochs.push_back(e);
  }
  return epochs;
}

LabelMap segment(const CaeParams& params, const HsiCube& cube) {
  require(params.has_centers(), ErrorKind::kState,
          "segmentation needs a trained model with cluster centers");
  require(cube.bands == params.config.bands, ErrorKind::kConfig,
          "cube has " + std::to_string(cube.bands) + " bands, model expects " +
              std::to_string(params.config.bands));
  LabelMap map;
  map.width = cube.width;
  map.height = cube.height;
  map.labels.resize(cube.pixels());
  map.background.resize(cube.pixels());
  const std::size_t clusters = params.centers().extent(0);
  for (std::size_t y = 0; y < cube.height; ++y) {
    for (std::size_t x = 0; x < cube.width; ++x) {
      const std::size_t pixel = y * cube.width + x;
      const Tensor z = encode(params, patch_at(cube, x, y, params.config.patch_spatial));
      const Tensor q = soft_assign(z.reshaped({1, z.size()}), params.centers());
      std::size_t best = 0;
      for (std::size_t j = 1; j < clusters; ++j)
        if (q[j] > q[best]) best = j;
      map.labels[pixel] = static_cast<Label>(best + 1);
      map.background[pixel] = cube.is_background(pixel) ? 1 : 0;
    }
  }
  return map;
}

}  // namespace hsiseg
