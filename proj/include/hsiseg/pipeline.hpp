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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsiseg/cae.hpp"
#include "hsiseg/cube.hpp"
#include "hsiseg/trainer.hpp"

namespace hsiseg {

/// Everything needed to reproduce one run. Serialized as JSON with the
/// keys named below; absent keys take these defaults and unknown keys are
/// rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t patch_spatial = 5;
  std::size_t embedding_dim = 25;
  std::size_t clusters = 0;
  double alpha = 0.1;
  double lr = 1e-4;
  std::size_t batch_size = 256;
  std::size_t stage2_epochs = 25;
  double epsilon = 1e-6;
  std::string reduction = "none";  // none | pca | smsi | external
  std::string method = "cae3d";    // cae3d | kmeans | gmm
  std::size_t reduced_dims = 25;
  std::size_t kernels_per_layer = 32;
  std::size_t kernel_spatial = 3;
  std::size_t kernel_depth = 9;
  double dropout = 0.5;
  std::size_t max_stage1_epochs = 500;
  bool normalize = true;

  void validate() const;
  CaeConfig cae_config(std::size_t bands) const;
  TrainConfig train_config() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const CaeConfig& cfg);
CaeConfig cae_config_from_json(const nlohmann::json& j);

/// Per-band normalization and the configured reduction, applied in that
/// order. For the autoencoder the reduced cube is normalized again.
HsiCube prepare_input(const HsiCube& cube, const RunConfig& cfg);

struct PhaseTimes {
  double reduction = 0.0;
  double stage1 = 0.0;
  double init_centers = 0.0;
  double stage2 = 0.0;
  double inference = 0.0;
  double total() const { return reduction + stage1 + init_centers + stage2 + inference; }
};

struct TrainReport {
  std::uint64_t seed = 0;
  RunConfig config;
  CaeConfig model;
  std::size_t training_pixels = 0;
  std::size_t stage1_epochs = 0;
  bool stage1_converged = false;
  std::vector<double> stage1_losses;
  std::vector<Stage2Epoch> stage2_losses;
  double wall_time = 0.0;  // seconds
  PhaseTimes times;
  /// evaluate_maps output when the input cube carries ground truth.
  std::optional<nlohmann::json> metrics;
};

/// Deterministic part of the report (everything except timing).
nlohmann::json report_json(const TrainReport& report);
/// Wall-clock breakdown, kept apart so reports stay byte-reproducible.
nlohmann::json timing_json(const TrainReport& report);

struct TrainOutcome {
  CaeParams params;
  TrainReport report;
  HsiCube model_input;  // the cube the model was trained on
  LabelMap map;         // segmentation of model_input by the trained model
};

/// prepare_input -> stage 1 -> k-means center initialization -> stage 2 ->
/// segmentation of the whole scene.
TrainOutcome run_training(const HsiCube& cube, const RunConfig& cfg);

struct BaselineOutcome {
  LabelMap map;
  PhaseTimes times;  // reduction and clustering (reported as stage1)
  nlohmann::json info;
};

/// k-means or GMM over the (optionally reduced) pixels. Models are fitted
/// on non-background pixels and then label every pixel.
BaselineOutcome run_baseline(const HsiCube& cube, const RunConfig& cfg);

/// Background-masked NMI and ARS, plus OA/AA/kappa after mapping every
/// cluster to its majority class.
nlohmann::json evaluate_maps(const LabelMap& predicted, const LabelMap& truth);

// ---- checkpoints ------------------------------------------------------------------

/// Binary archive layout (all integers little-endian):
///   8 bytes  magic "HSISEGCK"
///   u32      format version (1)
///   u64      length L of the JSON document, then L bytes of UTF-8 JSON
///            {"model": CaeConfig, "run": RunConfig}
///   u32      tensor count
///   per tensor: u32 name length, name bytes, u32 rank, u64 extents[rank],
///               f64 values (row-major)
void save_checkpoint(const std::filesystem::path& path, const CaeParams& params,
                     const RunConfig& run);

struct Checkpoint {
  CaeParams params;
  RunConfig run;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Binary PPM (P6) of a label map using a fixed 32-color palette; label 0
/// is black and label l uses palette entry (l - 1) mod 32.
void write_ppm(const LabelMap& map, const std::filesystem::path& path);

}  // namespace hsiseg
