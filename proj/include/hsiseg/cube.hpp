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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hsiseg/tensor.hpp"

namespace hsiseg {

using Label = std::uint32_t;

/// width x height x bands reflectance grid stored band-sequential:
/// value(x, y, b) lives at b * width * height + y * width + x.
struct HsiCube {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  std::vector<double> values;
  /// Per-pixel ground truth, row-major; 0 marks background/unknown.
  std::optional<std::vector<Label>> labels;
  std::vector<double> wavelengths;

  std::size_t pixels() const { return width * height; }
  double value(std::size_t x, std::size_t y, std::size_t b) const {
    return values[b * width * height + y * width + x];
  }
  double& value(std::size_t x, std::size_t y, std::size_t b) {
    return values[b * width * height + y * width + x];
  }
  bool is_background(std::size_t pixel) const {
    return labels && (*labels)[pixel] == 0;
  }

  /// Throws kShape/kFormat when the invariants do not hold.
  void validate() const;

  /// Pixels as rows of an N x bands matrix (row-major pixel order).
  Tensor pixel_matrix() const;
  static HsiCube from_pixel_matrix(const Tensor& matrix, std::size_t width,
                                   std::size_t height);
};

/// Per-pixel label raster (ground truth or a segmentation result).
struct LabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Label> labels;
  /// Set for segmentation output: 1 where the pixel is background in the
  /// source cube. Labels are still assigned there.
  std::vector<std::uint8_t> background;

  Label max_label() const;
};

// ---- .hsic / .gt files --------------------------------------------------

/// Reads a JSON header plus its little-endian f32 band-sequential payload.
HsiCube load_cube(const std::filesystem::path& header);

/// Writes `<header>` and a payload next to it named `<stem>.bsq`.
void write_cube(const HsiCube& cube, const std::filesystem::path& header);

LabelMap load_labels(const std::filesystem::path& header);
void write_labels(const LabelMap& map, const std::filesystem::path& header);

/// Attaches ground truth; dimensions must agree.
void attach_labels(HsiCube& cube, const LabelMap& truth);

// ---- preprocessing --------------------------------------------------------

/// Per-band min-max scaling to [0, 1]; constant bands become all zeros.
HsiCube normalize(const HsiCube& cube);

/// Lazily materialized set of spatial x spatial x bands patches, one per
/// non-background pixel in row-major order. Immutable once built.
class PatchBatch {
 public:
  PatchBatch(std::shared_ptr<const HsiCube> cube, std::size_t spatial,
             std::vector<std::pair<std::size_t, std::size_t>> coords);

  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  std::size_t spatial() const { return spatial_; }
  std::size_t bands() const { return cube_->bands; }
  const HsiCube& cube() const { return *cube_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& coords() const {
    return coords_;
  }

  /// Patch i as a [spatial, spatial, bands] tensor (rows = y, cols = x).
  Tensor patch(std::size_t i) const;

 private:
  std::shared_ptr<const HsiCube> cube_;
  std::size_t spatial_;
  std::vector<std::pair<std::size_t, std::size_t>> coords_;
};

/// Mirror index for out-of-range coordinates: -1 -> 1, n -> n-2.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

/// Patch centred on (x, y) with mirrored borders.
Tensor patch_at(const HsiCube& cube, std::size_t x, std::size_t y,
                std::size_t spatial);

/// One patch per non-background pixel; `spatial` must be odd and no larger
/// than either image side.
PatchBatch extract_patches(std::shared_ptr<const HsiCube> cube,
                           std::size_t spatial = 5);

/// Same as extract_patches, but every pixel including background.
PatchBatch all_patches(std::shared_ptr<const HsiCube> cube,
                       std::size_t spatial = 5);

// ---- synthetic scenes and converters --------------------------------------

struct SynthParams {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t bands = 40;
  std::size_t classes = 3;
  double noise = 0.01;
  std::uint64_t seed = 1;
};

/// Scene of vertical stripes, one per class. Class g has a Gaussian-shaped
/// spectral signature peaking at band (g + 0.5) * bands / classes; pixels
/// add i.i.d. N(0, noise^2) per band. Labels are attached (1..classes).
HsiCube synth_cube(const SynthParams& params);

/// Minimum pairwise Euclidean distance between the class signatures used by
/// synth_cube.
double synth_signature_separation(const SynthParams& params);

struct RawLayout {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t bands = 0;
  std::string interleave = "bsq";  // bsq | bil | bip
  std::string dtype = "f32";       // f32 | f64 | u16 | i16
  bool big_endian = false;
  std::size_t header_offset = 0;
};

/// Decodes a raw binary raster (e.g. an ENVI payload) into a cube.
HsiCube convert_raw(const std::filesystem::path& raw, const RawLayout& layout);

/// Reads a comma-separated N x d feature matrix as a cube of width N,
/// height 1 and d bands.
HsiCube convert_csv(const std::filesystem::path& csv);

}  // namespace hsiseg
