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

#include "hsiseg/cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hsiseg/error.hpp"
#include "hsiseg/rng.hpp"

namespace hsiseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

json read_header(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::kIo, "no such file: " + path.string());
  const std::vector<char> bytes = read_bytes(path);
  try {
    json h = json::parse(bytes.begin(), bytes.end());
    if (!h.is_object()) fail(ErrorKind::kFormat, "header is not a JSON object");
    return h;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, "garbled header " + path.string() + ": " + e.what());
  }
}

template <class T>
T header_field(const json& h, const char* key, const fs::path& path) {
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kFormat,
         std::string("header ") + path.string() + " lacks valid '" + key + "'");
  }
}

template <class U>
U swap_bytes(U v) {
  if constexpr (sizeof(U) == 2) return __builtin_bswap16(v);
  else if constexpr (sizeof(U) == 4) return __builtin_bswap32(v);
  else return __builtin_bswap64(v);
}

template <class T>
T load_le(const char* p, bool big_endian = false) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits;
  std::memcpy(&bits, p, sizeof(U));
  const bool swap = (std::endian::native == std::endian::big) != big_endian;
  if (swap) bits = swap_bytes(bits);
  return std::bit_cast<T>(bits);
}

template <class T>
void store_le(char* p, T value) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = std::bit_cast<U>(value);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  std::memcpy(p, &bits, sizeof(U));
}

fs::path payload_path(const fs::path& header, const json& h,
                      const char* fallback_ext) {
  if (h.contains("data")) {
    const fs::path rel = header_field<std::string>(h, "data", header);
    return rel.is_absolute() ? rel : header.parent_path() / rel;
  }
  fs::path p = header;
  p += fallback_ext;
  return p;
}

}  // namespace

void HsiCube::validate() const {
  require(width > 0 && height > 0 && bands > 0, ErrorKind::kShape,
          "cube dimensions must be positive");
  require(values.size() == width * height * bands, ErrorKind::kShape,
          "cube holds " + std::to_string(values.size()) + " values, expected " +
              std::to_string(width * height * bands));
  if (labels)
    require(labels->size() == width * height, ErrorKind::kShape,
            "label raster length does not match cube");
  for (double v : values)
    require(std::isfinite(v), ErrorKind::kFormat, "cube holds a non-finite value");
}

Tensor HsiCube::pixel_matrix() const {
  const std::size_t n = pixels();
  Tensor m({n, bands});
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t p = 0; p < n; ++p) m.at(p, b) = values[b * n + p];
  return m;
}

HsiCube HsiCube::from_pixel_matrix(const Tensor& matrix, std::size_t width,
                                   std::size_t height) {
  require(matrix.rank() == 2 && matrix.extent(0) == width * height,
          ErrorKind::kShape, "pixel matrix does not match width x height");
  HsiCube cube;
  cube.width = width;
  cube.height = height;
  cube.bands = matrix.extent(1);
  const std::size_t n = width * height;
  cube.values.resize(n * cube.bands);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t b = 0; b < cube.bands; ++b)
      cube.values[b * n + p] = matrix.at(p, b);
  return cube;
}

Label LabelMap::max_label() const {
  Label m = 0;
  for (Label l : labels) m = std::max(m, l);
  return m;
}

HsiCube load_cube(const fs::path& header) {
  const json h = read_header(header);
  HsiCube cube;
  cube.width = header_field<std::size_t>(h, "width", header);
  cube.height = header_field<std::size_t>(h, "height", header);
  cube.bands = header_field<std::size_t>(h, "bands", header);
  if (cube.width == 0 || cube.height == 0 || cube.bands == 0)
    fail(ErrorKind::kFormat, "header " + header.string() + " has a zero dimension");
  if (h.contains("dtype") && h["dtype"] != "f32")
    fail(ErrorKind::kFormat, "unsupported dtype " + h["dtype"].dump());
  if (h.contains("interleave") && h["interleave"] != "bsq")
    fail(ErrorKind::kFormat, "unsupported interleave " + h["interleave"].dump());
  if (h.contains("wavelengths") && !h["wavelengths"].is_null())
    cube.wavelengths = header_field<std::vector<double>>(h, "wavelengths", header);

  const fs::path payload = payload_path(header, h, ".bsq");
  if (!fs::exists(payload))
    fail(ErrorKind::kIo, "payload missing: " + payload.string());
  const std::vector<char> bytes = read_bytes(payload);
  const std::size_t count = cube.width * cube.height * cube.bands;
  if (bytes.size() != count * 4)
    fail(ErrorKind::kSizeMismatch,
         "payload " + payload.string() + " has " + std::to_string(bytes.size()) +
             " bytes, header implies " + std::to_string(count * 4));
  cube.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    cube.values[i] = load_le<float>(bytes.data() + 4 * i);
  cube.validate();
  return cube;
}

void write_cube(const HsiCube& cube, const fs::path& header) {
  cube.validate();
  fs::path payload = header;
  payload.replace_extension(".bsq");
  json h = {{"width", cube.width},   {"height", cube.height},
            {"bands", cube.bands},   {"dtype", "f32"},
            {"interleave", "bsq"},   {"data", payload.filename().string()}};
  if (!cube.wavelengths.empty()) h["wavelengths"] = cube.wavelengths;

  std::vector<char> bytes(cube.values.size() * 4);
  for (std::size_t i = 0; i < cube.values.size(); ++i)
    store_le<float>(bytes.data() + 4 * i, static_cast<float>(cube.values[i]));
  write_bytes(payload, bytes);
  const std::string text = h.dump(2) + "\n";
  write_bytes(header, {text.begin(), text.end()});
}

LabelMap load_labels(const fs::path& header) {
  const json h = read_header(header);
  LabelMap map;
  map.width = header_field<std::size_t>(h, "width", header);
  map.height = header_field<std::size_t>(h, "height", header);
  if (map.width == 0 || map.height == 0)
    fail(ErrorKind::kFormat, "label header " + header.string() + " has a zero dimension");
  const fs::path payload = payload_path(header, h, ".raw");
  if (!fs::exists(payload))
    fail(ErrorKind::kIo, "label payload missing: " + payload.string());
  const std::vector<char> bytes = read_bytes(payload);
  const std::size_t count = map.width * map.height;
  if (bytes.size() != count * 2)
    fail(ErrorKind::kSizeMismatch,
         "label payload " + payload.string() + " has " +
             std::to_string(bytes.size()) + " bytes, expected " +
             std::to_string(count * 2));
  map.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    map.labels[i] = load_le<std::uint16_t>(bytes.data() + 2 * i);
  return map;
}

void write_labels(const LabelMap& map, const fs::path& header) {
  require(map.labels.size() == map.width * map.height, ErrorKind::kShape,
          "label map length does not match its dimensions");
  fs::path payload = header;
  payload.replace_extension(".u16");
  const Label classes = map.max_label();
  require(classes <= std::numeric_limits<std::uint16_t>::max(),
          ErrorKind::kParameter, "labels exceed the 16-bit raster range");
  const json h = {{"width", map.width},
                  {"height", map.height},
                  {"classes", classes},
                  {"dtype", "u16"},
                  {"data", payload.filename().string()}};
  std::vector<char> bytes(map.labels.size() * 2);
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    store_le<std::uint16_t>(bytes.data() + 2 * i,
                            static_cast<std::uint16_t>(map.labels[i]));
  write_bytes(payload, bytes);
  const std::string text = h.dump(2) + "\n";
  write_bytes(header, {text.begin(), text.end()});
}

void attach_labels(HsiCube& cube, const LabelMap& truth) {
  require(truth.width == cube.width && truth.height == cube.height,
          ErrorKind::kShape, "ground truth dimensions do not match the cube");
  cube.labels = truth.labels;
}

HsiCube normalize(const HsiCube& cube) {
  HsiCube out = cube;
  const std::size_t n = cube.pixels();
  for (std::size_t b = 0; b < cube.bands; ++b) {
    auto first = out.values.begin() + static_cast<std::ptrdiff_t>(b * n);
    auto last = first + static_cast<std::ptrdiff_t>(n);
    const auto [lo_it, hi_it] = std::minmax_element(first, last);
    const double lo = *lo_it, range = *hi_it - *lo_it;
    if (range > 0.0) {
      std::transform(first, last, first,
                     [&](double v) { return (v - lo) / range; });
    } else {
      std::fill(first, last, 0.0);
    }
  }
  return out;
}

// ---- patches ----------------------------------------------------------------

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (last == 0) return 0;
  // Repeat until inside; a single bounce suffices whenever the patch radius
  // is below n, which extract_patches enforces.
  while (i < 0 || i > last) {
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
  }
  return static_cast<std::size_t>(i);
}

Tensor patch_at(const HsiCube& cube, std::size_t x, std::size_t y,
                std::size_t spatial) {
  const auto radius = static_cast<std::ptrdiff_t>(spatial / 2);
  const std::size_t plane = cube.pixels();
  Tensor out({spatial, spatial, cube.bands});
  double* dst = out.data().data();
  for (std::size_t r = 0; r < spatial; ++r) {
    const std::size_t sy = reflect_index(
        static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(r) - radius,
        cube.height);
    for (std::size_t c = 0; c < spatial; ++c) {
      const std::size_t sx = reflect_index(
          static_cast<std::ptrdiff_t>(x) + static_cast<std::ptrdiff_t>(c) - radius,
          cube.width);
      const double* src = cube.values.data() + sy * cube.width + sx;
      for (std::size_t b = 0; b < cube.bands; ++b) *dst++ = src[b * plane];
    }
  }
  return out;
}

PatchBatch::PatchBatch(std::shared_ptr<const HsiCube> cube, std::size_t spatial,
                       std::vector<std::pair<std::size_t, std::size_t>> coords)
    : cube_(std::move(cube)), spatial_(spatial), coords_(std::move(coords)) {
  require(cube_ != nullptr, ErrorKind::kContract, "patch batch needs a cube");
}

Tensor PatchBatch::patch(std::size_t i) const {
  const auto& [x, y] = coords_.at(i);
  return patch_at(*cube_, x, y, spatial_);
}

namespace {

PatchBatch collect_patches(std::shared_ptr<const HsiCube> cube,
                           std::size_t spatial, bool skip_background) {
  require(cube != nullptr, ErrorKind::kContract, "null cube");
  require(spatial % 2 == 1, ErrorKind::kParameter,
          "patch size must be odd, got " + std::to_string(spatial));
  require(spatial <= std::min(cube->width, cube->height), ErrorKind::kParameter,
          "patch size " + std::to_string(spatial) + " exceeds the image side");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  coords.reserve(cube->pixels());
  for (std::size_t y = 0; y < cube->height; ++y)
    for (std::size_t x = 0; x < cube->width; ++x)
      if (!skip_background || !cube->is_background(y * cube->width + x))
        coords.emplace_back(x, y);
  return PatchBatch(std::move(cube), spatial, std::move(coords));
}

}  // namespace

PatchBatch extract_patches(std::shared_ptr<const HsiCube> cube,
                           std::size_t spatial) {
  return collect_patches(std::move(cube), spatial, true);
}

PatchBatch all_patches(std::shared_ptr<const HsiCube> cube, std::size_t spatial) {
  return collect_patches(std::move(cube), spatial, false);
}

// ---- synthetic scenes ---------------------------------------------------------

namespace {

std::vector<std::vector<double>> synth_signatures(const SynthParams& p) {
  std::vector<std::vector<double>> sig(p.classes, std::vector<double>(p.bands));
  const double spacing = static_cast<double>(p.bands) / static_cast<double>(p.classes);
  const double width = std::max(1.0, spacing / 2.0);
  for (std::size_t g = 0; g < p.classes; ++g) {
    const double centre = (static_cast<double>(g) + 0.5) * spacing;
    for (std::size_t b = 0; b < p.bands; ++b) {
      const double d = (static_cast<double>(b) - centre) / width;
      sig[g][b] = 0.1 + 0.8 * std::exp(-0.5 * d * d);
    }
  }
  return sig;
}

}  // namespace

double synth_signature_separation(const SynthParams& params) {
  const auto sig = synth_signatures(params);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < sig.size(); ++a)
    for (std::size_t b = a + 1; b < sig.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < params.bands; ++k)
        d2 += (sig[a][k] - sig[b][k]) * (sig[a][k] - sig[b][k]);
      best = std::min(best, std::sqrt(d2));
    }
  return best;
}

HsiCube synth_cube(const SynthParams& p) {
  require(p.width > 0 && p.height > 0 && p.bands > 0, ErrorKind::kParameter,
          "synthetic cube dimensions must be positive");
  require(p.classes >= 1 && p.classes <= p.width, ErrorKind::kParameter,
          "synthetic class count must lie in [1, width]");
  require(p.noise >= 0.0, ErrorKind::kParameter, "noise must be non-negative");
  const auto sig = synth_signatures(p);
  Rng rng(p.seed);
  HsiCube cube;
  cube.width = p.width;
  cube.height = p.height;
  cube.bands = p.bands;
  cube.values.resize(p.width * p.height * p.bands);
  cube.labels = std::vector<Label>(p.width * p.height);
  for (std::size_t b = 0; b < p.bands; ++b)
    cube.wavelengths.push_back(400.0 + 2100.0 * static_cast<double>(b) /
                                           static_cast<double>(p.bands));
  for (std::size_t y = 0; y < p.height; ++y) {
    for (std::size_t x = 0; x < p.width; ++x) {
      const std::size_t g = x * p.classes / p.width;
      (*cube.labels)[y * p.width + x] = static_cast<Label>(g + 1);
      for (std::size_t b = 0; b < p.bands; ++b)
        cube.value(x, y, b) = sig[g][b] + rng.normal(0.0, p.noise);
    }
  }
  return cube;
}

// ---- converters ---------------------------------------------------------------

HsiCube convert_raw(const fs::path& raw, const RawLayout& layout) {
  require(layout.width > 0 && layout.height > 0 && layout.bands > 0,
          ErrorKind::kParameter, "raw layout dimensions must be positive");
  std::size_t item = 0;
  if (layout.dtype == "f32") item = 4;
  else if (layout.dtype == "f64") item = 8;
  else if (layout.dtype == "u16" || layout.dtype == "i16") item = 2;
  else fail(ErrorKind::kParameter, "unknown raw dtype " + layout.dtype);
  require(layout.interleave == "bsq" || layout.interleave == "bil" ||
              layout.interleave == "bip",
          ErrorKind::kParameter, "unknown interleave " + layout.interleave);

  if (!fs::exists(raw)) fail(ErrorKind::kIo, "no such file: " + raw.string());
  const std::vector<char> bytes = read_bytes(raw);
  const std::size_t w = layout.width, h = layout.height, nb = layout.bands;
  const std::size_t expected = layout.header_offset + w * h * nb * item;
  if (bytes.size() != expected)
    fail(ErrorKind::kSizeMismatch,
         "raw file " + raw.string() + " has " + std::to_string(bytes.size()) +
             " bytes, layout implies " + std::to_string(expected));

  auto read = [&](std::size_t index) -> double {
    const char* p = bytes.data() + layout.header_offset + index * item;
    if (layout.dtype == "f32") return load_le<float>(p, layout.big_endian);
    if (layout.dtype == "f64") return load_le<double>(p, layout.big_endian);
    if (layout.dtype == "u16") return load_le<std::uint16_t>(p, layout.big_endian);
    return load_le<std::int16_t>(p, layout.big_endian);
  };

  HsiCube cube;
  cube.width = w;
  cube.height = h;
  cube.bands = nb;
  cube.values.resize(w * h * nb);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t b = 0; b < nb; ++b) {
        std::size_t src = 0;
        if (layout.interleave == "bsq") src = b * w * h + y * w + x;
        else if (layout.interleave == "bil") src = (y * nb + b) * w + x;
        else src = (y * w + x) * nb + b;
        cube.value(x, y, b) = read(src);
      }
  cube.validate();
  return cube;
}

HsiCube convert_csv(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) fail(ErrorKind::kIo, "cannot open " + csv.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail(ErrorKind::kFormat, "non-numeric CSV cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail(ErrorKind::kFormat, "ragged CSV row in " + csv.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty())
    fail(ErrorKind::kFormat, "empty feature matrix " + csv.string());
  Tensor m({rows.size(), rows.front().size()});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
  HsiCube cube = HsiCube::from_pixel_matrix(m, rows.size(), 1);
  cube.validate();
  return cube;
}

}  // namespace hsiseg
