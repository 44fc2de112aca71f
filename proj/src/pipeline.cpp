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

#include "hsiseg/pipeline.hpp"

#include <array>
#include <chrono>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>

#include "hsiseg/clustering.hpp"
#include "hsiseg/error.hpp"
#include "hsiseg/metrics.hpp"
#include "hsiseg/reduction.hpp"

namespace hsiseg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  require(patch_spatial % 2 == 1, ErrorKind::kConfig, "patch_spatial must be odd");
  require(embedding_dim >= 1, ErrorKind::kConfig, "embedding_dim must be >= 1");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::kConfig, "alpha must lie in (0, 1)");
  require(lr > 0.0, ErrorKind::kConfig, "lr must be positive");
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(stage2_epochs <= kMaxStage2Epochs, ErrorKind::kConfig,
          "stage2_epochs must not exceed 25");
  require(epsilon >= 0.0, ErrorKind::kConfig, "epsilon must be >= 0");
  require(reduction == "none" || reduction == "pca" || reduction == "smsi" ||
              reduction == "external",
          ErrorKind::kConfig, "unknown reduction '" + reduction + "'");
  require(method == "cae3d" || method == "kmeans" || method == "gmm", ErrorKind::kConfig,
          "unknown method '" + method + "'");
  require(reduced_dims >= 1, ErrorKind::kConfig, "reduced_dims must be >= 1");
  require(max_stage1_epochs >= 1, ErrorKind::kConfig, "max_stage1_epochs must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must lie in [0, 1)");
  require(clusters >= 1, ErrorKind::kConfig, "clusters must be set (>= 1)");
}

CaeConfig RunConfig::cae_config(std::size_t bands) const {
  CaeConfig c;
  c.patch_spatial = patch_spatial;
  c.bands = bands;
  c.kernels_per_layer = kernels_per_layer;
  c.kernel_spatial = kernel_spatial;
  c.kernel_depth = kernel_depth;
  c.embedding_dim = embedding_dim;
  c.dropout_p = dropout;
  c.clusters = clusters;
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.alpha = alpha;
  t.epsilon = epsilon;
  t.batch_size = batch_size;
  t.max_stage1_epochs = max_stage1_epochs;
  t.stage2_epochs = stage2_epochs;
  return t;
}

RunConfig run_config_from_json(const json& j) {
  require(j.is_object(), ErrorKind::kConfig, "run config must be a JSON object");
  static const std::set<std::string> known = {
      "seed",          "patch_spatial", "embedding_dim",     "clusters",
      "alpha",         "lr",            "batch_size",        "stage2_epochs",
      "epsilon",       "reduction",     "method",            "reduced_dims",
      "kernels_per_layer", "kernel_spatial", "kernel_depth", "dropout",
      "max_stage1_epochs", "normalize"};
  for (const auto& [key, value] : j.items())
    require(known.count(key) > 0, ErrorKind::kConfig, "unknown config key '" + key + "'");
  RunConfig c;
  read_key(j, "seed", c.seed);
  read_key(j, "patch_spatial", c.patch_spatial);
  read_key(j, "embedding_dim", c.embedding_dim);
  read_key(j, "clusters", c.clusters);
  read_key(j, "alpha", c.alpha);
  read_key(j, "lr", c.lr);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "stage2_epochs", c.stage2_epochs);
  read_key(j, "epsilon", c.epsilon);
  read_key(j, "reduction", c.reduction);
  read_key(j, "method", c.method);
  read_key(j, "reduced_dims", c.reduced_dims);
  read_key(j, "kernels_per_layer", c.kernels_per_layer);
  read_key(j, "kernel_spatial", c.kernel_spatial);
  read_key(j, "kernel_depth", c.kernel_depth);
  read_key(j, "dropout", c.dropout);
  read_key(j, "max_stage1_epochs", c.max_stage1_epochs);
  read_key(j, "normalize", c.normalize);
  return c;
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"patch_spatial", c.patch_spatial},
          {"embedding_dim", c.embedding_dim},
          {"clusters", c.clusters},
          {"alpha", c.alpha},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"stage2_epochs", c.stage2_epochs},
          {"epsilon", c.epsilon},
          {"reduction", c.reduction},
          {"method", c.method},
          {"reduced_dims", c.reduced_dims},
          {"kernels_per_layer", c.kernels_per_layer},
          {"kernel_spatial", c.kernel_spatial},
          {"kernel_depth", c.kernel_depth},
          {"dropout", c.dropout},
          {"max_stage1_epochs", c.max_stage1_epochs},
          {"normalize", c.normalize}};
}

json to_json(const CaeConfig& c) {
  return {{"patch_spatial", c.patch_spatial},
          {"bands", c.bands},
          {"kernels_per_layer", c.kernels_per_layer},
          {"kernel_spatial", c.kernel_spatial},
          {"kernel_depth", c.kernel_depth},
          {"embedding_dim", c.embedding_dim},
          {"dropout_p", c.dropout_p},
          {"clusters", c.clusters}};
}

CaeConfig cae_config_from_json(const json& j) {
  CaeConfig c;
  try {
    c.patch_spatial = j.at("patch_spatial").get<std::size_t>();
    c.bands = j.at("bands").get<std::size_t>();
    c.kernels_per_layer = j.at("kernels_per_layer").get<std::size_t>();
    c.kernel_spatial = j.at("kernel_spatial").get<std::size_t>();
    c.kernel_depth = j.at("kernel_depth").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.clusters = j.at("clusters").get<std::size_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad model config: ") + e.what());
  }
  return c;
}

HsiCube prepare_input(const HsiCube& cube, const RunConfig& cfg) {
  HsiCube out = cfg.normalize ? normalize(cube) : cube;
  if (cfg.reduction == "pca") {
    out = pca_reduce(out, cfg.reduced_dims);
  } else if (cfg.reduction == "smsi") {
    out = smsi_reduce(out, cfg.reduced_dims);
  }
  if (cfg.method == "cae3d" && cfg.normalize && cfg.reduction != "none")
    out = normalize(out);
  return out;
}

json report_json(const TrainReport& r) {
  json stage2 = json::array();
  for (const Stage2Epoch& e : r.stage2_losses)
    stage2.push_back({{"reconstruction", e.reconstruction},
                      {"clustering", e.clustering},
                      {"total", e.total}});
  return {{"seed", r.seed},
          {"config", to_json(r.config)},
          {"model", to_json(r.model)},
          {"training_pixels", r.training_pixels},
          {"stage1", {{"epochs", r.stage1_epochs},
                      {"converged", r.stage1_converged},
                      {"losses", r.stage1_losses}}},
          {"stage2", {{"epochs", r.stage2_losses.size()}, {"losses", stage2}}},
          {"metrics", r.metrics ? *r.metrics : json(nullptr)}};
}

json timing_json(const TrainReport& r) {
  return {{"seed", r.seed},
          {"config", to_json(r.config)},
          {"seconds", {{"reduction", r.times.reduction},
                       {"stage1", r.times.stage1},
                       {"init_centers", r.times.init_centers},
                       {"stage2", r.times.stage2},
                       {"inference", r.times.inference},
                       {"total", r.wall_time}}},
          {"time_min", r.wall_time / 60.0}};
}

TrainOutcome run_training(const HsiCube& cube, const RunConfig& cfg) {
  cfg.validate();
  require(cfg.method == "cae3d", ErrorKind::kConfig,
          "training runs the cae3d method; use the baseline command for " + cfg.method);
  Stopwatch clock;
  TrainOutcome out;
  TrainReport& report = out.report;
  report.seed = cfg.seed;
  report.config = cfg;

  auto input = std::make_shared<HsiCube>(prepare_input(cube, cfg));
  report.times.reduction = clock.lap();

  const CaeConfig model_cfg = cfg.cae_config(input->bands);
  model_cfg.validate(true);
  report.model = model_cfg;
  Rng init_rng(cfg.seed);
  out.params = build_cae(model_cfg, init_rng);

  const PatchBatch train_set = extract_patches(input, cfg.patch_spatial);
  require(!train_set.empty(), ErrorKind::kUndefined, "every pixel is background");
  report.training_pixels = train_set.size();
  const TrainConfig tcfg = cfg.train_config();
  TrainingState state(cfg.seed + 1, cfg.lr);

  const Stage1Result s1 = train_stage1(out.params, train_set, tcfg, state);
  report.stage1_losses = s1.losses;
  report.stage1_epochs = s1.losses.size();
  report.stage1_converged = s1.converged;
  report.times.stage1 = clock.lap();

  out.params.set_centers(
      init_centers(encode_all(out.params, train_set), cfg.clusters, cfg.seed + 2));
  report.times.init_centers = clock.lap();

  report.stage2_losses = train_stage2(out.params, train_set, tcfg, state);
  report.times.stage2 = clock.lap();

  out.map = segment(out.params, *input);
  report.times.inference = clock.lap();
  if (input->labels) {
    LabelMap truth;
    truth.width = input->width;
    truth.height = input->height;
    truth.labels = *input->labels;
    report.metrics = evaluate_maps(out.map, truth);
  }
  report.wall_time = report.times.total();
  out.model_input = std::move(*input);
  return out;
}

BaselineOutcome run_baseline(const HsiCube& cube, const RunConfig& cfg) {
  cfg.validate();
  require(cfg.method == "kmeans" || cfg.method == "gmm", ErrorKind::kConfig,
          "baseline method must be kmeans or gmm, got " + cfg.method);
  Stopwatch clock;
  BaselineOutcome out;
  const HsiCube input = prepare_input(cube, cfg);
  out.times.reduction = clock.lap();

  const Tensor all = input.pixel_matrix();
  const std::size_t d = input.bands;
  std::vector<std::size_t> fit_rows;
  for (std::size_t p = 0; p < input.pixels(); ++p)
    if (!input.is_background(p)) fit_rows.push_back(p);
  require(!fit_rows.empty(), ErrorKind::kUndefined, "every pixel is background");
  Tensor fit({fit_rows.size(), d});
  for (std::size_t r = 0; r < fit_rows.size(); ++r)
    std::copy_n(all.data().begin() + static_cast<std::ptrdiff_t>(fit_rows[r] * d), d,
                fit.data().begin() + static_cast<std::ptrdiff_t>(r * d));

  out.map.width = input.width;
  out.map.height = input.height;
  out.map.labels.resize(input.pixels());
  out.map.background.resize(input.pixels());
  for (std::size_t p = 0; p < input.pixels(); ++p)
    out.map.background[p] = input.is_background(p) ? 1 : 0;

  if (cfg.method == "kmeans") {
    KmeansOptions opts;
    opts.seed = cfg.seed;
    const KmeansResult km = kmeans(fit, cfg.clusters, opts);
    for (std::size_t p = 0; p < input.pixels(); ++p)
      out.map.labels[p] = static_cast<Label>(
          nearest_center(km.model.centers, all.data().data() + p * d) + 1);
    out.info = {{"inertia", km.model.inertia}, {"iterations", km.model.iterations}};
  } else {
    GmmOptions opts;
    opts.seed = cfg.seed;
    const GmmResult gm = gmm_em(fit, cfg.clusters, opts);
    const Tensor resp = gmm_responsibilities(gm.model, all);
    for (std::size_t p = 0; p < input.pixels(); ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < cfg.clusters; ++c)
        if (resp.at(p, c) > resp.at(p, best)) best = c;
      out.map.labels[p] = static_cast<Label>(best + 1);
    }
    out.info = {{"iterations", gm.model.iterations},
                {"log_likelihood_trace", gm.model.log_likelihood_trace}};
  }
  out.times.stage1 = clock.lap();
  out.info["method"] = cfg.method;
  out.info["features"] = d;
  out.info["config"] = to_json(cfg);
  return out;
}

json evaluate_maps(const LabelMap& predicted, const LabelMap& truth) {
  require(predicted.width == truth.width && predicted.height == truth.height,
          ErrorKind::kContract, "segmentation and ground truth differ in size");
  require(predicted.labels.size() == truth.labels.size(), ErrorKind::kContract,
          "segmentation and ground truth differ in length");
  const ContingencyTable table =
      contingency_excluding_background(predicted.labels, truth.labels);
  require(table.n > 0, ErrorKind::kUndefined,
          "ground truth has no labelled pixels after removing background");
  const std::size_t masked = truth.labels.size() - table.n;
  const SupervisedScores sup = supervised_scores(majority_vote_table(table));
  json out = {{"nmi", nmi(table)},
              {"n", table.n},
              {"clusters_pred", table.rows()},
              {"clusters_true", table.cols()},
              {"masked_background", masked},
              {"oa", sup.oa},
              {"aa", sup.aa},
              {"kappa", sup.kappa},
              {"supervised_mapping", "majority_vote"}};
  out["ars"] = table.n >= 2 ? json(ars(pair_counts(table))) : json(nullptr);
  return out;
}

// ---- checkpoints --------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'S', 'I', 'S', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::kFormat, "checkpoint is truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const fs::path& path, const CaeParams& params, const RunConfig& run) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string doc = json{{"model", to_json(params.config)}, {"run", to_json(run)}}.dump();
  put<std::uint64_t>(out, doc.size());
  out += doc;
  std::uint32_t count = 0;
  for (const Tensor& t : params.tensors) count += t.empty() ? 0 : 1;
  put<std::uint32_t>(out, count);
  for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s) {
    const Tensor& t = params.tensors[s];
    if (t.empty()) continue;
    const std::string_view name = CaeParams::slot_name(s);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    for (double v : t.data()) put<double>(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::kIo, "short write to " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  Reader r{std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>{})};
  if (r.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    fail(ErrorKind::kFormat, path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    fail(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(version));
  const auto doc_len = r.get<std::uint64_t>();
  json doc;
  try {
    doc = json::parse(r.take(doc_len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.params.config = cae_config_from_json(doc.at("model"));
  ck.run = run_config_from_json(doc.at("run"));
  const auto shapes = parameter_shapes(ck.params.config);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.take(r.get<std::uint32_t>());
    std::size_t slot = CaeParams::kSlotCount;
    for (std::size_t s = 0; s < CaeParams::kSlotCount; ++s)
      if (CaeParams::slot_name(s) == name) slot = s;
    if (slot == CaeParams::kSlotCount)
      fail(ErrorKind::kFormat, "unknown tensor '" + name + "' in checkpoint");
    Shape shape(r.get<std::uint32_t>());
    for (auto& e : shape) e = r.get<std::uint64_t>();
    if (shape != shapes[slot])
      fail(ErrorKind::kFormat, "tensor '" + name + "' has shape " + shape_string(shape) +
                                   ", config implies " + shape_string(shapes[slot]));
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = r.get<double>();
    ck.params.tensors[slot] = Tensor(std::move(shape), std::move(values));
  }
  if (!r.done()) fail(ErrorKind::kFormat, "trailing bytes in checkpoint");
  for (std::size_t s = 0; s < CaeParams::kWeightSlots; ++s)
    if (ck.params.tensors[s].empty())
      fail(ErrorKind::kFormat, "checkpoint lacks tensor '" +
                                   std::string(CaeParams::slot_name(s)) + "'");
  return ck;
}

void write_ppm(const LabelMap& map, const fs::path& path) {
  // Fixed palette: 32 well-separated RGB triples.
  static constexpr std::array<std::array<std::uint8_t, 3>, 32> kPalette = {{
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},
      {245, 130, 48},  {145, 30, 180},  {70, 240, 240},  {240, 50, 230},
      {210, 245, 60},  {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
      {170, 110, 40},  {255, 250, 200}, {128, 0, 0},     {170, 255, 195},
      {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
      {255, 255, 255}, {100, 149, 237}, {178, 34, 34},   {46, 139, 87},
      {218, 165, 32},  {72, 61, 139},   {255, 99, 71},   {32, 178, 170},
      {199, 21, 133},  {154, 205, 50},  {188, 143, 143}, {95, 158, 160}}};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
  f << "P6\n" << map.width << ' ' << map.height << "\n255\n";
  for (Label l : map.labels) {
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
    if (l > 0) rgb = kPalette[(l - 1) % kPalette.size()];
    f.write(reinterpret_cast<const char*>(rgb.data()), 3);
  }
  if (!f) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace hsiseg
