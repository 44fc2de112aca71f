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

// Command-line front end. Every operation goes through the public C API.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hsiseg/hsiseg.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Carries a status out of nested helpers to main().
struct Failure {
  hsiseg_status status;
  std::string message;
};

void check(hsiseg_status status) {
  if (status != HSISEG_OK)
    throw Failure{status, std::string("[") + hsiseg_last_error_kind() + "] " +
                              hsiseg_last_error()};
}

// Owning wrappers around the C handles.
template <class T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr_); }
  T** out() { return &ptr_; }
  T* get() const { return ptr_; }

 private:
  T* ptr_ = nullptr;
};
using Cube = Handle<hsiseg_cube, hsiseg_cube_free>;
using Model = Handle<hsiseg_model, hsiseg_model_free>;
using Map = Handle<hsiseg_map, hsiseg_map_free>;

class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { hsiseg_string_free(ptr_); }
  char** out() { return &ptr_; }
  std::string str() const { return ptr_ ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Failure{HSISEG_ERR_IO, "[io] cannot read " + path};
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
  if (!f) throw Failure{HSISEG_ERR_IO, "[io] cannot write " + path.string()};
}

json parse_config(const std::string& text, const std::string& origin) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw Failure{HSISEG_ERR_CONTRACT, "[config] " + origin + " must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw Failure{HSISEG_ERR_CONTRACT, "[config] " + origin + ": " + e.what()};
  }
}

void load_cube(const std::string& path, Cube& cube) { check(hsiseg_cube_load(path.c_str(), cube.out())); }

void attach_truth(Cube& cube, const std::string& truth_path) {
  if (truth_path.empty()) return;
  Map truth;
  check(hsiseg_map_load(truth_path.c_str(), truth.out()));
  check(hsiseg_cube_attach_truth(cube.get(), truth.get()));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Options shared by the commands that accept a run configuration: a JSON
// file plus long-form overrides.
struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> clusters;
  std::optional<double> alpha;
  std::optional<std::string> reduction;
  std::optional<std::size_t> dims;

  void add_to(CLI::App* cmd, bool with_alpha) {
    cmd->add_option("--config", config_path, "Run configuration (JSON)");
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--clusters", clusters, "Number of clusters J");
    if (with_alpha) cmd->add_option("--alpha", alpha, "Clustering loss weight, in (0, 1)");
    cmd->add_option("--reduction", reduction, "none | pca | smsi | external");
    cmd->add_option("--dims", dims, "Target feature count for pca / smsi");
  }

  json resolve() const {
    json j = config_path.empty() ? json::object()
                                 : parse_config(read_text(config_path), config_path);
    if (seed) j["seed"] = *seed;
    if (clusters) j["clusters"] = *clusters;
    if (alpha) j["alpha"] = *alpha;
    if (reduction) j["reduction"] = *reduction;
    if (dims) j["reduced_dims"] = *dims;
    return j;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised hyperspectral segmentation with a 3D convolutional autoencoder"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hsiseg_version());

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic striped cube with labels");
  json synth_params = json::object();
  std::size_t s_width = 32, s_height = 32, s_bands = 40, s_classes = 3;
  double s_noise = 0.01;
  std::uint64_t s_seed = 1;
  std::string s_out, s_truth;
  synth->add_option("--out", s_out, "Cube header to write (.hsic)")->required();
  synth->add_option("--truth", s_truth, "Ground truth to write (default <stem>.gt)");
  synth->add_option("--width", s_width)->capture_default_str();
  synth->add_option("--height", s_height)->capture_default_str();
  synth->add_option("--bands", s_bands)->capture_default_str();
  synth->add_option("--classes", s_classes)->capture_default_str();
  synth->add_option("--noise", s_noise, "Per-band noise sigma")->capture_default_str();
  synth->add_option("--seed", s_seed)->capture_default_str();

  // convert
  auto* convert = app.add_subcommand("convert", "Convert a raw raster or CSV matrix to a cube");
  std::string c_raw, c_csv, c_out, c_interleave = "bsq", c_dtype = "f32";
  std::size_t c_width = 0, c_height = 0, c_bands = 0, c_offset = 0;
  bool c_big_endian = false;
  auto* raw_opt = convert->add_option("--raw", c_raw, "Raw binary raster");
  auto* csv_opt = convert->add_option("--csv", c_csv, "N x d comma-separated features");
  raw_opt->excludes(csv_opt);
  convert->add_option("--out", c_out, "Cube header to write (.hsic)")->required();
  convert->add_option("--width", c_width);
  convert->add_option("--height", c_height);
  convert->add_option("--bands", c_bands);
  convert->add_option("--interleave", c_interleave, "bsq | bil | bip")->capture_default_str();
  convert->add_option("--dtype", c_dtype, "f32 | f64 | u16 | i16")->capture_default_str();
  convert->add_option("--header-offset", c_offset, "Bytes to skip")->capture_default_str();
  convert->add_flag("--big-endian", c_big_endian);

  // reduce
  auto* reduce = app.add_subcommand("reduce", "Normalize and reduce a cube (pca | smsi)");
  std::string r_cube, r_out;
  RunOptions r_opts;
  reduce->add_option("--cube", r_cube, "Input cube header")->required();
  reduce->add_option("--out", r_out, "Reduced cube header to write")->required();
  r_opts.add_to(reduce, false);

  // train
  auto* train = app.add_subcommand("train", "Two-stage autoencoder training");
  std::string t_cube, t_truth, t_out;
  RunOptions t_opts;
  train->add_option("--cube", t_cube, "Input cube header")->required();
  train->add_option("--truth", t_truth, "Ground truth; background pixels are not trained on");
  train->add_option("--out", t_out, "Output directory")->required();
  t_opts.add_to(train, true);

  // segment
  auto* seg = app.add_subcommand("segment", "Label every pixel with a trained model");
  std::string g_model, g_cube, g_out, g_ppm;
  seg->add_option("--model", g_model, "Checkpoint from train")->required();
  seg->add_option("--cube", g_cube, "Input cube header")->required();
  seg->add_option("--out", g_out, "Label raster to write (.gt)")->required();
  seg->add_option("--ppm", g_ppm, "Also write a color PPM");

  // baseline
  auto* base = app.add_subcommand("baseline", "k-means or GMM clustering of pixels");
  std::string b_method, b_cube, b_truth, b_out, b_report, b_timing, b_ppm;
  RunOptions b_opts;
  base->add_option("--method", b_method, "kmeans | gmm")
      ->required()
      ->check(CLI::IsMember({"kmeans", "gmm"}));
  base->add_option("--cube", b_cube, "Input cube header")->required();
  base->add_option("--truth", b_truth, "Ground truth for fitting mask and metrics");
  base->add_option("--out", b_out, "Label raster to write (.gt)")->required();
  base->add_option("--report", b_report, "Metrics/config JSON (default <out stem>.json)");
  base->add_option("--timing", b_timing, "Timing JSON (default <out stem>.timing.json)");
  base->add_option("--ppm", b_ppm, "Also write a color PPM");
  b_opts.add_to(base, false);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Compare a label raster with ground truth");
  std::string e_map, e_truth, e_out;
  eval->add_option("--map", e_map, "Predicted label raster")->required();
  eval->add_option("--truth", e_truth, "Ground-truth raster")->required();
  eval->add_option("--out", e_out, "Write metrics here as well as to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : HSISEG_ERR_CONTRACT;
  }

  try {
    if (*synth) {
      synth_params = {{"width", s_width}, {"height", s_height}, {"bands", s_bands},
                      {"classes", s_classes}, {"noise", s_noise}, {"seed", s_seed}};
      Cube cube;
      check(hsiseg_synth(synth_params.dump().c_str(), cube.out()));
      check(hsiseg_cube_save(cube.get(), s_out.c_str()));
      const fs::path truth_path =
          s_truth.empty() ? fs::path(s_out).replace_extension(".gt") : fs::path(s_truth);
      Map truth;
      check(hsiseg_cube_truth(cube.get(), truth.out()));
      check(hsiseg_map_save(truth.get(), truth_path.c_str()));
    } else if (*convert) {
      Cube cube;
      if (!c_csv.empty()) {
        check(hsiseg_convert_csv(c_csv.c_str(), cube.out()));
      } else if (!c_raw.empty()) {
        const json layout = {{"width", c_width},           {"height", c_height},
                             {"bands", c_bands},           {"interleave", c_interleave},
                             {"dtype", c_dtype},           {"big_endian", c_big_endian},
                             {"header_offset", c_offset}};
        check(hsiseg_convert_raw(c_raw.c_str(), layout.dump().c_str(), cube.out()));
      } else {
        throw Failure{HSISEG_ERR_CONTRACT, "[contract] convert needs --raw or --csv"};
      }
      check(hsiseg_cube_save(cube.get(), c_out.c_str()));
    } else if (*reduce) {
      json cfg = r_opts.resolve();
      if (!cfg.contains("clusters")) cfg["clusters"] = 1;  // unused by reduction
      Cube cube, reduced;
      load_cube(r_cube, cube);
      check(hsiseg_reduce(cube.get(), cfg.dump().c_str(), reduced.out()));
      check(hsiseg_cube_save(reduced.get(), r_out.c_str()));
    } else if (*train) {
      const json cfg = t_opts.resolve();
      Cube cube;
      load_cube(t_cube, cube);
      attach_truth(cube, t_truth);
      Model model;
      Map map;
      OwnedString report, timing;
      check(hsiseg_train(cube.get(), cfg.dump().c_str(), model.out(), map.out(), report.out(),
                         timing.out()));
      std::error_code ec;
      fs::create_directories(t_out, ec);
      if (ec) throw Failure{HSISEG_ERR_IO, "[io] cannot create " + t_out + ": " + ec.message()};
      const fs::path dir(t_out);
      check(hsiseg_model_save(model.get(), (dir / "model.ckpt").c_str()));
      write_text(dir / "report.json", report.str());
      write_text(dir / "timing.json", timing.str());
      check(hsiseg_map_save(map.get(), (dir / "segmentation.gt").c_str()));
    } else if (*seg) {
      Model model;
      Cube cube;
      check(hsiseg_model_load(g_model.c_str(), model.out()));
      load_cube(g_cube, cube);
      const auto start = std::chrono::steady_clock::now();
      Map map;
      check(hsiseg_segment(model.get(), cube.get(), map.out()));
      const double elapsed = seconds_since(start);
      check(hsiseg_map_save(map.get(), g_out.c_str()));
      if (!g_ppm.empty()) check(hsiseg_map_write_ppm(map.get(), g_ppm.c_str()));
      std::cerr << "segmented in " << elapsed << " s\n";
    } else if (*base) {
      json cfg = b_opts.resolve();
      cfg["method"] = b_method;
      Cube cube;
      load_cube(b_cube, cube);
      attach_truth(cube, b_truth);
      Map map;
      OwnedString info, timing;
      check(hsiseg_baseline(cube.get(), cfg.dump().c_str(), map.out(), info.out(),
                            timing.out()));
      check(hsiseg_map_save(map.get(), b_out.c_str()));
      if (!b_ppm.empty()) check(hsiseg_map_write_ppm(map.get(), b_ppm.c_str()));
      json report = json::parse(info.str());
      if (!b_truth.empty()) {
        Map truth;
        OwnedString metrics;
        check(hsiseg_map_load(b_truth.c_str(), truth.out()));
        check(hsiseg_evaluate(map.get(), truth.get(), metrics.out()));
        report["metrics"] = json::parse(metrics.str());
      }
      const fs::path out(b_out);
      write_text(b_report.empty() ? fs::path(out).replace_extension(".json") : fs::path(b_report),
                 report.dump(2) + "\n");
      write_text(b_timing.empty() ? fs::path(out).replace_extension(".timing.json")
                                  : fs::path(b_timing),
                 timing.str());
    } else if (*eval) {
      Map map, truth;
      check(hsiseg_map_load(e_map.c_str(), map.out()));
      check(hsiseg_map_load(e_truth.c_str(), truth.out()));
      OwnedString metrics;
      check(hsiseg_evaluate(map.get(), truth.get(), metrics.out()));
      std::cout << metrics.str();
      if (!e_out.empty()) write_text(e_out, metrics.str());
    }
  } catch (const Failure& f) {
    std::cerr << "hsiseg: error " << f.message << "\n";
    return static_cast<int>(f.status);
  }
  return 0;
}
