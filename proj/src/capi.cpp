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

#include "hsiseg/hsiseg.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "hsiseg/cube.hpp"
#include "hsiseg/error.hpp"
#include "hsiseg/pipeline.hpp"
#include "hsiseg/trainer.hpp"

struct hsiseg_cube {
  hsiseg::HsiCube cube;
};

struct hsiseg_model {
  hsiseg::CaeParams params;
  hsiseg::RunConfig run;
};

struct hsiseg_map {
  hsiseg::LabelMap map;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;
thread_local std::string g_last_kind;

hsiseg_status record(hsiseg_status status, std::string kind, std::string message) {
  g_last_kind = std::move(kind);
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
hsiseg_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    g_last_kind.clear();
    return HSISEG_OK;
  } catch (const hsiseg::Error& e) {
    return record(static_cast<hsiseg_status>(e.category()), hsiseg::kind_name(e.kind()),
                  e.what());
  } catch (const json::exception& e) {
    return record(HSISEG_ERR_CONTRACT, "config", std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return record(HSISEG_ERR_NUMERICAL, "memory", "out of memory");
  } catch (const std::exception& e) {
    return record(HSISEG_ERR_CONTRACT, "internal", e.what());
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) hsiseg::fail(hsiseg::ErrorKind::kContract, std::string(what) + " is null");
}

json parse_json(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    hsiseg::fail(hsiseg::ErrorKind::kConfig, std::string(what) + ": " + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

struct FreeDeleter {
  void operator()(char* p) const { std::free(p); }
};
using CString = std::unique_ptr<char, FreeDeleter>;

void emit(char** out, const json& j) {
  if (out != nullptr) *out = dup_string(j.dump(2) + "\n");
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  hsiseg::require(j.is_object(), hsiseg::ErrorKind::kConfig,
                  std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    hsiseg::require(ok, hsiseg::ErrorKind::kConfig,
                    std::string("unknown ") + what + " key '" + key + "'");
  }
}

}  // namespace

extern "C" {

const char* hsiseg_version(void) { return "0.1.0"; }
const char* hsiseg_last_error(void) { return g_last_error.c_str(); }
const char* hsiseg_last_error_kind(void) { return g_last_kind.c_str(); }
void hsiseg_string_free(char* s) { std::free(s); }

// ---- cubes --------------------------------------------------------------------------

hsiseg_status hsiseg_cube_load(const char* header_path, hsiseg_cube** out) {
  return guarded([&] {
    need(header_path, "header path");
    need(out, "output handle");
    *out = new hsiseg_cube{hsiseg::load_cube(header_path)};
  });
}

hsiseg_status hsiseg_cube_save(const hsiseg_cube* cube, const char* header_path) {
  return guarded([&] {
    need(cube, "cube");
    need(header_path, "header path");
    hsiseg::write_cube(cube->cube, header_path);
  });
}

void hsiseg_cube_free(hsiseg_cube* cube) { delete cube; }

hsiseg_status hsiseg_cube_dims(const hsiseg_cube* cube, size_t* width, size_t* height,
                               size_t* bands) {
  return guarded([&] {
    need(cube, "cube");
    if (width) *width = cube->cube.width;
    if (height) *height = cube->cube.height;
    if (bands) *bands = cube->cube.bands;
  });
}

hsiseg_status hsiseg_cube_attach_truth(hsiseg_cube* cube, const hsiseg_map* truth) {
  return guarded([&] {
    need(cube, "cube");
    need(truth, "truth");
    hsiseg::attach_labels(cube->cube, truth->map);
  });
}

hsiseg_status hsiseg_cube_truth(const hsiseg_cube* cube, hsiseg_map** out) {
  return guarded([&] {
    need(cube, "cube");
    need(out, "output handle");
    hsiseg::require(cube->cube.labels.has_value(), hsiseg::ErrorKind::kState,
                    "cube has no ground truth attached");
    hsiseg::LabelMap map;
    map.width = cube->cube.width;
    map.height = cube->cube.height;
    map.labels = *cube->cube.labels;
    *out = new hsiseg_map{std::move(map)};
  });
}

hsiseg_status hsiseg_synth(const char* params_json, hsiseg_cube** out) {
  return guarded([&] {
    need(out, "output handle");
    const json j = parse_json(params_json, "synth parameters");
    reject_unknown(j, {"width", "height", "bands", "classes", "noise", "seed"},
                   "synth parameter");
    hsiseg::SynthParams p;
    take(j, "width", p.width);
    take(j, "height", p.height);
    take(j, "bands", p.bands);
    take(j, "classes", p.classes);
    take(j, "noise", p.noise);
    take(j, "seed", p.seed);
    *out = new hsiseg_cube{hsiseg::synth_cube(p)};
  });
}

hsiseg_status hsiseg_convert_raw(const char* raw_path, const char* layout_json,
                                 hsiseg_cube** out) {
  return guarded([&] {
    need(raw_path, "raw path");
    need(out, "output handle");
    const json j = parse_json(layout_json, "raw layout");
    reject_unknown(j,
                   {"width", "height", "bands", "interleave", "dtype", "big_endian",
                    "header_offset"},
                   "raw layout");
    hsiseg::RawLayout layout;
    take(j, "width", layout.width);
    take(j, "height", layout.height);
    take(j, "bands", layout.bands);
    take(j, "interleave", layout.interleave);
    take(j, "dtype", layout.dtype);
    take(j, "big_endian", layout.big_endian);
    take(j, "header_offset", layout.header_offset);
    *out = new hsiseg_cube{hsiseg::convert_raw(raw_path, layout)};
  });
}

hsiseg_status hsiseg_convert_csv(const char* csv_path, hsiseg_cube** out) {
  return guarded([&] {
    need(csv_path, "csv path");
    need(out, "output handle");
    *out = new hsiseg_cube{hsiseg::convert_csv(csv_path)};
  });
}

hsiseg_status hsiseg_reduce(const hsiseg_cube* cube, const char* config_json,
                            hsiseg_cube** out) {
  return guarded([&] {
    need(cube, "cube");
    need(out, "output handle");
    const hsiseg::RunConfig cfg =
        hsiseg::run_config_from_json(parse_json(config_json, "run config"));
    *out = new hsiseg_cube{hsiseg::prepare_input(cube->cube, cfg)};
  });
}

// ---- autoencoder ---------------------------------------------------------------------

hsiseg_status hsiseg_train(const hsiseg_cube* cube, const char* config_json,
                           hsiseg_model** model, hsiseg_map** map, char** report_json,
                           char** timing_json) {
  return guarded([&] {
    need(cube, "cube");
    need(model, "output handle");
    const hsiseg::RunConfig cfg =
        hsiseg::run_config_from_json(parse_json(config_json, "run config"));
    hsiseg::TrainOutcome outcome = hsiseg::run_training(cube->cube, cfg);
    // Build every output before publishing any, so failure leaks nothing.
    CString report, timing;
    if (report_json) report.reset(dup_string(hsiseg::report_json(outcome.report).dump(2) + "\n"));
    if (timing_json) timing.reset(dup_string(hsiseg::timing_json(outcome.report).dump(2) + "\n"));
    auto owned_model =
        std::make_unique<hsiseg_model>(hsiseg_model{std::move(outcome.params), cfg});
    auto owned_map = std::make_unique<hsiseg_map>(hsiseg_map{std::move(outcome.map)});
    *model = owned_model.release();
    if (map) *map = owned_map.release();
    if (report_json) *report_json = report.release();
    if (timing_json) *timing_json = timing.release();
  });
}

hsiseg_status hsiseg_model_save(const hsiseg_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    hsiseg::save_checkpoint(path, model->params, model->run);
  });
}

hsiseg_status hsiseg_model_load(const char* path, hsiseg_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output handle");
    hsiseg::Checkpoint ck = hsiseg::load_checkpoint(path);
    *out = new hsiseg_model{std::move(ck.params), std::move(ck.run)};
  });
}

void hsiseg_model_free(hsiseg_model* model) { delete model; }

hsiseg_status hsiseg_model_config(const hsiseg_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "output string");
    emit(out, {{"model", hsiseg::to_json(model->params.config)},
               {"run", hsiseg::to_json(model->run)}});
  });
}

hsiseg_status hsiseg_segment(const hsiseg_model* model, const hsiseg_cube* cube,
                             hsiseg_map** out) {
  return guarded([&] {
    need(model, "model");
    need(cube, "cube");
    need(out, "output handle");
    const hsiseg::HsiCube input = hsiseg::prepare_input(cube->cube, model->run);
    *out = new hsiseg_map{hsiseg::segment(model->params, input)};
  });
}

// ---- baselines and evaluation --------------------------------------------------------

hsiseg_status hsiseg_baseline(const hsiseg_cube* cube, const char* config_json,
                              hsiseg_map** out, char** info_json, char** timing_json) {
  return guarded([&] {
    need(cube, "cube");
    need(out, "output handle");
    const hsiseg::RunConfig cfg =
        hsiseg::run_config_from_json(parse_json(config_json, "run config"));
    hsiseg::BaselineOutcome outcome = hsiseg::run_baseline(cube->cube, cfg);
    const json timing = {{"config", hsiseg::to_json(cfg)},
                         {"seconds",
                          {{"reduction", outcome.times.reduction},
                           {"clustering", outcome.times.stage1},
                           {"total", outcome.times.total()}}}};
    CString info, time_text;
    if (info_json) info.reset(dup_string(outcome.info.dump(2) + "\n"));
    if (timing_json) time_text.reset(dup_string(timing.dump(2) + "\n"));
    *out = new hsiseg_map{std::move(outcome.map)};
    if (info_json) *info_json = info.release();
    if (timing_json) *timing_json = time_text.release();
  });
}

hsiseg_status hsiseg_evaluate(const hsiseg_map* predicted, const hsiseg_map* truth,
                              char** metrics_json) {
  return guarded([&] {
    need(predicted, "predicted map");
    need(truth, "truth map");
    need(metrics_json, "output string");
    emit(metrics_json, hsiseg::evaluate_maps(predicted->map, truth->map));
  });
}

// ---- label maps ------------------------------------------------------------------------

hsiseg_status hsiseg_map_load(const char* header_path, hsiseg_map** out) {
  return guarded([&] {
    need(header_path, "header path");
    need(out, "output handle");
    *out = new hsiseg_map{hsiseg::load_labels(header_path)};
  });
}

hsiseg_status hsiseg_map_save(const hsiseg_map* map, const char* header_path) {
  return guarded([&] {
    need(map, "map");
    need(header_path, "header path");
    hsiseg::write_labels(map->map, header_path);
  });
}

void hsiseg_map_free(hsiseg_map* map) { delete map; }

hsiseg_status hsiseg_map_dims(const hsiseg_map* map, size_t* width, size_t* height) {
  return guarded([&] {
    need(map, "map");
    if (width) *width = map->map.width;
    if (height) *height = map->map.height;
  });
}

hsiseg_status hsiseg_map_labels(const hsiseg_map* map, const uint32_t** labels,
                                size_t* count) {
  return guarded([&] {
    need(map, "map");
    need(labels, "labels pointer");
    need(count, "count pointer");
    *labels = map->map.labels.data();
    *count = map->map.labels.size();
  });
}

hsiseg_status hsiseg_map_write_ppm(const hsiseg_map* map, const char* path) {
  return guarded([&] {
    need(map, "map");
    need(path, "path");
    hsiseg::write_ppm(map->map, path);
  });
}

}  // extern "C"
