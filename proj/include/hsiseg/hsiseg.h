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

/* Public C interface of the hsiseg shared library.
 *
 * Objects are opaque handles created by the library and released with the
 * matching *_free function. Every fallible call returns an hsiseg_status;
 * on failure hsiseg_last_error() describes the problem (per thread) and
 * output handles are left untouched. Strings returned through char** are
 * owned by the caller and released with hsiseg_string_free. Structured
 * inputs and outputs (configurations, reports, metrics) are JSON text. */
#ifndef HSISEG_HSISEG_H_
#define HSISEG_HSISEG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(HSISEG_BUILDING_LIBRARY)
#define HSISEG_API __attribute__((visibility("default")))
#else
#define HSISEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes of the command-line tool. */
typedef enum hsiseg_status {
  HSISEG_OK = 0,
  HSISEG_ERR_CONTRACT = 1,  /* contract, configuration or parameter error */
  HSISEG_ERR_IO = 2,        /* missing, unreadable or malformed files */
  HSISEG_ERR_NUMERICAL = 3  /* numerical breakdown */
} hsiseg_status;

typedef struct hsiseg_cube hsiseg_cube;   /* hyperspectral cube (+ optional truth) */
typedef struct hsiseg_model hsiseg_model; /* trained autoencoder + run config */
typedef struct hsiseg_map hsiseg_map;     /* per-pixel label raster */

HSISEG_API const char* hsiseg_version(void);
/* Message of the last failure on the calling thread ("" if none). */
HSISEG_API const char* hsiseg_last_error(void);
/* Short machine-readable reason of the last failure, e.g. "io", "shape". */
HSISEG_API const char* hsiseg_last_error_kind(void);
HSISEG_API void hsiseg_string_free(char* s);

/* ---- cubes ---- */
HSISEG_API hsiseg_status hsiseg_cube_load(const char* header_path, hsiseg_cube** out);
HSISEG_API hsiseg_status hsiseg_cube_save(const hsiseg_cube* cube, const char* header_path);
HSISEG_API void hsiseg_cube_free(hsiseg_cube* cube);
HSISEG_API hsiseg_status hsiseg_cube_dims(const hsiseg_cube* cube, size_t* width,
                                          size_t* height, size_t* bands);
/* Attaches ground truth (0 = background); dimensions must agree. */
HSISEG_API hsiseg_status hsiseg_cube_attach_truth(hsiseg_cube* cube, const hsiseg_map* truth);
/* Copies the attached ground truth out as a map. Contract error if none. */
HSISEG_API hsiseg_status hsiseg_cube_truth(const hsiseg_cube* cube, hsiseg_map** out);

/* Synthetic striped scene. params_json keys (all optional): width, height,
 * bands, classes, noise, seed. The cube carries its generating labels. */
HSISEG_API hsiseg_status hsiseg_synth(const char* params_json, hsiseg_cube** out);
/* Raw raster decoding. layout_json keys: width, height, bands (required),
 * interleave (bsq|bil|bip), dtype (f32|f64|u16|i16), big_endian,
 * header_offset. */
HSISEG_API hsiseg_status hsiseg_convert_raw(const char* raw_path, const char* layout_json,
                                            hsiseg_cube** out);
/* N x d comma-separated feature matrix -> cube of width N, height 1. */
HSISEG_API hsiseg_status hsiseg_convert_csv(const char* csv_path, hsiseg_cube** out);
/* Normalization and reduction exactly as training would apply them. */
HSISEG_API hsiseg_status hsiseg_reduce(const hsiseg_cube* cube, const char* config_json,
                                       hsiseg_cube** out);

/* ---- autoencoder ---- */
/* Full two-stage training followed by segmentation of the scene. map,
 * report_json and timing_json may be NULL. The report carries metrics when
 * the cube has ground truth attached. */
HSISEG_API hsiseg_status hsiseg_train(const hsiseg_cube* cube, const char* config_json,
                                      hsiseg_model** model, hsiseg_map** map,
                                      char** report_json, char** timing_json);
HSISEG_API hsiseg_status hsiseg_model_save(const hsiseg_model* model, const char* path);
HSISEG_API hsiseg_status hsiseg_model_load(const char* path, hsiseg_model** out);
HSISEG_API void hsiseg_model_free(hsiseg_model* model);
/* {"model": ..., "run": ...} configuration of a model. */
HSISEG_API hsiseg_status hsiseg_model_config(const hsiseg_model* model, char** json);
/* Preprocesses the cube with the model's run configuration, then labels
 * every pixel. Band-count mismatch is a contract (configuration) error. */
HSISEG_API hsiseg_status hsiseg_segment(const hsiseg_model* model, const hsiseg_cube* cube,
                                        hsiseg_map** out);

/* ---- baselines and evaluation ---- */
/* config_json is a run configuration with method kmeans or gmm. */
HSISEG_API hsiseg_status hsiseg_baseline(const hsiseg_cube* cube, const char* config_json,
                                         hsiseg_map** out, char** info_json,
                                         char** timing_json);
HSISEG_API hsiseg_status hsiseg_evaluate(const hsiseg_map* predicted, const hsiseg_map* truth,
                                         char** metrics_json);

/* ---- label maps ---- */
HSISEG_API hsiseg_status hsiseg_map_load(const char* header_path, hsiseg_map** out);
HSISEG_API hsiseg_status hsiseg_map_save(const hsiseg_map* map, const char* header_path);
HSISEG_API void hsiseg_map_free(hsiseg_map* map);
HSISEG_API hsiseg_status hsiseg_map_dims(const hsiseg_map* map, size_t* width, size_t* height);
/* Borrowed view of the row-major labels, valid until the map is freed. */
HSISEG_API hsiseg_status hsiseg_map_labels(const hsiseg_map* map, const uint32_t** labels,
                                           size_t* count);
HSISEG_API hsiseg_status hsiseg_map_write_ppm(const hsiseg_map* map, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* HSISEG_HSISEG_H_ */
