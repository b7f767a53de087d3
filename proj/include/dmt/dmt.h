/* Copyright 2026 The DMT Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the dynamic multiscale tree segmentation library.
 *
 * All objects are opaque handles released with their *_free function
 * (NULL is accepted). Every fallible call returns a dmt_status; on failure
 * dmt_last_error() describes the problem for the calling thread until the
 * next failing call on that thread. Strings returned through char** are
 * owned by the caller and released with dmt_string_free. */

#ifndef DMT_DMT_H_
#define DMT_DMT_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(DMT_BUILDING_LIBRARY)
#define DMT_API __attribute__((visibility("default")))
#else
#define DMT_API
#endif

typedef enum dmt_status {
  DMT_OK = 0,
  DMT_ERR_ARGUMENT = 1, /* invalid argument or usage */
  DMT_ERR_FORMAT = 2,   /* malformed binary payload */
  DMT_ERR_IO = 3,
  DMT_ERR_CONFIG = 4,   /* config or manifest schema violation */
  DMT_ERR_CONTRACT = 5, /* mismatched model, layout or sizes */
  DMT_ERR_TRAINING = 6,
  DMT_ERR_RUNTIME = 7
} dmt_status;

typedef struct dmt_image dmt_image;     /* multichannel float image */
typedef struct dmt_labels dmt_labels;   /* label map */
typedef struct dmt_probmap dmt_probmap; /* per-class probability map */
typedef struct dmt_config dmt_config;   /* engine configuration */
typedef struct dmt_dataset dmt_dataset; /* subjects with ground truth */
typedef struct dmt_model dmt_model;     /* trained model */

DMT_API const char* dmt_version(void);
DMT_API const char* dmt_last_error(void);
DMT_API const char* dmt_status_name(dmt_status status);
DMT_API void dmt_string_free(char* s);
/* Worker cap for all parallel work; 0 selects the hardware concurrency. */
DMT_API void dmt_set_jobs(unsigned jobs);

/* ---- rasters */

DMT_API dmt_status dmt_image_create(int width, int height, int channels, const float* planes, dmt_image** out);
DMT_API dmt_status dmt_image_read(const char* path, dmt_image** out);
DMT_API dmt_status dmt_image_write(const dmt_image* image, const char* path);
DMT_API void dmt_image_free(dmt_image* image);
DMT_API int dmt_image_width(const dmt_image* image);
DMT_API int dmt_image_height(const dmt_image* image);
DMT_API int dmt_image_channels(const dmt_image* image);

DMT_API dmt_status dmt_labels_read(const char* path, dmt_labels** out);
DMT_API dmt_status dmt_labels_write(const dmt_labels* labels, const char* path);
DMT_API void dmt_labels_free(dmt_labels* labels);
DMT_API int dmt_labels_width(const dmt_labels* labels);
DMT_API int dmt_labels_height(const dmt_labels* labels);
DMT_API int dmt_labels_classes(const dmt_labels* labels);
DMT_API const uint8_t* dmt_labels_data(const dmt_labels* labels);

DMT_API dmt_status dmt_probmap_read(const char* path, dmt_probmap** out);
DMT_API dmt_status dmt_probmap_write(const dmt_probmap* probs, const char* path);
DMT_API void dmt_probmap_free(dmt_probmap* probs);
DMT_API int dmt_probmap_width(const dmt_probmap* probs);
DMT_API int dmt_probmap_height(const dmt_probmap* probs);
DMT_API int dmt_probmap_classes(const dmt_probmap* probs);
/* Class-major planes: classes * width * height values. */
DMT_API const float* dmt_probmap_data(const dmt_probmap* probs);

/* ---- configuration */

DMT_API dmt_status dmt_config_default(dmt_config** out);
DMT_API dmt_status dmt_config_parse(const char* text, dmt_config** out);
DMT_API dmt_status dmt_config_load(const char* path, dmt_config** out);
DMT_API void dmt_config_free(dmt_config* config);
/* dmt, srf, bn, srf-srf, bn-bn, srf-bn. Unknown names give DMT_ERR_ARGUMENT. */
DMT_API dmt_status dmt_config_set_method(dmt_config* config, const char* method);
DMT_API dmt_status dmt_config_set_seed(dmt_config* config, uint64_t seed);
DMT_API dmt_status dmt_config_format(const dmt_config* config, char** out);
DMT_API int dmt_config_node_count(const dmt_config* config);
/* CSV of patch and superpixel feature names; the patch layout includes the
 * context block for the given class count. */
DMT_API dmt_status dmt_config_feature_layout(const dmt_config* config, int channels, int classes, char** out);

/* ---- synthetic data */

typedef struct dmt_synth_options {
  int size;
  int subjects;
  uint64_t seed;
  double noise_sigma;
  double boundary_irregularity;
} dmt_synth_options;

/* Fills in the generator defaults. */
DMT_API void dmt_synth_options_default(dmt_synth_options* options);
/* Writes MDI files and manifest.txt into dir. */
DMT_API dmt_status dmt_synth(const dmt_synth_options* options, const char* dir);

DMT_API dmt_status dmt_dataset_read(const char* dir, dmt_dataset** out);
DMT_API void dmt_dataset_free(dmt_dataset* dataset);
DMT_API int dmt_dataset_size(const dmt_dataset* dataset);
/* Borrowed handles, valid while the dataset lives. */
DMT_API const dmt_image* dmt_dataset_image(const dmt_dataset* dataset, int index);
DMT_API const dmt_labels* dmt_dataset_labels(const dmt_dataset* dataset, int index);

/* ---- training and prediction */

DMT_API dmt_status dmt_train(const dmt_config* config, const dmt_dataset* dataset, dmt_model** out);
DMT_API dmt_status dmt_model_save(const dmt_model* model, const char* dir);
DMT_API dmt_status dmt_model_load(const char* dir, dmt_model** out);
DMT_API void dmt_model_free(dmt_model* model);
DMT_API int dmt_model_node_count(const dmt_model* model);
DMT_API int dmt_model_classes(const dmt_model* model);
/* Audit log text: fit events and leaf fingerprints of the training images. */
DMT_API dmt_status dmt_model_audit(const dmt_model* model, char** out);

/* Either output may be NULL. */
DMT_API dmt_status dmt_predict(const dmt_model* model, const dmt_image* image, dmt_labels** labels,
                               dmt_probmap** probs);
/* Re-predicts every training image and counts leaf maps whose fingerprint
 * differs from the audit log. */
DMT_API dmt_status dmt_model_verify(const dmt_model* model, const dmt_dataset* dataset, int* mismatches);

/* ---- evaluation */

/* Leave-one-subject-out over a comma-separated method list (dmt, dmt-fixed,
 * dmt-d<N>, srf, bn, srf-srf, bn-bn, srf-bn). Writes scores.csv, summary.csv,
 * summary.txt and pvalues.csv into out_dir. failed_folds receives the number
 * of failed (method, fold) cells; the call still returns DMT_OK then. */
DMT_API dmt_status dmt_eval(const dmt_config* config, const dmt_dataset* dataset, const char* methods,
                            const char* out_dir, int* failed_folds, char** summary_table);

/* ---- rendering (PNG) */

DMT_API dmt_status dmt_render_labels(const dmt_labels* labels, const char* path);
DMT_API dmt_status dmt_render_probmap(const dmt_probmap* probs, int cls, const char* path);
DMT_API dmt_status dmt_render_channel(const dmt_image* image, int channel, const char* path);
/* Oversegments the image's reference channel with the config's SLIC settings. */
DMT_API dmt_status dmt_render_edgemap(const dmt_image* image, const dmt_config* config, int target_superpixels,
                                      const char* path);

#ifdef __cplusplus
}
#endif

#endif /* DMT_DMT_H_ */
