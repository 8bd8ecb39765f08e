/* SPDX-License-Identifier: Apache-2.0 */
/* C interface to libpotter. Every handle is opaque and owned by the caller;
 * release it with the matching *_free function. Functions returning a
 * potter_status leave their out-parameters untouched on failure, and the
 * message for the most recent failure on the calling thread is available
 * from potter_last_error(). Strings returned through char** are released
 * with potter_string_free(). */
#ifndef POTTER_POTTER_H
#define POTTER_POTTER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define POTTER_API __attribute__((visibility("default")))
#else
#define POTTER_API
#endif

typedef enum potter_status {
  POTTER_OK = 0,
  POTTER_ERR_INVALID_ARGUMENT = 1,
  POTTER_ERR_SHAPE_MISMATCH = 2,
  POTTER_ERR_IO = 3,
  POTTER_ERR_FORMAT = 4,
  POTTER_ERR_CONFIG = 5,
  POTTER_ERR_DIVERGED = 6,
  POTTER_ERR_INTERNAL = 7,
  /* A suite ran to completion but some checks failed. */
  POTTER_CHECK_FAILED = 8
} potter_status;

typedef enum potter_format { POTTER_FORMAT_TEXT = 0, POTTER_FORMAT_JSON = 1 } potter_format;

typedef struct potter_config potter_config;
typedef struct potter_model potter_model;
typedef struct potter_tensor potter_tensor;

POTTER_API const char* potter_version(void);
POTTER_API const char* potter_last_error(void);
POTTER_API const char* potter_status_name(potter_status status);
POTTER_API void potter_string_free(char* s);

/* ---- configs */

POTTER_API potter_status potter_config_preset(const char* name, potter_config** out);
POTTER_API potter_status potter_config_load(const char* path, potter_config** out);
POTTER_API potter_status potter_config_parse(const char* json, potter_config** out);
/* kind: "poolattn", "pooling" or "attention". */
POTTER_API potter_status potter_config_set_mixer(potter_config* config, const char* kind);
POTTER_API potter_status potter_config_to_json(const potter_config* config, char** out);
POTTER_API potter_status potter_config_hash(const potter_config* config, char** out);
POTTER_API potter_status potter_config_input(const potter_config* config, size_t* h, size_t* w);
POTTER_API void potter_config_free(potter_config* config);

/* ---- tensors (row-major float64) */

POTTER_API potter_status potter_tensor_create(const size_t* shape, size_t rank,
                                              const double* data, potter_tensor** out);
POTTER_API potter_status potter_tensor_load(const char* path, potter_tensor** out);
POTTER_API potter_status potter_tensor_save(const potter_tensor* tensor, const char* path);
POTTER_API size_t potter_tensor_rank(const potter_tensor* tensor);
POTTER_API size_t potter_tensor_dim(const potter_tensor* tensor, size_t axis);
POTTER_API size_t potter_tensor_size(const potter_tensor* tensor);
POTTER_API const double* potter_tensor_data(const potter_tensor* tensor);
POTTER_API void potter_tensor_free(potter_tensor* tensor);

/* ---- models */

POTTER_API potter_status potter_model_create(const potter_config* config, uint64_t seed,
                                             potter_model** out);
/* Fails with POTTER_ERR_SHAPE_MISMATCH listing every missing, unexpected or
 * mis-shaped tensor when the file does not match the config. */
POTTER_API potter_status potter_model_load(const potter_config* config, const char* path,
                                           potter_model** out);
POTTER_API potter_status potter_model_save(const potter_model* model, const char* path);
POTTER_API potter_status potter_model_param_count(const potter_model* model, uint64_t* out);
/* image: [3,H,W]. Output is the logits [k] or the feature map. */
POTTER_API potter_status potter_model_forward(const potter_model* model,
                                              const potter_tensor* image, potter_tensor** out);
POTTER_API void potter_model_free(potter_model* model);

/* ---- complexity */

/* mode: "table" or "exact". */
POTTER_API potter_status potter_profile(const potter_config* config, size_t h, size_t w,
                                        const char* mode, uint64_t batch, potter_format format,
                                        char** out);
POTTER_API potter_status potter_profile_mixer(const char* kind, uint64_t d, uint64_t n,
                                              const char* mode, potter_format format,
                                              char** out);

/* ---- harness */

/* suite: "grad", "invariants" or "all". The gradient suite runs seeds
 * seed .. seed+num_seeds-1. Returns POTTER_CHECK_FAILED (with the report
 * still written to *out) when any check fails. */
POTTER_API potter_status potter_check(const char* suite, uint64_t seed, size_t num_seeds,
                                      double tolerance, potter_format format, char** out);

typedef struct potter_train_options {
  size_t epochs;
  size_t batch;
  uint64_t seed; /* initialisation, data and shuffling */
  double lr;
  const char* schedule; /* "constant" or "cosine" */
  size_t warmup_epochs;
  size_t samples; /* synthetic dataset size */
  size_t classes;
} potter_train_options;

POTTER_API void potter_train_options_init(potter_train_options* options);

typedef void (*potter_epoch_callback)(const char* jsonl_record, void* user);

/* Trains on the synthetic shape dataset. resume_path (optional) continues
 * from a checkpoint written by an earlier run with the same options;
 * checkpoint_path (optional) receives the final training state. on_epoch
 * (optional) gets one JSON line per epoch. *out_csv (optional) receives
 * the per-epoch CSV summary. */
POTTER_API potter_status potter_train(const potter_config* config,
                                      const potter_train_options* options,
                                      const char* resume_path, const char* checkpoint_path,
                                      potter_epoch_callback on_epoch, void* user,
                                      potter_model** out_model, char** out_csv);

/* name: "mixer_ablation" or "hr_ablation". options may be NULL for a
 * profile-only table; otherwise options->samples > 0 trains each variant. */
POTTER_API potter_status potter_ablate(const potter_config* config, const char* name,
                                       const potter_train_options* options,
                                       potter_format format, char** out);

#ifdef __cplusplus
}
#endif

#endif /* POTTER_POTTER_H */
