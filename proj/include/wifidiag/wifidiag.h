/*
 * wifidiag C API.
 *
 * Every call returns a wd_status. On failure the message of the last error
 * on the calling thread is available from wd_last_error(). Handles are
 * opaque; free each one exactly once with its matching _free call.
 */
#ifndef WIFIDIAG_H
#define WIFIDIAG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define WD_API __declspec(dllexport)
#else
#define WD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wd_status {
  WD_OK = 0,
  WD_ERR_ARGUMENT = 1,       /* null handle or pointer, bad buffer size */
  WD_ERR_CONFIG = 2,         /* invalid or unknown configuration */
  WD_ERR_INVALID_FAULT = 3,  /* fault spec inconsistent with its topology */
  WD_ERR_CONTRACT = 4,       /* malformed data or violated precondition */
  WD_ERR_TRAINING = 5,       /* a classifier could not be trained */
  WD_ERR_IO = 6,             /* unreadable or unwritable file */
  WD_ERR_MISSING_INPUT = 7,  /* a prior stage has not produced its output */
  WD_ERR_HASH_MISMATCH = 8,  /* input written under a different config */
  WD_ERR_TRANSPORT = 9,      /* text-generation service unreachable */
  WD_ERR_INTERNAL = 10
} wd_status;

typedef struct wd_config wd_config;
typedef struct wd_pipeline wd_pipeline;

WD_API const char* wd_version(void);
WD_API const char* wd_status_name(wd_status status);
/* Message of the last failure on this thread; "" after a success. */
WD_API const char* wd_last_error(void);

/* ---- configuration ---- */

WD_API wd_status wd_config_default(wd_config** out);
/* Strict: unknown keys are rejected. */
WD_API wd_status wd_config_load(const char* path, wd_config** out);
WD_API wd_status wd_config_save(const wd_config* config, const char* path);
/* Applies a JSON merge patch to the resolved config, then revalidates.
 * On failure the config is left unchanged. */
WD_API wd_status wd_config_patch(wd_config* config, const char* json_patch);
WD_API wd_status wd_config_set_seed(wd_config* config, uint64_t seed);
/* Comma-separated lists: "LogReg,KNN", "Detection,Classification",
 * "flow,warning,flow+packet". Modality sets apply to the benchmark and to
 * the explanation track. */
WD_API wd_status wd_config_set_methods(wd_config* config, const char* csv);
WD_API wd_status wd_config_set_tasks(wd_config* config, const char* csv);
WD_API wd_status wd_config_set_modalities(wd_config* config, const char* csv);
/* Hex SHA-256 of the resolved config; buf needs at least 65 bytes. */
WD_API wd_status wd_config_hash(const wd_config* config, char* buf, size_t len);
WD_API void wd_config_free(wd_config* config);

/* ---- pipeline ---- */

/* The pipeline copies the config. */
WD_API wd_status wd_pipeline_create(const wd_config* config, const char* out_dir, int force, int threads,
                                    wd_pipeline** out);
/* stage: generate, split, preprocess, bench, llm-extract, reason-eval, report */
WD_API wd_status wd_pipeline_run(wd_pipeline* pipeline, const char* stage);
WD_API void wd_pipeline_free(wd_pipeline* pipeline);

/* ---- explanation scoring ---- */

/* out[0..2] = EP, ER, EF1 of two 0/1 vectors of length d. */
WD_API wd_status wd_explanation_scores(const int* predicted, const int* truth, size_t d, double out[3]);
/* out[i] = scores[i] >= tau[i]. */
WD_API wd_status wd_binarize(const double* scores, const double* tau, size_t d, int* out);
/* scores and truth are row-major [n_pairs][d]; tau receives d thresholds. */
WD_API wd_status wd_calibrate_thresholds(const double* scores, const int* truth, size_t n_pairs, size_t d,
                                         double* tau);

/* Writes the mock responder's answer to prompt into buf (NUL-terminated).
 * *needed, when not null, receives the full length including the
 * terminator; a short buffer yields WD_ERR_ARGUMENT. */
WD_API wd_status wd_mock_llm(const char* prompt, uint64_t seed, char* buf, size_t len, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* WIFIDIAG_H */
