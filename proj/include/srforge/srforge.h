#ifndef SRFORGE_SRFORGE_H
#define SRFORGE_SRFORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SRFORGE_BUILDING)
#    define SRF_API __declspec(dllexport)
#  else
#    define SRF_API __declspec(dllimport)
#  endif
#else
#  define SRF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes. */
typedef enum srf_status {
  SRF_OK = 0,
  SRF_USAGE = 1,    /* bad arguments or settings */
  SRF_IO = 2,       /* missing or malformed files, data errors */
  SRF_NUMERIC = 3,  /* non-finite loss or gradient */
  SRF_INTERNAL = 4
} srf_status;

/* Message of the last failed call on this thread; "" when none. */
SRF_API const char* srf_last_error(void);
SRF_API const char* srf_version(void);

/* Receives command output. `stream` is 1 for results, 2 for progress notes.
   Passing NULL restores the default (stdout / stderr). */
typedef void (*srf_sink)(void* user, int stream, const char* text, size_t len);
SRF_API void srf_set_sink(srf_sink sink, void* user);

/* ---- run configuration: key = value settings ---------------------------- */

typedef struct srf_config srf_config;

SRF_API srf_status srf_config_create(srf_config** out);
SRF_API void srf_config_destroy(srf_config* cfg);
/* Merges a key = value file. Unknown keys are rejected. */
SRF_API srf_status srf_config_load(srf_config* cfg, const char* path);
/* Sets one key; later calls override the file. */
SRF_API srf_status srf_config_set(srf_config* cfg, const char* key, const char* value);
/* Copies the value into `buf` (NUL-terminated, truncated to `cap`). Returns
   SRF_USAGE when the key is unset. */
SRF_API srf_status srf_config_get(const srf_config* cfg, const char* key, char* buf, size_t cap);

/* ---- commands ------------------------------------------------------------ */

SRF_API srf_status srf_prepare_data(const srf_config* cfg);
SRF_API srf_status srf_train_sr(const srf_config* cfg);
SRF_API srf_status srf_eval_sr(const srf_config* cfg);
SRF_API srf_status srf_upscale(const srf_config* cfg);
SRF_API srf_status srf_count_params(const srf_config* cfg);
SRF_API srf_status srf_train_srcgan(const srf_config* cfg);
SRF_API srf_status srf_eval_srcgan(const srf_config* cfg);
SRF_API srf_status srf_train_classifier(const srf_config* cfg);
SRF_API srf_status srf_init_model(const srf_config* cfg);

/* ---- super-resolution models ---------------------------------------------- */

typedef struct srf_model srf_model;

/* Builds a model from the shape settings in `cfg` (model, depth_middle,
   block_width, cardinality, base_channels, kernel, bias, init, seed). */
SRF_API srf_status srf_model_create(const srf_config* cfg, srf_model** out);
SRF_API srf_status srf_model_load(const char* path, srf_model** out);
SRF_API srf_status srf_model_save(const srf_model* model, const char* path);
SRF_API void srf_model_destroy(srf_model* model);

SRF_API srf_status srf_model_parameter_count(const srf_model* model, int include_bias, uint64_t* out);
/* Runs the network on one (height x width) luma plane in [0, 1], row-major.
   `out` receives height * width values, not clamped. */
SRF_API srf_status srf_model_forward(const srf_model* model, const float* in, size_t width, size_t height,
                                     float* out);

#ifdef __cplusplus
}
#endif

#endif
