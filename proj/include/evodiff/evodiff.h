/* C interface to the evodiff library: gradient-free guided diffusion sampling.
 *
 * Objects are opaque handles created by *_create / *_load and released with
 * the matching *_free. Every call returns an evd_status; on failure
 * evd_last_error() describes the problem for the calling thread. Strings
 * returned through char** outputs are owned by the caller and released with
 * evd_string_free(). */
#ifndef EVODIFF_EVODIFF_H_
#define EVODIFF_EVODIFF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EVD_API __declspec(dllexport)
#else
#define EVD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2..5 match the CLI exit codes. */
typedef enum evd_status {
  EVD_OK = 0,
  EVD_ERR_INTERNAL = 1,
  EVD_ERR_CONFIG = 2,
  EVD_ERR_NUMERIC = 3,
  EVD_ERR_FITNESS = 4,
  EVD_ERR_IO = 5,
  EVD_ERR_INVALID_ARGUMENT = 6
} evd_status;

typedef struct evd_schedule evd_schedule;
typedef struct evd_denoiser evd_denoiser;
typedef struct evd_fitness evd_fitness;

EVD_API const char* evd_version(void);

/* Message of the most recent failure on this thread ("" if none). */
EVD_API const char* evd_last_error(void);
/* Denoising step / population index of the last fitness failure, or -1. */
EVD_API int evd_last_error_step(void);
EVD_API int evd_last_error_sample(void);

EVD_API void evd_string_free(char* s);

EVD_API uint64_t evd_derive_seed(uint64_t parent, uint64_t salt);
/* 16 hex digits identifying a JSON document (key order independent). */
EVD_API evd_status evd_config_hash(const char* json, char** out);

/* spec_json: {"T", "beta_min", "beta_max", "kind": "linear",
 * "variance": "posterior" | "beta"}; NULL selects the defaults. */
EVD_API evd_status evd_schedule_create(const char* spec_json, evd_schedule** out);
EVD_API evd_status evd_schedule_steps(const evd_schedule* schedule, int* out);
EVD_API evd_status evd_schedule_hash(const evd_schedule* schedule, char** out);
EVD_API evd_status evd_schedule_free(evd_schedule* schedule);

/* Loads a mixture prior ({weights, means, variances}) or an MLP model
 * ({layer_sizes, ...}); the kind is detected from the document. */
EVD_API evd_status evd_denoiser_load(const char* path, const evd_schedule* schedule,
                                     evd_denoiser** out);
EVD_API evd_status evd_denoiser_from_json(const char* json, const evd_schedule* schedule,
                                          evd_denoiser** out);
EVD_API evd_status evd_denoiser_dim(const evd_denoiser* denoiser, size_t* out);
EVD_API evd_status evd_denoiser_free(evd_denoiser* denoiser);

/* Registry names: flow, metasurface, gmm_toy, linear, quadratic.
 * params_json may be NULL. */
EVD_API evd_status evd_fitness_create(const char* name, const char* params_json,
                                      evd_fitness** out);
EVD_API evd_status evd_fitness_dim(const evd_fitness* fitness, size_t* out);
/* Fitness to maximize. */
EVD_API evd_status evd_fitness_evaluate(const evd_fitness* fitness, const double* x, size_t n,
                                        double* out);
/* Raw task objective (pressure drop, MAE, squared distance); lower is better. */
EVD_API evd_status evd_fitness_objective(const evd_fitness* fitness, const double* x, size_t n,
                                         double* out);
/* Design JSON {kind, shape, values} for x using the task's shape. */
EVD_API evd_status evd_fitness_design_json(const evd_fitness* fitness, const double* x, size_t n,
                                           char** out);
/* Parses a design JSON document into values; *n_inout holds the capacity of
 * `values` on entry and the design length on return. */
EVD_API evd_status evd_design_parse(const char* json, double* values, size_t* n_inout);
EVD_API evd_status evd_fitness_free(evd_fitness* fitness);

typedef struct evd_sample_request {
  uint64_t seed;
  const char* guidance_json;    /* NULL = unguided */
  const evd_fitness* fitness;   /* required when guided */
  int threads;                  /* population evaluation threads */
  int include_states;           /* add states to trajectory_json */
  const char* config_hash;      /* stamped into trajectory_json; may be NULL */
  const char* diagnostics_path; /* JSON-lines per guided step; may be NULL */
} evd_sample_request;

/* Runs one denoising chain. x0_out must hold denoiser_dim values.
 * trajectory_json may be NULL. */
EVD_API evd_status evd_sample(const evd_denoiser* denoiser, const evd_sample_request* request,
                              double* x0_out, size_t n, char** trajectory_json);

/* dataset_json: array of equal-length vectors. hyper_json keys: epochs,
 * batch, learning_rate, momentum, hidden, seed. Outputs the model JSON and
 * {epoch_losses, final_loss}. losses_json may be NULL. */
EVD_API evd_status evd_train(const char* dataset_json, const evd_schedule* schedule,
                             const char* hyper_json, char** model_json, char** losses_json);

/* kind: "topology" (width x height grids) or "stack" (width layers). */
EVD_API evd_status evd_synth_dataset(const char* kind, int n, int width, int height, uint64_t seed,
                                     char** out);

/* Runs a paired experiment, writing results.csv, results.json, and one
 * summary JSON and SVG per comparison under out_dir. threads > 0 overrides the
 * config. report_json receives {config_hash, n_runs, failed_runs, summaries,
 * outputs}. Returns an error iff every run failed (or on config/IO errors). */
EVD_API evd_status evd_experiment_run(const char* config_json, const char* out_dir, int threads,
                                      char** report_json);

/* Renders a summary JSON document as an SVG histogram. */
EVD_API evd_status evd_plot_summary(const char* summary_json, const char* svg_path, int width,
                                    int height);

#ifdef __cplusplus
}
#endif

#endif /* EVODIFF_EVODIFF_H_ */
