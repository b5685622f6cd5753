#ifndef SPLITNET_SPLITNET_H
#define SPLITNET_SPLITNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SPLITNET_BUILDING)
#define SPN_API __declspec(dllexport)
#else
#define SPN_API __declspec(dllimport)
#endif
#else
#define SPN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spn_status {
  SPN_OK = 0,
  SPN_ERR_INVALID_ARGUMENT = 1,
  SPN_ERR_SHAPE = 2,
  SPN_ERR_NON_FINITE = 3,
  SPN_ERR_IO = 4,
  SPN_ERR_CONFIG = 5,
  SPN_ERR_EMPTY_FILTERED_SET = 6,
  SPN_ERR_STATE = 7,
  SPN_ERR_THRESHOLD_EXCEEDED = 8, /* spn_compare: some delta beyond tolerance */
  SPN_ERR_INTERNAL = 99
} spn_status;

typedef struct spn_config spn_config;
typedef struct spn_run spn_run;
typedef struct spn_dataset spn_dataset;

typedef struct spn_epoch {
  int epoch;
  double tau_mu;
  double tau_nu;
  size_t n_clean_set;
  double eta;
  size_t mask_count;
  size_t pseudo_correct;
  size_t pseudo_wrong;
  double split_f1_splitnet; /* NaN when not applicable */
  double split_f1_gmm;
  double split_acc_splitnet;
  double split_acc_gmm;
  double test_acc;
} spn_epoch;

typedef struct spn_dataset_info {
  size_t n;
  int feature_dim;
  int num_classes;
  size_t noisy_count;
} spn_dataset_info;

/* Message of the last failed call on this thread; never NULL. */
SPN_API const char* spn_last_error(void);
SPN_API const char* spn_version(void);
/* Frees strings returned through char** out-parameters. */
SPN_API void spn_string_free(char* s);

SPN_API spn_status spn_config_default(spn_config** out);
SPN_API spn_status spn_config_from_file(const char* path, spn_config** out);
SPN_API spn_status spn_config_from_json(const char* json, spn_config** out);
/* value_json is a JSON literal, e.g. "0.8", "\"plain_ce\"", "[64,64]". */
SPN_API spn_status spn_config_set(spn_config* cfg, const char* key, const char* value_json);
SPN_API spn_status spn_config_to_json(const spn_config* cfg, char** out);
SPN_API void spn_config_free(spn_config* cfg);

/* Writes artifacts to the configured output_dir when write_files != 0. */
SPN_API spn_status spn_run_experiment(const spn_config* cfg, int write_files, spn_run** out);
SPN_API spn_status spn_run_summary_json(const spn_run* run, char** out);
SPN_API size_t spn_run_epoch_count(const spn_run* run);
SPN_API spn_status spn_run_epoch(const spn_run* run, size_t index, spn_epoch* out);
SPN_API void spn_run_free(spn_run* run);

/* grid_json: object of key -> array of values. Writes sweep.csv under the
   config's output_dir. *points_out (optional) receives the point count. */
SPN_API spn_status spn_sweep(const spn_config* cfg, const char* grid_json, size_t* points_out);

/* *report_out (optional) receives a printable delta table. Returns
   SPN_ERR_THRESHOLD_EXCEEDED when any |delta| > tol. */
SPN_API spn_status spn_compare(const char* dir_a, const char* dir_b, double tol,
                               char** report_out);

/* Training set of the configured benchmark, noise included. */
SPN_API spn_status spn_dataset_generate(const spn_config* cfg, spn_dataset** out);
SPN_API spn_status spn_dataset_load(const char* csv_path, spn_dataset** out);
SPN_API spn_status spn_dataset_save(const spn_dataset* ds, const char* csv_path);
SPN_API spn_status spn_dataset_info_get(const spn_dataset* ds, spn_dataset_info* out);
SPN_API void spn_dataset_free(spn_dataset* ds);

SPN_API spn_status spn_compute_thresholds(double mean, double variance, double pivot,
                                          double* tau_mu, double* tau_nu);
SPN_API spn_status spn_dynamic_threshold(double s_clean, double s_noisy, double beta1,
                                         double beta2, double* out);

#ifdef __cplusplus
}
#endif

#endif
