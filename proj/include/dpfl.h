/* dpfl: differentially private federated learning simulator.
 *
 * C interface to the simulator: opaque handles, status codes, and plain
 * structs. Every function that can fail returns a dpfl_status; the message
 * for the most recent failure on the calling thread is available from
 * dpfl_last_error().
 */
#ifndef DPFL_H
#define DPFL_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpfl_status {
  DPFL_OK = 0,
  DPFL_ERROR_CONFIG = 1,      /* bad configuration key, value, or combination */
  DPFL_ERROR_DATA = 2,        /* unreadable or malformed data files */
  DPFL_ERROR_NUMERIC = 3,     /* run aborted on non-finite state */
  DPFL_ERROR_INCONCLUSIVE = 4,/* privacy audit could not resolve histograms */
  DPFL_ERROR_IO = 5,          /* output file could not be written */
  DPFL_ERROR_INVALID = 6      /* null handle or out-of-range argument */
} dpfl_status;

typedef struct dpfl_config dpfl_config; /* opaque: configuration key/value set */
typedef struct dpfl_run dpfl_run;       /* opaque: finished experiment */

typedef struct dpfl_metrics_row {
  long t;
  double test_error;
  double avg_noise_mag;
  double consensus_violation;
  double objective;
  double rho_t;
  double prox_t;
} dpfl_metrics_row;

typedef struct dpfl_audit_report {
  double eps_target;
  double eps_measured;
  double slack;
  long bins;
  long samples;
  int violation;
  int inconclusive;
} dpfl_audit_report;

const char* dpfl_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* dpfl_last_error(void);

/* Configuration handles. Keys and values mirror the config file format
 * one-to-one; dpfl_config_create starts from the documented defaults. */
dpfl_config* dpfl_config_create(void);
dpfl_config* dpfl_config_load(const char* path);
dpfl_status dpfl_config_set(dpfl_config* config, const char* key, const char* value);
dpfl_status dpfl_config_get(const dpfl_config* config, const char* key, char* buffer,
                            size_t buffer_size);
void dpfl_config_free(dpfl_config* config);

/* Loads the configured data, runs the experiment, and returns a result
 * handle. The run is a deterministic function of the configuration. */
dpfl_status dpfl_run_experiment(const dpfl_config* config, dpfl_run** out_run);

long dpfl_run_metric_count(const dpfl_run* run);
dpfl_status dpfl_run_metric_row(const dpfl_run* run, long index, dpfl_metrics_row* out_row);
double dpfl_run_final_test_error(const dpfl_run* run);
double dpfl_run_composed_epsilon(const dpfl_run* run);
double dpfl_run_wall_time_sec(const dpfl_run* run);

/* Writes the metrics CSV / the reloadable run-metadata file. */
dpfl_status dpfl_run_write_metrics(const dpfl_run* run, const char* path);
dpfl_status dpfl_run_write_metadata(const dpfl_run* run, const char* path);
void dpfl_run_free(dpfl_run* run);

/* Splits the configured training set across P agents and writes one table
 * file per agent into out_dir. */
dpfl_status dpfl_partition_to_dir(const dpfl_config* config, const char* out_dir,
                                  long* files_written);

/* Empirical per-iteration privacy audit of the configured algorithm's
 * z-update on a built-in scalar neighbor pair. noise_scale_factor multiplies
 * the calibrated noise scale (1.0 audits the mechanism as implemented);
 * identical_datasets audits a D = D' pair instead of true neighbors. */
dpfl_status dpfl_audit_run(const dpfl_config* config, long samples, long bins, double slack,
                           double noise_scale_factor, int identical_datasets,
                           dpfl_audit_report* out_report);

/* Compares the closed-form gradient sensitivity against a brute-force
 * leave-one-out recomputation over a randomized corpus; writes the largest
 * relative error seen. */
dpfl_status dpfl_sensitivity_check(unsigned long long seed, long instances,
                                   double* out_max_rel_err);

/* Total privacy budget after `iterations` rounds at eps_bar each. */
double dpfl_compose_epsilon(double eps_bar, long iterations);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DPFL_H */
