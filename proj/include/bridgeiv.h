/* bridgeiv: long-term effect estimation from many weak experiments.
 *
 * C interface to the estimation core. Objects are opaque handles created and
 * destroyed here; every fallible call returns a biv_status, and
 * biv_last_error() describes the most recent failure on the calling thread.
 * Strings returned through char** are owned by the caller and must be
 * released with biv_string_free().
 *
 * Configuration and result payloads cross the boundary as JSON documents;
 * tabular data crosses as CSV files with the schemas:
 *   unit level:  cell_id,fold_id,s_1,...,s_d,y
 *   aggregates:  cell_id,fold_id,count,s_mean_1,...,s_mean_d,y_mean
 */
#ifndef BRIDGEIV_H
#define BRIDGEIV_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum biv_status {
  BIV_OK = 0,
  BIV_ERR_CONFIG = 1,  /* invalid parameters or configuration */
  BIV_ERR_DATA = 2,    /* malformed input data */
  BIV_ERR_NUMERIC = 3, /* singular system, weak identification, failed check */
  BIV_ERR_IO = 4,      /* file system failure */
} biv_status;

typedef struct biv_dataset biv_dataset;       /* unit-level experiment data */
typedef struct biv_aggregates biv_aggregates; /* per-(cell, fold) means */

/* Message for the last failure on this thread; empty string if none. */
const char* biv_last_error(void);

void biv_string_free(char* s);
void biv_dataset_free(biv_dataset* dataset);
void biv_aggregates_free(biv_aggregates* aggregates);

/* ---- data ------------------------------------------------------------ */

biv_status biv_dataset_read_csv(const char* path, biv_dataset** out);
biv_status biv_dataset_write_csv(const biv_dataset* dataset, const char* path);
biv_status biv_aggregates_read_csv(const char* path, biv_aggregates** out);
biv_status biv_aggregates_write_csv(const biv_aggregates* aggregates, const char* path);

/* Balanced random fold assignment within each cell (seeded, deterministic). */
biv_status biv_dataset_assign_folds(const biv_dataset* dataset, int num_folds, uint64_t seed,
                                    biv_dataset** out);
/* Exact per-(cell, fold) means. */
biv_status biv_dataset_aggregate(const biv_dataset* dataset, biv_aggregates** out);

/* ---- simulation ------------------------------------------------------ */

/* config_json mirrors the linear model configuration (num_cells,
 * units_per_cell, surrogate_dim, num_folds, eps_scale, eta_scale, u_scale,
 * delta, pi_row_scale, meas_scale, beta, gamma, novel_first_stage, seed).
 * ground_truth_json (optional out) receives the realized beta/gamma/Pi. */
biv_status biv_simulate(const char* config_json, biv_dataset** out, char** ground_truth_json);

/* ---- estimation ------------------------------------------------------ */

/* method: "jive" | "jive2-ci" | "tsls" (aggregate-level). Writes the
 * estimate report as JSON (beta_hat, estimator_tag, h_k_matrix, optional
 * ci_lower/ci_upper/sigma_eta_hat/sigma_eps_hat, condition_warning,
 * beta_cov). */
biv_status biv_estimate_aggregates(const biv_aggregates* aggregates, const char* method,
                                   double alpha, char** report_json);

/* method: "ols" | "erm-linear" (unit-level), plus any aggregate-level
 * method, which is computed after aggregating the dataset. */
biv_status biv_estimate_dataset(const biv_dataset* dataset, const char* method, double alpha,
                                char** report_json);

/* ---- sweeps and identification checks -------------------------------- */

/* config_json: { base: <linear model config>, k_grid: [..],
 * estimators: ["JIVE_LFOLD","TSLS","OLS"], n_replications, novel_units,
 * alpha, parallelism, seed }. Writes the result CSV
 * (K,estimator,mse,mse_se,coverage,coverage_se,n_reps,n_failures) to
 * csv_out_path when non-NULL and returns the same table as JSON. Fails with
 * BIV_ERR_NUMERIC when more than 1% of replications fail in any bucket (the
 * CSV is still written). */
biv_status biv_run_sweep(const char* config_json, const char* csv_out_path, char** result_json);

/* config_json: { instances, tolerance, violation_gap, params: {num_training,
 * num_holdout, s1_size, s2_size, u1_size, u2_size, outcome_scale,
 * stratum_shift_scale}, seed, include_violation }. Generates finite-support
 * instances, solves the bridge moments on training treatments, and checks
 * the held-out transfer identity; also demonstrates one
 * stratum-heterogeneity violation when requested. Returns BIV_ERR_NUMERIC
 * when any valid instance exceeds the gap tolerance. */
biv_status biv_verify_identification(const char* config_json, char** result_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BRIDGEIV_H */
