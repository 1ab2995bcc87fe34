/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The routing-audit Authors */

/*
 * routing_audit.h - C interface to libroutingaudit.
 *
 * Every function returns an ra_status. On failure a description is
 * available from ra_last_error() until the next call on the same thread.
 * Strings returned through char** outputs are owned by the caller and
 * released with ra_string_free(). Handles are opaque; a handle may be used
 * from several threads only where noted.
 */

#ifndef ROUTING_AUDIT_H_
#define ROUTING_AUDIT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(RA_BUILDING_LIBRARY)
#define RA_API __attribute__((visibility("default")))
#else
#define RA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ra_status {
  RA_OK = 0,
  RA_ERR_OTHER = 1,
  RA_ERR_CONFIG = 2,
  RA_ERR_IO = 3,
  RA_ERR_PROVIDER = 4,
  RA_ERR_INVARIANT = 5,
  RA_ERR_DOMAIN = 6,     /* argument outside the mathematical domain */
  RA_ERR_ARGUMENT = 7    /* null pointer or malformed call */
} ra_status;

RA_API const char* ra_version(void);
RA_API const char* ra_status_string(ra_status status);
/* Message for the last failed call on this thread ("" if none). */
RA_API const char* ra_last_error(void);
RA_API void ra_string_free(char* s);

/* ---- information quantities (nats) ---------------------------------- */

RA_API ra_status ra_binary_entropy(double p, double* out);
/* *is_infinite is set to 1 (and *out to 0) when the divergence is infinite. */
RA_API ra_status ra_kl_bernoulli(double p, double q, double* out, int* is_infinite);
RA_API ra_status ra_fano_lower_bound(size_t alphabet_size, double epsilon, double* out);
RA_API ra_status ra_fano_invert(size_t alphabet_size, double info_nats, double* out);
RA_API ra_status ra_mi_bound_from_cand_acc(double cand_acc, size_t alphabet_size,
                                           double* out);
RA_API ra_status ra_wilson_interval(uint64_t successes, uint64_t n, double confidence,
                                    double* lower, double* upper);
RA_API ra_status ra_routing_efficiency(double used_nats, double available_nats,
                                       double* eta, int* dpi_violation);
/* joint is row-major rows x cols and must sum to 1. */
RA_API ra_status ra_mutual_information(const double* joint, size_t rows, size_t cols,
                                       double* out);

typedef struct ra_slack {
  double error_rate;
  double fano_bound;
  double jensen_slack;
  double confusion_slack;
  double mutual_information;
} ra_slack;

/* joint is m x m with a uniform row marginal. */
RA_API ra_status ra_slack_decompose(const double* joint, size_t m, ra_slack* out);

/* Budget test against n nulls; *pass is 1 for PASS, 0 for FLAG. Worst-case
 * bits are reported as +inf when infinite. threshold_is_confidence selects
 * the claimed-confidence form instead of tau. */
RA_API ra_status ra_budget_test(double p1, const double* p0, size_t n, double threshold,
                                int threshold_is_confidence, int* pass,
                                double* req_bits, double* obs_bits);

/* ---- channel chains ------------------------------------------------- */

typedef struct ra_chain ra_chain;

RA_API ra_status ra_chain_create(const double* prior, size_t m, ra_chain** out);
RA_API void ra_chain_destroy(ra_chain* chain);
/* Row-major inputs x outputs stochastic matrix. */
RA_API ra_status ra_chain_add_stage(ra_chain* chain, const double* matrix, size_t inputs,
                                    size_t outputs);
RA_API ra_status ra_chain_add_copy_or_noise(ra_chain* chain, double alpha,
                                            const double* noise, size_t m);
/* Re-inject V before stage `position` (== stage count: after the last). */
RA_API ra_status ra_chain_add_checkpoint(ra_chain* chain, size_t position);
RA_API ra_status ra_chain_final_mi(const ra_chain* chain, double* out);
/* MI before stage 0 and after every stage; *count receives stages+1. */
RA_API ra_status ra_chain_mi_profile(const ra_chain* chain, double* out, size_t capacity,
                                     size_t* count);
RA_API ra_status ra_chain_verify(const ra_chain* chain, int* bound_holds,
                                 int* equality_expected, int* equality_holds,
                                 double* alpha_product);

/* ---- providers (thread-safe handles) --------------------------------- */

typedef struct ra_provider ra_provider;

/* spec_json: {"provider": "simulated"|"file_cache"|"http", ...}. */
RA_API ra_status ra_provider_create(const char* spec_json, ra_provider** out);
RA_API void ra_provider_destroy(ra_provider* provider);
/* instance_json is one instances.jsonl line; *record_json receives the
 * LogprobRecord. */
RA_API ra_status ra_provider_score(ra_provider* provider, const char* instance_json,
                                   char** record_json);
RA_API ra_status ra_provider_verify(ra_provider* provider, const char* claim,
                                    const char* context, double* probability);

/* ---- pipeline ------------------------------------------------------- */

/* Run a command (gen, stage, checkpoint, budget, audit, simulate, report,
 * replay) with a JSON config. *result_json (may be NULL) receives the
 * summary, also on failure. Status values match the CLI exit codes. */
RA_API ra_status ra_run(const char* command, const char* config_json, char** result_json);
/* Static text describing every file format. */
RA_API const char* ra_schema_help(void);

#ifdef __cplusplus
}
#endif

#endif /* ROUTING_AUDIT_H_ */
