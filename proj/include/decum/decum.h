/* C interface to the decumulation engine. All handles are opaque; every call
 * returns a decum_status and leaves a message in decum_last_error() on failure. */
#ifndef DECUM_DECUM_H
#define DECUM_DECUM_H

#include <stddef.h>
#include <stdint.h>

#if defined(DECUM_BUILDING_LIBRARY)
#define DECUM_API __attribute__((visibility("default")))
#else
#define DECUM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum decum_status {
    DECUM_OK = 0,
    DECUM_INVALID_ARGUMENT = 1,
    DECUM_IO = 2,
    DECUM_PARSE = 3,
    DECUM_NUMERIC = 4,
    DECUM_RANGE = 5,
    DECUM_MISMATCH = 6,
    DECUM_INTERNAL = 99
} decum_status;

typedef struct decum_config decum_config;
typedef struct decum_policy decum_policy;
typedef struct decum_stats decum_stats;

typedef void (*decum_log_fn)(const char* message, void* user);

/* Thread-local message for the last failing call on this thread. */
DECUM_API const char* decum_last_error(void);
DECUM_API const char* decum_version(void);

/* Progress messages; pass NULL to silence. */
DECUM_API void decum_set_logger(decum_log_fn fn, void* user);

DECUM_API decum_status decum_config_default(decum_config** out);
DECUM_API decum_status decum_config_load(const char* path, decum_config** out);
/* key is "section.key", e.g. "scenario.kappa". */
DECUM_API decum_status decum_config_set(decum_config* config, const char* key, const char* value);
/* Copies the textual value of "section.key". */
DECUM_API decum_status decum_config_get(const decum_config* config, const char* key, char* buffer, size_t capacity,
                                        size_t* needed);
/* Validates; warnings (one per line) are copied into `warnings` if non-NULL. */
DECUM_API decum_status decum_config_validate(const decum_config* config, char* warnings, size_t capacity);
/* Copies the resolved INI text; `needed` receives the full length including the terminator. */
DECUM_API decum_status decum_config_resolved(const decum_config* config, char* buffer, size_t capacity,
                                             size_t* needed);
DECUM_API decum_status decum_config_hash(const decum_config* config, uint64_t* hash);
DECUM_API void decum_config_free(decum_config* config);

typedef struct decum_policy_info {
    double wstar;
    double value;
    double horizon;
    int rebalances;
    double q_min;
    double q_max;
    int grid_nx;
    int grid_ny;
    size_t wealth_nodes;
    uint64_t config_hash;
    double pde_es; /* NaN when the policy was loaded from disk */
    double pde_ew;
} decum_policy_info;

/* Outer W* search and backward sweep for scenario.kappa. */
DECUM_API decum_status decum_solve(const decum_config* config, decum_policy** out);
DECUM_API decum_status decum_policy_load(const char* path, decum_policy** out);
DECUM_API decum_status decum_policy_save(const decum_policy* policy, const char* path);
DECUM_API decum_status decum_policy_info_get(const decum_policy* policy, decum_policy_info* info);
/* Controls at date n: withdrawal at pre-withdrawal wealth, allocation at post-withdrawal wealth. */
DECUM_API decum_status decum_policy_controls(const decum_policy* policy, int n, double wealth, double* withdrawal,
                                             double* allocation);
/* policy.bin plus heatmap_p.csv and heatmap_q.csv in dir. */
DECUM_API decum_status decum_write_policy_artifacts(const decum_config* config, const decum_policy* policy,
                                                    const char* dir);
DECUM_API void decum_policy_free(decum_policy* policy);

typedef struct decum_summary {
    size_t paths;
    double alpha;
    double ew;
    double ew_std_error;
    double es;
    double es_std_error;
    double var;
    double mean_terminal;
    double median_terminal;
    double mean_median_equity;
    double bang_bang_fraction;
} decum_summary;

/* Synthetic-market Monte Carlo; a NULL policy simulates the config's fixed benchmark rule. */
DECUM_API decum_status decum_simulate(const decum_config* config, const decum_policy* policy, decum_stats** out);
/* Bootstrap backtest on bootstrap.series; NULL policy as above. */
DECUM_API decum_status decum_backtest(const decum_config* config, const decum_policy* policy, decum_stats** out);
DECUM_API decum_status decum_stats_summary(const decum_stats* stats, decum_summary* out);
/* summary.json and percentiles_{wealth,withdrawal,equity}.csv in dir. */
DECUM_API decum_status decum_write_stats_artifacts(const decum_config* config, const decum_stats* stats,
                                                   const decum_policy* policy, const char* dir);
DECUM_API void decum_stats_free(decum_stats* stats);

/* frontier.csv, summary.json and one policy file per kappa in dir. */
DECUM_API decum_status decum_run_frontier(const decum_config* config, const char* dir);
/* benchmark.csv and summary.json in dir. */
DECUM_API decum_status decum_run_benchmark(const decum_config* config, const char* dir);
/* Source month of each resampled month (first `count` resamples) as CSV. */
DECUM_API decum_status decum_write_provenance(const decum_config* config, size_t count, const char* path);

#ifdef __cplusplus
}
#endif

#endif
