#ifndef EXPFLOW_H
#define EXPFLOW_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Reproducible-experiment orchestration engine, C interface.
 *
 * Every command returns the CLI exit-code contract:
 *   0 success, 1 stage or run failure, 2 spec or validation error, 3 usage.
 * `out` receives the human-readable report and `err` the diagnostics; both
 * are heap strings the caller releases with expflow_string_free. Either
 * pointer may be NULL when the caller does not want that channel.
 */

typedef struct expflow_engine expflow_engine;

expflow_engine* expflow_engine_new(void);
void expflow_engine_free(expflow_engine* engine);

/* Workspace defaults to EXPFLOW_WORKSPACE or the current directory; the spec
 * file defaults to <workspace>/experiment.yml. */
void expflow_set_workspace(expflow_engine* engine, const char* path);
void expflow_set_spec_path(expflow_engine* engine, const char* path);
void expflow_add_plugin_path(expflow_engine* engine, const char* dir);

/* Scaffold a new experiment at dest from a template. var_keys/var_values are
 * parallel arrays of length var_count. */
int expflow_init(expflow_engine* engine, const char* template_name,
                 const char* dest, const char* const* var_keys,
                 const char* const* var_values, size_t var_count, char** out,
                 char** err);

/* Parse, resolve, validate and cycle-check the spec. */
int expflow_check(expflow_engine* engine, char** out, char** err);

/* Execute a pipeline. target_stage may be NULL (whole pipeline). Booleans are
 * 0/1: force re-runs cached stages, dry_run plans without side effects,
 * no_cache disables skip checks. */
int expflow_run(expflow_engine* engine, const char* pipeline,
                const char* target_stage, int force, int dry_run, int no_cache,
                char** out, char** err);

/* Run the pipeline `runs` times (>= 2) with forced execution and compare
 * output digests. 0 means repeatable. */
int expflow_repro(expflow_engine* engine, const char* pipeline, int runs,
                  char** out, char** err);

int expflow_status(expflow_engine* engine, char** out, char** err);

/* format: currently "dot". */
int expflow_graph(expflow_engine* engine, const char* format, char** out,
                  char** err);

/* Remove cached artifacts and/or logs; the run ledger always survives.
 * Passing 0 for both clears both. */
int expflow_clean(expflow_engine* engine, int cache, int logs, char** out,
                  char** err);

void expflow_string_free(char* s);

const char* expflow_version(void);

#ifdef __cplusplus
}
#endif

#endif /* EXPFLOW_H */
