/* ratnmt — query-translation NMT with a relevance-based auxiliary task,
 * evaluated through a cross-lingual retrieval loop.
 *
 * C API over the C++ core. All functions return rnt_status; on failure
 * rnt_last_error() holds a one-line diagnostic for the calling thread.
 * Handles are opaque and must be released with their _close/_free function.
 */
#ifndef RATNMT_H
#define RATNMT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rnt_status {
  RNT_OK = 0,
  RNT_ERR_USAGE = 1,    /* bad arguments or configuration */
  RNT_ERR_DATA = 2,     /* malformed or missing input data */
  RNT_ERR_INTERNAL = 3, /* invariant violation; please report */
} rnt_status;

const char* rnt_version(void);

/* Thread-local message describing the most recent failure. */
const char* rnt_last_error(void);

/* ---- run configuration ------------------------------------------------ */

typedef struct rnt_config rnt_config;

rnt_config* rnt_config_new(void);
void rnt_config_free(rnt_config* cfg);

/* Loads key=value lines; '#' comments ignored. Later set() calls override. */
rnt_status rnt_config_load(rnt_config* cfg, const char* path);
rnt_status rnt_config_set(rnt_config* cfg, const char* key, const char* value);
/* Returns NULL when the key is unset. The pointer is valid until the next
 * call on this config. */
const char* rnt_config_get(const rnt_config* cfg, const char* key);

/* ---- pipeline stages ---------------------------------------------------
 * Each stage reads its inputs and parameters from the config, writes its
 * artifacts under workdir, and is a no-op when inputs are unchanged (pass
 * force=1 to override). message (optional) receives a one-line summary valid
 * until the next stage call on the calling thread. */

rnt_status rnt_run_prep(const rnt_config* cfg, const char** message);
rnt_status rnt_run_index_build(const rnt_config* cfg, const char** message);
rnt_status rnt_run_ratgen(const rnt_config* cfg, const char** message);
rnt_status rnt_run_train_baseline(const rnt_config* cfg, const char** message);
rnt_status rnt_run_train_multitask(const rnt_config* cfg, const char** message);
rnt_status rnt_run_translate(const rnt_config* cfg, const char** message);
rnt_status rnt_run_retrieve(const rnt_config* cfg, const char** message);
rnt_status rnt_run_eval(const rnt_config* cfg, const char** message);
rnt_status rnt_run_synth(const rnt_config* cfg, const char** message);

/* ---- direct index access ---------------------------------------------- */

typedef struct rnt_index rnt_index;

rnt_status rnt_index_open(const char* path, rnt_index** out);
void rnt_index_close(rnt_index* index);
int64_t rnt_index_doc_count(const rnt_index* index);
int64_t rnt_index_total_tokens(const rnt_index* index);

typedef struct rnt_ranking rnt_ranking;

/* query: whitespace-separated, already-normalized tokens. */
rnt_status rnt_index_search(const rnt_index* index, const char* query, int k, double mu,
                            rnt_ranking** out);
void rnt_ranking_free(rnt_ranking* ranking);
int64_t rnt_ranking_size(const rnt_ranking* ranking);
const char* rnt_ranking_doc_id(const rnt_ranking* ranking, int64_t i);
double rnt_ranking_score(const rnt_ranking* ranking, int64_t i);

/* ---- direct model access ----------------------------------------------- */

typedef struct rnt_model rnt_model;

rnt_status rnt_model_open(const char* checkpoint_path, const char* vocab_tsv,
                          const char* src_vocab_tsv, rnt_model** out);
void rnt_model_close(rnt_model* model);

/* source: whitespace-separated normalized source tokens. On success *out is a
 * malloc'd whitespace-joined token string; release with rnt_string_free. */
rnt_status rnt_model_translate(const rnt_model* model, const char* source, int beam_width,
                               char** out);
void rnt_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RATNMT_H */
