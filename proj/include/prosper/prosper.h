#ifndef PROSPER_PROSPER_H
#define PROSPER_PROSPER_H

/* C interface to the prosper learned-sparse-retrieval library.
 *
 * Every fallible call returns a prsp_status. On failure a description is
 * available from prsp_last_error() until the next call on the same thread.
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Strings returned through char** are released with
 * prsp_string_free. Output files are written atomically. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PRSP_BUILDING_LIBRARY)
#    define PRSP_API __declspec(dllexport)
#  else
#    define PRSP_API __declspec(dllimport)
#  endif
#else
#  define PRSP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum prsp_status {
    PRSP_OK = 0,
    PRSP_ERR_INVALID_ARGUMENT = 1,
    PRSP_ERR_IO = 2,
    PRSP_ERR_FORMAT = 3,
    PRSP_ERR_NUMERIC = 4,
    PRSP_ERR_INTERNAL = 5
} prsp_status;

typedef enum prsp_head_mode {
    PRSP_HEAD_PROSPER = 0,
    PRSP_HEAD_SPLADE_MAX = 1,
    PRSP_HEAD_NO_LRN = 2
} prsp_head_mode;

typedef enum prsp_representation {
    PRSP_REP_FINAL = 0, /* after literal compensation */
    PRSP_REP_BASIC = 1
} prsp_representation;

typedef enum prsp_mask {
    PRSP_MASK_NONE = 0,
    PRSP_MASK_LITERAL_ONLY = 1,
    PRSP_MASK_EXPANSION_ONLY = 2
} prsp_mask;

typedef enum prsp_quantization {
    PRSP_QUANT_NONE = 0,
    PRSP_QUANT_FIXED16 = 1
} prsp_quantization;

typedef enum prsp_engine {
    PRSP_ENGINE_BMM = 0,
    PRSP_ENGINE_EXHAUSTIVE = 1
} prsp_engine;

typedef struct prsp_vocab prsp_vocab;
typedef struct prsp_config prsp_config;
typedef struct prsp_model prsp_model;
typedef struct prsp_index prsp_index;

PRSP_API const char *prsp_version(void);
PRSP_API const char *prsp_last_error(void);
PRSP_API void prsp_string_free(char *s);

PRSP_API prsp_status prsp_head_mode_parse(const char *name, prsp_head_mode *out);
PRSP_API prsp_status prsp_quantization_parse(const char *name, prsp_quantization *out);

/* ---- vocabulary ---- */

/* Builds from the query and item texts of a pairs TSV plus, optionally, the
 * texts of a corpus JSONL (may be NULL). */
PRSP_API prsp_status prsp_vocab_build(const char *pairs_tsv, const char *corpus_jsonl, size_t max_size,
                                      prsp_vocab **out);
PRSP_API prsp_status prsp_vocab_load(const char *path, prsp_vocab **out);
PRSP_API prsp_status prsp_vocab_save(const prsp_vocab *vocab, const char *path);
PRSP_API size_t prsp_vocab_size(const prsp_vocab *vocab);
PRSP_API void prsp_vocab_free(prsp_vocab *vocab);

/* ---- training configuration ---- */

PRSP_API prsp_status prsp_config_new(prsp_config **out);
PRSP_API prsp_status prsp_config_load(const char *path, prsp_config **out);
PRSP_API prsp_status prsp_config_set(prsp_config *cfg, const char *key, const char *value);
PRSP_API prsp_status prsp_config_to_text(const prsp_config *cfg, char **out);
PRSP_API uint64_t prsp_config_seed(const prsp_config *cfg);
PRSP_API void prsp_config_free(prsp_config *cfg);

/* ---- model ---- */

PRSP_API prsp_status prsp_model_init(size_t vocab_size, size_t hidden, uint64_t seed, prsp_model **out);
PRSP_API prsp_status prsp_model_load(const char *path, prsp_model **out);
PRSP_API prsp_status prsp_model_save(const prsp_model *model, const char *path);
PRSP_API size_t prsp_model_vocab_size(const prsp_model *model);
PRSP_API size_t prsp_model_hidden(const prsp_model *model);
PRSP_API void prsp_model_free(prsp_model *model);

typedef struct prsp_train_summary {
    size_t steps;
    double final_loss;
    double nnz_q_mean; /* last step, basic representations */
    double nnz_d_mean;
    size_t k_q; /* window sizes in effect at the end */
    size_t k_d;
} prsp_train_summary;

/* Trains in place on a pairs TSV. log_jsonl and summary may be NULL. */
PRSP_API prsp_status prsp_train(prsp_model *model, const prsp_vocab *vocab, const char *pairs_tsv,
                                const prsp_config *cfg, prsp_head_mode mode, unsigned threads,
                                const char *log_jsonl, prsp_train_summary *summary);

typedef struct prsp_encode_options {
    prsp_head_mode mode;
    prsp_representation rep;
    prsp_mask mask;
    size_t max_len;
    unsigned threads;
} prsp_encode_options;

PRSP_API prsp_encode_options prsp_encode_options_default(void);

/* Encodes every record of a corpus JSONL into a sparse vector file. */
PRSP_API prsp_status prsp_encode_corpus(const prsp_model *model, const prsp_vocab *vocab, const char *corpus_jsonl,
                                        const prsp_encode_options *opts, const char *out_vectors);

/* ---- index and search ---- */

PRSP_API prsp_status prsp_index_build(const char *vectors_path, size_t block_size, prsp_quantization quant,
                                      prsp_index **out);
PRSP_API prsp_status prsp_bm25_index_build(const prsp_vocab *vocab, const char *corpus_jsonl, double k1, double b,
                                           double delta, size_t block_size, prsp_index **out);
PRSP_API prsp_status prsp_index_load(const char *path, prsp_index **out);
PRSP_API prsp_status prsp_index_save(const prsp_index *index, const char *path);
PRSP_API size_t prsp_index_num_docs(const prsp_index *index);
PRSP_API const char *prsp_index_doc_id(const prsp_index *index, uint32_t ord);
PRSP_API void prsp_index_free(prsp_index *index);

typedef struct prsp_hit {
    uint32_t ord;
    double score;
} prsp_hit;

/* Scores one query given as parallel term/weight arrays (terms need not be
 * sorted; duplicates are an error). Truncates to the query_terms heaviest
 * entries first. Writes up to `capacity` hits and sets *count. */
PRSP_API prsp_status prsp_index_search(const prsp_index *index, const uint32_t *terms, const float *weights,
                                       size_t n, size_t topk, size_t query_terms, prsp_engine engine,
                                       prsp_hit *hits, size_t capacity, size_t *count);

/* Searches every query of a sparse vector file and writes a run TSV. */
PRSP_API prsp_status prsp_search_run(const prsp_index *index, const char *query_vectors, size_t topk,
                                     size_t query_terms, prsp_engine engine, const char *run_out);

/* BM25 retrieval over an index from prsp_bm25_index_build; queries are a
 * corpus JSONL of raw text. */
PRSP_API prsp_status prsp_bm25_search_run(const prsp_index *index, const prsp_vocab *vocab,
                                          const char *queries_jsonl, size_t topk, const char *run_out);

/* ---- evaluation ---- */

typedef struct prsp_metrics {
    size_t num_queries;
    size_t multi_relevant_queries;
    double hit_1, hit_10, hit_100, hit_1000;
    double mrr_10;
    double recall_10, recall_100, recall_1000;
    double flops_overlap; /* negative when not computed */
} prsp_metrics;

PRSP_API prsp_status prsp_eval(const char *run_tsv, const char *qrels_tsv, prsp_metrics *out);

/* Mean query/item support overlap between two sparse vector files. */
PRSP_API prsp_status prsp_flops_overlap(const char *query_vectors, const char *item_vectors, uint64_t seed,
                                        double *out);

/* Renders metrics as a table (json = 0) or a JSON object (json != 0).
 * `only` is a comma-separated metric list such as "hit@10,mrr@10", or NULL. */
PRSP_API prsp_status prsp_metrics_format(const prsp_metrics *m, const char *only, int json, char **out);

/* ---- tooling ---- */

/* Writes step,nnz_q_on,nnz_d_on,nnz_q_off,nnz_d_off CSV from two training logs. */
PRSP_API prsp_status prsp_bench_sparsity(const char *log_on, const char *log_off, const char *csv_out);

/* Writes the planted-synonym toy dataset into `dir`. */
PRSP_API prsp_status prsp_synth_generate(const char *dir, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* PROSPER_PROSPER_H */
