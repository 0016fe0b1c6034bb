#ifndef GQE_H
#define GQE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  GQE_STATUS_OK = 0,
  GQE_STATUS_NULL_POINTER = 1,
  GQE_STATUS_INVALID_UTF8 = 2,
  GQE_STATUS_ARGUMENT = 3,
  GQE_STATUS_PARSE = 4,
  GQE_STATUS_SCHEMA = 5,
  GQE_STATUS_INVALID_QUERY = 6,
  GQE_STATUS_IO = 7,
  GQE_STATUS_VERSION_MISMATCH = 8,
  GQE_STATUS_CAPACITY = 9,
  GQE_STATUS_NUMERIC = 10,
  GQE_STATUS_BUFFER_TOO_SMALL = 11,
  GQE_STATUS_OTHER = 12,
  GQE_STATUS_PANIC = 13,
} GqeStatus;

/**
 * A typed knowledge graph.
 */
typedef struct GqeGraph GqeGraph;

/**
 * Model parameters bound to the graph they were loaded against.
 */
typedef struct GqeModel GqeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gqe_version(void);

/**
 * Copies the calling thread's last error message (empty after a success).
 *
 * # Safety
 * `buf` must point to `capacity` writable bytes or be null; `needed` must
 * be a valid pointer.
 */
GqeStatus gqe_last_error_message(char *buf, size_t capacity, size_t *needed);

/**
 * Loads a graph directory written by `gqe ingest`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` a valid pointer.
 */
GqeStatus gqe_graph_load(const char *dir, GqeGraph **out);

/**
 * Generates a synthetic graph from a spec such as `blocks:3,100,0.5`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` a valid pointer.
 */
GqeStatus gqe_graph_synthetic(const char *spec, uint64_t seed, GqeGraph **out);

/**
 * Releases a graph. Models created from it stay valid. Null is ignored.
 *
 * # Safety
 * `graph` must come from this library and not be freed twice.
 */
void gqe_graph_free(GqeGraph *graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be a live handle or null.
 */
size_t gqe_graph_node_count(const GqeGraph *graph);

/**
 * Number of materialized edges (inverses included), or 0 for a null handle.
 *
 * # Safety
 * `graph` must be a live handle or null.
 */
size_t gqe_graph_edge_count(const GqeGraph *graph);

/**
 * Looks up a node id by name.
 *
 * # Safety
 * `graph` must be a live handle, `name` a NUL-terminated string and
 * `node` a valid pointer.
 */
GqeStatus gqe_graph_node_id(const GqeGraph *graph, const char *name, uint32_t *node);

/**
 * Copies a node's name.
 *
 * # Safety
 * `graph` must be a live handle; see the module notes for buffers.
 */
GqeStatus gqe_graph_node_name(const GqeGraph *graph,
                              uint32_t node,
                              char *buf,
                              size_t capacity,
                              size_t *needed);

/**
 * Loads a checkpoint written by `gqe train` against `graph`'s schema.
 *
 * # Safety
 * `graph` must be a live handle, `path` a NUL-terminated string and `out`
 * a valid pointer.
 */
GqeStatus gqe_model_load(const GqeGraph *graph, const char *path, GqeModel **out);

/**
 * Builds the exact one-hot parameters of `graph`.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
GqeStatus gqe_model_exact(const GqeGraph *graph, GqeModel **out);

/**
 * Writes the model as a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
GqeStatus gqe_model_save(const GqeModel *model, const char *path);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void gqe_model_free(GqeModel *model);

/**
 * Embedding dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t gqe_model_dim(const GqeModel *model);

/**
 * 1 for exact-mode models, 0 otherwise (including null).
 *
 * # Safety
 * `model` must be a live handle or null.
 */
int32_t gqe_model_is_exact(const GqeModel *model);

/**
 * Encodes a query (JSON text) into `out`, which holds `capacity` doubles.
 *
 * # Safety
 * `model` must be a live handle, `query_json` a NUL-terminated string and
 * `out` must point to `capacity` writable doubles.
 */
GqeStatus gqe_embed_query(const GqeModel *model,
                          const char *query_json,
                          double *out,
                          size_t capacity);

/**
 * Ranks the nodes of the query's target type by score and writes the best
 * `top_k` node ids and scores (descending score, ties by ascending id).
 * `written` receives the number of rows filled.
 *
 * # Safety
 * `model` must be a live handle, `query_json` a NUL-terminated string,
 * `nodes` and `scores` must each point to `top_k` writable elements (or
 * may be null when `top_k` is 0), and `written` must be valid.
 */
GqeStatus gqe_answer(const GqeModel *model,
                     const char *query_json,
                     size_t top_k,
                     uint32_t *nodes,
                     double *scores,
                     size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GQE_H */
