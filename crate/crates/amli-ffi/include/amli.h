#ifndef AMLI_H
#define AMLI_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AmliStatus {
  AMLI_STATUS_OK = 0,
  AMLI_STATUS_NULL_POINTER = 1,
  AMLI_STATUS_INVALID_ARGUMENT = 2,
  AMLI_STATUS_FORMAT = 3,
  AMLI_STATUS_IO = 4,
  AMLI_STATUS_GENERATION = 5,
  AMLI_STATUS_BUILD = 6,
  AMLI_STATUS_NUMERICAL = 7,
  AMLI_STATUS_TOO_LARGE = 8,
  AMLI_STATUS_INDEFINITE = 9,
  AMLI_STATUS_NOT_CONVERGED = 10,
  AMLI_STATUS_PANIC = 11,
} AmliStatus;

/**
 * Recursion variant for [`amli_solver_new`].
 */
typedef enum AmliVariant {
  AMLI_VARIANT_ORDINARY = 0,
  AMLI_VARIANT_MODIFIED = 1,
} AmliVariant;

/**
 * A graph, optionally carrying lattice coordinates.
 */
typedef struct AmliGraph AmliGraph;

/**
 * A built AMLI preconditioner bound to its graph.
 */
typedef struct AmliSolver AmliSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call on the same thread.
 */
const char *amli_last_error_message(void);

/**
 * Builds a graph from `m` edges given as parallel endpoint arrays.
 *
 * # Safety
 * `src` and `dst` must point to `m` readable values; `out` must be writable.
 */
enum AmliStatus amli_graph_new(size_t n,
                               const size_t *src,
                               const size_t *dst,
                               size_t m,
                               struct AmliGraph **out);

/**
 * Builds a tensor grid with `ndim` extents and attaches its coordinates.
 *
 * # Safety
 * `dims` must point to `ndim` readable values; `out` must be writable.
 */
enum AmliStatus amli_graph_grid(const size_t *dims, size_t ndim, struct AmliGraph **out);

/**
 * Reads a Matrix Market file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AmliStatus amli_graph_load(const char *path, struct AmliGraph **out);

/**
 * Writes a Matrix Market file.
 *
 * # Safety
 * `g` must come from this library; `path` must be a NUL-terminated string.
 */
enum AmliStatus amli_graph_save(const struct AmliGraph *g, const char *path);

/**
 * Number of vertices, or 0 for NULL.
 *
 * # Safety
 * `g` must be NULL or come from this library.
 */
size_t amli_graph_num_vertices(const struct AmliGraph *g);

/**
 * Number of edges, or 0 for NULL.
 *
 * # Safety
 * `g` must be NULL or come from this library.
 */
size_t amli_graph_num_edges(const struct AmliGraph *g);

/**
 * `y = A x` for the graph Laplacian.
 *
 * # Safety
 * `x` and `y` must hold `n` values each.
 */
enum AmliStatus amli_laplacian_apply(const struct AmliGraph *g,
                                     const double *x,
                                     double *y,
                                     size_t n);

/**
 * # Safety
 * `g` must be NULL or come from this library and not be used afterwards.
 */
void amli_graph_free(struct AmliGraph *g);

/**
 * Builds the preconditioner. Graphs with coordinates use aligned matchings;
 * others use random maximal matchings drawn from `seed`.
 *
 * # Safety
 * `g` must come from this library; `out` must be writable.
 */
enum AmliStatus amli_solver_new(const struct AmliGraph *g,
                                enum AmliVariant variant,
                                uint64_t seed,
                                struct AmliSolver **out);

/**
 * Number of levels including the coarsest, or 0 for NULL.
 *
 * # Safety
 * `s` must be NULL or come from this library.
 */
size_t amli_solver_num_levels(const struct AmliSolver *s);

/**
 * `z = B^{-1} r`, with `r` projected onto mean-zero vectors first.
 *
 * # Safety
 * `r` and `z` must hold `n` values each.
 */
enum AmliStatus amli_solver_apply(const struct AmliSolver *s, const double *r, double *z, size_t n);

/**
 * Solves `A x = f` by preconditioned CG from zero, to relative
 * preconditioned residual `tol`. The mean of `f` is discarded and `x` has
 * zero mean. Returns `NotConverged` when `max_iter` is reached; `x` then
 * holds the last iterate.
 *
 * # Safety
 * `f` and `x` must hold `n` values; `iterations` may be NULL.
 */
enum AmliStatus amli_solver_solve(const struct AmliSolver *s,
                                  const double *f,
                                  double *x,
                                  size_t n,
                                  double tol,
                                  size_t max_iter,
                                  size_t *iterations);

/**
 * # Safety
 * `s` must be NULL or come from this library and not be used afterwards.
 */
void amli_solver_free(struct AmliSolver *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMLI_H */
