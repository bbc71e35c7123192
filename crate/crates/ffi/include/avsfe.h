#ifndef AVSFE_H
#define AVSFE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AvsfeStatus {
  AVSFE_STATUS_OK = 0,
  AVSFE_STATUS_NULL_POINTER = 1,
  AVSFE_STATUS_INVALID_ARGUMENT = 2,
  AVSFE_STATUS_INVALID_MESH = 3,
  AVSFE_STATUS_UNSUPPORTED = 4,
  AVSFE_STATUS_NOT_POSITIVE_DEFINITE = 5,
  AVSFE_STATUS_SOLVER_FAILURE = 6,
  AVSFE_STATUS_CONFIG_ERROR = 7,
  AVSFE_STATUS_IO_ERROR = 8,
  AVSFE_STATUS_PANIC = 9,
} AvsfeStatus;

typedef enum AvsfeElementType {
  AVSFE_ELEMENT_TYPE_QUADRILATERAL = 0,
  AVSFE_ELEMENT_TYPE_TRIANGLE = 1,
} AvsfeElementType;

typedef enum AvsfeFlux {
  AVSFE_FLUX_LAGRANGE = 0,
  AVSFE_FLUX_RAVIART_THOMAS = 1,
} AvsfeFlux;

typedef enum AvsfeApproach {
  AVSFE_APPROACH_CLASSICAL = 0,
  AVSFE_APPROACH_ALTERNATIVE = 1,
} AvsfeApproach;

/**
 * Opaque mesh handle.
 */
typedef struct AvsfeMesh AvsfeMesh;

/**
 * Result of [`avsfe_estimate`]. `qoi_error` and `eff` are NaN when the
 * exact value is unknown or the error vanishes.
 */
typedef struct AvsfeReport {
  size_t elements;
  size_t primal_dofs;
  size_t dual_dofs;
  double qoi_value;
  double qoi_error;
  double estimate;
  double eff;
} AvsfeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after success.
 * Valid until the next call into the library on the same thread.
 */
const char *avsfe_last_error(void);

/**
 * Structured `n × n` mesh of the unit square.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum AvsfeStatus avsfe_mesh_structured(enum AvsfeElementType element_type,
                                       size_t n,
                                       struct AvsfeMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from this library not yet freed.
 */
void avsfe_mesh_free(struct AvsfeMesh *mesh);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t avsfe_mesh_num_cells(const struct AvsfeMesh *mesh);

/**
 * Number of vertices, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t avsfe_mesh_num_vertices(const struct AvsfeMesh *mesh);

/**
 * Uniform refinement into a new handle.
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable.
 */
enum AvsfeStatus avsfe_mesh_refine_uniform(const struct AvsfeMesh *mesh, struct AvsfeMesh **out);

/**
 * Conforming bisection of the `len` cells listed in `marked` (triangles
 * only) into a new handle.
 *
 * # Safety
 * `mesh` must be a live handle, `marked` must point to `len` indices and
 * `out` must be writable.
 */
enum AvsfeStatus avsfe_mesh_bisect(const struct AvsfeMesh *mesh,
                                   const size_t *marked,
                                   size_t len,
                                   struct AvsfeMesh **out);

/**
 * Solves the named benchmark on `mesh` and estimates the error in a QoI.
 * `qoi` may be null for the benchmark default. When `indicators` is
 * non-null it receives one value per cell and `indicators_len` must equal
 * the cell count.
 *
 * # Safety
 * String arguments must be null-terminated; `mesh` must be a live handle;
 * `report` must be writable; `indicators` must hold `indicators_len`
 * doubles.
 */
enum AvsfeStatus avsfe_estimate(const char *benchmark,
                                const char *qoi,
                                const struct AvsfeMesh *mesh,
                                enum AvsfeFlux flux,
                                size_t p_primal,
                                size_t p_dual,
                                enum AvsfeApproach approach,
                                struct AvsfeReport *report,
                                double *indicators,
                                size_t indicators_len);

/**
 * Validates and runs a configuration given as text, writing into `out_dir`.
 *
 * # Safety
 * Both arguments must be null-terminated strings.
 */
enum AvsfeStatus avsfe_run_config(const char *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVSFE_H */
