#ifndef SQFLOW_H
#define SQFLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum SqflowStatus {
  SQFLOW_STATUS_OK = 0,
  SQFLOW_STATUS_NULL_POINTER = 1,
  SQFLOW_STATUS_INVALID_ARGUMENT = 2,
  SQFLOW_STATUS_VALIDATION = 3,
  SQFLOW_STATUS_PANIC = 4,
} SqflowStatus;

/**
 * Grading convention.
 */
typedef enum SqflowMode {
  SQFLOW_MODE_KH = 0,
  SQFLOW_MODE_SLN = 1,
} SqflowMode;

/**
 * An owned glued diagram.
 */
typedef struct SqflowDiagram SqflowDiagram;

/**
 * An owned computation result and its JSON rendering.
 */
typedef struct SqflowReport SqflowReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next
 * failing call. Never null.
 */
const char *sqflow_last_error(void);

/**
 * Pretzel diagram with `len` indices.
 *
 * # Safety
 * `indices` must point to `len` readable values and `out` must be writable.
 */
enum SqflowStatus sqflow_diagram_pretzel(const int32_t *indices,
                                         size_t len,
                                         struct SqflowDiagram **out);

/**
 * Torus link: closure of the braid `(s_1 ... s_{strands-1})^power`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SqflowStatus sqflow_diagram_torus(size_t strands, size_t power, struct SqflowDiagram **out);

/**
 * Diagram from the JSON diagram format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum SqflowStatus sqflow_diagram_parse(const char *json, struct SqflowDiagram **out);

/**
 * Number of tangles of a diagram.
 *
 * # Safety
 * `d` must be a live diagram handle or null.
 */
size_t sqflow_diagram_tangles(const struct SqflowDiagram *d);

/**
 * # Safety
 * `d` must come from this library and not be used afterwards.
 */
void sqflow_diagram_free(struct SqflowDiagram *d);

/**
 * Cohomology of the selected quantum degrees (all when `qs` is null), with
 * Sq^2 and decompositions when `steenrod` is set.
 *
 * # Safety
 * `d` must be a live diagram, `qs` null or `nq` readable values, and
 * `out` writable.
 */
enum SqflowStatus sqflow_compute(const struct SqflowDiagram *d,
                                 uint8_t n,
                                 enum SqflowMode mode,
                                 const int64_t *qs,
                                 size_t nq,
                                 bool steenrod,
                                 struct SqflowReport **out);

/**
 * JSON rendering of a report, owned by the report.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
const char *sqflow_report_json(const struct SqflowReport *r);

/**
 * Rank of Sq^2 summed over all degrees of quantum degree `q`; zero when
 * `q` was not computed or had no Steenrod data.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
size_t sqflow_report_sq2_rank(const struct SqflowReport *r, int64_t q);

/**
 * # Safety
 * `r` must come from this library and not be used afterwards.
 */
void sqflow_report_free(struct SqflowReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQFLOW_H */
