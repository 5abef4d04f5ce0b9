#ifndef STRATA_H
#define STRATA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Solution method; `Deck` keeps the deck's SOLVER METHOD.
 */
typedef enum StrataMethod {
  STRATA_METHOD_DECK = 0,
  STRATA_METHOD_FIM = 1,
  STRATA_METHOD_IMPEC = 2,
  STRATA_METHOD_CDDM_FIM = 3,
  STRATA_METHOD_ADDM_FIM = 4,
} StrataMethod;

typedef enum StrataStatus {
  STRATA_STATUS_OK = 0,
  STRATA_STATUS_NULL_POINTER = 1,
  STRATA_STATUS_INVALID_UTF8 = 2,
  STRATA_STATUS_IO = 3,
  STRATA_STATUS_PARSE = 4,
  STRATA_STATUS_VALIDATION = 5,
  STRATA_STATUS_SOLVER = 6,
  STRATA_STATUS_BUFFER_TOO_SMALL = 7,
  STRATA_STATUS_PANIC = 8,
} StrataStatus;

/**
 * A parsed deck.
 */
typedef struct StrataDeck StrataDeck;

/**
 * A simulation in progress.
 */
typedef struct StrataSim StrataSim;

/**
 * Run totals; wasted iterations are included in the totals.
 */
typedef struct StrataStats {
  size_t steps;
  size_t cuts;
  size_t nr_iters;
  size_t nr_wasted;
  size_t ls_iters;
  size_t ls_wasted;
  size_t nr_local;
  size_t ls_local;
} StrataStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t strata_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *strata_version(void);

/**
 * Parses deck text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum StrataStatus strata_deck_parse(const char *text, struct StrataDeck **out);

/**
 * Reads and parses a deck file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum StrataStatus strata_deck_load(const char *path, struct StrataDeck **out);

/**
 * Checks the deck's invariants. On violations returns `Validation`, sets
 * `*count` to their number and the error message to all of them, one per
 * line.
 *
 * # Safety
 * `deck` must be a live handle; `count` must be null or writable.
 */
enum StrataStatus strata_deck_validate(const struct StrataDeck *deck, size_t *count);

/**
 * Writes the canonical deck text into `buf` (NUL terminated). `*needed`
 * receives the text length plus one; `BufferTooSmall` when `len` is less.
 *
 * # Safety
 * `deck` must be a live handle; `buf` valid for `len` bytes or null;
 * `needed` writable or null.
 */
enum StrataStatus strata_deck_serialize(const struct StrataDeck *deck,
                                        char *buf,
                                        size_t len,
                                        size_t *needed);

/**
 * # Safety
 * `deck` must be null or a handle not yet freed.
 */
void strata_deck_free(struct StrataDeck *deck);

/**
 * Builds and initializes a simulation from a validated copy of `deck`.
 * `workers == 0` keeps the deck's worker count.
 *
 * # Safety
 * `deck` must be a live handle; `out` must be writable.
 */
enum StrataStatus strata_sim_new(const struct StrataDeck *deck,
                                 size_t workers,
                                 enum StrataMethod method,
                                 struct StrataSim **out);

/**
 * Advances one accepted time step. `*done` becomes true once the schedule
 * is complete (no step is taken then).
 *
 * # Safety
 * `sim` must be a live handle; `done` writable or null.
 */
enum StrataStatus strata_sim_step(struct StrataSim *sim, bool *done);

/**
 * Runs the rest of the schedule.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum StrataStatus strata_sim_run(struct StrataSim *sim);

/**
 * Current simulation time in days; NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double strata_sim_time(const struct StrataSim *sim);

/**
 * Number of active cells; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t strata_sim_cell_count(const struct StrataSim *sim);

/**
 * Number of phases; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t strata_sim_phase_count(const struct StrataSim *sim);

/**
 * Copies cell pressures (Pa) in active-cell order; `len` must be at least
 * the cell count.
 *
 * # Safety
 * `sim` must be a live handle; `buf` valid for `len` values.
 */
enum StrataStatus strata_sim_copy_pressure(const struct StrataSim *sim, double *buf, size_t len);

/**
 * Copies saturations, phase-fastest (`cell * n_phases + phase`), phases
 * in the order WATER, OIL, GAS restricted to those present.
 *
 * # Safety
 * `sim` must be a live handle; `buf` valid for `len` values.
 */
enum StrataStatus strata_sim_copy_saturation(const struct StrataSim *sim, double *buf, size_t len);

/**
 * Pore-volume weighted average pressure (Pa); NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double strata_sim_field_pressure(const struct StrataSim *sim);

/**
 * # Safety
 * `sim` must be a live handle; `out` writable.
 */
enum StrataStatus strata_sim_stats(const struct StrataSim *sim, struct StrataStats *out);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void strata_sim_free(struct StrataSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATA_H */
