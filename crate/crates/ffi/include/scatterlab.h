#ifndef SCATTERLAB_H
#define SCATTERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_INVALID_TABLE = 3,
  SL_STATUS_CONFIG = 4,
  SL_STATUS_UNSUPPORTED = 5,
  SL_STATUS_TRAPPED = 6,
  SL_STATUS_DEGENERATE_START = 7,
  SL_STATUS_NOT_ON_BOUNDARY = 8,
  SL_STATUS_GRAZING_EXIT = 9,
  SL_STATUS_DEGENERATE_SET = 10,
  SL_STATUS_TOO_MANY_TRAPPED = 11,
  SL_STATUS_BUFFER_TOO_SMALL = 12,
  SL_STATUS_IO = 13,
  SL_STATUS_INTERNAL = 14,
  SL_STATUS_PANIC = 15,
} SlStatus;

/**
 * Opaque billiard table.
 */
typedef struct SlTable SlTable;

typedef struct SlVolumes {
  double vol_m;
  double vol_dm;
} SlVolumes;

typedef struct SlMeanFreePath {
  double prediction;
  double mean;
  double stderr;
  uint64_t count;
  double relative_gap;
  double z_score;
  double excluded_fraction;
  double vol_m;
  double vol_dm;
} SlMeanFreePath;

typedef struct SlPhasePoint {
  double q[4];
  double v[4];
} SlPhasePoint;

typedef struct SlChord {
  struct SlPhasePoint entry;
  struct SlPhasePoint exit;
  double length;
  /**
   * Cosine between the exit velocity and the inward normal; negative for
   * a transversal exit.
   */
  double exit_cos_in;
  uint32_t entry_piece;
  uint32_t exit_piece;
  /**
   * Lattice translate of the exit piece (flat torus only).
   */
  int32_t exit_image[3];
  /**
   * Nonzero when the chord starts or ends in the grazing band.
   */
  uint8_t degenerate;
} SlChord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `sl_*` call on the same thread.
 */
const char *sl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Builds a named preset table, e.g. `"disk"` or `"torus-two-balls"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_table_from_preset(const char *name, struct SlTable **out);

/**
 * Builds a table from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_table_from_toml(const char *toml, struct SlTable **out);

/**
 * Builds a table from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SlStatus sl_table_from_file(const char *path, struct SlTable **out);

/**
 * Releases a table. NULL is ignored.
 *
 * # Safety
 * `table` must come from `sl_table_from_*` and not be used afterwards.
 */
void sl_table_free(struct SlTable *table);

/**
 * Intrinsic dimension n of the table, or 0 for NULL.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
uint32_t sl_table_dim(const struct SlTable *table);

/**
 * Number of meaningful chart coordinates in `SlPhasePoint::q`.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
uint32_t sl_table_chart_len(const struct SlTable *table);

/**
 * Domain volume and boundary volume.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum SlStatus sl_domain_volumes(const struct SlTable *table, struct SlVolumes *out);

/**
 * Total cosine-measure mass of the inward boundary bundle.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum SlStatus sl_trajectory_space_volume(const struct SlTable *table, double *out);

/**
 * Monte Carlo mean chord length against the volume prediction.
 * Deterministic in `seed` for any worker count.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum SlStatus sl_mean_free_path(const struct SlTable *table,
                                uint64_t samples,
                                uint64_t seed,
                                struct SlMeanFreePath *out);

/**
 * Follows an inward boundary phase point to the next boundary hit.
 * On `GrazingExit` the chord is still written.
 *
 * # Safety
 * `table` must be a live handle; `z` readable; `out` writable.
 */
enum SlStatus sl_causality_map(const struct SlTable *table,
                               const struct SlPhasePoint *z,
                               struct SlChord *out);

/**
 * One elastic bounce: chord to the next hit, then reflection.
 * `chord` may be NULL.
 *
 * # Safety
 * `table` must be a live handle; `z` readable; `next` writable; `chord`
 * NULL or writable.
 */
enum SlStatus sl_billiard_map(const struct SlTable *table,
                              const struct SlPhasePoint *z,
                              struct SlPhasePoint *next,
                              struct SlChord *chord);

/**
 * Draws `count` inward boundary phase points from the normalised cosine
 * measure into `out`. `total_mass` (may be NULL) receives the measure's
 * total mass.
 *
 * # Safety
 * `table` must be a live handle; `out` must hold `capacity` elements.
 */
enum SlStatus sl_sample(const struct SlTable *table,
                        size_t count,
                        uint64_t seed,
                        struct SlPhasePoint *out,
                        size_t capacity,
                        double *total_mass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCATTERLAB_H */
