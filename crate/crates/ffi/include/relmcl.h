#ifndef RELMCL_H
#define RELMCL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum RelmclStatus {
  RELMCL_STATUS_OK = 0,
  RELMCL_STATUS_NULL_POINTER = 1,
  RELMCL_STATUS_INVALID_ARGUMENT = 2,
  RELMCL_STATUS_INVALID_CONFIG = 3,
  RELMCL_STATUS_IO = 4,
  RELMCL_STATUS_PARSE = 5,
  RELMCL_STATUS_INSUFFICIENT_DATA = 6,
  RELMCL_STATUS_PANIC = 7,
} RelmclStatus;

// A trained or loaded MAE decision model.
typedef struct RelmclDecisionModel RelmclDecisionModel;

// A running filter.
typedef struct RelmclLocalizer RelmclLocalizer;

// An occupancy grid.
typedef struct RelmclMap RelmclMap;

typedef struct RelmclMapInfo {
  size_t width;
  size_t height;
  // Cell size, m.
  double resolution;
  size_t free_cells;
  size_t occupied_cells;
  // Free area, m².
  double free_area;
} RelmclMapInfo;

// Geometry of a scan passed to [`relmcl_localizer_step`].
typedef struct RelmclScanInfo {
  double angle_min;
  double angle_increment;
  double range_min;
  double range_max;
} RelmclScanInfo;

// Filter output of one cycle.
typedef struct RelmclEstimate {
  double x;
  double y;
  double theta;
  double reliability;
  // NaN when no beam passed the residual cutoff.
  double mae;
  size_t n_global_samples;
  size_t n_unknown_beams;
} RelmclEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string that must not be freed.
const char *relmcl_version(void);

// Message of the last failed call on this thread, or null. Free the
// result with [`relmcl_string_free`].
char *relmcl_last_error(void);

// Frees a string returned by this library; null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void relmcl_string_free(char *s);

// Builds one of the bundled maps by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` writable.
enum RelmclStatus relmcl_map_bundled(const char *name, double resolution, struct RelmclMap **out);

// Loads a map from a metadata file referencing a PGM image.
//
// # Safety
// `meta_path` must be a NUL-terminated string and `out` writable.
enum RelmclStatus relmcl_map_load(const char *meta_path, struct RelmclMap **out);

// # Safety
// `map` must be valid and `out` writable.
enum RelmclStatus relmcl_map_info(const struct RelmclMap *map, struct RelmclMapInfo *out);

// Frees a map; null is ignored. Localizers built from it stay valid.
//
// # Safety
// `map` must come from this library and not have been freed.
void relmcl_map_free(struct RelmclMap *map);

// Loads a decision model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum RelmclStatus relmcl_decision_model_load(const char *path, struct RelmclDecisionModel **out);

// Trains a decision model on simulated scans of `map`.
//
// # Safety
// `map` must be valid and `out` writable.
enum RelmclStatus relmcl_decision_model_train(const struct RelmclMap *map,
                                              size_t n_samples,
                                              uint64_t seed,
                                              struct RelmclDecisionModel **out);

// The model's MAE threshold, m; NaN for a null handle.
//
// # Safety
// `dm` must be valid or null.
double relmcl_decision_model_threshold(const struct RelmclDecisionModel *dm);

// # Safety
// `dm` must come from this library and not have been freed.
void relmcl_decision_model_free(struct RelmclDecisionModel *dm);

// Creates a localizer at an initial pose. `config` is optional text in
// the sectioned `key = value` format of the command-line tool.
//
// # Safety
// `map` and `dm` must be valid, `config` null or NUL-terminated, `out`
// writable.
enum RelmclStatus relmcl_localizer_new(const struct RelmclMap *map,
                                       const struct RelmclDecisionModel *dm,
                                       const char *config,
                                       double x,
                                       double y,
                                       double theta,
                                       uint64_t seed,
                                       struct RelmclLocalizer **out);

// Runs one cycle with odometry `(v, omega)` over `dt` seconds and a scan
// of `n_ranges` readings.
//
// # Safety
// `loc` must be valid, `ranges` must point to `n_ranges` doubles, `scan`
// readable and `out` writable.
enum RelmclStatus relmcl_localizer_step(struct RelmclLocalizer *loc,
                                        double v,
                                        double omega,
                                        double dt,
                                        const double *ranges,
                                        size_t n_ranges,
                                        const struct RelmclScanInfo *scan,
                                        struct RelmclEstimate *out);

// # Safety
// `loc` must come from this library and not have been freed.
void relmcl_localizer_free(struct RelmclLocalizer *loc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELMCL_H */
