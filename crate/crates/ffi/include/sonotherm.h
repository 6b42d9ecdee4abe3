#ifndef SONOTHERM_H
#define SONOTHERM_H

/* Generated by cbindgen from sonotherm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Drive envelope selector for [`st_simulate`].
 */
typedef enum StEnvelope {
  /**
   * Carrier at full amplitude for the whole run.
   */
  ST_ENVELOPE_STATIC = 0,
  /**
   * Square-wave on/off modulation; frequency and duty come from the
   * scene config (50 Hz / 0.9 when the config envelope is static).
   */
  ST_ENVELOPE_SQUARE = 1,
} StEnvelope;

/**
 * Status code returned by every fallible API call.
 */
typedef enum StStatus {
  ST_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  ST_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ST_STATUS_INVALID_UTF8 = 2,
  /**
   * Configuration file or parameter validation failed.
   */
  ST_STATUS_CONFIG_ERROR = 3,
  /**
   * Solver or I/O failure at run time.
   */
  ST_STATUS_RUNTIME_ERROR = 4,
  /**
   * An index was outside the valid range.
   */
  ST_STATUS_INDEX_OUT_OF_RANGE = 5,
  /**
   * A panic was caught at the FFI boundary.
   */
  ST_STATUS_PANIC_CAUGHT = 6,
} StStatus;

/**
 * Opaque simulation result (ΔT time series plus snapshot maps).
 */
typedef struct StRun StRun;

/**
 * Opaque loaded scene (assembly, medium, skin, grid, solver settings).
 */
typedef struct StScene StScene;

/**
 * Scene geometry/medium/skin summary filled by [`st_scene_info`].
 */
typedef struct StSceneInfo {
  size_t units;
  size_t enabled_units;
  size_t transducers;
  size_t enabled_transducers;
  double wavelength_m;
  double wavenumber_rad_m;
  double focus_m[3];
  double absorbed_fraction;
} StSceneInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *st_version(void);

/**
 * Message of the most recent failure on this thread. Valid until the next
 * failing call on the same thread; never NULL.
 */
const char *st_last_error_message(void);

/**
 * Load a scene from a JSON config file. On success `*out` owns the scene;
 * release it with [`st_scene_free`].
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid for a
 * single pointer write.
 */
enum StStatus st_scene_load(const char *path, struct StScene **out);

/**
 * Release a scene created by [`st_scene_load`]. NULL is a no-op.
 *
 * # Safety
 * `scene` must be a pointer previously returned by [`st_scene_load`] and
 * not freed since.
 */
void st_scene_free(struct StScene *scene);

/**
 * Fill `info` with scene counts and derived constants.
 *
 * # Safety
 * `scene` must be a live scene handle; `info` must be valid for writes.
 */
enum StStatus st_scene_info(const struct StScene *scene, struct StSceneInfo *info);

/**
 * Set the absorbed fraction η used by subsequent simulations.
 *
 * # Safety
 * `scene` must be a live scene handle.
 */
enum StStatus st_scene_set_absorbed_fraction(struct StScene *scene, double eta);

/**
 * Complex pressure (Pa) of the focused field at a point.
 *
 * # Safety
 * `scene` must be a live scene handle; `re`/`im` must be valid for writes.
 */
enum StStatus st_pressure_at(const struct StScene *scene,
                             double x,
                             double y,
                             double z,
                             double *re,
                             double *im);

/**
 * Time-averaged intensity (W/m²) of the focused field at a point.
 *
 * # Safety
 * `scene` must be a live scene handle; `out` must be valid for writes.
 */
enum StStatus st_intensity_at(const struct StScene *scene,
                              double x,
                              double y,
                              double z,
                              double *out);

/**
 * Fit the absorbed fraction so a static run reaches `target_dt_c` at
 * `target_t_s`, store it on the scene and return it through `eta_out`.
 *
 * # Safety
 * `scene` must be a live scene handle; `eta_out` must be valid for writes.
 */
enum StStatus st_calibrate(struct StScene *scene,
                           double target_dt_c,
                           double target_t_s,
                           double *eta_out);

/**
 * Run the thermal simulation. `snapshot_times_s` may be NULL when
 * `n_snapshots` is 0. On success `*out` owns the run; release it with
 * [`st_run_free`].
 *
 * # Safety
 * `scene` must be a live scene handle; `snapshot_times_s` must point to
 * `n_snapshots` readable doubles (or be NULL when `n_snapshots` is 0);
 * `out` must be valid for a single pointer write.
 */
enum StStatus st_simulate(const struct StScene *scene,
                          enum StEnvelope envelope,
                          double duration_s,
                          const double *snapshot_times_s,
                          size_t n_snapshots,
                          struct StRun **out);

/**
 * Release a run created by [`st_simulate`]. NULL is a no-op.
 *
 * # Safety
 * `run` must be a pointer previously returned by [`st_simulate`] and not
 * freed since.
 */
void st_run_free(struct StRun *run);

/**
 * Number of recorded time samples; 0 for NULL.
 *
 * # Safety
 * `run` must be a live run handle or NULL.
 */
size_t st_run_sample_count(const struct StRun *run);

/**
 * Read sample `index` of the probe ΔT series.
 *
 * # Safety
 * `run` must be a live run handle; `time_s`/`delta_t_c` must be valid for
 * writes.
 */
enum StStatus st_run_sample(const struct StRun *run,
                            size_t index,
                            double *time_s,
                            double *delta_t_c);

/**
 * Probe ΔT at the final recorded time.
 *
 * # Safety
 * `run` must be a live run handle; `out` must be valid for writes.
 */
enum StStatus st_run_final_delta_t(const struct StRun *run, double *out);

/**
 * First time the probe ΔT reaches `threshold_c`, linearly interpolated.
 * `*reached` is false when the series never crosses (then `*t_out` is 0).
 *
 * # Safety
 * `run` must be a live run handle; `reached`/`t_out` must be valid for
 * writes.
 */
enum StStatus st_run_time_to_threshold(const struct StRun *run,
                                       double threshold_c,
                                       bool *reached,
                                       double *t_out);

/**
 * Export the run (timeseries.csv, snapshot maps, meta.json) into a
 * directory, creating it if needed.
 *
 * # Safety
 * `run` must be a live run handle; `out_dir` must be a valid
 * NUL-terminated string.
 */
enum StStatus st_run_export(const struct StRun *run, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SONOTHERM_H */
