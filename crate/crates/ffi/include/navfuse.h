#ifndef NAVFUSE_H
#define NAVFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NAVFUSE_CELLS 64

typedef enum NavfuseMode {
  NAVFUSE_MODE_GLOBAL = 0,
  NAVFUSE_MODE_LOCAL = 1,
  NAVFUSE_MODE_FUSED = 2,
} NavfuseMode;

typedef enum NavfuseOutcome {
  NAVFUSE_OUTCOME_SUCCESS = 0,
  NAVFUSE_OUTCOME_COLLISION = 1,
  NAVFUSE_OUTCOME_TIMEOUT = 2,
} NavfuseOutcome;

typedef enum NavfuseSection {
  NAVFUSE_SECTION_NONE = 0,
  NAVFUSE_SECTION_STRAIGHT = 1,
  NAVFUSE_SECTION_TURN = 2,
} NavfuseSection;

typedef enum NavfuseStatus {
  NAVFUSE_STATUS_OK = 0,
  NAVFUSE_STATUS_NULL_POINTER = 1,
  NAVFUSE_STATUS_INVALID_ARGUMENT = 2,
  NAVFUSE_STATUS_INVALID_FRAME = 3,
  NAVFUSE_STATUS_CONFIG = 4,
  NAVFUSE_STATUS_IO = 5,
  NAVFUSE_STATUS_PANIC = 6,
} NavfuseStatus;

typedef enum NavfuseSteering {
  NAVFUSE_STEERING_LEFT = 0,
  NAVFUSE_STEERING_STRAIGHT = 1,
  NAVFUSE_STEERING_RIGHT = 2,
} NavfuseSteering;

typedef enum NavfuseZone {
  NAVFUSE_ZONE_LEFT_TURN = 0,
  NAVFUSE_ZONE_NO_TURN = 1,
  NAVFUSE_ZONE_RIGHT_TURN = 2,
} NavfuseZone;

/**
 * Pipeline mode plus every parameter a trial needs.
 */
typedef struct NavfusePipeline NavfusePipeline;

/**
 * A scenario world.
 */
typedef struct NavfuseWorld NavfuseWorld;

/**
 * Row-major 8×8 depth frame in mm; bit `r * 8 + c` of `valid_mask` marks a
 * valid cell.
 */
typedef struct NavfuseFrame {
  uint16_t cells[NAVFUSE_CELLS];
  uint64_t valid_mask;
  uint64_t tick;
} NavfuseFrame;

typedef struct NavfuseSmoothed {
  float cells[NAVFUSE_CELLS];
  uint32_t mac_count;
} NavfuseSmoothed;

typedef struct NavfuseLocalPercept {
  uint8_t x_dmax;
  enum NavfuseZone zone;
  float d_c;
} NavfuseLocalPercept;

typedef struct NavfuseCommand {
  bool agree;
  /**
   * deg/s, positive = left.
   */
  double yaw_rate;
  /**
   * m/s.
   */
  double v_f;
} NavfuseCommand;

typedef struct NavfusePose {
  double x;
  double y;
  double heading;
  double radius;
} NavfusePose;

typedef struct NavfuseTrialResult {
  enum NavfuseOutcome outcome;
  enum NavfuseSection failed_section;
  uint64_t ticks;
  struct NavfusePose final_pose;
} NavfuseTrialResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or an empty string.
 * The pointer stays valid until the next navfuse call on the same thread.
 */
const char *navfuse_last_error(void);

const char *navfuse_version(void);

/**
 * 5×5 Gaussian smoothing (σ = 1) with zero padding.
 *
 * # Safety
 * `frame` and `out` must be null or valid pointers.
 */
enum NavfuseStatus navfuse_smooth(const struct NavfuseFrame *frame, struct NavfuseSmoothed *out);

/**
 * Freest column, its zone and the central distance of a raw frame.
 *
 * # Safety
 * `frame` and `out` must be null or valid pointers.
 */
enum NavfuseStatus navfuse_local_percept(const struct NavfuseFrame *frame,
                                         struct NavfuseLocalPercept *out);

/**
 * Standard fusion table lookup. `steering` is a [`NavfuseSteering`] value
 * and `zone` a [`NavfuseZone`] value.
 *
 * # Safety
 * `agree` and `yaw_rate` must be null or valid pointers.
 */
enum NavfuseStatus navfuse_fuse(int32_t steering,
                                int32_t zone,
                                double yaw_t,
                                bool *agree,
                                double *yaw_rate);

/**
 * Gated forward speed from the standard distance schedule.
 *
 * # Safety
 * `v_f` must be null or a valid pointer.
 */
enum NavfuseStatus navfuse_speed(bool agree, float d_c, double v_t, double *v_f);

/**
 * New pipeline with default parameters except the ones given.
 *
 * # Safety
 * `out` must be null or a valid pointer.
 */
enum NavfuseStatus navfuse_pipeline_new(int32_t mode,
                                        double v_t,
                                        double yaw_t,
                                        double eta,
                                        struct NavfusePipeline **out);

/**
 * Pipeline built from a TOML run configuration file.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or a
 * valid pointer.
 */
enum NavfuseStatus navfuse_pipeline_from_config(const char *path, struct NavfusePipeline **out);

/**
 * # Safety
 * `p` must be null or a handle from a `navfuse_pipeline_*` constructor that
 * has not been freed.
 */
void navfuse_pipeline_free(struct NavfusePipeline *p);

/**
 * One control tick from a depth frame and the global steering signal.
 *
 * # Safety
 * All pointers must be null or valid; `p` must be a live handle.
 */
enum NavfuseStatus navfuse_pipeline_step(const struct NavfusePipeline *p,
                                         const struct NavfuseFrame *frame,
                                         double theta_cnn,
                                         double p_col,
                                         struct NavfuseCommand *out);

/**
 * Built-in scenario 1, 2 or 3 with default geometry.
 *
 * # Safety
 * `out` must be null or a valid pointer.
 */
enum NavfuseStatus navfuse_world_new(uint32_t scenario, struct NavfuseWorld **out);

/**
 * # Safety
 * `w` must be null or a handle from [`navfuse_world_new`] that has not been
 * freed.
 */
void navfuse_world_free(struct NavfuseWorld *w);

/**
 * Start pose of the world.
 *
 * # Safety
 * `w` must be a live handle; `out` must be null or valid.
 */
enum NavfuseStatus navfuse_world_start(const struct NavfuseWorld *w, struct NavfusePose *out);

/**
 * Simulated ToF frame at `pose`; the noise stream is seeded by `seed`.
 *
 * # Safety
 * All pointers must be null or valid; `w` must be a live handle.
 */
enum NavfuseStatus navfuse_world_sense(const struct NavfuseWorld *w,
                                       const struct NavfusePose *pose,
                                       double noise_sigma_mm,
                                       uint64_t seed,
                                       uint64_t tick,
                                       struct NavfuseFrame *out);

/**
 * Flies one full trial and reports its outcome.
 *
 * # Safety
 * All pointers must be null or valid; handles must be live.
 */
enum NavfuseStatus navfuse_run_trial(const struct NavfuseWorld *w,
                                     const struct NavfusePipeline *p,
                                     uint64_t seed,
                                     struct NavfuseTrialResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAVFUSE_H */
