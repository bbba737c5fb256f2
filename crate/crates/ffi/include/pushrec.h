/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef PUSHREC_H
#define PUSHREC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PushrecStatus {
  PUSHREC_STATUS_OK = 0,
  PUSHREC_STATUS_NULL_POINTER = 1,
  PUSHREC_STATUS_INVALID_ARGUMENT = 2,
  PUSHREC_STATUS_CONFIG = 3,
  PUSHREC_STATUS_NOT_FOUND = 4,
  PUSHREC_STATUS_CHECKPOINT = 5,
  PUSHREC_STATUS_DIVERGED = 6,
  PUSHREC_STATUS_EPISODE_FINISHED = 7,
  PUSHREC_STATUS_PANIC = 8,
} PushrecStatus;

/**
 * One simulation environment.
 */
typedef struct PushrecEnv PushrecEnv;

/**
 * Deterministic (mean-action) policy from a checkpoint.
 */
typedef struct PushrecPolicy PushrecPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pushrec_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t pushrec_last_error(char *buf, uintptr_t len);

/**
 * Creates an environment. `model_config` and `env_config` hold config text
 * and may be null for the defaults. `seed` seeds the episode sequence used
 * by `pushrec_env_reset_next`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum PushrecStatus pushrec_env_new(const char *model_config,
                                   const char *env_config,
                                   uint64_t seed,
                                   struct PushrecEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from `pushrec_env_new` not yet freed.
 */
void pushrec_env_free(struct PushrecEnv *env);

/**
 * # Safety
 * `env` must be a live handle.
 */
uintptr_t pushrec_env_observation_dim(const struct PushrecEnv *env);

/**
 * # Safety
 * `env` must be a live handle.
 */
uintptr_t pushrec_env_action_dim(const struct PushrecEnv *env);

/**
 * Starts the episode identified by `episode_seed` and writes its first
 * observation.
 *
 * # Safety
 * `env` must be a live handle; `obs` must hold `obs_len` doubles.
 */
enum PushrecStatus pushrec_env_reset(struct PushrecEnv *env,
                                     uint64_t episode_seed,
                                     double *obs,
                                     uintptr_t obs_len);

/**
 * Starts the next episode of the environment's seed sequence.
 *
 * # Safety
 * As for `pushrec_env_reset`.
 */
enum PushrecStatus pushrec_env_reset_next(struct PushrecEnv *env, double *obs, uintptr_t obs_len);

/**
 * Schedules a push on the base for the episodes that follow: start and
 * duration in s, direction in rad (0 pushes forward), magnitude in N.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum PushrecStatus pushrec_env_schedule_push(struct PushrecEnv *env,
                                             double start,
                                             double duration,
                                             double direction,
                                             double magnitude);

/**
 * Advances one control step. `done` and `failure` receive 0 or 1.
 *
 * # Safety
 * `env` must be a live handle; buffers must hold the stated lengths;
 * `reward`, `done` and `failure` must be writable.
 */
enum PushrecStatus pushrec_env_step(struct PushrecEnv *env,
                                    const double *action,
                                    uintptr_t action_len,
                                    double *obs,
                                    uintptr_t obs_len,
                                    double *reward,
                                    uint8_t *done,
                                    uint8_t *failure);

/**
 * Loads the policy of a checkpoint file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum PushrecStatus pushrec_policy_load(const char *path, struct PushrecPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from `pushrec_policy_load` not yet freed.
 */
void pushrec_policy_free(struct PushrecPolicy *policy);

/**
 * Interface hash the policy was trained with, as a NUL-terminated hex
 * string owned by the handle.
 *
 * # Safety
 * `policy` must be a live handle.
 */
const char *pushrec_policy_config_hash(const struct PushrecPolicy *policy);

/**
 * Writes the mean action for `obs`.
 *
 * # Safety
 * `policy` must be a live handle; buffers must hold the stated lengths.
 */
enum PushrecStatus pushrec_policy_act(const struct PushrecPolicy *policy,
                                      const double *obs,
                                      uintptr_t obs_len,
                                      double *action,
                                      uintptr_t action_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PUSHREC_H */
