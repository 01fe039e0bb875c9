#ifndef POLICYOPT_H
#define POLICYOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The non-zero values of config, solver and I/O failures
 * match the command-line exit codes.
 */
typedef enum PoStatus {
  PO_STATUS_OK = 0,
  PO_STATUS_NULL_POINTER = 1,
  PO_STATUS_CONFIG = 2,
  PO_STATUS_SOLVER = 3,
  PO_STATUS_IO = 4,
  PO_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The call succeeded but the solver stopped short of its tolerance.
   */
  PO_STATUS_NOT_CONVERGED = 6,
  PO_STATUS_PANIC = 7,
} PoStatus;

/**
 * Controller selector for [`po_evaluate`].
 */
typedef enum PoController {
  PO_CONTROLLER_POLICY = 0,
  PO_CONTROLLER_LQR = 1,
  PO_CONTROLLER_MPC = 2,
} PoController;

typedef struct PoConfig PoConfig;

typedef struct PoEvaluator PoEvaluator;

typedef struct PoPolicy PoPolicy;

typedef struct PoTrainInfo {
  size_t iterations;
  double kkt;
  double seconds;
  bool converged;
} PoTrainInfo;

/**
 * Means over the validation scenarios.
 */
typedef struct PoMetrics {
  double performance;
  double performance_undiscounted;
  double violations;
} PoMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length, so a
 * call with `len == 0` sizes the buffer.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t po_last_error(char *buf, size_t len);

/**
 * Benchmark defaults, nominal or noisy.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum PoStatus po_config_benchmark(bool noisy, struct PoConfig **out);

/**
 * Parses and validates a TOML experiment config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum PoStatus po_config_from_toml(const char *toml, struct PoConfig **out);

/**
 * Sets the training sample count, horizon and iteration cap.
 *
 * # Safety
 * `config` must be a live config handle.
 */
enum PoStatus po_config_set_training(struct PoConfig *config,
                                     size_t samples,
                                     size_t horizon,
                                     size_t max_iter);

/**
 * Sets the validation scenario count, stage count and MPC horizon.
 *
 * # Safety
 * `config` must be a live config handle.
 */
enum PoStatus po_config_set_validation(struct PoConfig *config,
                                       size_t samples,
                                       size_t stages,
                                       size_t mpc_horizon);

/**
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void po_config_free(struct PoConfig *config);

/**
 * Trains a policy. On `Ok` or `NotConverged` a policy handle is stored in
 * `out` (the last iterate in the latter case). `info` may be null.
 *
 * # Safety
 * `config` must be a live handle, `out` a valid handle slot, `info` null
 * or writable.
 */
enum PoStatus po_train(const struct PoConfig *config,
                       struct PoPolicy **out,
                       struct PoTrainInfo *info);

/**
 * Loads a text or binary parameter file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum PoStatus po_policy_load(const char *path, struct PoPolicy **out);

/**
 * Writes the parameters in the text layout.
 *
 * # Safety
 * `policy` must be a live handle; `path` a NUL-terminated string.
 */
enum PoStatus po_policy_save(const struct PoPolicy *policy, const char *path);

/**
 * Number of parameters, or 0 for a null handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t po_policy_param_count(const struct PoPolicy *policy);

/**
 * Copies the parameters into `buf`, which must hold exactly
 * [`po_policy_param_count`] values.
 *
 * # Safety
 * `policy` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum PoStatus po_policy_params(const struct PoPolicy *policy, double *buf, size_t len);

/**
 * `u = π_θ(x, ζ)` without saturation.
 *
 * # Safety
 * `x`, `zeta` and `u` must point to `nx`, `nzeta` and `nu` doubles.
 */
enum PoStatus po_policy_act(const struct PoPolicy *policy,
                            const double *x,
                            size_t nx,
                            const double *zeta,
                            size_t nzeta,
                            double *u,
                            size_t nu);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void po_policy_free(struct PoPolicy *policy);

/**
 * Builds the validation set and the LQR and MPC baselines for `config`.
 *
 * # Safety
 * `config` must be a live handle; `out` a valid handle slot.
 */
enum PoStatus po_evaluator_new(const struct PoConfig *config, struct PoEvaluator **out);

/**
 * Closed-loop metrics of one controller on the validation set. `policy` is
 * only read for [`PoController::Policy`] and may be null otherwise.
 *
 * # Safety
 * `evaluator` must be a live handle, `policy` null or live, `out` writable.
 */
enum PoStatus po_evaluate(const struct PoEvaluator *evaluator,
                          enum PoController controller,
                          const struct PoPolicy *policy,
                          struct PoMetrics *out);

/**
 * # Safety
 * `evaluator` must be null or a handle not yet freed.
 */
void po_evaluator_free(struct PoEvaluator *evaluator);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLICYOPT_H */
