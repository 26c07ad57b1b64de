#ifndef SPWT_H
#define SPWT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of every call. Codes 2-5 match the command-line exit codes;
 * 1 flags misuse of this API (null or invalid arguments), 6 an internal
 * panic that was contained at the boundary.
 */
typedef enum SpwtStatus {
  SPWT_STATUS_OK = 0,
  SPWT_STATUS_INVALID_ARGUMENT = 1,
  SPWT_STATUS_FORMAT = 2,
  SPWT_STATUS_FIT_FAILED = 3,
  SPWT_STATUS_DIVERGED = 4,
  SPWT_STATUS_INCOMPLETE = 5,
  SPWT_STATUS_PANIC = 6,
} SpwtStatus;

/**
 * Loaded checkpoint handle: architecture plus weights.
 */
typedef struct SpwtCheckpoint SpwtCheckpoint;

/**
 * Experiment configuration handle.
 */
typedef struct SpwtConfig SpwtConfig;

/**
 * Loaded sparsity mask handle.
 */
typedef struct SpwtMask SpwtMask;

/**
 * Per-layer spectrum analysis handle.
 */
typedef struct SpwtSpectrum SpwtSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failing call on this thread, or null.
 * Borrowed; do not free.
 */
const char *spwt_last_error_message(void);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void spwt_string_free(char *s);

/**
 * Load an experiment configuration from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_load(const char *path, struct SpwtConfig **out);

/**
 * Parse an experiment configuration from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_from_json(const char *json, struct SpwtConfig **out);

/**
 * Built-in small configuration that runs in seconds.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_default_desk(struct SpwtConfig **out);

/**
 * Copy of `cfg` with every stage seed re-derived from `seed`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_with_seed(const struct SpwtConfig *cfg,
                                      uint64_t seed,
                                      struct SpwtConfig **out);

/**
 * Hex digest identifying the full configuration. Free with
 * `spwt_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_hash(const struct SpwtConfig *cfg, char **out);

/**
 * Configuration serialized back to JSON. Free with `spwt_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_config_to_json(const struct SpwtConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void spwt_config_free(struct SpwtConfig *cfg);

/**
 * Iterative magnitude pruning; writes mask, checkpoint, and metrics into
 * the configured output directory.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SpwtStatus spwt_stage_prune(const struct SpwtConfig *cfg);

/**
 * Fine-tune a pruned checkpoint under its mask. Null paths default to
 * `mask.spwt` and `pruned.spwt` in the configured output directory.
 *
 * # Safety
 * `cfg` must be a live handle; paths must be null or NUL-terminated.
 */
enum SpwtStatus spwt_stage_finetune(const struct SpwtConfig *cfg,
                                    const char *mask_path,
                                    const char *checkpoint_path);

/**
 * Graft a source run's mask and matching weights onto the configured
 * model, then fine-tune.
 *
 * # Safety
 * `cfg` must be a live handle; paths must be NUL-terminated strings.
 */
enum SpwtStatus spwt_stage_transfer(const struct SpwtConfig *cfg,
                                    const char *source_mask_path,
                                    const char *source_checkpoint_path);

/**
 * Aggregate a completed run directory into reports and a digest manifest.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SpwtStatus spwt_stage_report(const struct SpwtConfig *cfg);

/**
 * Prune, fine-tune, and report in sequence.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SpwtStatus spwt_run_all(const struct SpwtConfig *cfg);

/**
 * Re-check every artifact in a run directory against its manifest digest.
 *
 * # Safety
 * `dir` must be a NUL-terminated string.
 */
enum SpwtStatus spwt_verify_run_dir(const char *dir);

/**
 * Load a checkpoint container.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_checkpoint_load(const char *path, struct SpwtCheckpoint **out);

/**
 * Number of weight layers in the checkpoint.
 *
 * # Safety
 * `ckpt` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_checkpoint_num_layers(const struct SpwtCheckpoint *ckpt, uintptr_t *out);

/**
 * Name of weight layer `index`. Free with `spwt_string_free`.
 *
 * # Safety
 * `ckpt` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_checkpoint_layer_name(const struct SpwtCheckpoint *ckpt,
                                           uintptr_t index,
                                           char **out);

/**
 * # Safety
 * `ckpt` must come from this library and not be freed twice.
 */
void spwt_checkpoint_free(struct SpwtCheckpoint *ckpt);

/**
 * Load a sparsity mask container.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_mask_load(const char *path, struct SpwtMask **out);

/**
 * Fraction of weights still active.
 *
 * # Safety
 * `mask` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_mask_remaining_fraction(const struct SpwtMask *mask, double *out);

/**
 * Number of recorded pruning rounds.
 *
 * # Safety
 * `mask` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_mask_round_count(const struct SpwtMask *mask, uintptr_t *out);

/**
 * # Safety
 * `mask` must come from this library and not be freed twice.
 */
void spwt_mask_free(struct SpwtMask *mask);

/**
 * Fit per-layer spectral tail exponents and derive a freeze plan. `mask`
 * may be null for a dense analysis.
 *
 * # Safety
 * Handles must be live (or null where allowed); `out` must be valid.
 */
enum SpwtStatus spwt_analyze(const struct SpwtCheckpoint *ckpt,
                             const struct SpwtMask *mask,
                             double freeze_ratio,
                             struct SpwtSpectrum **out);

/**
 * Number of analyzed layers.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_spectrum_num_layers(const struct SpwtSpectrum *spectrum, uintptr_t *out);

/**
 * Fitted tail exponent of layer `index`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_spectrum_alpha(const struct SpwtSpectrum *spectrum,
                                    uintptr_t index,
                                    double *out);

/**
 * Whether the freeze plan holds layer `index` fixed during fine-tuning.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_spectrum_is_frozen(const struct SpwtSpectrum *spectrum,
                                        uintptr_t index,
                                        bool *out);

/**
 * Whole analysis as CSV. Free with `spwt_string_free`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be a valid pointer.
 */
enum SpwtStatus spwt_spectrum_to_csv(const struct SpwtSpectrum *spectrum, char **out);

/**
 * # Safety
 * `spectrum` must come from this library and not be freed twice.
 */
void spwt_spectrum_free(struct SpwtSpectrum *spectrum);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPWT_H */
