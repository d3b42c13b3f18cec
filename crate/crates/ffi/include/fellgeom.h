#ifndef FELLGEOM_H
#define FELLGEOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  /**
   * Unknown config name, unreadable file, or malformed TOML.
   */
  FG_STATUS_CONFIG = 3,
  /**
   * The config parsed but describes an inconsistent geometry.
   */
  FG_STATUS_GEOMETRY = 4,
  /**
   * A numerical routine rejected its input.
   */
  FG_STATUS_NUMERICAL = 5,
  FG_STATUS_BUFFER_TOO_SMALL = 6,
  FG_STATUS_PANIC = 7,
} FgStatus;

/**
 * Loaded geometry. Opaque to C.
 */
typedef struct FgModel FgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a bundled config by name, or a TOML file by path.
 *
 * # Safety
 * `name_or_path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FgStatus fg_model_load(const char *name_or_path, struct FgModel **out);

/**
 * Build a model from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FgStatus fg_model_from_toml(const char *toml, struct FgModel **out);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void fg_model_free(struct FgModel *model);

/**
 * Hilbert space dimension.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum FgStatus fg_model_dimension(const struct FgModel *model, size_t *out);

/**
 * Number of objects of the groupoid.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum FgStatus fg_model_object_count(const struct FgModel *model, size_t *out);

/**
 * Copy the Dirac operator in row-major order into `re` and `im`, each of
 * length `len >= dimension²`.
 *
 * # Safety
 * `re` and `im` must point to at least `len` writable doubles.
 */
enum FgStatus fg_model_dirac(const struct FgModel *model, double *re, double *im, size_t len);

/**
 * `Tr f(D)` for a spectral function spec: `x2`, `x4`, `poly:c0,c1,...` or
 * `cutoff:L`.
 *
 * # Safety
 * `function` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FgStatus fg_model_spectral_action(const struct FgModel *model,
                                       const char *function,
                                       double *out);

/**
 * Run the command-line front end in process. `argv` excludes the program
 * name. The report and diagnostics are returned as strings in `out_text`
 * and `err_text` (either may be null to discard), and the process exit code
 * in `exit_code`.
 *
 * # Safety
 * `argv` must point to `argc` NUL-terminated strings.
 */
enum FgStatus fg_run(const char *const *argv,
                     size_t argc,
                     int *exit_code,
                     char **out_text,
                     char **err_text);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fg_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *fg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FELLGEOM_H */
