#ifndef SETEXPAND_H
#define SETEXPAND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// How AP@K is normalized.
typedef enum SxApConvention {
  // Divide by the number of gold hits within the top K.
  SX_AP_CONVENTION_HIT_COUNT = 0,
  // Divide by `min(K, |gold|)`.
  SX_AP_CONVENTION_MIN_K_GOLD = 1,
} SxApConvention;

// Result codes. Zero is success.
typedef enum SxStatus {
  SX_STATUS_OK = 0,
  SX_STATUS_NULL_POINTER = 1,
  SX_STATUS_INVALID_UTF8 = 2,
  SX_STATUS_INVALID_ARGUMENT = 3,
  SX_STATUS_IO = 4,
  SX_STATUS_CONFIG = 5,
  SX_STATUS_UNRESOLVED_SEEDS = 6,
  SX_STATUS_CONTEXT_OVERFLOW = 7,
  SX_STATUS_BACKEND_UNAVAILABLE = 8,
  SX_STATUS_BACKEND = 9,
  SX_STATUS_INTERNAL = 10,
  SX_STATUS_PANIC = 11,
} SxStatus;

// Opaque engine handle.
typedef struct SxEngine SxEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an engine over a saved toy n-gram model and a vocabulary file
// (one entity per line).
//
// `config_toml` is optional TOML text with `[prompt]` and `[expansion]`
// tables. Any `[backend]` table is ignored.
//
// # Safety
// String arguments must be null or point to nul-terminated strings. `out`
// must be writable.
enum SxStatus sx_engine_new_toy(const char *model_path,
                                const char *vocab_path,
                                const char *config_toml,
                                struct SxEngine **out);

// Creates an engine whose backend is chosen by the `[backend]` table of
// `config_toml`. `SETEXPAND_SERVER_URL` overrides `backend.server_url`.
//
// # Safety
// See [`sx_engine_new_toy`].
enum SxStatus sx_engine_new(const char *config_toml, const char *vocab_path, struct SxEngine **out);

// Releases an engine. Null is accepted.
//
// # Safety
// `engine` must come from one of the constructors and not be freed twice.
void sx_engine_free(struct SxEngine *engine);

// Number of entities in the engine's vocabulary, or 0 for a null handle.
//
// # Safety
// `engine` must be null or a live handle.
size_t sx_engine_vocab_size(const struct SxEngine *engine);

// Expands `seeds` and writes the ranked result as a JSON object to
// `*out_json`. The object has `query_id`, `class_name`, `seeds`,
// `grown_seeds`, `iterations_run` and `entities` (each with `surface`,
// `m1`, `m2`, `m3`, `score`).
//
// # Safety
// `seeds` must point to `n_seeds` nul-terminated strings. `query_id` may be
// null. Free the output with [`sx_string_free`].
enum SxStatus sx_engine_expand(const struct SxEngine *engine,
                               const char *query_id,
                               const char *const *seeds,
                               size_t n_seeds,
                               char **out_json);

// AP@K of a ranked list against a gold set. Duplicate gold strings count
// once.
//
// # Safety
// `ranked` and `gold` must point to `n_ranked` and `n_gold` nul-terminated
// strings. `out` must be writable.
enum SxStatus sx_average_precision_at_k(const char *const *ranked,
                                        size_t n_ranked,
                                        const char *const *gold,
                                        size_t n_gold,
                                        size_t k,
                                        enum SxApConvention convention,
                                        double *out);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *sx_last_error(void);

// Releases a string returned by the library. Null is accepted.
//
// # Safety
// `s` must come from this library and not be freed twice.
void sx_string_free(char *s);

// Library version as a static string.
const char *sx_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SETEXPAND_H */
