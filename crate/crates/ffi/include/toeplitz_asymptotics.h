#ifndef TOEPLITZ_ASYMPTOTICS_H
#define TOEPLITZ_ASYMPTOTICS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which factor to extract from a [`TaFactors`] handle.
 */
typedef enum TaFactor {
  /**
   * `u₋` of the right factorization `a = u₋u₊`.
   */
  TA_FACTOR_U_MINUS = 0,
  /**
   * `u₊` of the right factorization.
   */
  TA_FACTOR_U_PLUS = 1,
  /**
   * `v₊` of the left factorization `a = v₊v₋`.
   */
  TA_FACTOR_V_PLUS = 2,
  /**
   * `v₋` of the left factorization.
   */
  TA_FACTOR_V_MINUS = 3,
} TaFactor;

/**
 * Status codes. Nonzero values other than the two negative ones match the
 * exit codes of the `toeplitz-asym` binary.
 */
typedef enum TaStatus {
  TA_STATUS_OK = 0,
  TA_STATUS_NULL_POINTER = -1,
  TA_STATUS_PANIC = -2,
  TA_STATUS_CONFIG_INVALID = 2,
  TA_STATUS_IO = 3,
  TA_STATUS_JSON = 4,
  TA_STATUS_CSV = 5,
  TA_STATUS_CUTOFF_TOO_LARGE = 10,
  TA_STATUS_SINGULAR_SYMBOL = 11,
  TA_STATUS_BLOCK_SIZE_MISMATCH = 12,
  TA_STATUS_GRID_TOO_COARSE = 13,
  TA_STATUS_NON_ZERO_WINDING = 14,
  TA_STATUS_TRUNCATION_TOO_SMALL = 20,
  TA_STATUS_NUMERICALLY_SINGULAR_SECTION = 21,
  TA_STATUS_EIG_FAILURE = 22,
  TA_STATUS_NON_CANONICAL = 30,
  TA_STATUS_ILL_CONDITIONED_SECTION = 31,
  TA_STATUS_SPECTRUM_TOO_CLOSE = 32,
  TA_STATUS_NO_CONVERGENCE = 40,
  TA_STATUS_CONTOUR_TOO_TIGHT = 41,
  TA_STATUS_F_NOT_ANALYTIC_AT_SAMPLE = 42,
  TA_STATUS_FIT_DEGENERATE = 50,
} TaStatus;

/**
 * Opaque Wiener-Hopf factorization.
 */
typedef struct TaFactors TaFactors;

/**
 * Opaque matrix Laurent series.
 */
typedef struct TaSymbol TaSymbol;

/**
 * Residual diagnostics of a factorization.
 */
typedef struct TaResiduals {
  double product_residual_right;
  double product_residual_left;
  double leakage;
  double inverse_margin;
} TaResiduals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful one. The pointer stays valid until the next call on the
 * same thread.
 */
const char *ta_last_error_message(void);

/**
 * Parses a symbol from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TaStatus ta_symbol_from_json(const char *json, struct TaSymbol **out);

/**
 * Builds the lacunary test symbol with smoothness `gamma` and `levels`
 * dyadic levels. Phases are random when `use_seed` is nonzero.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum TaStatus ta_symbol_zygmund(double gamma,
                                uint32_t levels,
                                int32_t use_seed,
                                uint64_t seed,
                                struct TaSymbol **out);

/**
 * Serializes a symbol to JSON. Release the string with [`ta_string_free`].
 *
 * # Safety
 * `symbol` must be a live handle and `out` a writable pointer.
 */
enum TaStatus ta_symbol_to_json(const struct TaSymbol *symbol, char **out);

/**
 * Block size of a symbol, or 0 for NULL.
 *
 * # Safety
 * `symbol` must be NULL or a live handle.
 */
size_t ta_symbol_block_size(const struct TaSymbol *symbol);

/**
 * # Safety
 * `symbol` must be NULL or a handle not yet freed.
 */
void ta_symbol_free(struct TaSymbol *symbol);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void ta_string_free(char *s);

/**
 * `log det T_n(a)` of the `(n+1)N`-square section, imaginary part wrapped
 * to `(−π, π]`.
 *
 * # Safety
 * `symbol` must be a live handle; `re` and `im` writable pointers.
 */
enum TaStatus ta_log_det(const struct TaSymbol *symbol, size_t n, double *re, double *im);

/**
 * The constant `E(a)` of the strong Szegő limit. `m = 0` picks the
 * default section.
 *
 * # Safety
 * `symbol` must be a live handle; `re` and `im` writable pointers.
 */
enum TaStatus ta_szego_constant(const struct TaSymbol *symbol, size_t m, double *re, double *im);

/**
 * Canonical right and left Wiener-Hopf factorization with section or cap
 * `m` (`m = 0` picks the default).
 *
 * # Safety
 * `symbol` must be a live handle and `out` a writable pointer.
 */
enum TaStatus ta_factorize(const struct TaSymbol *symbol, size_t m, struct TaFactors **out);

/**
 * Copies one factor into a new symbol handle.
 *
 * # Safety
 * `factors` must be a live handle and `out` a writable pointer.
 */
enum TaStatus ta_factors_get(const struct TaFactors *factors,
                             enum TaFactor which,
                             struct TaSymbol **out);

/**
 * # Safety
 * `factors` must be a live handle and `out` a writable pointer.
 */
enum TaStatus ta_factors_residuals(const struct TaFactors *factors, struct TaResiduals *out);

/**
 * # Safety
 * `factors` must be NULL or a handle not yet freed.
 */
void ta_factors_free(struct TaFactors *factors);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOEPLITZ_ASYMPTOTICS_H */
