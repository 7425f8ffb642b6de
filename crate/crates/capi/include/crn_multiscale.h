#ifndef CRN_MULTISCALE_H
#define CRN_MULTISCALE_H

/* Generated by cbindgen from crn-multiscale-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
enum CrnStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  CrnStatus_Ok = 0,
  CrnStatus_NullPointer = 1,
  CrnStatus_InvalidUtf8 = 2,
  CrnStatus_ParseError = 3,
  CrnStatus_InvalidArgument = 4,
  CrnStatus_AnalysisError = 5,
  CrnStatus_SimulationError = 6,
  CrnStatus_Panic = 7,
};
#ifndef __cplusplus
typedef int32_t CrnStatus;
#endif // __cplusplus

// Opaque reaction network handle.
typedef struct CrnNetwork CrnNetwork;

// Opaque scaling-specification handle (abundance and rate exponents).
typedef struct CrnScaling CrnScaling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version string; statically allocated, do not free.
const char *crn_version(void);

// Message describing the most recent failure on this thread. The pointer is
// valid until the next failing call on the same thread; do not free.
const char *crn_last_error_message(void);

// Release a string returned through a `char **` out-parameter.
//
// # Safety
// `s` must be null or a pointer previously returned by this library.
void crn_string_free(char *s);

// Parse a network description (the `.crn` text format) into a handle.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid pointer.
int32_t crn_network_parse(const char *text, struct CrnNetwork **out);

// # Safety
// `network` must be null or a handle from `crn_network_parse`.
void crn_network_free(struct CrnNetwork *network);

// Number of species, or -1 for a null handle.
//
// # Safety
// `network` must be null or a valid handle.
int64_t crn_network_species_count(const struct CrnNetwork *network);

// Number of reactions, or -1 for a null handle.
//
// # Safety
// `network` must be null or a valid handle.
int64_t crn_network_reaction_count(const struct CrnNetwork *network);

// Name of species `index`; returned string is freed with `crn_string_free`.
//
// # Safety
// Pointer arguments must be valid.
int32_t crn_network_species_name(const struct CrnNetwork *network, uint64_t index, char **out);

// Round-trip serialization of the network in the `.crn` format.
//
// # Safety
// Pointer arguments must be valid.
int32_t crn_network_format(const struct CrnNetwork *network, char **out);

// Parse a scaling specification (the `.scale` text format) against a network.
//
// # Safety
// Pointer arguments must be valid.
int32_t crn_scaling_parse(const char *text,
                          const struct CrnNetwork *network,
                          struct CrnScaling **out);

// # Safety
// `scaling` must be null or a handle from `crn_scaling_parse`.
void crn_scaling_free(struct CrnScaling *scaling);

// Balance-condition report at the time-scale exponent `gamma` (an exact
// rational like "0", "-2", "1/2") as a JSON document.
//
// # Safety
// Pointer arguments must be valid.
int32_t crn_balance_report_json(const struct CrnNetwork *network,
                                const struct CrnScaling *scaling,
                                const char *gamma,
                                char **out);

// Limiting model at `gamma`, serialized in the annotated `.crn` format.
//
// # Safety
// Pointer arguments must be valid.
int32_t crn_limit_model_format(const struct CrnNetwork *network,
                               const struct CrnScaling *scaling,
                               const char *gamma,
                               char **out);

// Exact SSA sample path recorded on a time grid.
//
// `x0` holds one nonnegative initial count per species; `grid` holds
// `grid_len` nondecreasing times in `[0, t_end]`; `out` receives
// `grid_len * n_species` counts in row-major order (time-major). The path is
// a pure function of `(seed, stream)`.
//
// # Safety
// Pointer arguments must be valid and the buffers at least as long as
// documented above.
int32_t crn_simulate_ssa(const struct CrnNetwork *network,
                         const int64_t *x0,
                         uint64_t n_species,
                         double t_end,
                         uint64_t seed,
                         uint64_t stream,
                         const double *grid,
                         uint64_t grid_len,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRN_MULTISCALE_H */
