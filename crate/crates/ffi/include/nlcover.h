#ifndef NLCOVER_H
#define NLCOVER_H

/* Generated by cbindgen from nlcover-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes; zero is success. `Infeasible` and `CheckFailed` mirror the
// CLI exit codes 3 and 4.
typedef enum NlcStatus {
  NLC_STATUS_OK = 0,
  // The JSON could not be parsed.
  NLC_STATUS_PARSE_ERROR = 1,
  // The instance or an argument is structurally invalid.
  NLC_STATUS_INVALID = 2,
  // The instance cannot be covered with finite cost.
  NLC_STATUS_INFEASIBLE = 3,
  // A solution or certificate check failed.
  NLC_STATUS_CHECK_FAILED = 4,
  // A required pointer argument was null.
  NLC_STATUS_NULL_ARGUMENT = 5,
  // A string argument was not valid UTF-8.
  NLC_STATUS_UTF8_ERROR = 6,
  // The algorithm name is not recognized.
  NLC_STATUS_UNKNOWN_ALGORITHM = 7,
  // The algorithm does not apply to this instance kind.
  NLC_STATUS_WRONG_INSTANCE_KIND = 8,
  // An internal invariant failed.
  NLC_STATUS_INTERNAL_ERROR = 9,
} NlcStatus;

// Opaque parsed instance.
typedef struct NlcInstance NlcInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses an instance from JSON into an opaque handle. On success writes
// the handle to `out` and returns `Ok`; the caller frees it with
// [`nlc_instance_free`].
//
// # Safety
// `json` must point to a NUL-terminated string and `out` to writable
// storage for one pointer.
enum NlcStatus nlc_instance_parse(const char *json, struct NlcInstance **out);

// Releases a handle returned by [`nlc_instance_parse`]. Null is a no-op.
//
// # Safety
// `inst` must be a handle from [`nlc_instance_parse`] not yet freed.
void nlc_instance_free(struct NlcInstance *inst);

// Validates the instance. Returns `Ok` when well-formed and feasible;
// otherwise returns `Invalid` or `Infeasible` and, when `out_report` is
// non-null, writes a JSON array of human-readable issue strings.
//
// # Safety
// `inst` must be a live handle; `out_report` may be null or point to
// writable storage for one pointer.
enum NlcStatus nlc_instance_validate(const struct NlcInstance *inst, char **out_report);

// Solves the instance with the named algorithm (`"pd-kc"`, `"pd-ufp"`,
// `"dp"`, `"brute"`, or `"round"`). Writes the solution JSON
// (`{"levels": [...], "cost": ...}`) to `out_solution`. When `audit` is
// nonzero and the algorithm is primal-dual, also writes the certificate
// JSON to `out_certificate` (if non-null).
//
// # Safety
// `inst` must be a live handle, `algo` a NUL-terminated string,
// `out_solution` writable; `out_certificate` may be null.
enum NlcStatus nlc_solve(const struct NlcInstance *inst,
                         const char *algo,
                         int32_t audit,
                         char **out_solution,
                         char **out_certificate);

// Checks a solution (and, when given, its dual certificate) against the
// instance. Returns `Ok` when everything holds, `CheckFailed` otherwise;
// `out_witness` (if non-null) receives a human-readable explanation.
//
// # Safety
// `inst` must be a live handle and `solution_json` NUL-terminated;
// `certificate_json` and `out_witness` may be null.
enum NlcStatus nlc_verify(const struct NlcInstance *inst,
                          const char *solution_json,
                          const char *certificate_json,
                          char **out_witness);

// Releases a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must come from this library and not be freed twice.
void nlc_string_free(char *s);

// Library version as a static string; do not free.
const char *nlc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLCOVER_H */
