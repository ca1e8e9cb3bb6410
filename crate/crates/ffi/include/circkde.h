#ifndef CIRCKDE_H
#define CIRCKDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum CkStatus {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_ARGUMENT = 2,
  CK_STATUS_UNSUPPORTED = 3,
  CK_STATUS_TOLERANCE_NOT_MET = 4,
  CK_STATUS_NO_BRACKET = 5,
  CK_STATUS_FIT_FAILED = 6,
  CK_STATUS_PARSE = 7,
  CK_STATUS_IO = 8,
  CK_STATUS_PANIC = 9,
} CkStatus;

typedef enum CkKernel {
  CK_KERNEL_VON_MISES = 0,
  CK_KERNEL_WRAPPED_NORMAL = 1,
  CK_KERNEL_WRAPPED_CAUCHY = 2,
  CK_KERNEL_WRAPPED_EPANECHNIKOV = 3,
  CK_KERNEL_CARDIOID = 4,
} CkKernel;

typedef enum CkMethod {
  CK_METHOD_RT = 0,
  CK_METHOD_DPI = 1,
  CK_METHOD_STE = 2,
  CK_METHOD_LCV = 3,
} CkMethod;

// Opaque sample of angles.
typedef struct CkSample CkSample;

// Selector options; start from [`ck_selector_options_default`].
typedef struct CkSelectorOptions {
  enum CkKernel kernel;
  enum CkKernel pilot;
  uint32_t deriv_order;
  uint32_t nstage;
  uint32_t m_max;
  bool exact_inversion;
  uint64_t seed;
} CkSelectorOptions;

// A selected smoothing parameter. `kappa_or_lambda` is NaN when the
// kernel has no native parameter or the uniform kernel was chosen.
typedef struct CkSelection {
  double nu;
  double h;
  double kappa_or_lambda;
  bool fallback_uniform;
} CkSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *ck_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ck_version(void);

// Copies `n` angles (radians, wrapped to `[-pi, pi)`) into a new sample.
//
// # Safety
// `angles` must point to `n` readable doubles; `out` must be writable.
enum CkStatus ck_sample_new(const double *angles, size_t n, struct CkSample **out);

// Releases a sample; NULL is ignored.
//
// # Safety
// `sample` must come from [`ck_sample_new`] and not be used afterwards.
void ck_sample_free(struct CkSample *sample);

// Number of observations, or 0 for NULL.
//
// # Safety
// `sample` must be NULL or a live handle.
size_t ck_sample_len(const struct CkSample *sample);

// Defaults: von Mises kernel and pilot, density (order 0), two stages,
// single-component reference, asymptotic inversion, seed 0.
struct CkSelectorOptions ck_selector_options_default(void);

// Runs a selector. `options` may be NULL for defaults.
//
// # Safety
// `sample` must be a live handle, `options` NULL or readable, `out` writable.
enum CkStatus ck_select(const struct CkSample *sample,
                        enum CkMethod method,
                        const struct CkSelectorOptions *options,
                        struct CkSelection *out);

// Runs a selector and returns the full selection, including its trace, as
// a JSON string to be released with [`ck_string_free`].
//
// # Safety
// As [`ck_select`]; `out_json` must be writable.
enum CkStatus ck_select_json(const struct CkSample *sample,
                             enum CkMethod method,
                             const struct CkSelectorOptions *options,
                             char **out_json);

// Releases a string returned by this library; NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ck_string_free(char *s);

// `h_K(nu)`, the circular second moment of the kernel.
//
// # Safety
// `out` must be writable.
enum CkStatus ck_bandwidth_h(enum CkKernel kernel, double nu, double *out);

// Evaluates the `deriv_order`-th derivative of the kernel density estimate
// at `m` angles.
//
// # Safety
// `thetas` must hold `m` readable doubles and `out` `m` writable ones.
enum CkStatus ck_kde(const struct CkSample *sample,
                     enum CkKernel kernel,
                     double nu,
                     uint32_t deriv_order,
                     const double *thetas,
                     size_t m,
                     double *out);

// Name of a status code as a static string.
const char *ck_status_name(enum CkStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCKDE_H */
