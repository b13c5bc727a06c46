#ifndef SUPOLY_H
#define SUPOLY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes shared by every function in this interface.
 */
typedef enum SupolyStatus {
  SUPOLY_STATUS_OK = 0,
  SUPOLY_STATUS_NULL_POINTER = 1,
  /**
   * An argument lies outside the domain of the operation.
   */
  SUPOLY_STATUS_DOMAIN_ERROR = 2,
  /**
   * Degenerate polynomial, boundary ambiguity or failed root finding.
   */
  SUPOLY_STATUS_NUMERIC_ERROR = 3,
  /**
   * An output buffer is too small.
   */
  SUPOLY_STATUS_BUFFER_TOO_SMALL = 4,
  SUPOLY_STATUS_PANIC = 5,
} SupolyStatus;

/**
 * Opaque polynomial handle.
 */
typedef struct SupolyPolynomial SupolyPolynomial;

typedef struct SupolyCountingEstimate {
  double value;
  double stat_error;
  double lower_anchor;
  double upper_anchor;
} SupolyCountingEstimate;

typedef struct SupolyHoleEstimate {
  uint64_t trials;
  uint64_t hits;
  double p_hat;
  /**
   * Binomial standard error of `p_hat`.
   */
  double std_error;
} SupolyHoleEstimate;

typedef struct SupolyDecayFit {
  double beta;
  double log_c;
  double residual_rms;
} SupolyDecayFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success. Owned by the library.
 */
const char *supoly_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *supoly_version(void);

/**
 * Samples trial `trial` of the `(m, degree, seed)` ensemble.
 */
enum SupolyStatus supoly_polynomial_sample(size_t m,
                                           uint32_t degree,
                                           uint64_t seed,
                                           uint64_t trial,
                                           struct SupolyPolynomial **out);

/**
 * Builds a polynomial from Gaussian coordinates in graded lexicographic order.
 */
enum SupolyStatus supoly_polynomial_from_coefficients(size_t m,
                                                      uint32_t degree,
                                                      const double *re,
                                                      const double *im,
                                                      size_t len,
                                                      struct SupolyPolynomial **out);

/**
 * Releases a handle; null is ignored.
 */
void supoly_polynomial_free(struct SupolyPolynomial *p);

/**
 * Number of coefficients, `binomial(N+m, m)`; 0 for a null handle.
 */
size_t supoly_polynomial_coefficient_count(const struct SupolyPolynomial *p);

/**
 * Copies the Gaussian coordinates into `re`/`im`, each of length `capacity`.
 */
enum SupolyStatus supoly_polynomial_coefficients(const struct SupolyPolynomial *p,
                                                 double *re,
                                                 double *im,
                                                 size_t capacity);

/**
 * `psi(z) / (1+|z|^2)^(N/2)` at the `dim`-coordinate point `z`.
 */
enum SupolyStatus supoly_polynomial_evaluate_normalized(const struct SupolyPolynomial *p,
                                                        const double *z_re,
                                                        const double *z_im,
                                                        size_t dim,
                                                        double *out_re,
                                                        double *out_im);

/**
 * `log|psi(z)|`, `-inf` at an exact zero.
 */
enum SupolyStatus supoly_polynomial_log_abs(const struct SupolyPolynomial *p,
                                            const double *z_re,
                                            const double *z_im,
                                            size_t dim,
                                            double *out);

/**
 * Roots of a one-variable polynomial. `count` always receives the number of finite roots.
 */
enum SupolyStatus supoly_polynomial_roots(const struct SupolyPolynomial *p,
                                          double *re,
                                          double *im,
                                          size_t capacity,
                                          size_t *count);

/**
 * Exact number of roots in the open disk `|z| < r` (one variable).
 */
enum SupolyStatus supoly_counting_exact(const struct SupolyPolynomial *p, double r, size_t *out);

/**
 * Sphere-average count of zeros in `B(0, r)`; sphere points come from stream `(seed, trial)`.
 */
enum SupolyStatus supoly_counting_jensen(const struct SupolyPolynomial *p,
                                         double r,
                                         double kappa,
                                         size_t samples,
                                         uint64_t seed,
                                         uint64_t trial,
                                         struct SupolyCountingEstimate *out);

/**
 * Monte Carlo hole frequency for the one-variable ensemble.
 */
enum SupolyStatus supoly_hole_probability_mc(uint32_t degree,
                                             uint64_t seed,
                                             double r,
                                             uint64_t trials,
                                             struct SupolyHoleEstimate *out);

/**
 * Natural log of the exact coefficient-box probability, a lower bound on the hole probability.
 */
enum SupolyStatus supoly_omega_log_prob(size_t m, uint32_t degree, double r, double *out);

/**
 * Least-squares fit of `log(-log p)` on `log N` from `len` pairs `(degrees[k], log_p[k])`.
 */
enum SupolyStatus supoly_fit_decay_exponent(const double *degrees,
                                            const double *log_p,
                                            size_t len,
                                            struct SupolyDecayFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPOLY_H */
