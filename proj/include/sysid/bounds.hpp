#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace sysid {

/// Thrown when a bound is requested outside the regime where it applies.
class BoundPreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs to the finite-sample error bounds. All logarithms are natural.
struct BoundParams {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t N = 0;
  double q = 0.0;
  double m_one_norm = 0.0;  // ||m||_1
  double m_two_norm = 0.0;  // ||m||_2
  double sigma_w = 0.0;
  double beta = 0.0;
  double c = 0.0;           // envelope radius; may be +inf
  double b = 1.0;
  double delta = 0.1;
  double lambda = 0.0;
  double theta_norm = 0.0;  // spectral norm of [A B]

  std::size_t dim() const noexcept { return n + p; }

  /// N >= 4(n+p).
  void check_burn_in() const;
  /// ||m||_1 <= (sqrt(b) - 1) q and ||m||_1 + q < c.
  void check_center_constraints() const;
  /// Finite, nonnegative scalars and delta in (0,1).
  void check_scalars() const;
  /// Every check above.
  void validate() const;
};

struct PeBounds {
  double lower;
  double upper;
};

struct BoundReport {
  double noise_term;
  double nonlinearity_term;
  double regularization_term;
  double total;
  double gamma;  // lambda (n+p) / (N q^2)
  double zeta;   // 4 lambda (n+p) / N
};

/// lambda_min(ZZ') >= N q^2 / (2(n+p)),  lambda_max(ZZ') <= N (2||m||^2 + 2 q^2 / (n+p)).
PeBounds pe_bounds(const BoundParams& params);

/// High-probability bound on ||W Z' (ZZ' + lambda I)^{-1/2}||.
double noise_term_lemma2(const BoundParams& params);

/// Deterministic bound on ||R Z' (ZZ' + lambda I)^{-1}||.
double nonlinearity_term_lemma3(const BoundParams& params);

/// Three-term bound on ||theta_hat - theta|| holding with probability >= 1 - delta.
BoundReport theorem1_bound(const BoundParams& params);

/// ||theta_hat z - f(z)|| <= theta_err ||z|| + sqrt(n) beta ||z||_1^2.
/// Only meaningful for ||z||_1 < c; that is left to the caller.
double prediction_bound(double theta_err, std::span<const double> z, double beta, std::size_t n);

/// Smallest b with ||m||_1 <= (sqrt(b) - 1) q, i.e. (||m||_1 / q + 1)^2.
double minimal_b(double m_one_norm, double q);

}  // namespace sysid
