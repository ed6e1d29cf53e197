#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>

#include "sysid/acquisition.hpp"
#include "sysid/linalg.hpp"

namespace sysid {

struct Batches {
  Matrix x;  // n x N, column i is x1^i
  Matrix z;  // (n+p) x N, column i stacks (x0^i, u0^i)
};

/// Stacks the dataset triples column-wise. Throws std::invalid_argument on an
/// empty dataset or triples of inconsistent dimension.
Batches assemble_batches(const Dataset& data);

/// Fitted linearization [A_hat B_hat] with the ridge parameter used.
struct Estimate {
  Matrix theta_hat;    // n x (n+p)
  double lambda = 0.0;
  Matrix gram;         // Z Z' + lambda I
  std::size_t n_samples = 0;
};

class RankDeficientDesign : public std::runtime_error {
 public:
  RankDeficientDesign()
      : std::runtime_error("rank-deficient design; supply lambda > 0 or more experiments") {}
};

/// Minimizer of ||X - T Z||_F^2 + lambda ||T||_F^2, i.e. X Z' (Z Z' + lambda I)^{-1},
/// computed as an SPD solve. Throws RankDeficientDesign if the Gram matrix is
/// not positive definite.
Estimate fit(const Matrix& x, const Matrix& z, double lambda);

/// Same estimator from sufficient statistics X Z' and Z Z'.
Estimate fit_from_moments(const Matrix& xzt, const Matrix& zzt, double lambda,
                          std::size_t n_samples);

/// ||theta_hat - theta_true|| (spectral).
double estimation_error(const Estimate& est, const Matrix& theta_true);

Vector predict(const Estimate& est, std::span<const double> z);

/// Spectral norms of the three summands of theta_hat - theta:
///   -lambda Theta G^{-1},  W Z' G^{-1},  R Z' G^{-1}   with G = Z Z' + lambda I.
struct ErrorTerms {
  double reg_term;
  double noise_term;
  double nonlin_term;
};

ErrorTerms error_decomposition(const Estimate& est, const Dataset& data, const Matrix& theta_true);

/// ||M Z' G^{-1/2}|| for G = Z Z' + lambda I, evaluated as sqrt(lambda_max(M Z' G^{-1} Z M')).
double whitened_norm(const Matrix& m, const Matrix& z, double lambda);

/// Estimate as `row,col,value` CSV preceded by `# lambda=` and `# n_samples=` lines.
void write_estimate_csv(std::ostream& os, const Estimate& est);
/// Restores theta_hat, lambda and n_samples; the Gram matrix is not stored.
Estimate read_estimate_csv(std::istream& is);

}  // namespace sysid
