#include "sysid/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sysid/format.hpp"
#include "sysid/linalg.hpp"

namespace sysid {

namespace {

// log(9^n / delta) without forming 9^n.
double confidence_log(const BoundParams& bp) {
  return static_cast<double>(bp.n) * std::log(9.0) - std::log(bp.delta);
}

double as_double(std::size_t v) { return static_cast<double>(v); }

}  // namespace

void BoundParams::check_burn_in() const {
  if (N < 4 * dim()) {
    throw BoundPreconditionError("burn-in N >= " + std::to_string(4 * dim()) + " unmet (N = " +
                                 std::to_string(N) + ")");
  }
}

void BoundParams::check_center_constraints() const {
  if (!(c > 0.0)) throw BoundPreconditionError("envelope radius c must be positive");
  const double allowed = (std::sqrt(b) - 1.0) * q;
  if (m_one_norm > allowed + 1e-12 * std::max(1.0, allowed)) {
    throw BoundPreconditionError("||m||_1 <= (sqrt(b) - 1) q fails: " + format_double(m_one_norm) +
                                 " > " + format_double(allowed));
  }
  if (!(m_one_norm + q < c)) {
    throw BoundPreconditionError("||m||_1 + q < c fails: " + format_double(m_one_norm + q) +
                                 " >= " + format_double(c));
  }
}

void BoundParams::check_scalars() const {
  if (n == 0) throw BoundPreconditionError("n must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw BoundPreconditionError("delta must lie in (0, 1)");
  for (double v : {q, m_one_norm, m_two_norm, sigma_w, beta, b, lambda, theta_norm}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw BoundPreconditionError("bound parameters must be finite and nonnegative");
    }
  }
  if (!(q > 0.0)) throw BoundPreconditionError("q must be positive");
}

void BoundParams::validate() const {
  check_scalars();
  check_burn_in();
  check_center_constraints();
}

PeBounds pe_bounds(const BoundParams& bp) {
  bp.check_burn_in();
  const double N = as_double(bp.N);
  const double d = as_double(bp.dim());
  const double q2 = bp.q * bp.q;
  return {N * q2 / (2.0 * d), N * (2.0 * bp.m_two_norm * bp.m_two_norm + 2.0 * q2 / d)};
}

double noise_term_lemma2(const BoundParams& bp) {
  bp.check_scalars();
  bp.check_burn_in();
  const double d = as_double(bp.dim());
  const double q2 = bp.q * bp.q;
  const double zeta = 4.0 * bp.lambda * d / as_double(bp.N);
  const double m2 = bp.m_two_norm * bp.m_two_norm;
  const double inner =
      confidence_log(bp) + d * std::log(1.0 + (4.0 * m2 * d + 4.0 * q2) / (q2 + zeta));
  return 3.0 * bp.sigma_w * std::sqrt(inner);
}

double nonlinearity_term_lemma3(const BoundParams& bp) {
  bp.validate();
  const double n = as_double(bp.n);
  const double d = as_double(bp.dim());
  const double N = as_double(bp.N);
  const double q2 = bp.q * bp.q;
  const double gamma = bp.lambda * d / (N * q2);
  const double beta2 = bp.beta * bp.beta;
  const double first = std::sqrt(2.0 * beta2 * (n * n + n * as_double(bp.p)) / (1.0 + gamma)) *
                       bp.b * bp.q;
  const double second = 2.0 * d * std::sqrt(bp.lambda * N * n * beta2 * bp.b * bp.b * q2 * q2) /
                        (N * q2 + 2.0 * bp.lambda * d);
  return first + second;
}

BoundReport theorem1_bound(const BoundParams& bp) {
  bp.validate();
  const double n = as_double(bp.n);
  const double d = as_double(bp.dim());
  const double N = as_double(bp.N);
  const double q2 = bp.q * bp.q;
  const double m2 = bp.m_two_norm * bp.m_two_norm;

  BoundReport r{};
  r.gamma = bp.lambda * d / (N * q2);
  r.zeta = 4.0 * bp.lambda * d / N;

  const double inner = confidence_log(bp) + d * std::log(1.0 + (4.0 * m2 * d + 4.0 * q2) / q2);
  r.noise_term = 5.0 * bp.sigma_w * std::sqrt(inner) / std::sqrt(N * q2 / d + bp.lambda);

  r.nonlinearity_term =
      std::sqrt(2.0 * (n * n + n * as_double(bp.p)) / (1.0 + r.gamma)) * bp.beta * bp.b * bp.q;

  const double cross = std::sqrt(bp.lambda * N * n * bp.beta * bp.beta * bp.b * bp.b * q2 * q2);
  r.regularization_term =
      2.0 * d * (bp.lambda * bp.theta_norm + cross) / (2.0 * bp.lambda * d + N * q2);

  r.total = r.noise_term + r.nonlinearity_term + r.regularization_term;
  return r;
}

double prediction_bound(double theta_err, std::span<const double> z, double beta, std::size_t n) {
  const double l1 = norm1(z);
  return theta_err * norm2(z) + std::sqrt(static_cast<double>(n)) * beta * l1 * l1;
}

double minimal_b(double m_one_norm, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("minimal_b: q must be positive");
  const double t = m_one_norm / q + 1.0;
  return t * t;
}

}  // namespace sysid
