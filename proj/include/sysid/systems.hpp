#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sysid/linalg.hpp"
#include "sysid/random.hpp"

namespace sysid {

enum class NoiseKind { none, gaussian_isotropic, gaussian_diagonal, bounded_uniform };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view s);

/// Additive process-noise model.
///
/// `scale` holds one standard deviation (isotropic), one per state coordinate
/// (diagonal), or one half-width shared or per coordinate (bounded uniform).
struct NoiseConfig {
  NoiseKind kind = NoiseKind::none;
  Vector scale;

  static NoiseConfig none() { return {}; }
  static NoiseConfig gaussian(double stddev) { return {NoiseKind::gaussian_isotropic, {stddev}}; }
  static NoiseConfig gaussian_diagonal(Vector stddevs) {
    return {NoiseKind::gaussian_diagonal, std::move(stddevs)};
  }
  static NoiseConfig uniform(double half_width) {
    return {NoiseKind::bounded_uniform, {half_width}};
  }

  /// Sub-Gaussian parameter: the largest per-coordinate std (Gaussian kinds),
  /// the largest half-width (uniform), 0 for none.
  double sigma_w() const;

  /// Throws std::invalid_argument on negative/non-finite scales or a scale
  /// vector whose length is neither 1 nor n.
  void validate(std::size_t n) const;
};

void sample_noise_into(const NoiseConfig& cfg, std::span<double> out, RandomStream& rng);
Vector sample_noise(const NoiseConfig& cfg, std::size_t n, RandomStream& rng);

/// Assumption that |r_i(z)| <= beta * ||z||_1^2 whenever ||z||_1 < c.
struct RemainderEnvelope {
  double c;
  double beta;
};

/// Deterministic map f: R^{n+p} -> R^n writing into `out`.
using Dynamics = std::function<void(std::span<const double> z, std::span<double> out)>;

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A nonlinear system x_{k+1} = f(z_k) + w_k with f(0) = 0, together with
/// its linearization Theta = [A B] at the origin.
class SystemSpec {
 public:
  /// Checks f(0) = 0 (to 1e-12) and, unless waived, that the central
  /// finite-difference Jacobian at 0 (step 1e-6) matches theta_true to 1e-4.
  SystemSpec(std::string name, std::size_t n, std::size_t p, Dynamics dynamics,
             Matrix theta_true, std::optional<RemainderEnvelope> envelope, NoiseConfig noise,
             bool waive_jacobian_check = false);

  const std::string& name() const noexcept { return name_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t dim() const noexcept { return n_ + p_; }
  const Matrix& theta_true() const noexcept { return theta_; }
  const std::optional<RemainderEnvelope>& envelope() const noexcept { return envelope_; }
  const NoiseConfig& noise() const noexcept { return noise_; }

  void evaluate(std::span<const double> z, std::span<double> out) const;
  Vector evaluate(std::span<const double> z) const;

  SystemSpec with_noise(NoiseConfig noise) const;
  SystemSpec with_envelope(std::optional<RemainderEnvelope> envelope) const;

 private:
  std::string name_;
  std::size_t n_;
  std::size_t p_;
  std::shared_ptr<const Dynamics> dynamics_;
  Matrix theta_;
  std::optional<RemainderEnvelope> envelope_;
  NoiseConfig noise_;
};

struct StepResult {
  Vector x_next;
  Vector w;
};

/// One transition with a fresh noise draw. Throws SimulationError if f(z) is non-finite.
StepResult step(const SystemSpec& sys, std::span<const double> z, RandomStream& rng);
/// Allocation-free form of step().
void step_into(const SystemSpec& sys, std::span<const double> z, std::span<double> x_next,
               std::span<double> w, RandomStream& rng);

/// r(z) = f(z) - Theta z.
Vector remainder(const SystemSpec& sys, std::span<const double> z);

/// Central-difference Jacobian of f at the origin.
Matrix finite_difference_jacobian(const SystemSpec& sys, double h = 1e-6);

struct EnvelopeCheck {
  bool holds;
  double worst_ratio;
  Vector worst_z;
  std::size_t points_checked;
};

/// Sampled check of the remainder envelope: evaluates max_i |r_i(z)| / ||z||_1^2
/// over the lattice linspace(-c, c, samples_per_axis)^{n+p}, keeping only points
/// with 0 < ||z||_1 < c. This is evidence, not a proof.
EnvelopeCheck verify_remainder_envelope(const SystemSpec& sys, double c, double beta,
                                        int samples_per_axis);

/// Monomial coefficient * prod_j z_j^powers[j] added to output `row`.
struct PolynomialTerm {
  std::size_t row;
  double coeff;
  std::vector<unsigned> powers;
};

/// f(z) = Theta z + sum of higher-order monomials (each of total degree >= 2).
SystemSpec polynomial_system(std::string name, Matrix theta, std::vector<PolynomialTerm> terms,
                             std::optional<RemainderEnvelope> envelope, NoiseConfig noise);

/// Benchmark systems: "pendulum", "strong", "linear2x1".
SystemSpec builtin(std::string_view name);
const std::vector<std::string>& builtin_names();

}  // namespace sysid
