#include "sysid/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sysid {

namespace {

std::string format_vector(std::span<const double> v) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

double linear_part(std::span<const double> row, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * z[j];
  return s;
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian_isotropic: return "gaussian_isotropic";
    case NoiseKind::gaussian_diagonal: return "gaussian_diagonal";
    case NoiseKind::bounded_uniform: return "bounded_uniform";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view s) {
  for (auto k : {NoiseKind::none, NoiseKind::gaussian_isotropic, NoiseKind::gaussian_diagonal,
                 NoiseKind::bounded_uniform}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown noise kind '" + std::string(s) +
                              "' (expected none, gaussian_isotropic, gaussian_diagonal, "
                              "bounded_uniform)");
}

double NoiseConfig::sigma_w() const {
  if (kind == NoiseKind::none || scale.empty()) return 0.0;
  return *std::max_element(scale.begin(), scale.end());
}

void NoiseConfig::validate(std::size_t n) const {
  if (kind == NoiseKind::none) return;
  if (scale.empty()) throw std::invalid_argument("noise: scale is empty");
  if (kind == NoiseKind::gaussian_isotropic && scale.size() != 1) {
    throw std::invalid_argument("noise: gaussian_isotropic takes a single standard deviation");
  }
  if (scale.size() != 1 && scale.size() != n) {
    throw std::invalid_argument("noise: scale length " + std::to_string(scale.size()) +
                                " must be 1 or " + std::to_string(n));
  }
  for (double s : scale) {
    if (!std::isfinite(s) || s < 0.0) {
      throw std::invalid_argument("noise: scale entries must be finite and nonnegative");
    }
  }
}

void sample_noise_into(const NoiseConfig& cfg, std::span<double> out, RandomStream& rng) {
  auto scale_at = [&](std::size_t i) { return cfg.scale.size() == 1 ? cfg.scale[0] : cfg.scale[i]; };
  switch (cfg.kind) {
    case NoiseKind::none:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case NoiseKind::gaussian_isotropic:
    case NoiseKind::gaussian_diagonal:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(scale_at(i));
      return;
    case NoiseKind::bounded_uniform:
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double h = scale_at(i);
        out[i] = h == 0.0 ? 0.0 : rng.uniform(-h, h);
      }
      return;
  }
}

Vector sample_noise(const NoiseConfig& cfg, std::size_t n, RandomStream& rng) {
  Vector out(n);
  sample_noise_into(cfg, out, rng);
  return out;
}

SystemSpec::SystemSpec(std::string name, std::size_t n, std::size_t p, Dynamics dynamics,
                       Matrix theta_true, std::optional<RemainderEnvelope> envelope,
                       NoiseConfig noise, bool waive_jacobian_check)
    : name_(std::move(name)),
      n_(n),
      p_(p),
      dynamics_(std::make_shared<const Dynamics>(std::move(dynamics))),
      theta_(std::move(theta_true)),
      envelope_(envelope),
      noise_(std::move(noise)) {
  if (n_ == 0) throw std::invalid_argument(name_ + ": state dimension must be positive");
  if (!*dynamics_) throw std::invalid_argument(name_ + ": dynamics is empty");
  if (theta_.rows() != n_ || theta_.cols() != n_ + p_) {
    throw std::invalid_argument(name_ + ": theta_true must be " + std::to_string(n_) + "x" +
                                std::to_string(n_ + p_));
  }
  if (envelope_ && (!(envelope_->c > 0.0) || !(envelope_->beta >= 0.0))) {
    throw std::invalid_argument(name_ + ": envelope needs c > 0 and beta >= 0");
  }
  noise_.validate(n_);

  const Vector zero(dim(), 0.0);
  const Vector f0 = evaluate(zero);
  if (norm2(f0) > 1e-12) {
    throw std::invalid_argument(name_ + ": f(0) must vanish, got " + format_vector(f0));
  }
  if (!waive_jacobian_check) {
    const Matrix jac = finite_difference_jacobian(*this);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < dim(); ++j) {
        if (std::abs(jac(i, j) - theta_(i, j)) > 1e-4) {
          throw std::invalid_argument(name_ + ": theta_true(" + std::to_string(i) + "," +
                                      std::to_string(j) + ") = " +
                                      std::to_string(theta_(i, j)) +
                                      " disagrees with finite-difference Jacobian " +
                                      std::to_string(jac(i, j)));
        }
      }
    }
  }
}

void SystemSpec::evaluate(std::span<const double> z, std::span<double> out) const {
  (*dynamics_)(z, out);
}

Vector SystemSpec::evaluate(std::span<const double> z) const {
  if (z.size() != dim()) {
    throw std::invalid_argument(name_ + ": z has length " + std::to_string(z.size()) +
                                ", expected " + std::to_string(dim()));
  }
  Vector out(n_);
  evaluate(z, out);
  return out;
}

SystemSpec SystemSpec::with_noise(NoiseConfig noise) const {
  noise.validate(n_);
  SystemSpec copy = *this;
  copy.noise_ = std::move(noise);
  return copy;
}

SystemSpec SystemSpec::with_envelope(std::optional<RemainderEnvelope> envelope) const {
  SystemSpec copy = *this;
  copy.envelope_ = envelope;
  return copy;
}

void step_into(const SystemSpec& sys, std::span<const double> z, std::span<double> x_next,
               std::span<double> w, RandomStream& rng) {
  sys.evaluate(z, x_next);
  for (double v : x_next) {
    if (!std::isfinite(v)) {
      throw SimulationError(sys.name() + ": non-finite dynamics output at z = " +
                            format_vector(z));
    }
  }
  sample_noise_into(sys.noise(), w, rng);
  for (std::size_t i = 0; i < x_next.size(); ++i) x_next[i] += w[i];
}

StepResult step(const SystemSpec& sys, std::span<const double> z, RandomStream& rng) {
  if (z.size() != sys.dim()) {
    throw std::invalid_argument(sys.name() + ": z has length " + std::to_string(z.size()) +
                                ", expected " + std::to_string(sys.dim()));
  }
  StepResult r{Vector(sys.n()), Vector(sys.n())};
  step_into(sys, z, r.x_next, r.w, rng);
  return r;
}

Vector remainder(const SystemSpec& sys, std::span<const double> z) {
  Vector r = sys.evaluate(z);
  const Matrix& theta = sys.theta_true();
  for (std::size_t i = 0; i < sys.n(); ++i) r[i] -= linear_part(theta.row(i), z);
  return r;
}

Matrix finite_difference_jacobian(const SystemSpec& sys, double h) {
  Matrix jac(sys.n(), sys.dim());
  Vector z(sys.dim(), 0.0);
  Vector fp(sys.n()), fm(sys.n());
  for (std::size_t j = 0; j < sys.dim(); ++j) {
    z[j] = h;
    sys.evaluate(z, fp);
    z[j] = -h;
    sys.evaluate(z, fm);
    z[j] = 0.0;
    for (std::size_t i = 0; i < sys.n(); ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

EnvelopeCheck verify_remainder_envelope(const SystemSpec& sys, double c, double beta,
                                        int samples_per_axis) {
  if (samples_per_axis < 2) {
    throw std::invalid_argument("verify_remainder_envelope: samples_per_axis must be >= 2");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("verify_remainder_envelope: c must be finite and positive");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("verify_remainder_envelope: beta must be >= 0");

  const std::size_t d = sys.dim();
  const auto k = static_cast<std::size_t>(samples_per_axis);
  std::vector<std::size_t> idx(d, 0);
  Vector z(d);
  EnvelopeCheck out{true, 0.0, Vector(d, 0.0), 0};

  for (;;) {
    for (std::size_t j = 0; j < d; ++j) {
      z[j] = -c + 2.0 * c * static_cast<double>(idx[j]) / static_cast<double>(k - 1);
    }
    const double l1 = norm1(z);
    if (l1 > 0.0 && l1 < c) {
      const Vector r = remainder(sys, z);
      double worst = 0.0;
      for (double v : r) worst = std::max(worst, std::abs(v));
      const double ratio = worst / (l1 * l1);
      ++out.points_checked;
      if (ratio > out.worst_ratio) {
        out.worst_ratio = ratio;
        out.worst_z = z;
      }
    }
    std::size_t j = 0;
    while (j < d && ++idx[j] == k) idx[j++] = 0;
    if (j == d) break;
  }
  out.holds = out.worst_ratio <= beta;
  return out;
}

SystemSpec polynomial_system(std::string name, Matrix theta, std::vector<PolynomialTerm> terms,
                             std::optional<RemainderEnvelope> envelope, NoiseConfig noise) {
  const std::size_t n = theta.rows();
  const std::size_t d = theta.cols();
  if (d < n) throw std::invalid_argument(name + ": theta must have at least n columns");
  for (const auto& t : terms) {
    if (t.row >= n) throw std::invalid_argument(name + ": term row out of range");
    if (t.powers.size() != d) {
      throw std::invalid_argument(name + ": term powers must have length " + std::to_string(d));
    }
    unsigned degree = 0;
    for (unsigned pw : t.powers) degree += pw;
    if (degree < 2) {
      throw std::invalid_argument(name + ": polynomial terms must have total degree >= 2");
    }
  }
  Dynamics f = [theta, terms](std::span<const double> z, std::span<double> out) {
    for (std::size_t i = 0; i < theta.rows(); ++i) out[i] = linear_part(theta.row(i), z);
    for (const auto& t : terms) {
      double v = t.coeff;
      for (std::size_t j = 0; j < t.powers.size(); ++j) {
        for (unsigned e = 0; e < t.powers[j]; ++e) v *= z[j];
      }
      out[t.row] += v;
    }
  };
  return SystemSpec(std::move(name), n, d - n, std::move(f), std::move(theta), envelope,
                    std::move(noise));
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"pendulum", "strong", "linear2x1"};
  return names;
}

SystemSpec builtin(std::string_view name) {
  if (name == "pendulum") {
    // Euler-discretized pendulum, step 0.1.
    Dynamics f = [](std::span<const double> z, std::span<double> out) {
      out[0] = z[0] + 0.1 * z[1];
      out[1] = -0.98 * std::sin(z[0]) + z[1] + 0.1 * z[2];
    };
    return SystemSpec("pendulum", 2, 1, std::move(f), Matrix{{1.0, 0.1, 0.0}, {-0.98, 1.0, 0.1}},
                      RemainderEnvelope{2.0, 1.0}, NoiseConfig::gaussian(0.5));
  }
  const Matrix theta{{0.9, 0.6, 1.0}, {0.0, 0.8, 1.0}};
  if (name == "strong") {
    return polynomial_system("strong", theta,
                             {{0, 1.0, {3, 0, 0}}, {0, 1.0, {0, 5, 0}}, {1, 1.0, {1, 2, 0}}},
                             std::nullopt, NoiseConfig::gaussian(0.1));
  }
  if (name == "linear2x1") {
    return polynomial_system("linear2x1", theta, {},
                             RemainderEnvelope{std::numeric_limits<double>::infinity(), 0.0},
                             NoiseConfig::gaussian(0.1));
  }
  std::string valid;
  for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown system '" + std::string(name) + "' (valid: " + valid + ")");
}

}  // namespace sysid
