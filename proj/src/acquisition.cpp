#include "sysid/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <istream>
#include <ostream>
#include <sstream>

#include "sysid/format.hpp"

namespace sysid {

namespace {

std::string format_point(std::span<const double> z) {
  std::string s = "(";
  for (std::size_t i = 0; i < z.size(); ++i) s += (i ? ", " : "") + format_double(z[i]);
  return s + ")";
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

FeasibleRegion FeasibleRegion::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) {
    throw std::invalid_argument("FeasibleRegion: lower/upper lengths differ");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw std::invalid_argument("FeasibleRegion: lower > upper at coordinate " +
                                  std::to_string(i));
    }
  }
  return {Kind::box, std::move(lower), std::move(upper)};
}

bool FeasibleRegion::contains(std::span<const double> z) const {
  if (kind == Kind::all) return true;
  if (z.size() != lower.size()) return false;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < lower[i] || z[i] > upper[i]) return false;
  }
  return true;
}

void AcquisitionConfig::validate(std::size_t dim) const {
  if (num_experiments < 1) throw std::invalid_argument("acquisition: N must be >= 1");
  if (!(q > 0.0) || !std::isfinite(q)) throw std::invalid_argument("acquisition: q must be > 0");
  if (m.size() != dim) {
    throw std::invalid_argument("acquisition: center m has length " + std::to_string(m.size()) +
                                ", expected " + std::to_string(dim));
  }
  if (!(init_perturbation_std >= 0.0)) {
    throw std::invalid_argument("acquisition: init_perturbation_std must be >= 0");
  }
  Vector z = m;
  for (double sign : {1.0, -1.0}) {
    for (std::size_t j = 0; j < dim; ++j) {
      z[j] = m[j] + sign * q;
      if (!region.contains(z)) {
        throw std::invalid_argument("acquisition: planned point " + format_point(z) +
                                    " lies outside the feasible region");
      }
      z[j] = m[j];
    }
  }
}

std::vector<Vector> plan_initializations(const AcquisitionConfig& cfg, std::size_t dim) {
  if (dim < 2) throw std::invalid_argument("plan_initializations: dim must be >= 2");
  cfg.validate(dim);
  std::vector<Vector> plan;
  plan.reserve(cfg.num_experiments);
  double sign = 1.0;
  for (std::size_t i = 1; i <= cfg.num_experiments; ++i) {
    const std::size_t r = i % dim;
    const std::size_t axis = (r == 0 ? dim : r) - 1;
    Vector z = cfg.m;
    z[axis] += sign * cfg.q;
    plan.push_back(std::move(z));
    if (r == 0) sign = -sign;
  }
  return plan;
}

namespace {

// One noisy step from z: fz = f(z), x1 = fz + w.
void advance(const SystemSpec& sys, std::span<const double> z, std::span<double> fz,
             std::span<double> x1, std::span<double> w, RandomStream& rng) {
  sys.evaluate(z, fz);
  for (double v : fz) {
    if (!std::isfinite(v)) {
      throw SimulationError(sys.name() + ": non-finite dynamics output at z = " + format_point(z));
    }
  }
  sample_noise_into(sys.noise(), w, rng);
  for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = fz[i] + w[i];
}

// Calls sink(i, z, x1, w, fz) for every planned experiment.
template <class Sink>
void run_planned(const SystemSpec& sys, const AcquisitionConfig& cfg, RandomStream& rng,
                    Sink&& sink) {
  const std::size_t n = sys.n();
  const std::size_t dim = sys.dim();
  if (dim < 2) throw std::invalid_argument("plan_initializations: dim must be >= 2");
  cfg.validate(dim);
  Vector z(dim), fz(n), x1(n), w(n);
  double sign = 1.0;
  for (std::size_t i = 1; i <= cfg.num_experiments; ++i) {
    const std::size_t r = i % dim;
    const std::size_t axis = (r == 0 ? dim : r) - 1;
    std::copy(cfg.m.begin(), cfg.m.end(), z.begin());
    z[axis] += sign * cfg.q;
    if (r == 0) sign = -sign;
    if (cfg.init_perturbation_std > 0.0) {
      for (double& v : z) v += rng.normal(cfg.init_perturbation_std);
    }
    advance(sys, z, fz, x1, w, rng);
    sink(i - 1, z, x1, w, fz);
  }
}

template <class Sink>
void run_single_trajectory(const SystemSpec& sys, double sigma_u, std::size_t num_samples,
                           RandomStream& rng, Sink&& sink) {
  if (!(sigma_u >= 0.0)) throw std::invalid_argument("single trajectory: sigma_u must be >= 0");
  if (num_samples < 1) throw std::invalid_argument("single trajectory: N must be >= 1");
  const std::size_t n = sys.n();
  Vector z(sys.dim(), 0.0), fz(n), x1(n), w(n);
  for (std::size_t k = 0; k < num_samples; ++k) {
    for (std::size_t j = n; j < z.size(); ++j) z[j] = rng.normal(sigma_u);
    advance(sys, z, fz, x1, w, rng);
    const double norm = norm2(x1);
    if (!(norm <= kDivergenceThreshold)) throw TrajectoryDiverged(k, norm);
    sink(k, z, x1, w, fz);
    std::copy(x1.begin(), x1.end(), z.begin());
  }
}

struct DatasetSink {
  const SystemSpec& sys;
  Dataset& data;
  GroundTruth& truth;

  void operator()(std::size_t i, const Vector& z, const Vector& x1, const Vector& w,
                  const Vector& fz) {
    const std::size_t n = sys.n();
    const Matrix& theta = sys.theta_true();
    for (std::size_t k = 0; k < n; ++k) {
      double lin = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) lin += theta(k, j) * z[j];
      truth.w(k, i) = w[k];
      truth.r(k, i) = fz[k] - lin;
    }
    data.triples.push_back({x1, Vector(z.begin(), z.begin() + n), Vector(z.begin() + n, z.end())});
  }
};

struct MomentSink {
  Moments& mom;

  void operator()(std::size_t, const Vector& z, const Vector& x1, const Vector&, const Vector&) {
    const std::size_t d = z.size();
    for (std::size_t a = 0; a < d; ++a) {
      const double za = z[a];
      for (std::size_t r = 0; r < x1.size(); ++r) mom.xzt(r, a) += x1[r] * za;
      for (std::size_t b = a; b < d; ++b) mom.zzt(a, b) += za * z[b];
    }
    ++mom.count;
  }
};

void symmetrize_upper(Matrix& s) {
  for (std::size_t a = 0; a < s.rows(); ++a)
    for (std::size_t b = 0; b < a; ++b) s(a, b) = s(b, a);
}

Dataset make_dataset(const SystemSpec& sys, std::size_t num, DataSource source) {
  Dataset data;
  data.n = sys.n();
  data.p = sys.p();
  data.source = source;
  data.triples.reserve(num);
  return data;
}

}  // namespace

Dataset collect(const SystemSpec& sys, const AcquisitionConfig& cfg, RandomStream& rng) {
  Dataset data = make_dataset(sys, cfg.num_experiments, DataSource::algorithm1);
  GroundTruth truth{Matrix(sys.n(), cfg.num_experiments), Matrix(sys.n(), cfg.num_experiments)};
  run_planned(sys, cfg, rng, DatasetSink{sys, data, truth});
  data.ground_truth = std::move(truth);
  return data;
}

Moments collect_moments(const SystemSpec& sys, const AcquisitionConfig& cfg, RandomStream& rng) {
  Moments mom{Matrix(sys.n(), sys.dim()), Matrix(sys.dim(), sys.dim()), 0};
  run_planned(sys, cfg, rng, MomentSink{mom});
  symmetrize_upper(mom.zzt);
  return mom;
}

Moments moments_of(const Dataset& data) {
  const std::size_t d = data.n + data.p;
  Moments mom{Matrix(data.n, d), Matrix(d, d), 0};
  MomentSink sink{mom};
  Vector z(d);
  const Vector none;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Triple& t = data.triples[i];
    std::copy(t.x0.begin(), t.x0.end(), z.begin());
    std::copy(t.u0.begin(), t.u0.end(), z.begin() + static_cast<std::ptrdiff_t>(data.n));
    sink(i, z, t.x1, none, none);
  }
  symmetrize_upper(mom.zzt);
  return mom;
}

TrajectoryDiverged::TrajectoryDiverged(std::size_t step_index, double state_norm)
    : SimulationError("trajectory diverged at step " + std::to_string(step_index) +
                      " (state norm " + format_double(state_norm) + ")"),
      step_(step_index) {}

Dataset collect_single_trajectory(const SystemSpec& sys, double sigma_u, std::size_t num_samples,
                                  RandomStream& rng) {
  Dataset data = make_dataset(sys, num_samples, DataSource::single_trajectory);
  GroundTruth truth{Matrix(sys.n(), num_samples), Matrix(sys.n(), num_samples)};
  run_single_trajectory(sys, sigma_u, num_samples, rng, DatasetSink{sys, data, truth});
  data.ground_truth = std::move(truth);
  return data;
}

Moments collect_single_trajectory_moments(const SystemSpec& sys, double sigma_u,
                                          std::size_t num_samples, RandomStream& rng) {
  Moments mom{Matrix(sys.n(), sys.dim()), Matrix(sys.dim(), sys.dim()), 0};
  run_single_trajectory(sys, sigma_u, num_samples, rng, MomentSink{mom});
  symmetrize_upper(mom.zzt);
  return mom;
}

void write_dataset_csv_header(std::ostream& os, std::size_t n, std::size_t p) {
  os << "trial,i";
  for (std::size_t j = 1; j <= n; ++j) os << ",x1_" << j;
  for (std::size_t j = 1; j <= n; ++j) os << ",x0_" << j;
  for (std::size_t j = 1; j <= p; ++j) os << ",u0_" << j;
  os << '\n';
}

void write_dataset_csv_rows(std::ostream& os, const Dataset& data, long trial) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Triple& t = data.triples[i];
    os << trial << ',' << i;
    for (double v : t.x1) os << ',' << format_double(v);
    for (double v : t.x0) os << ',' << format_double(v);
    for (double v : t.u0) os << ',' << format_double(v);
    os << '\n';
  }
}

void write_dataset_csv(std::ostream& os, const Dataset& data, long trial) {
  write_dataset_csv_header(os, data.n, data.p);
  write_dataset_csv_rows(os, data, trial);
}

std::vector<std::pair<long, Dataset>> read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("dataset csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 4 || header[0] != "trial" || header[1] != "i") {
    throw std::invalid_argument("dataset csv: header must start with trial,i");
  }
  std::size_t n = 0, p = 0;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c].starts_with("x1_")) ++n;
    if (header[c].starts_with("u0_")) ++p;
  }
  std::ostringstream expected;
  write_dataset_csv_header(expected, n, p);
  if (expected.str() != line + "\n") {
    throw std::invalid_argument("dataset csv: malformed header '" + line + "'");
  }

  std::vector<std::pair<long, Dataset>> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("dataset csv: line " + std::to_string(lineno) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
    }
    try {
      const long trial = parse_long(fields[0]);
      Triple t{Vector(n), Vector(n), Vector(p)};
      for (std::size_t j = 0; j < n; ++j) t.x1[j] = parse_double(fields[2 + j]);
      for (std::size_t j = 0; j < n; ++j) t.x0[j] = parse_double(fields[2 + n + j]);
      for (std::size_t j = 0; j < p; ++j) t.u0[j] = parse_double(fields[2 + 2 * n + j]);
      for (const Vector* v : {&t.x1, &t.x0, &t.u0}) {
        for (double x : *v) {
          if (!std::isfinite(x)) throw std::invalid_argument("non-finite value");
        }
      }
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == trial; });
      if (it == out.end()) {
        Dataset d;
        d.n = n;
        d.p = p;
        out.emplace_back(trial, std::move(d));
        it = std::prev(out.end());
      }
      it->second.triples.push_back(std::move(t));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("dataset csv: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sysid
