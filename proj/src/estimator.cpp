#include "sysid/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "sysid/format.hpp"

namespace sysid {

namespace {

Matrix regularized_gram(const Matrix& zzt, double lambda) {
  Matrix g = zzt;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += lambda;
  return g;
}

// M G^{-1} for symmetric G.
Matrix right_solve(const Matrix& g, const Matrix& m) {
  return solve_spd(g, m.transpose()).transpose();
}

}  // namespace

Batches assemble_batches(const Dataset& data) {
  if (data.triples.empty()) throw std::invalid_argument("assemble_batches: dataset is empty");
  const std::size_t n = data.triples.front().x1.size();
  const std::size_t p = data.triples.front().u0.size();
  const std::size_t num = data.triples.size();
  Batches b{Matrix(n, num), Matrix(n + p, num)};
  for (std::size_t i = 0; i < num; ++i) {
    const Triple& t = data.triples[i];
    if (t.x1.size() != n || t.x0.size() != n || t.u0.size() != p) {
      throw std::invalid_argument("assemble_batches: triple " + std::to_string(i) +
                                  " has inconsistent dimensions");
    }
    for (std::size_t k = 0; k < n; ++k) {
      b.x(k, i) = t.x1[k];
      b.z(k, i) = t.x0[k];
    }
    for (std::size_t k = 0; k < p; ++k) b.z(n + k, i) = t.u0[k];
  }
  return b;
}

Estimate fit_from_moments(const Matrix& xzt, const Matrix& zzt, double lambda,
                          std::size_t n_samples) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("fit: lambda must be finite and >= 0");
  }
  if (zzt.rows() != zzt.cols() || xzt.cols() != zzt.rows()) {
    throw std::invalid_argument("fit: moment shapes are inconsistent");
  }
  Estimate est;
  est.lambda = lambda;
  est.n_samples = n_samples;
  est.gram = regularized_gram(zzt, lambda);
  try {
    est.theta_hat = right_solve(est.gram, xzt);
  } catch (const NotPositiveDefinite&) {
    throw RankDeficientDesign();
  }
  return est;
}

Estimate fit(const Matrix& x, const Matrix& z, double lambda) {
  if (x.cols() != z.cols()) {
    throw std::invalid_argument("fit: X has " + std::to_string(x.cols()) + " columns, Z has " +
                                std::to_string(z.cols()));
  }
  return fit_from_moments(mul_transpose(x, z), mul_transpose(z, z), lambda, z.cols());
}

double estimation_error(const Estimate& est, const Matrix& theta_true) {
  if (est.theta_hat.rows() != theta_true.rows() || est.theta_hat.cols() != theta_true.cols()) {
    throw std::invalid_argument("estimation_error: shape mismatch");
  }
  return spectral_norm(est.theta_hat - theta_true);
}

Vector predict(const Estimate& est, std::span<const double> z) {
  return mat_vec(est.theta_hat, z);
}

ErrorTerms error_decomposition(const Estimate& est, const Dataset& data,
                               const Matrix& theta_true) {
  if (!data.ground_truth) {
    throw std::invalid_argument("error_decomposition: dataset has no ground truth");
  }
  const Batches b = assemble_batches(data);
  const Matrix& g = est.gram;
  ErrorTerms t{};
  t.reg_term = est.lambda == 0.0 ? 0.0 : spectral_norm(-est.lambda * right_solve(g, theta_true));
  t.noise_term = spectral_norm(right_solve(g, mul_transpose(data.ground_truth->w, b.z)));
  t.nonlin_term = spectral_norm(right_solve(g, mul_transpose(data.ground_truth->r, b.z)));
  return t;
}

double whitened_norm(const Matrix& m, const Matrix& z, double lambda) {
  const Matrix a = mul_transpose(m, z);
  const Matrix g = regularized_gram(mul_transpose(z, z), lambda);
  Matrix s = mat_mul(a, solve_spd(g, a.transpose()));
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = i + 1; j < s.cols(); ++j) {
      const double avg = 0.5 * (s(i, j) + s(j, i));
      s(i, j) = s(j, i) = avg;
    }
  }
  return std::sqrt(std::max(0.0, sym_eig_extremes(s).lambda_max));
}

void write_estimate_csv(std::ostream& os, const Estimate& est) {
  os << "# lambda=" << format_double(est.lambda) << '\n';
  os << "# n_samples=" << est.n_samples << '\n';
  os << "row,col,value\n";
  for (std::size_t r = 0; r < est.theta_hat.rows(); ++r) {
    for (std::size_t c = 0; c < est.theta_hat.cols(); ++c) {
      os << r << ',' << c << ',' << format_double(est.theta_hat(r, c)) << '\n';
    }
  }
}

Estimate read_estimate_csv(std::istream& is) {
  Estimate est;
  std::string line;
  bool header_seen = false;
  struct Entry {
    std::size_t r, c;
    double v;
  };
  std::vector<Entry> entries;
  std::size_t rows = 0, cols = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with("# lambda=")) {
      est.lambda = parse_double(std::string_view(line).substr(9));
    } else if (line.starts_with("# n_samples=")) {
      est.n_samples = static_cast<std::size_t>(parse_long(std::string_view(line).substr(12)));
    } else if (line == "row,col,value") {
      header_seen = true;
    } else {
      if (!header_seen) throw std::invalid_argument("estimate csv: missing row,col,value header");
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) {
        throw std::invalid_argument("estimate csv: malformed line '" + line + "'");
      }
      std::string_view sv(line);
      Entry e{static_cast<std::size_t>(parse_long(sv.substr(0, c1))),
              static_cast<std::size_t>(parse_long(sv.substr(c1 + 1, c2 - c1 - 1))),
              parse_double(sv.substr(c2 + 1))};
      rows = std::max(rows, e.r + 1);
      cols = std::max(cols, e.c + 1);
      entries.push_back(e);
    }
  }
  if (entries.size() != rows * cols || entries.empty()) {
    throw std::invalid_argument("estimate csv: entries do not form a full matrix");
  }
  est.theta_hat = Matrix(rows, cols);
  for (const auto& e : entries) est.theta_hat(e.r, e.c) = e.v;
  return est;
}

}  // namespace sysid
