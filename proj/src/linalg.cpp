#include "sysid/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sysid {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

void require_square(const Matrix& s, const char* op) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument(std::string(op) + ": matrix is not square");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: entry count " + std::to_string(data_.size()) +
                                " does not equal " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("Matrix: non-finite entry");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
    for (double v : r) {
      if (!std::isfinite(v)) throw std::invalid_argument("Matrix: non-finite entry");
      data_.push_back(v);
    }
  }
}

Matrix Matrix::identity(std::size_t k) {
  Matrix m(k, k);
  for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::column(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Vector Matrix::col(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value)
    : std::runtime_error("solve_spd: matrix is not positive definite (pivot " +
                         std::to_string(pivot) + " = " + std::to_string(value) + ")"),
      pivot_(pivot),
      value_(value) {}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("mat_mul: inner dimensions differ (" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + ")");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix mul_transpose(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("mul_transpose: column counts differ (" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.cols()) + ")");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      out(i, j) = std::inner_product(arow.begin(), arow.end(), brow.begin(), 0.0);
    }
  }
  return out;
}

Vector mat_vec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) {
    throw std::invalid_argument("mat_vec: vector length " + std::to_string(v.size()) +
                                " does not match " + std::to_string(m.cols()) + " columns");
  }
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = std::inner_product(r.begin(), r.end(), v.begin(), 0.0);
  }
  return out;
}

double max_abs(const Matrix& m) {
  double mx = 0.0;
  for (double v : m.data()) mx = std::max(mx, std::abs(v));
  return mx;
}

bool is_symmetric(const Matrix& s, double rel_tol) {
  if (s.rows() != s.cols()) return false;
  const double tol = rel_tol * max_abs(s);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = i + 1; j < s.cols(); ++j)
      if (std::abs(s(i, j) - s(j, i)) > tol) return false;
  return true;
}

Matrix solve_spd(const Matrix& s, const Matrix& b) {
  require_square(s, "solve_spd");
  if (b.rows() != s.rows()) {
    throw std::invalid_argument("solve_spd: right-hand side has " + std::to_string(b.rows()) +
                                " rows, expected " + std::to_string(s.rows()));
  }
  if (!is_symmetric(s)) throw std::invalid_argument("solve_spd: matrix is not symmetric");

  const std::size_t k = s.rows();
  const EigExtremes ext = sym_eig_extremes(s);
  const double pivot_floor = 1e-14 * std::max(std::abs(ext.lambda_min), std::abs(ext.lambda_max));

  // Lower Cholesky factor, built from the lower triangle of s.
  Matrix l(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double d = s(j, j);
    for (std::size_t t = 0; t < j; ++t) d -= l(j, t) * l(j, t);
    if (!(d > pivot_floor)) throw NotPositiveDefinite(j, d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < k; ++i) {
      double v = s(i, j);
      for (std::size_t t = 0; t < j; ++t) v -= l(i, t) * l(j, t);
      l(i, j) = v / ljj;
    }
  }

  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < k; ++i) {
      double v = x(i, c);
      for (std::size_t t = 0; t < i; ++t) v -= l(i, t) * x(t, c);
      x(i, c) = v / l(i, i);
    }
    for (std::size_t i = k; i-- > 0;) {
      double v = x(i, c);
      for (std::size_t t = i + 1; t < k; ++t) v -= l(t, i) * x(t, c);
      x(i, c) = v / l(i, i);
    }
  }
  return x;
}

Vector singular_values(const Matrix& m) {
  // One-sided Jacobi on the columns of a tall copy; the column count is the short side.
  Matrix a = m.rows() >= m.cols() ? m : m.transpose();
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (cols == 0) return {};

  // Column-major working copy for contiguous column access.
  std::vector<Vector> c(cols, Vector(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c[j][i] = a(i, j);

  constexpr double eps = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += c[p][i] * c[p][i];
          beta += c[q][i] * c[q][i];
          gamma += c[p][i] * c[q][i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double cp = c[p][i];
          const double cq = c[q][i];
          c[p][i] = cs * cp - sn * cq;
          c[q][i] = sn * cp + cs * cq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sv(cols);
  for (std::size_t j = 0; j < cols; ++j) sv[j] = norm2(c[j]);
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

double spectral_norm(const Matrix& m) {
  if (m.empty()) return 0.0;
  return singular_values(m).front();
}

Vector sym_eigenvalues(const Matrix& s) {
  require_square(s, "sym_eigenvalues");
  if (!is_symmetric(s)) throw std::invalid_argument("sym_eigenvalues: matrix is not symmetric");
  const std::size_t k = s.rows();
  Matrix a = s;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) off += a(i, j) * a(i, j);
    if (off == 0.0) break;
    double diag = 0.0;
    for (std::size_t i = 0; i < k; ++i) diag += a(i, i) * a(i, i);
    if (off <= 1e-32 * diag) break;

    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t r = 0; r < k; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - sn * arq;
          a(r, q) = sn * arp + c * arq;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - sn * aqr;
          a(q, r) = sn * apr + c * aqr;
        }
      }
    }
  }
  Vector ev(k);
  for (std::size_t i = 0; i < k; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

EigExtremes sym_eig_extremes(const Matrix& s) {
  const Vector ev = sym_eigenvalues(s);
  if (ev.empty()) throw std::invalid_argument("sym_eig_extremes: empty matrix");
  return {ev.front(), ev.back()};
}

MatrixNorms norms(const Matrix& m) {
  double one = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) sum += std::abs(m(r, c));
    one = std::max(one, sum);
  }
  return {one, frobenius_norm(m)};
}

double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace sysid
