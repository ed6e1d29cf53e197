#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sysid {

using Vector = std::vector<double>;

/// Dense real matrix, row-major.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Throws std::invalid_argument if data.size() != rows*cols or any entry is non-finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t k);
  static Matrix diagonal(std::span<const double> d);
  static Matrix column(std::span<const double> v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  Vector col(std::size_t c) const;

  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Thrown by solve_spd when a Cholesky pivot is not safely positive.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value);
  std::size_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pivot_;
  double value_;
};

/// a * b. Throws std::invalid_argument on inner-dimension mismatch.
Matrix mat_mul(const Matrix& a, const Matrix& b);
/// a * b' without forming the transpose.
Matrix mul_transpose(const Matrix& a, const Matrix& b);
/// m * v.
Vector mat_vec(const Matrix& m, std::span<const double> v);

/// Solves s * T = b for symmetric positive definite s via Cholesky.
/// Symmetry is checked entrywise against 1e-10 * max|s|; a pivot at or
/// below 1e-14 * ||s|| (spectral) raises NotPositiveDefinite.
Matrix solve_spd(const Matrix& s, const Matrix& b);

/// Singular values in descending order (one-sided Jacobi).
Vector singular_values(const Matrix& m);
/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
Vector sym_eigenvalues(const Matrix& s);

struct EigExtremes {
  double lambda_min;
  double lambda_max;
};
EigExtremes sym_eig_extremes(const Matrix& s);

struct MatrixNorms {
  double one_norm;   // max absolute column sum
  double frobenius;
};
MatrixNorms norms(const Matrix& m);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);

bool is_symmetric(const Matrix& s, double rel_tol = 1e-10);

double norm1(std::span<const double> v);
double norm2(std::span<const double> v);

}  // namespace sysid
