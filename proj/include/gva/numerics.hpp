#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace gva {

using Vector = std::vector<double>;
using ParamVector = Vector;

/// Counter-based generator (Philox4x32-10).
///
/// A stream is identified by (key, stream id); the n-th 128-bit block of a
/// stream is a pure function of (key, stream id, n). `child(i)` derives a new
/// stream id from the parent's, so Monte Carlo trial i can own `rng.child(i)`
/// and produce the same samples regardless of execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return key_; }
  std::uint64_t stream() const { return stream_; }

  Rng child(std::uint64_t index) const;
  std::vector<Rng> split(std::size_t k) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  Rng(std::uint64_t key, std::uint64_t stream);
  void refill();

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> block_{};
  int block_pos_ = 2;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Dense row-major matrix sized for control-scale problems.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix column(std::span<const double> v);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<std::vector<double>> to_rows() const;

  Matrix transpose() const;
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Vector operator*(const Matrix& a, std::span<const double> x);

/// Max-norm of a − b.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Vector helpers.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_norm(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
Vector subtract(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

/// mean + scale * z with z standard normal; advances `rng` by mean.size() draws.
Vector gaussian_vector(Rng& rng, std::size_t d, std::span<const double> mean, double scale);

/// Matrix exponential by scaling and squaring with a Taylor tail bound.
Matrix mat_exp(const Matrix& m, double tol = 1e-14);

/// Largest singular value by power iteration on MᵀM.
double op_norm(const Matrix& m, double tol = 1e-12, int max_iter = 100000);

/// Uniformly random rotation (det +1).
Matrix random_rotation(Rng& rng, std::size_t d);
/// 2x2 rotation by `angle` radians; test hook for random_rotation.
Matrix rotation_2d(double angle);

/// Inverse by Gaussian elimination with partial pivoting; throws NumericError
/// when a pivot magnitude drops below `pivot_tol`.
Matrix inverse(const Matrix& m, double pivot_tol = 1e-12);

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
Vector symmetric_eigenvalues(const Matrix& m, double tol = 1e-14);
bool is_symmetric(const Matrix& m, double tol = 1e-10);
bool is_psd(const Matrix& m, double tol = 1e-10);

}  // namespace gva
