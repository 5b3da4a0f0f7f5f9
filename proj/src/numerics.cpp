#include "gva/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gva/errors.hpp"

namespace gva {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : key_(seed), stream_(0) {}

Rng::Rng(std::uint64_t key, std::uint64_t stream) : key_(key), stream_(stream) {}

Rng Rng::child(std::uint64_t index) const {
  return Rng(key_, splitmix64(stream_ ^ splitmix64(index + 0x632BE59BD9B4E019ull)));
}

std::vector<Rng> Rng::split(std::size_t k) const {
  std::vector<Rng> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(child(i));
  return out;
}

void Rng::refill() {
  const std::uint64_t mixed_key = splitmix64(key_);
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(mixed_key),
                                            static_cast<std::uint32_t>(mixed_key >> 32)};
  const auto out = philox4x32_10(ctr, key);
  block_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  block_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  ++counter_;
  block_pos_ = 0;
}

std::uint64_t Rng::next_u64() {
  if (block_pos_ >= 2) refill();
  return block_[block_pos_++];
}

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ArgumentError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::column(std::span<const double> v) {
  Matrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data_.begin());
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw ArgumentError("Matrix: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(r * m.cols_));
  }
  return m;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
  std::vector<std::vector<double>> out(rows_, std::vector<double>(cols_));
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out[r][c] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const { return gva::all_finite(data_); }

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw ArgumentError("Matrix +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw ArgumentError("Matrix -=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ArgumentError("Matrix *: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ArgumentError("Matrix * vector: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).max_abs(); }

// ---------------------------------------------------------------------------
// Vectors

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ArgumentError("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("subtract: dimension mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

Vector gaussian_vector(Rng& rng, std::size_t d, std::span<const double> mean, double scale) {
  if (d < 1) throw ArgumentError("gaussian_vector: d must be >= 1");
  if (mean.size() != d) throw ArgumentError("gaussian_vector: mean has dimension " +
                                            std::to_string(mean.size()) + ", expected " +
                                            std::to_string(d));
  if (!(scale >= 0.0)) throw ArgumentError("gaussian_vector: scale must be >= 0");
  Vector out(mean.begin(), mean.end());
  for (std::size_t i = 0; i < d; ++i) out[i] += scale * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Dense kernels

namespace {

double inf_norm(const Matrix& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += std::abs(m(r, c));
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

Matrix mat_exp(const Matrix& m, double tol) {
  if (!m.square()) throw ArgumentError("mat_exp: matrix must be square");
  if (!(tol > 0.0)) throw ArgumentError("mat_exp: tol must be positive");
  const std::size_t n = m.rows();
  const double norm_m = inf_norm(m);

  // Scale so that the scaled norm is at most 1/2.
  int squarings = 0;
  double scaled_norm = norm_m;
  while (scaled_norm > 0.5) {
    scaled_norm *= 0.5;
    ++squarings;
  }
  const Matrix scaled = std::ldexp(1.0, -squarings) * m;

  // Squaring multiplies the truncation error by at most 2^s e^{|M|}.
  const double piece_tol = tol * std::ldexp(1.0, -squarings) * std::exp(-norm_m);
  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  double term_bound = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term = (1.0 / k) * (term * scaled);
    result += term;
    term_bound *= scaled_norm / k;
    // Remaining tail is bounded by a geometric series with ratio <= 1/2.
    if (term_bound * scaled_norm / (k + 1) * 2.0 < piece_tol) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

double op_norm(const Matrix& m, double tol, int max_iter) {
  if (m.empty()) throw ArgumentError("op_norm: empty matrix");
  const Matrix mtm = m.transpose() * m;
  const std::size_t n = mtm.rows();
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.3183098861837907 * static_cast<double>(i + 1) +
                                             0.1 * std::sin(static_cast<double>(i) * 2.7);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double nv = norm(v);
    if (nv == 0.0) return 0.0;
    for (double& x : v) x /= nv;
    Vector w = mtm * v;
    const double next = dot(v, w);
    if (next == 0.0 && norm(w) == 0.0) return 0.0;
    if (std::abs(next - lambda) <= tol * std::abs(next)) return std::sqrt(std::max(next, 0.0));
    lambda = next;
    v = std::move(w);
  }
  throw NumericError("op_norm: power iteration did not converge in " + std::to_string(max_iter) +
                     " iterations");
}

Matrix rotation_2d(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return Matrix{{c, -s}, {s, c}};
}

Matrix random_rotation(Rng& rng, std::size_t d) {
  if (d < 1) throw ArgumentError("random_rotation: d must be >= 1");
  if (d == 1) return Matrix::identity(1);
  if (d == 2) return rotation_2d(2.0 * std::numbers::pi * rng.uniform());

  // Gram-Schmidt QR of a Gaussian matrix; fixing sign(R_ii) > 0 gives Haar on O(d).
  Matrix g(d, d);
  for (double& x : g.data()) x = rng.normal();
  Matrix q(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    Vector col(d);
    for (std::size_t i = 0; i < d; ++i) col[i] = g(i, j);
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, k) * col[i];
      for (std::size_t i = 0; i < d; ++i) col[i] -= proj * q(i, k);
    }
    const double nc = norm(col);
    if (nc < 1e-12) throw NumericError("random_rotation: degenerate Gaussian draw");
    for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / nc;
  }
  // Restrict to SO(d) by flipping the first column when det = -1.
  Matrix lu = q;
  double det = 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < d; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
    if (p != k) {
      for (std::size_t c = 0; c < d; ++c) std::swap(lu(k, c), lu(p, c));
      det = -det;
    }
    det *= lu(k, k);
    for (std::size_t i = k + 1; i < d; ++i) {
      const double f = lu(i, k) / lu(k, k);
      for (std::size_t c = k; c < d; ++c) lu(i, c) -= f * lu(k, c);
    }
  }
  if (det < 0.0)
    for (std::size_t i = 0; i < d; ++i) q(i, 0) = -q(i, 0);
  return q;
}

Matrix inverse(const Matrix& m, double pivot_tol) {
  if (!m.square()) throw ArgumentError("inverse: matrix must be square");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix inv = Matrix::identity(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) < pivot_tol)
      throw NumericError("inverse: pivot magnitude " + std::to_string(std::abs(a(p, k))) +
                         " below tolerance at column " + std::to_string(k));
    if (p != k)
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(k, c), a(p, c));
        std::swap(inv(k, c), inv(p, c));
      }
    const double piv = a(k, k);
    for (std::size_t c = 0; c < n; ++c) {
      a(k, c) /= piv;
      inv(k, c) /= piv;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a(i, k);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(i, c) -= f * a(k, c);
        inv(i, c) -= f * inv(k, c);
      }
    }
  }
  return inv;
}

Vector symmetric_eigenvalues(const Matrix& m, double tol) {
  if (!m.square()) throw ArgumentError("symmetric_eigenvalues: matrix must be square");
  const std::size_t n = m.rows();
  Matrix a = m;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= tol * tol * std::max(1.0, a.max_abs() * a.max_abs())) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

bool is_symmetric(const Matrix& m, double tol) {
  return m.square() && max_abs_diff(m, m.transpose()) <= tol;
}

bool is_psd(const Matrix& m, double tol) {
  if (!is_symmetric(m, tol)) return false;
  const Vector ev = symmetric_eigenvalues(m);
  return ev.empty() || ev.front() >= -tol;
}

}  // namespace gva
