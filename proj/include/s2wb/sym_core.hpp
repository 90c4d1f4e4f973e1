#pragma once

// Elementary symmetric polynomials of eigenvalue lists and a small dense
// symmetric eigensolver (cyclic Jacobi rotations).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

/// Ordered list of n >= 2 real eigenvalues. Stored order is preserved.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) throw DomainError("Spectrum needs at least two eigenvalues");
  }
  Spectrum(std::initializer_list<double> values) : Spectrum(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Values in non-increasing order.
  std::vector<double> sorted() const {
    std::vector<double> out = values_;
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  }
  std::vector<double> sorted_ascending() const {
    std::vector<double> out = values_;
    std::sort(out.begin(), out.end());
    return out;
  }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double norm2() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }

 private:
  std::vector<double> values_;
};

/// Dense row-major matrix, used for eigenbases and assembly scratch.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DomainError("matrix product: inner dimensions differ");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric matrix with packed upper-triangle storage, so symmetry is exact.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t dim) : dim_(dim), packed_(dim * (dim + 1) / 2, 0.0) {
    if (dim < 2) throw DomainError("SymmetricMatrix needs dim >= 2");
  }

  static SymmetricMatrix identity(std::size_t dim) {
    SymmetricMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
  }
  static SymmetricMatrix diagonal(std::span<const double> d) {
    SymmetricMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.set(i, i, d[i]);
    return m;
  }
  static SymmetricMatrix diagonal(const Spectrum& s) { return diagonal(s.values()); }

  /// Symmetrizes a square dense matrix as (A + A^T) / 2.
  static SymmetricMatrix from_dense(const Matrix& a) {
    if (a.rows() != a.cols()) throw DomainError("from_dense: matrix is not square");
    SymmetricMatrix m(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = i; j < a.cols(); ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
    return m;
  }

  /// Q diag(d) Q^T for a square Q whose columns are the basis vectors.
  static SymmetricMatrix congruence(const Matrix& q, std::span<const double> d) {
    const std::size_t n = q.rows();
    if (q.cols() != d.size() || n != d.size()) throw DomainError("congruence: size mismatch");
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += q(i, k) * d[k] * q(j, k);
        m.set(i, j, s);
      }
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const { return packed_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, double v) { packed_[index(i, j)] = v; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }
  double frobenius2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return s;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : packed_) m = std::max(m, std::abs(v));
    return m;
  }
  Matrix dense() const {
    Matrix a(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) a(i, j) = (*this)(i, j);
    return a;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i >= dim_ || j >= dim_) throw DomainError("SymmetricMatrix index out of range");
    if (i > j) std::swap(i, j);
    return i * dim_ - i * (i + 1) / 2 + j;
  }

  std::size_t dim_ = 0;
  std::vector<double> packed_;
};

namespace detail {

// Coefficients e_0..e_kmax of prod (1 + lambda_i t), skipping index `skip`.
inline std::vector<double> symmetric_coefficients(std::span<const double> lambda, std::size_t kmax,
                                                  std::size_t skip = static_cast<std::size_t>(-1)) {
  std::vector<double> e(kmax + 1, 0.0);
  e[0] = 1.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (i == skip) continue;
    ++used;
    for (std::size_t j = std::min(kmax, used); j >= 1; --j) e[j] += lambda[i] * e[j - 1];
  }
  return e;
}

}  // namespace detail

/// k-th elementary symmetric polynomial of an arbitrary list (sigma_0 = 1).
inline double sigma_k(std::span<const double> lambda, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > lambda.size())
    throw DomainError("sigma_k: k = " + std::to_string(k) + " outside [0, " +
                      std::to_string(lambda.size()) + "]");
  return detail::symmetric_coefficients(lambda, static_cast<std::size_t>(k))[k];
}

inline double sigma_k(const Spectrum& s, int k) { return sigma_k(s.values(), k); }

/// sigma_k of the list with entry i removed; zero for k < 0 or k > n - 1.
inline double sigma_k_without(std::span<const double> lambda, int k, std::size_t i) {
  if (i >= lambda.size()) throw DomainError("sigma_k_without: index out of range");
  if (k < 0 || static_cast<std::size_t>(k) > lambda.size() - 1) return 0.0;
  return detail::symmetric_coefficients(lambda, static_cast<std::size_t>(k), i)[k];
}

/// d sigma_k / d lambda_i = sigma_{k-1}(lambda without lambda_i). Index i is 0-based.
inline double sigma_k_partial(const Spectrum& s, int k, std::size_t i) {
  if (k < 1 || static_cast<std::size_t>(k) > s.size())
    throw DomainError("sigma_k_partial: k = " + std::to_string(k) + " outside [1, n]");
  if (i >= s.size()) throw DomainError("sigma_k_partial: index " + std::to_string(i) + " out of range");
  return sigma_k_without(s.values(), k - 1, i);
}

/// sigma_k / sigma_l for 0 <= l < k <= n.
inline double quotient(const Spectrum& s, int k, int l) {
  if (l < 0 || l >= k || static_cast<std::size_t>(k) > s.size())
    throw DomainError("quotient: need 0 <= l < k <= n");
  const auto e = detail::symmetric_coefficients(s.values(), static_cast<std::size_t>(k));
  if (e[l] == 0.0 || !std::isfinite(e[k] / e[l]))
    throw SingularityError("quotient: sigma_" + std::to_string(l) + " vanishes", e[l]);
  return e[k] / e[l];
}

struct EigenDecomposition {
  Spectrum spectrum;  // eigenvalue j belongs to column j of `vectors`
  Matrix vectors;     // orthogonal
};

/// Cyclic Jacobi diagonalization. Deterministic; eigenvalues are returned in
/// non-increasing order with matching eigenvector columns.
inline EigenDecomposition eigen_sym(const SymmetricMatrix& m) {
  const std::size_t n = m.dim();
  if (n > 64) throw DomainError("eigen_sym: dim > 64 not supported");
  Matrix a = m.dense();
  Matrix v = Matrix::identity(n);
  constexpr int kMaxSweeps = 100;

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= 1e-300 || off <= 1e-17 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        // Rotation annihilating a(p, q).
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw NumericalError("eigen_sym: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  std::vector<double> values(n);
  Matrix vectors(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) vectors(k, j) = v(k, order[j]);
  }
  return {Spectrum(std::move(values)), std::move(vectors)};
}

/// Euclidean dot product.
inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace s2wb
