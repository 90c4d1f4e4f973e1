#pragma once

// Sparse row storage, banded LU with partial pivoting and CGNR with diagonal
// preconditioning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

/// Compressed sparse rows, filled one row at a time in row order.
class SparseMatrix {
 public:
  explicit SparseMatrix(std::size_t n) : n_(n) { row_start_.reserve(n + 1); row_start_.push_back(0); }

  std::size_t size() const noexcept { return n_; }
  std::size_t rows_filled() const noexcept { return row_start_.size() - 1; }

  /// Appends an entry to the row currently being filled; repeated columns accumulate.
  void add(std::size_t col, double v) {
    const std::size_t begin = row_start_.back();
    for (std::size_t k = begin; k < cols_.size(); ++k)
      if (cols_[k] == col) {
        vals_[k] += v;
        return;
      }
    cols_.push_back(col);
    vals_.push_back(v);
  }
  void finish_row() {
    if (rows_filled() >= n_) throw DomainError("SparseMatrix: too many rows");
    row_start_.push_back(cols_.size());
  }

  std::size_t row_begin(std::size_t r) const { return row_start_[r]; }
  std::size_t row_end(std::size_t r) const { return row_start_[r + 1]; }
  std::size_t col(std::size_t k) const { return cols_[k]; }
  double value(std::size_t k) const { return vals_[k]; }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) y[r] += vals_[k] * x[cols_[k]];
    return y;
  }
  std::vector<double> multiply_transposed(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) y[cols_[k]] += vals_[k] * x[r];
    return y;
  }

  /// Largest |i - j| over stored entries below (first) and above (second) the diagonal.
  std::pair<std::size_t, std::size_t> bandwidths() const {
    std::size_t kl = 0, ku = 0;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) {
        if (cols_[k] < r) kl = std::max(kl, r - cols_[k]);
        else ku = std::max(ku, cols_[k] - r);
      }
    return {kl, ku};
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
};

/// LU with row partial pivoting inside the band. Row i stores columns
/// [i - kl, i + kl + ku]; the extra kl columns hold fill from interchanges.
class BandedLU {
 public:
  explicit BandedLU(const SparseMatrix& a) : n_(a.size()) {
    std::tie(kl_, ku_) = a.bandwidths();
    width_ = 2 * kl_ + ku_ + 1;
    band_.assign(n_ * width_, 0.0);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) at(r, a.col(k)) += a.value(k);
    factor();
  }

  static double storage_bytes(std::size_t n, std::size_t kl, std::size_t ku) {
    return static_cast<double>(n) * static_cast<double>(2 * kl + ku + 1) * sizeof(double);
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t k = 0; k < n_; ++k) {
      if (pivot_[k] != k) std::swap(x[k], x[pivot_[k]]);
      const std::size_t last = std::min(n_ - 1, k + kl_);
      for (std::size_t r = k + 1; r <= last; ++r) x[r] -= at(r, k) * x[k];
    }
    for (std::size_t i = n_; i-- > 0;) {
      const std::size_t last = std::min(n_ - 1, i + kl_ + ku_);
      double s = x[i];
      for (std::size_t j = i + 1; j <= last; ++j) s -= at(i, j) * x[j];
      x[i] = s / at(i, i);
    }
    return x;
  }

 private:
  double& at(std::size_t i, std::size_t j) { return band_[i * width_ + (j + kl_ - i)]; }
  double at(std::size_t i, std::size_t j) const { return band_[i * width_ + (j + kl_ - i)]; }

  void factor() {
    pivot_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t last_row = std::min(n_ - 1, k + kl_);
      const std::size_t last_col = std::min(n_ - 1, k + kl_ + ku_);
      std::size_t p = k;
      double best = std::abs(at(k, k));
      for (std::size_t r = k + 1; r <= last_row; ++r)
        if (std::abs(at(r, k)) > best) {
          best = std::abs(at(r, k));
          p = r;
        }
      if (!(best > 0.0)) throw SingularityError("BandedLU: zero pivot in column " + std::to_string(k), best);
      pivot_[k] = p;
      if (p != k)
        for (std::size_t j = k; j <= last_col; ++j) std::swap(at(k, j), at(p, j));
      const double inv = 1.0 / at(k, k);
      for (std::size_t r = k + 1; r <= last_row; ++r) {
        const double l = at(r, k) * inv;
        at(r, k) = l;
        if (l == 0.0) continue;
        for (std::size_t j = k + 1; j <= last_col; ++j) at(r, j) -= l * at(k, j);
      }
    }
  }

  std::size_t n_;
  std::size_t kl_ = 0, ku_ = 0, width_ = 0;
  std::vector<double> band_;
  std::vector<std::size_t> pivot_;
};

struct CgnrResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;  // |A^T (b - A x)| / |A^T b|
};

/// Conjugate gradients on A^T A x = A^T b preconditioned by diag(A^T A).
inline CgnrResult cgnr(const SparseMatrix& a, std::span<const double> b, double rel_tol, int max_iter) {
  const std::size_t n = a.size();
  std::vector<double> diag(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) diag[a.col(k)] += a.value(k) * a.value(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(diag[i] > 0.0)) throw SingularityError("cgnr: empty column " + std::to_string(i), diag[i]);
    diag[i] = 1.0 / diag[i];
  }
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  CgnrResult res;
  res.x.assign(n, 0.0);
  std::vector<double> r = a.multiply_transposed(b);
  const double r0 = norm(r);
  if (r0 == 0.0) return res;
  std::vector<double> z(n), p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = diag[i] * r[i];
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    const std::vector<double> ap = a.multiply(p);
    double denom = 0.0;
    for (double v : ap) denom += v * v;
    const double alpha = rz / denom;
    const std::vector<double> atap = a.multiply_transposed(ap);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * atap[i];
    }
    res.relative_residual = norm(r) / r0;
    if (res.relative_residual <= rel_tol) return res;
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = diag[i] * r[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalError("cgnr: no convergence in " + std::to_string(max_iter) + " iterations (relative residual " +
                       std::to_string(res.relative_residual) + ")");
}

enum class LinearSolver { Auto, Banded, Cgnr };

inline const char* to_string(LinearSolver s) {
  switch (s) {
    case LinearSolver::Auto: return "auto";
    case LinearSolver::Banded: return "banded-lu";
    case LinearSolver::Cgnr: return "cgnr";
  }
  return "?";
}

/// Band storage cap for the Auto choice.
inline constexpr double kBandedStorageCap = 512.0 * 1024.0 * 1024.0;

/// Auto picks the banded factorization for m <= 129 when its storage fits
/// under the cap, CGNR otherwise.
inline LinearSolver choose_linear_solver(const SparseMatrix& a, std::size_t m, LinearSolver requested) {
  if (requested != LinearSolver::Auto) return requested;
  const auto [kl, ku] = a.bandwidths();
  return m <= 129 && BandedLU::storage_bytes(a.size(), kl, ku) <= kBandedStorageCap ? LinearSolver::Banded
                                                                                     : LinearSolver::Cgnr;
}

inline std::vector<double> solve_linear(const SparseMatrix& a, std::span<const double> b, LinearSolver kind) {
  if (kind == LinearSolver::Banded) return BandedLU(a).solve(b);
  const int cap = static_cast<int>(std::max<std::size_t>(1000, 20 * a.size()));
  return cgnr(a, b, tol::kLinearSolve, cap).x;
}

}  // namespace s2wb
