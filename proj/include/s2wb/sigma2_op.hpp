#pragma once

// The sigma_2 operator F(M) = ((tr M)^2 - |M|^2) / 2, its branches, and its
// linearization F_ij = (tr M) I - M.

#include <cmath>
#include <span>
#include <string>

#include "s2wb/errors.hpp"
#include "s2wb/sym_core.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

enum class Branch { PositiveTrace, NegativeTrace };

inline const char* to_string(Branch b) {
  return b == Branch::PositiveTrace ? "positive-trace" : "negative-trace";
}

/// sigma_2 of the eigenvalues of M, evaluated from the trace and Frobenius norm.
inline double evaluate_F(const SymmetricMatrix& m) {
  const double tr = m.trace();
  return 0.5 * (tr * tr - m.frobenius2());
}

/// A Hessian lying on {sigma_2 = 1}.
class OperatorPoint {
 public:
  explicit OperatorPoint(SymmetricMatrix hessian, double tolerance = tol::kOnManifold)
      : hessian_(std::move(hessian)) {
    auto eig = eigen_sym(hessian_);
    spectrum_ = std::move(eig.spectrum);
    basis_ = std::move(eig.vectors);
    validate(tolerance);
  }

  /// Point with D^2u = diag(spectrum).
  explicit OperatorPoint(const Spectrum& spectrum, double tolerance = tol::kOnManifold)
      : hessian_(SymmetricMatrix::diagonal(spectrum)) {
    auto eig = eigen_sym(hessian_);
    spectrum_ = std::move(eig.spectrum);
    basis_ = std::move(eig.vectors);
    validate(tolerance);
  }

  const SymmetricMatrix& hessian() const noexcept { return hessian_; }
  const Spectrum& spectrum() const noexcept { return spectrum_; }
  /// Eigenvectors of the Hessian as columns, aligned with spectrum().
  const Matrix& basis() const noexcept { return basis_; }
  Branch branch() const noexcept { return branch_; }
  double trace() const noexcept { return trace_; }
  std::size_t dim() const noexcept { return hessian_.dim(); }

 private:
  void validate(double tolerance) {
    trace_ = hessian_.trace();
    const double s2 = sigma_k(spectrum_, 2);
    if (!(std::abs(s2 - 1.0) <= tolerance))
      throw PreconditionError("OperatorPoint: sigma_2 = " + std::to_string(s2) + " is not 1");
    branch_ = trace_ > 0.0 ? Branch::PositiveTrace : Branch::NegativeTrace;
  }

  SymmetricMatrix hessian_;
  Spectrum spectrum_;
  Matrix basis_;
  Branch branch_ = Branch::PositiveTrace;
  double trace_ = 0.0;
};

namespace detail {
inline void require_positive(const OperatorPoint& p, const char* op) {
  if (p.branch() != Branch::PositiveTrace)
    throw BranchError(std::string(op) + ": point lies on the negative-trace branch");
}
}  // namespace detail

/// F = (tr M) I - M. Throws if not positive definite.
inline SymmetricMatrix linearization(const OperatorPoint& p) {
  detail::require_positive(p, "linearization");
  const SymmetricMatrix& m = p.hessian();
  const std::size_t n = m.dim();
  SymmetricMatrix f(n);
  const double tr = p.trace();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) f.set(i, j, (i == j ? tr : 0.0) - m(i, j));
  const double smallest = tr - p.spectrum().max();
  if (!(smallest > 0.0))
    throw EllipticityError("linearization: smallest eigenvalue " + std::to_string(smallest) + " <= 0");
  return f;
}

/// |grad_F v|^2 = g^T F g.
inline double grad_F_square(const OperatorPoint& p, std::span<const double> g) {
  if (g.size() != p.dim()) throw DomainError("grad_F_square: dimension mismatch");
  const SymmetricMatrix f = linearization(p);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) s += f(i, j) * g[i] * g[j];
  return s;
}

/// Delta_F applied to a quantity with Hessian H: sum_ij F_ij H_ij.
inline double apply_lap_F(const OperatorPoint& p, const SymmetricMatrix& h) {
  if (h.dim() != p.dim()) throw DomainError("apply_lap_F: dimension mismatch");
  const SymmetricMatrix f = linearization(p);
  double s = 0.0;
  for (std::size_t i = 0; i < h.dim(); ++i)
    for (std::size_t j = 0; j < h.dim(); ++j) s += f(i, j) * h(i, j);
  return s;
}

}  // namespace s2wb
