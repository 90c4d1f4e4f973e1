#pragma once

// Legendre-Lewy transform on spectra: mu_i = 1 / (lambda_i + Kbar), the
// transformed equation H(mu) = -sigma_{n-2} + A1 sigma_{n-1} - A2 sigma_n = 0,
// the quotient q = sigma_{n-1} / sigma_{n-2} and its ellipticity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/sym_core.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

enum class KbarRule {
  EightThirdsK,   // Kbar = 8K/3
  FloorKPlusOne,  // 8K/3 <= K + 1, so Kbar = K + 1 + offset
  Explicit,
};

inline const char* to_string(KbarRule r) {
  switch (r) {
    case KbarRule::EightThirdsK: return "8K/3";
    case KbarRule::FloorKPlusOne: return "K+1+1e-6";
    case KbarRule::Explicit: return "explicit";
  }
  return "?";
}

class TransformConfig {
 public:
  /// Kbar defaults to max(8K/3, K + 1 + 1e-6).
  TransformConfig(std::size_t n, double k_semiconvex, std::optional<double> kbar = std::nullopt)
      : n_(n), k_(k_semiconvex) {
    if (n < 2) throw ConfigError("TransformConfig: n must be >= 2");
    if (!(k_ > 0.0) || !std::isfinite(k_)) throw ConfigError("TransformConfig: K must be positive and finite");
    if (kbar) {
      kbar_ = *kbar;
      rule_ = KbarRule::Explicit;
    } else if (8.0 * k_ / 3.0 > k_ + 1.0 + tol::kKbarFloorOffset) {
      kbar_ = 8.0 * k_ / 3.0;
      rule_ = KbarRule::EightThirdsK;
    } else {
      kbar_ = k_ + 1.0 + tol::kKbarFloorOffset;
      rule_ = KbarRule::FloorKPlusOne;
    }
    if (!(kbar_ > k_) || !std::isfinite(kbar_))
      throw ConfigError("TransformConfig: Kbar = " + std::to_string(kbar_) + " must exceed K = " + std::to_string(k_));
  }

  std::size_t n() const noexcept { return n_; }
  double K() const noexcept { return k_; }
  double Kbar() const noexcept { return kbar_; }
  KbarRule rule() const noexcept { return rule_; }
  double J() const noexcept { return static_cast<double>(n_) * kbar_; }
  double A1() const noexcept { return static_cast<double>(n_ - 1) * kbar_; }
  double A2() const noexcept {
    const double nn = static_cast<double>(n_);
    return nn * (nn - 1.0) / 2.0 * kbar_ * kbar_ - 1.0;
  }

 private:
  std::size_t n_;
  double k_;
  double kbar_ = 0.0;
  KbarRule rule_ = KbarRule::EightThirdsK;
};

/// H(mu) = -sigma_{n-2} + A1 sigma_{n-1} - A2 sigma_n.
inline double conformal_residual(std::span<const double> mu, const TransformConfig& cfg) {
  const int n = static_cast<int>(mu.size());
  const auto e = detail::symmetric_coefficients(mu, mu.size());
  return -e[n - 2] + cfg.A1() * e[n - 1] - cfg.A2() * e[n];
}

struct TransformedState {
  Spectrum mu;     // ascending
  double a = 0.0;  // (sigma_n / sigma_{n-1})^{1/3}
  double q = 0.0;  // sigma_{n-1} / sigma_{n-2}
  double residual = 0.0;
};

/// mu_i = 1 / (lambda_i + Kbar).
inline TransformedState transform_spectrum(const Spectrum& lambda, const TransformConfig& cfg) {
  const std::size_t n = lambda.size();
  if (n != cfg.n()) throw DomainError("transform_spectrum: spectrum size differs from config n");
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double shifted = lambda[i] + cfg.Kbar();
    if (!(shifted > 0.0))
      throw TransformDomainError("transform_spectrum: lambda_" + std::to_string(i) + " = " +
                                 std::to_string(lambda[i]) + " <= -Kbar");
    mu[i] = 1.0 / shifted;
    if (!(mu[i] < 1.0))
      throw TransformDomainError("transform_spectrum: mu_" + std::to_string(i) + " = " + std::to_string(mu[i]) +
                                 " is not below 1");
  }
  std::sort(mu.begin(), mu.end());
  const auto e = detail::symmetric_coefficients(mu, n);
  const int ni = static_cast<int>(n);
  TransformedState st;
  st.a = std::cbrt(e[ni] / e[ni - 1]);
  st.q = e[ni - 1] / e[ni - 2];
  st.residual = -e[ni - 2] + cfg.A1() * e[ni - 1] - cfg.A2() * e[ni];
  st.mu = Spectrum(std::move(mu));
  return st;
}

struct EigenvalueBounds {
  double c_top;   // max over states of mu_1
  double c_rest;  // min over states and i >= 2 of mu_i
};

inline EigenvalueBounds eigenvalue_bounds_check(std::span<const TransformedState> states) {
  if (states.empty()) throw DomainError("eigenvalue_bounds_check: no states");
  EigenvalueBounds b{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& st : states) {
    b.c_top = std::max(b.c_top, st.mu[0]);
    for (std::size_t i = 1; i < st.mu.size(); ++i) b.c_rest = std::min(b.c_rest, st.mu[i]);
  }
  return b;
}

/// q(mu) = sigma_{n-1}(mu) / sigma_{n-2}(mu).
inline double quotient_q(const Spectrum& mu) {
  const int n = static_cast<int>(mu.size());
  const auto e = detail::symmetric_coefficients(mu.values(), mu.size());
  if (!(std::abs(e[n - 2]) > std::numeric_limits<double>::min()))
    throw SingularityError("quotient_q: sigma_{n-2} underflows", e[n - 2]);
  return e[n - 1] / e[n - 2];
}

/// dq/dmu_i = [sigma_{n-2,i} sigma_{n-2} - sigma_{n-1} sigma_{n-3,i}] / sigma_{n-2}^2,
/// where sigma_{k,i} omits mu_i.
inline std::vector<double> q_ellipticity(const Spectrum& mu) {
  const std::size_t n = mu.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!(mu[i] > 0.0)) throw DomainError("q_ellipticity: mu must be strictly positive");
  const int ni = static_cast<int>(n);
  const auto e = detail::symmetric_coefficients(mu.values(), n);
  const double den = e[ni - 2];
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s_nm2_i = sigma_k_without(mu.values(), ni - 2, i);
    const double s_nm3_i = sigma_k_without(mu.values(), ni - 3, i);
    grad[i] = (s_nm2_i * den - e[ni - 1] * s_nm3_i) / (den * den);
  }
  return grad;
}

}  // namespace s2wb
