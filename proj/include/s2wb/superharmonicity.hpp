#pragma once

// Discrete Delta_H a on a transformed potential w, with
// a = (sigma_n / sigma_{n-1}(mu))^{1/3}, mu = eig(D^2_h w), and
// H_ij = sigma_n(mu) G_ij where G(D^2 w) = -sigma_2(-Kbar + (D^2 w)^{-1}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/grid.hpp"
#include "s2wb/legendre_lewy.hpp"
#include "s2wb/sym_core.hpp"

namespace s2wb {

/// Eigenvalues mu outside (0, 1) by more than this raise TransformDomainError.
inline constexpr double kMuBandSlack = 1e-9;

struct SuperharmonicityField {
  PotentialGrid a;        // NaN where D^2_h w is unavailable
  PotentialGrid delta_h;  // sum H_ij D_ij a; NaN where unavailable
  PotentialGrid delta_g;  // sum G_ij D_ij a
  std::size_t evaluated = 0;
  double max_dual_defect = 0.0;      // |dual assembly - sigma_n Delta_G a| / scale
  double max_equation_defect = 0.0;  // max |G + 1|, the discrete equation residual
};

namespace detail {

inline bool finite_hessian(const SymmetricMatrix& h) {
  for (std::size_t i = 0; i < h.dim(); ++i)
    for (std::size_t j = i; j < h.dim(); ++j)
      if (!std::isfinite(h(i, j))) return false;
  return true;
}

}  // namespace detail

inline SuperharmonicityField superharmonicity_residual(const PotentialGrid& w, const TransformConfig& cfg) {
  const std::size_t n = w.n();
  if (n != cfg.n()) throw DomainError("superharmonicity_residual: grid dimension differs from config n");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SuperharmonicityField out{w, w, w};
  std::fill(out.a.values().begin(), out.a.values().end(), nan);
  std::fill(out.delta_h.values().begin(), out.delta_h.values().end(), nan);
  std::fill(out.delta_g.values().begin(), out.delta_g.values().end(), nan);

  std::vector<EigenDecomposition> eig(w.size());
  std::vector<char> have(w.size(), 0);
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w.is_boundary(p)) continue;
    const SymmetricMatrix hw = discrete_hessian(w, p);
    if (!detail::finite_hessian(hw)) continue;
    eig[p] = eigen_sym(hw);
    const Spectrum& mu = eig[p].spectrum;
    if (!(mu.min() > -kMuBandSlack && mu.max() < 1.0 + kMuBandSlack))
      throw TransformDomainError("superharmonicity_residual: eigenvalue of D^2_h w outside (0, 1) at node " +
                                 std::to_string(p) + " (" + std::to_string(mu.min()) + ", " +
                                 std::to_string(mu.max()) + ")");
    if (!(mu.min() > 0.0)) continue;
    double inv = 0.0;
    for (double m : mu.values()) inv += 1.0 / m;
    out.a[p] = std::cbrt(1.0 / inv);
    have[p] = 1;
  }

  std::vector<double> lambda(n), gi(n), c(n);
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (!have[p] || !w.has_margin(p, 1)) continue;
    const SymmetricMatrix da = discrete_hessian(out.a, p);
    if (!detail::finite_hessian(da)) continue;
    const Spectrum& mu = eig[p].spectrum;
    const Matrix& q = eig[p].vectors;
    for (std::size_t i = 0; i < n; ++i) lambda[i] = 1.0 / mu[i] - cfg.Kbar();
    const double s1 = sigma_k(lambda, 1);
    const double G = -sigma_k(lambda, 2);
    const double sn = sigma_k(mu, static_cast<int>(n));
    double dh = 0.0, dg = 0.0, dual = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // c_i = q_i^T D^2_h a q_i
      double ci = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t s = 0; s < n; ++s) ci += q(r, i) * da(r, s) * q(s, i);
      c[i] = ci;
      gi[i] = (s1 - lambda[i]) / (mu[i] * mu[i]);
      dg += gi[i] * ci;
      dh += sn * gi[i] * ci;
      const int ni = static_cast<int>(n);
      const double dH = -sigma_k_without(mu.values(), ni - 3, i) + cfg.A1() * sigma_k_without(mu.values(), ni - 2, i) -
                        cfg.A2() * sigma_k_without(mu.values(), ni - 1, i);
      dual += (dH - (G + 1.0) * sigma_k_without(mu.values(), ni - 1, i)) * ci;
      scale += std::abs(dH * ci) + std::abs(sn * gi[i] * ci);
    }
    out.delta_h[p] = dh;
    out.delta_g[p] = dg;
    out.max_dual_defect = std::max(out.max_dual_defect, std::abs(dual - dh) / std::max(1.0, scale));
    out.max_equation_defect = std::max(out.max_equation_defect, std::abs(G + 1.0));
    ++out.evaluated;
  }
  return out;
}

/// True when y lies in the central `fraction` of the grid's box along every axis.
inline bool in_central_box(const PotentialGrid& g, const Point& y, double fraction) {
  for (std::size_t d = 0; d < g.n(); ++d) {
    const double mid = 0.5 * (g.lo(d) + g.hi(d)), half = 0.5 * (g.hi(d) - g.lo(d));
    if (std::abs(y[d] - mid) > fraction * half) return false;
  }
  return true;
}

/// max(0, max of the finite values over the central `fraction` of the box).
inline double max_positive_part(const PotentialGrid& field, double fraction = 0.5) {
  double worst = 0.0;
  for (std::size_t p = 0; p < field.size(); ++p)
    if (std::isfinite(field[p]) && in_central_box(field, field.point(p), fraction)) worst = std::max(worst, field[p]);
  return worst;
}

}  // namespace s2wb
