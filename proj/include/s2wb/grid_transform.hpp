#pragma once

// Discrete Legendre-Lewy transform of a grid potential: w(y) = <x*, y> - u~(x*)
// with u~ = u + Kbar |x|^2 / 2 and x* the maximizer. The maximizer is first
// located among grid nodes by the dimension-wise linear-time conjugate, then
// refined by Newton on a local degree-5 tensor interpolant of u~.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/grid.hpp"
#include "s2wb/legendre_lewy.hpp"
#include "s2wb/sym_core.hpp"

namespace s2wb {

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

namespace detail {

/// max_k (x_k y_j + c_k) over finite c_k, for increasing x and y.
inline void conjugate_1d(std::span<const double> x, std::span<const double> c, std::span<const double> y,
                         std::span<double> value, std::span<std::size_t> arg) {
  // lower convex hull of (x_k, -c_k)
  std::vector<std::size_t> hull;
  hull.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(c[k])) continue;
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      // drop b when it lies on or above the segment a-k
      const double cross = (x[b] - x[a]) * (-c[k] + c[a]) - (-c[b] + c[a]) * (x[k] - x[a]);
      if (cross <= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(k);
  }
  if (hull.empty()) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      value[j] = -std::numeric_limits<double>::infinity();
      arg[j] = kNoNode;
    }
    return;
  }
  std::size_t v = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    while (v + 1 < hull.size()) {
      const std::size_t a = hull[v], b = hull[v + 1];
      const double slope = (-c[b] + c[a]) / (x[b] - x[a]);
      if (slope < y[j]) ++v;
      else break;
    }
    arg[j] = hull[v];
    value[j] = x[hull[v]] * y[j] + c[hull[v]];
  }
}

/// 1-D Lagrange weights and their first two derivatives on nodes 0..5 at s.
struct LagrangeWeights {
  std::array<double, 6> w{}, d1{}, d2{};
};

inline LagrangeWeights lagrange6(double s) {
  LagrangeWeights lw;
  for (int k = 0; k < 6; ++k) {
    double den = 1.0;
    for (int j = 0; j < 6; ++j)
      if (j != k) den *= static_cast<double>(k - j);
    double w = 1.0, d1 = 0.0, d2 = 0.0;
    for (int j = 0; j < 6; ++j) {
      if (j == k) continue;
      // product rule, carried as (w, d1, d2) of the running product
      const double f = s - j;
      d2 = d2 * f + 2.0 * d1;
      d1 = d1 * f + w;
      w *= f;
    }
    lw.w[k] = w / den;
    lw.d1[k] = d1 / den;
    lw.d2[k] = d2 / den;
  }
  return lw;
}

/// Local degree-5 tensor interpolant: value, gradient and Hessian at x.
struct LocalJet {
  double value = 0.0;
  std::array<double, kMaxGridDim> grad{};
  std::array<std::array<double, kMaxGridDim>, kMaxGridDim> hess{};
};

inline LocalJet interpolate_jet(const PotentialGrid& g, const Point& x) {
  const std::size_t n = g.n();
  std::array<std::size_t, kMaxGridDim> start{};
  std::array<LagrangeWeights, kMaxGridDim> lw;
  for (std::size_t d = 0; d < n; ++d) {
    const double t = (x[d] - g.lo(d)) / g.h(d);
    const double cell = std::clamp(std::floor(t), 0.0, static_cast<double>(g.m() - 2));
    start[d] = static_cast<std::size_t>(std::clamp(cell - 2.0, 0.0, static_cast<double>(g.m() - 6)));
    lw[d] = lagrange6(t - static_cast<double>(start[d]));
  }
  LocalJet jet;
  const std::size_t terms = n == 2 ? 36 : 216;
  for (std::size_t t = 0; t < terms; ++t) {
    std::array<std::size_t, kMaxGridDim> k{};
    std::size_t rem = t, flat = 0;
    for (std::size_t d = n; d-- > 0;) {
      k[d] = rem % 6;
      rem /= 6;
      flat += (start[d] + k[d]) * g.stride(d);
    }
    const double v = g[flat];
    double w = 1.0;
    for (std::size_t d = 0; d < n; ++d) w *= lw[d].w[k[d]];
    jet.value += w * v;
    for (std::size_t a = 0; a < n; ++a) {
      double ga = v / g.h(a);
      for (std::size_t d = 0; d < n; ++d) ga *= d == a ? lw[d].d1[k[d]] : lw[d].w[k[d]];
      jet.grad[a] += ga;
      for (std::size_t b = a; b < n; ++b) {
        double hab = v / (g.h(a) * g.h(b));
        for (std::size_t d = 0; d < n; ++d) {
          if (a == b) hab *= d == a ? lw[d].d2[k[d]] : lw[d].w[k[d]];
          else hab *= (d == a || d == b) ? lw[d].d1[k[d]] : lw[d].w[k[d]];
        }
        jet.hess[a][b] += hab;
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) jet.hess[a][b] = jet.hess[b][a];
  return jet;
}

inline bool solve_small(std::size_t n, std::array<std::array<double, kMaxGridDim>, kMaxGridDim> a,
                        std::array<double, kMaxGridDim>& b) {
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(a[r][k]) > std::abs(a[p][k])) p = r;
    if (!(std::abs(a[p][k]) > 0.0)) return false;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double l = a[r][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[r][j] -= l * a[k][j];
      b[r] -= l * b[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = k + 1; j < n; ++j) b[k] -= a[k][j] * b[j];
    b[k] /= a[k][k];
  }
  return true;
}

}  // namespace detail

struct DiscreteConjugate {
  PotentialGrid values;            // on the target grid; -inf where nothing finite is available
  std::vector<std::size_t> argmax; // flat node of the source grid, or kNoNode
};

/// max over source nodes with finite values of <x, y> - f(x), for every node y
/// of `target` (which supplies the layout; its values are ignored). Applied
/// one axis at a time, each pass a linear-time 1-D conjugate.
inline DiscreteConjugate discrete_conjugate(const PotentialGrid& f, const PotentialGrid& target) {
  const std::size_t n = f.n(), m = f.m();
  if (target.n() != n || target.m() != m) throw DomainError("discrete_conjugate: grid shapes differ");
  const std::size_t total = f.size();
  std::vector<double> cur(total);
  for (std::size_t p = 0; p < total; ++p)
    cur[p] = std::isfinite(f[p]) ? -f[p] : -std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> arg(n, std::vector<std::size_t>(total, kNoNode));
  std::vector<double> xs(m), ys(m), line(m), out(m);
  std::vector<std::size_t> amax(m);
  for (std::size_t d = n; d-- > 0;) {
    for (std::size_t i = 0; i < m; ++i) {
      xs[i] = f.coord(d, i);
      ys[i] = target.coord(d, i);
    }
    const std::size_t s = f.stride(d);
    for (std::size_t base = 0; base < total; ++base) {
      if (f.axis_index(base, d) != 0) continue;
      for (std::size_t i = 0; i < m; ++i) line[i] = cur[base + i * s];
      detail::conjugate_1d(xs, line, ys, out, amax);
      for (std::size_t i = 0; i < m; ++i) {
        cur[base + i * s] = out[i];
        arg[d][base + i * s] = amax[i];
      }
    }
  }
  DiscreteConjugate dc{target, std::vector<std::size_t>(total, kNoNode)};
  for (std::size_t p = 0; p < total; ++p) {
    dc.values[p] = cur[p];
    std::size_t idx = p;
    bool ok = true;
    for (std::size_t d = 0; d < n && ok; ++d) {
      const std::size_t i = arg[d][idx];
      if (i == kNoNode) {
        ok = false;
        break;
      }
      idx = idx - f.axis_index(idx, d) * f.stride(d) + i * f.stride(d);
    }
    if (ok) dc.argmax[p] = idx;
  }
  return dc;
}

struct GridTransform {
  PotentialGrid w;           // NaN where the maximizer leaves the source box
  std::vector<Point> preimage;  // x*(y); NaN where invalid
  std::size_t valid = 0;
};

/// u~ = u + Kbar |x|^2 / 2 on u's grid.
inline PotentialGrid shifted_potential(const PotentialGrid& u, double kbar) {
  PotentialGrid t = u;
  for (std::size_t p = 0; p < t.size(); ++p) {
    const Point x = t.point(p);
    double r2 = 0.0;
    for (std::size_t d = 0; d < t.n(); ++d) r2 += x[d] * x[d];
    t[p] += 0.5 * kbar * r2;
  }
  return t;
}

/// Checks discrete convexity of u~ at interior nodes; throws at the first failure.
inline void require_discrete_convexity(const PotentialGrid& ut) {
  for (std::size_t p = 0; p < ut.size(); ++p) {
    if (ut.is_boundary(p)) continue;
    if (!(eigen_sym(discrete_hessian(ut, p)).spectrum.min() > 0.0))
      throw ConvexityError("transform_grid: D^2_h u + Kbar I is not positive definite", p);
  }
}

/// Output grid: uniform over [min y, max y] per axis with the input node
/// count, where y = D_h u~ at interior nodes.
inline GridTransform transform_grid(const PotentialGrid& u, const TransformConfig& cfg) {
  const std::size_t n = u.n(), m = u.m();
  if (n != cfg.n()) throw DomainError("transform_grid: grid dimension differs from config n");
  if (n < 2) throw DomainError("transform_grid: n must be >= 2");
  const PotentialGrid ut = shifted_potential(u, cfg.Kbar());
  require_discrete_convexity(ut);

  std::vector<double> ylo(n, std::numeric_limits<double>::infinity()), yhi(n, -std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < ut.size(); ++p) {
    if (ut.is_boundary(p)) continue;
    const auto y = discrete_gradient(ut, p);
    for (std::size_t d = 0; d < n; ++d) {
      ylo[d] = std::min(ylo[d], y[d]);
      yhi[d] = std::max(yhi[d], y[d]);
    }
  }
  GridTransform out{PotentialGrid(n, m, ylo, yhi), std::vector<Point>(ut.size())};
  const DiscreteConjugate dc = discrete_conjugate(ut, out.w);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t q = 0; q < out.w.size(); ++q) {
    const Point y = out.w.point(q);
    Point x = ut.point(dc.argmax[q]);
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      const auto jet = detail::interpolate_jet(ut, x);
      std::array<double, kMaxGridDim> r{};
      double rn = 0.0, yn = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        r[d] = jet.grad[d] - y[d];
        rn = std::max(rn, std::abs(r[d]));
        yn = std::max(yn, std::abs(y[d]));
      }
      if (rn <= 1e-13 * (1.0 + yn)) {
        ok = true;
        break;
      }
      if (!detail::solve_small(n, jet.hess, r)) break;
      bool inside = true;
      for (std::size_t d = 0; d < n; ++d) {
        x[d] -= r[d];
        if (!(x[d] >= ut.lo(d) && x[d] <= ut.hi(d))) inside = false;
      }
      if (!inside) break;
    }
    if (ok) {
      const auto jet = detail::interpolate_jet(ut, x);
      double v = -jet.value;
      for (std::size_t d = 0; d < n; ++d) v += x[d] * y[d];
      out.w[q] = v;
      out.preimage[q] = x;
      ++out.valid;
    } else {
      out.w[q] = nan;
      out.preimage[q].fill(nan);
    }
  }
  return out;
}

}  // namespace s2wb
