#pragma once

// Scaling experiment (Hessian oscillation of w on half-boxes as the domain
// grows) and the dyadic concentration diagnostic for the nodal field a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "s2wb/fd_solver.hpp"
#include "s2wb/grid_transform.hpp"
#include "s2wb/parallel.hpp"
#include "s2wb/superharmonicity.hpp"

namespace s2wb {

/// max over entries (i <= j) of max - min of D^2_h w over finite nodes in the
/// central `fraction` of w's box.
inline double hessian_oscillation(const PotentialGrid& w, double fraction = 0.5) {
  const std::size_t n = w.n();
  std::vector<double> lo(n * n, HUGE_VAL), hi(n * n, -HUGE_VAL);
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (w.is_boundary(p) || !in_central_box(w, w.point(p), fraction)) continue;
    const SymmetricMatrix h = discrete_hessian(w, p);
    if (!detail::finite_hessian(h)) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        lo[i * n + j] = std::min(lo[i * n + j], h(i, j));
        hi[i * n + j] = std::max(hi[i * n + j], h(i, j));
      }
  }
  double osc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      if (hi[i * n + j] >= lo[i * n + j]) osc = std::max(osc, hi[i * n + j] - lo[i * n + j]);
  return osc;
}

struct ScalingRow {
  double R = 0.0;
  double osc = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::size_t valid = 0;  // transformed nodes with a maximizer inside the box
  std::optional<std::string> error;
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  double alpha_hat = 0.0;  // -slope of the least-squares fit of log osc on log R
  bool strictly_decreasing = false;
  bool complete() const {
    return std::none_of(rows.begin(), rows.end(), [](const ScalingRow& r) { return r.error.has_value(); });
  }
};

/// Least-squares slope of log y on log x.
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t k = x.size();
  if (k < 2) return std::nan("");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Solves on [-R, R]^n for each R (in parallel), transforms, and measures the
/// half-box oscillation of D^2_h w. A failed solve is recorded in its row.
inline ScalingTable scaling_experiment(const ScalarField& base_boundary, std::size_t n, std::span<const double> R_list,
                                       std::size_t m, double K, unsigned workers = 1,
                                       const SolveOptions& base_opts = {}) {
  for (std::size_t i = 0; i + 1 < R_list.size(); ++i)
    if (!(R_list[i] < R_list[i + 1])) throw DomainError("scaling_experiment: R_list must be increasing");
  const TransformConfig cfg(n, K);
  SolveOptions opts = base_opts;
  opts.K = K;
  ScalingTable table;
  table.rows = parallel_chunks(R_list.size(), workers, [&](std::size_t i) {
    ScalingRow row;
    row.R = R_list[i];
    try {
      const auto sol = solve_dirichlet(base_boundary, n, row.R, m, opts);
      row.iterations = sol.report.iterations;
      row.residual = sol.report.residual;
      const auto tr = transform_grid(sol.u, cfg);
      row.valid = tr.valid;
      row.osc = hessian_oscillation(tr.w);
    } catch (const Error& e) {
      row.error = e.what();
    }
    return row;
  });
  std::vector<double> xs, ys;
  table.strictly_decreasing = table.complete();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (r.error) continue;
    if (i > 0 && !(r.osc < table.rows[i - 1].osc)) table.strictly_decreasing = false;
    if (r.osc > 0.0) {
      xs.push_back(r.R);
      ys.push_back(r.osc);
    }
  }
  table.alpha_hat = -log_log_slope(xs, ys);
  return table;
}

struct ConcentrationRow {
  int level = 0;
  std::size_t nodes = 0;   // nodes of the sub-box with a defined
  double a_min = 0.0;      // a_k
  double bad_fraction = 0.0;  // |E_k|: share of those nodes with a > a_k + xi
};

struct ConcentrationTable {
  std::vector<ConcentrationRow> rows;
  bool truncated = false;  // levels dropped because a sub-box had fewer than 5 nodes per axis
  bool non_increasing = false;  // observed, never asserted
};

/// For k = 0..levels, the sub-box of w's box scaled by 2^-k about its center.
inline ConcentrationTable concentration_diagnostic(const PotentialGrid& w, const TransformConfig& cfg, double xi,
                                                   int levels) {
  if (!(xi > 0.0)) throw DomainError("concentration_diagnostic: xi must be positive");
  if (levels < 0) throw DomainError("concentration_diagnostic: levels must be >= 0");
  const auto sh = superharmonicity_residual(w, cfg);
  ConcentrationTable t;
  for (int k = 0; k <= levels; ++k) {
    const double frac = std::ldexp(1.0, -k);
    if (static_cast<double>(w.m() - 1) * frac + 1.0 < static_cast<double>(kMinGridNodes)) {
      t.truncated = true;
      break;
    }
    ConcentrationRow row;
    row.level = k;
    row.a_min = HUGE_VAL;
    for (std::size_t p = 0; p < w.size(); ++p)
      if (std::isfinite(sh.a[p]) && in_central_box(w, w.point(p), frac)) {
        row.a_min = std::min(row.a_min, sh.a[p]);
        ++row.nodes;
      }
    if (row.nodes == 0) {
      t.truncated = true;
      break;
    }
    std::size_t bad = 0;
    for (std::size_t p = 0; p < w.size(); ++p)
      if (std::isfinite(sh.a[p]) && in_central_box(w, w.point(p), frac) && sh.a[p] > row.a_min + xi) ++bad;
    row.bad_fraction = static_cast<double>(bad) / static_cast<double>(row.nodes);
    t.rows.push_back(row);
  }
  t.non_increasing = true;
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (t.rows[i].bad_fraction > t.rows[i - 1].bad_fraction) t.non_increasing = false;
  return t;
}

}  // namespace s2wb
