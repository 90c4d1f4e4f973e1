#pragma once

// Damped Newton solver for sigma_2(D^2_h u) = g on [-R, R]^n (n = 2, 3) with
// Dirichlet data. Each step solves sum_ij F_ij D_ij delta = -(sigma_2 - g) with
// F = (tr D^2_h u) I - D^2_h u frozen at the current iterate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/grid.hpp"
#include "s2wb/linear_solve.hpp"
#include "s2wb/sigma2_op.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

/// Positive-branch isotropic level: t with sigma_2(t I) = 1.
inline double isotropic_level(std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::sqrt(2.0 / (nn * (nn - 1.0)));
}

inline ScalarField quadratic_boundary(std::size_t n) {
  const double t = isotropic_level(n);
  return [t, n](const Point& x) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < n; ++d) r2 += x[d] * x[d];
    return 0.5 * t * r2;
  };
}

/// The isotropic quadratic plus amp * sin(x_1 + 0.3) * prod_{d>1} cos(x_d / 2).
/// The perturbation is fixed in x, so it does not scale with the box.
inline ScalarField perturbed_boundary(std::size_t n, double amp = 0.1) {
  const ScalarField q = quadratic_boundary(n);
  return [q, n, amp](const Point& x) {
    double bump = std::sin(x[0] + 0.3);
    for (std::size_t d = 1; d < n; ++d) bump *= std::cos(0.5 * x[d]);
    return q(x) + amp * bump;
  };
}

struct SolveOptions {
  double K = 1.0;
  double tol = 1e-10;
  int max_iter = 50;
  ScalarField rhs;  // empty means g = 1
  LinearSolver solver = LinearSolver::Auto;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;                // max over interior of |sigma_2(D^2_h u) - g|
  double min_shifted_eigenvalue = 0.0;  // min over interior of eig(D^2_h u + K I)
  Branch branch = Branch::PositiveTrace;
  std::vector<double> history;  // residual before each step and after the last
  std::vector<double> steps;    // accepted damping factors
  int projections = 0;
  std::size_t m_matrix_violations = 0;  // summed over the assembled systems
  std::size_t diagonally_dominant_rows = 0;
  LinearSolver linear_solver = LinearSolver::Auto;
};

struct SolveResult {
  PotentialGrid u;
  SolveReport report;
};

namespace detail {

struct InteriorMap {
  std::vector<std::size_t> nodes;    // flat index of each unknown
  std::vector<std::size_t> unknown;  // flat -> unknown index or npos
};

inline InteriorMap interior_map(const PotentialGrid& g) {
  InteriorMap im;
  im.unknown.assign(g.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t p = 0; p < g.size(); ++p)
    if (!g.is_boundary(p)) {
      im.unknown[p] = im.nodes.size();
      im.nodes.push_back(p);
    }
  return im;
}

struct Assembly {
  SparseMatrix matrix;
  std::vector<double> boundary_term;  // sum of coefficients times boundary values, per row
  std::size_t m_matrix_violations = 0;
  std::size_t diagonally_dominant_rows = 0;
};

/// Rows sum_ij A_ij(p) D_ij over the unknowns. Boundary neighbours are moved
/// into boundary_term using the values stored in g.
template <typename Coeff>
Assembly assemble_operator(const PotentialGrid& g, const InteriorMap& im, Coeff coeff) {
  const std::size_t n = g.n();
  Assembly as{SparseMatrix(im.nodes.size()), std::vector<double>(im.nodes.size(), 0.0)};
  std::vector<std::pair<std::ptrdiff_t, double>> local;
  auto put = [&local](std::ptrdiff_t off, double c) {
    for (auto& e : local)
      if (e.first == off) {
        e.second += c;
        return;
      }
    local.emplace_back(off, c);
  };
  for (std::size_t r = 0; r < im.nodes.size(); ++r) {
    const std::size_t p = im.nodes[r];
    const SymmetricMatrix a = coeff(p);
    local.clear();
    bool dominant = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto si = static_cast<std::ptrdiff_t>(g.stride(i));
      const double hi2 = g.h(i) * g.h(i);
      put(-si, a(i, i) / hi2);
      put(0, -2.0 * a(i, i) / hi2);
      put(si, a(i, i) / hi2);
      double off_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) off_sum += std::abs(a(i, j));
      if (a(i, i) < off_sum) dominant = false;
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto sj = static_cast<std::ptrdiff_t>(g.stride(j));
        const double c = 2.0 * a(i, j) / (4.0 * g.h(i) * g.h(j));
        put(si + sj, c);
        put(si - sj, -c);
        put(-si + sj, -c);
        put(-si - sj, c);
      }
    }
    bool violation = false;
    for (const auto& [off, c] : local) {
      if (off != 0 && c < 0.0) violation = true;
      const std::size_t q = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(p) + off);
      const std::size_t col = im.unknown[q];
      if (col == std::numeric_limits<std::size_t>::max()) as.boundary_term[r] += c * g[q];
      else as.matrix.add(col, c);
    }
    as.matrix.finish_row();
    if (dominant) {
      ++as.diagonally_dominant_rows;
      if (violation) ++as.m_matrix_violations;
    }
  }
  return as;
}

/// Solves sum A_ij D_ij v = rhs in the interior with v = g on the boundary.
template <typename Coeff>
PotentialGrid solve_linear_dirichlet(PotentialGrid g, const InteriorMap& im, Coeff coeff,
                                     std::span<const double> rhs, LinearSolver kind) {
  Assembly as = assemble_operator(g, im, coeff);
  std::vector<double> b(im.nodes.size());
  for (std::size_t r = 0; r < b.size(); ++r) b[r] = rhs[r] - as.boundary_term[r];
  const auto v = solve_linear(as.matrix, b, choose_linear_solver(as.matrix, g.m(), kind));
  for (std::size_t r = 0; r < v.size(); ++r) g[im.nodes[r]] = v[r];
  return g;
}

}  // namespace detail

/// max over interior nodes of |sigma_2(D^2_h u) - g|; g = 1 when rhs is empty.
inline double sigma2_residual(const PotentialGrid& u, const ScalarField& rhs = {}) {
  double worst = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (u.is_boundary(p)) continue;
    const double g = rhs ? rhs(u.point(p)) : 1.0;
    worst = std::max(worst, std::abs(evaluate_F(discrete_hessian(u, p)) - g));
  }
  return worst;
}

/// The Newton matrix sum_ij F_ij D_ij at u over the interior unknowns.
inline SparseMatrix newton_matrix(const PotentialGrid& u) {
  const auto im = detail::interior_map(u);
  return detail::assemble_operator(u, im, [&u](std::size_t p) {
           const SymmetricMatrix d2 = discrete_hessian(u, p);
           SymmetricMatrix f(u.n());
           const double tr = d2.trace();
           for (std::size_t i = 0; i < u.n(); ++i)
             for (std::size_t j = i; j < u.n(); ++j) f.set(i, j, (i == j ? tr : 0.0) - d2(i, j));
           return f;
         }).matrix;
}

inline SolveResult solve_dirichlet(const ScalarField& boundary, std::size_t n, double R, std::size_t m,
                                   const SolveOptions& opts = {}) {
  if (n != 2 && n != 3) throw DomainError("solve_dirichlet: n must be 2 or 3");
  if (!(opts.tol > 0.0) || opts.max_iter < 0) throw DomainError("solve_dirichlet: bad tolerance or iteration cap");
  PotentialGrid u = PotentialGrid::box(n, m, R);
  const auto im = detail::interior_map(u);
  const std::size_t N = im.nodes.size();
  const ScalarField quad = quadratic_boundary(n);
  const SymmetricMatrix unit = SymmetricMatrix::identity(n);
  auto laplace = [&unit](std::size_t) { return unit; };

  // Initial guess: quadratic plus the discrete harmonic extension of the difference.
  PotentialGrid diff = PotentialGrid::box(n, m, R);
  for (std::size_t p = 0; p < u.size(); ++p)
    if (u.is_boundary(p)) diff[p] = boundary(u.point(p)) - quad(u.point(p));
  const std::vector<double> zeros(N, 0.0);
  diff = detail::solve_linear_dirichlet(std::move(diff), im, laplace, zeros, opts.solver);
  for (std::size_t p = 0; p < u.size(); ++p)
    u[p] = u.is_boundary(p) ? boundary(u.point(p)) : quad(u.point(p)) + diff[p];

  std::vector<double> g(N, 1.0);
  if (opts.rhs)
    for (std::size_t r = 0; r < N; ++r) g[r] = opts.rhs(u.point(im.nodes[r]));

  auto residual = [&](const PotentialGrid& v, std::vector<double>* out) {
    double worst = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
      const double res = evaluate_F(discrete_hessian(v, im.nodes[r])) - g[r];
      if (out) (*out)[r] = res;
      worst = std::max(worst, std::abs(res));
    }
    return worst;
  };

  SolveReport rep;
  std::optional<PotentialGrid> psi;  // Delta_h psi = 1, psi = 0 on the boundary
  std::vector<double> r(N);
  for (int it = 0;; ++it) {
    double min_trace = std::numeric_limits<double>::infinity();
    for (std::size_t p : im.nodes) min_trace = std::min(min_trace, discrete_hessian(u, p).trace());
    if (min_trace < tol::kBranchTraceFloor) {
      if (!psi) psi = detail::solve_linear_dirichlet(PotentialGrid::box(n, m, R), im, laplace,
                                                     std::vector<double>(N, 1.0), opts.solver);
      const double c = 2.0 * tol::kBranchTraceFloor - min_trace;
      for (std::size_t p : im.nodes) u[p] += c * (*psi)[p];
      ++rep.projections;
    }
    for (std::size_t p : im.nodes) {
      const SymmetricMatrix d2 = discrete_hessian(u, p);
      const Spectrum s = eigen_sym(d2).spectrum;
      const double f_min = d2.trace() - s.max();
      if (!(f_min > 0.0))
        throw BranchError("solve_dirichlet: ellipticity lost at node " + std::to_string(p) + " (min f_i = " +
                          std::to_string(f_min) + ")");
    }

    const double norm = residual(u, &r);
    rep.history.push_back(norm);
    if (norm <= opts.tol) break;
    if (it == opts.max_iter)
      throw ConvergenceError("solve_dirichlet: no convergence in " + std::to_string(opts.max_iter) +
                                 " iterations (residual " + std::to_string(norm) + ")",
                             rep.history);

    const auto as = detail::assemble_operator(u, im, [&u, n](std::size_t p) {
      const SymmetricMatrix d2 = discrete_hessian(u, p);
      SymmetricMatrix f(n);
      const double tr = d2.trace();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) f.set(i, j, (i == j ? tr : 0.0) - d2(i, j));
      return f;
    });
    rep.m_matrix_violations += as.m_matrix_violations;
    rep.diagonally_dominant_rows += as.diagonally_dominant_rows;
    rep.linear_solver = choose_linear_solver(as.matrix, m, opts.solver);
    std::vector<double> rhs(N);
    for (std::size_t k = 0; k < N; ++k) rhs[k] = -r[k];
    const std::vector<double> delta = solve_linear(as.matrix, rhs, rep.linear_solver);

    double step = 1.0;
    PotentialGrid trial = u;
    while (true) {
      for (std::size_t k = 0; k < N; ++k) trial[im.nodes[k]] = u[im.nodes[k]] + step * delta[k];
      if (residual(trial, nullptr) < norm) break;
      step *= 0.5;
      if (step < tol::kDampingFloor)
        throw ConvergenceError("solve_dirichlet: damping fell below 2^-20 (residual " + std::to_string(norm) + ")",
                               rep.history);
    }
    rep.steps.push_back(step);
    u = std::move(trial);
    ++rep.iterations;
  }

  rep.residual = residual(u, nullptr);
  rep.min_shifted_eigenvalue = std::numeric_limits<double>::infinity();
  double min_trace = std::numeric_limits<double>::infinity();
  for (std::size_t p : im.nodes) {
    const SymmetricMatrix d2 = discrete_hessian(u, p);
    rep.min_shifted_eigenvalue = std::min(rep.min_shifted_eigenvalue, eigen_sym(d2).spectrum.min() + opts.K);
    min_trace = std::min(min_trace, d2.trace());
  }
  rep.branch = min_trace > 0.0 ? Branch::PositiveTrace : Branch::NegativeTrace;
  return {std::move(u), std::move(rep)};
}

}  // namespace s2wb
