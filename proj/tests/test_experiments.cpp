#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "s2wb/experiments.hpp"

namespace s2wb {
namespace {

TEST(Superharmonicity, QuadraticGivesConstantA) {
  for (std::size_t n = 2; n <= 3; ++n) {
    const TransformConfig cfg(n, 1.0);
    const std::size_t m = n == 2 ? 33 : 11;
    const auto sol = solve_dirichlet(quadratic_boundary(n), n, 1.0, m);
    const auto tr = transform_grid(sol.u, cfg);
    const auto sh = superharmonicity_residual(tr.w, cfg);
    ASSERT_GT(sh.evaluated, 0u);
    const double a0 = std::cbrt(1.0 / (n * (isotropic_level(n) + cfg.Kbar())));
    for (std::size_t p = 0; p < tr.w.size(); ++p) {
      if (std::isfinite(sh.a[p])) {
        EXPECT_NEAR(sh.a[p], a0, 1e-9);
      }
      if (std::isfinite(sh.delta_h[p])) {
        EXPECT_LE(std::abs(sh.delta_h[p]), 1e-9);
      }
    }
    EXPECT_LE(sh.max_equation_defect, 1e-9);
    EXPECT_LE(sh.max_dual_defect, 1e-10);
  }
}

TEST(Superharmonicity, PositivePartShrinksUnderRefinement) {
  const TransformConfig cfg(2, 1.0);
  double pos[2];
  int k = 0;
  for (std::size_t m : {33, 65}) {
    const auto tr = transform_grid(solve_dirichlet(perturbed_boundary(2), 2, 1.0, m).u, cfg);
    const auto sh = superharmonicity_residual(tr.w, cfg);
    EXPECT_LE(sh.max_dual_defect, 1e-10);
    pos[k++] = max_positive_part(sh.delta_h);
  }
  EXPECT_TRUE(pos[1] == 0.0 || pos[0] / pos[1] >= tol::kRefinementShrink) << pos[0] << " " << pos[1];
}

TEST(Superharmonicity, DeltaHIsSigmaNTimesDeltaG) {
  const TransformConfig cfg(2, 1.0);
  const auto tr = transform_grid(solve_dirichlet(perturbed_boundary(2), 2, 1.0, 33).u, cfg);
  const auto sh = superharmonicity_residual(tr.w, cfg);
  for (std::size_t p = 0; p < tr.w.size(); ++p) {
    if (!std::isfinite(sh.delta_h[p])) continue;
    const Spectrum mu = eigen_sym(discrete_hessian(tr.w, p)).spectrum;
    const double sn = mu[0] * mu[1];
    EXPECT_NEAR(sh.delta_h[p], sn * sh.delta_g[p], 1e-12 * std::max(1.0, std::abs(sh.delta_h[p])));
  }
}

TEST(Superharmonicity, EigenvaluesOutsideUnitBandRaise) {
  const TransformConfig cfg(2, 1.0);
  const auto w = PotentialGrid::sample(2, 9, 1.0, [](const Point& y) { return 2.0 * (y[0] * y[0] + y[1] * y[1]); });
  EXPECT_THROW(superharmonicity_residual(w, cfg), TransformDomainError);
  EXPECT_THROW(superharmonicity_residual(w, TransformConfig(3, 1.0)), DomainError);
}

TEST(Scaling, LogLogSlope) {
  const std::vector<double> x{1, 2, 4, 8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.7));
  EXPECT_NEAR(log_log_slope(x, y), -0.7, 1e-14);
}

TEST(Scaling, QuadraticBoundaryIsFlat) {
  const std::vector<double> R{1, 2, 4};
  const auto t = scaling_experiment(quadratic_boundary(2), 2, R, 17, 1.0);
  ASSERT_TRUE(t.complete());
  for (const auto& r : t.rows) EXPECT_LE(r.osc, 1e-9);
}

TEST(Scaling, PerturbedOscillationDecays) {
  const std::vector<double> R{1, 2, 4, 8};
  const auto t = scaling_experiment(perturbed_boundary(2), 2, R, 33, 1.0);
  ASSERT_TRUE(t.complete());
  EXPECT_TRUE(t.strictly_decreasing);
  EXPECT_GT(t.alpha_hat, 0.0);
  const auto again = scaling_experiment(perturbed_boundary(2), 2, R, 33, 1.0, 4);
  for (std::size_t i = 0; i < R.size(); ++i) EXPECT_EQ(again.rows[i].osc, t.rows[i].osc);
  EXPECT_EQ(again.alpha_hat, t.alpha_hat);
}

TEST(Scaling, RefinementChangesOscillationLittle) {
  const std::vector<double> R{2};
  const double coarse = scaling_experiment(perturbed_boundary(2), 2, R, 33, 1.0).rows[0].osc;
  const double fine = scaling_experiment(perturbed_boundary(2), 2, R, 65, 1.0).rows[0].osc;
  EXPECT_LE(std::abs(coarse - fine), tol::kOscillationRefinement * fine);
}

TEST(Scaling, Errors) {
  const std::vector<double> bad{2, 1};
  EXPECT_THROW(scaling_experiment(quadratic_boundary(2), 2, bad, 17, 1.0), DomainError);
  SolveOptions o;
  o.max_iter = 0;
  const std::vector<double> R{1, 2};
  const auto t = scaling_experiment(perturbed_boundary(2), 2, R, 17, 1.0, 1, o);
  EXPECT_FALSE(t.complete());
  EXPECT_FALSE(t.strictly_decreasing);
}

TEST(Concentration, ConstantAHasNoBadSet) {
  const TransformConfig cfg(2, 1.0);
  const auto tr = transform_grid(solve_dirichlet(quadratic_boundary(2), 2, 1.0, 33).u, cfg);
  const auto t = concentration_diagnostic(tr.w, cfg, 1e-6, 3);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_FALSE(t.truncated);
  for (const auto& r : t.rows) {
    EXPECT_GT(r.nodes, 0u);
    EXPECT_EQ(r.bad_fraction, 0.0);
  }
}

TEST(Concentration, TruncatesSmallSubBoxes) {
  const TransformConfig cfg(2, 1.0);
  const auto tr = transform_grid(solve_dirichlet(perturbed_boundary(2), 2, 1.0, 17).u, cfg);
  const auto t = concentration_diagnostic(tr.w, cfg, 1e-4, 6);
  EXPECT_TRUE(t.truncated);
  EXPECT_EQ(t.rows.size(), 3u);  // 17, 9 and 5 nodes per axis
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LE(t.rows[i].nodes, t.rows[i - 1].nodes);
  EXPECT_THROW(concentration_diagnostic(tr.w, cfg, 0.0, 2), DomainError);
}

}  // namespace
}  // namespace s2wb
