#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "s2wb/jacobi_cert.hpp"
#include "s2wb/legendre_lewy.hpp"
#include "test_support.hpp"

namespace s2wb {
namespace {

using testing::brute_sigma_k;

const double kT = 1.0 / std::sqrt(3.0);

TEST(TransformConfig, DefaultsAndRules) {
  const TransformConfig c(3, 1.0);
  EXPECT_DOUBLE_EQ(c.Kbar(), 8.0 / 3.0);
  EXPECT_EQ(c.rule(), KbarRule::EightThirdsK);
  EXPECT_DOUBLE_EQ(c.J(), 8.0);
  EXPECT_DOUBLE_EQ(c.A1(), 2.0 * 8.0 / 3.0);
  EXPECT_DOUBLE_EQ(c.A2(), 3.0 * 64.0 / 9.0 - 1.0);

  const TransformConfig small(4, 0.3);
  EXPECT_EQ(small.rule(), KbarRule::FloorKPlusOne);
  EXPECT_DOUBLE_EQ(small.Kbar(), 1.3 + 1e-6);

  EXPECT_THROW(TransformConfig(3, 1.0, 0.1), ConfigError);
  EXPECT_THROW(TransformConfig(3, 1.0, 1.0), ConfigError);
  EXPECT_EQ(TransformConfig(3, 1.0, 2.5).rule(), KbarRule::Explicit);
}

TEST(TransformSpectrum, IsotropicPoint) {
  const TransformConfig cfg(3, 1.0);
  const auto st = transform_spectrum(Spectrum{kT, kT, kT}, cfg);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(st.mu[i], 1.0 / (kT + 8.0 / 3.0), 1e-16);
  EXPECT_NEAR(st.residual, 0.0, 1e-12);
}

TEST(TransformSpectrum, TwoDimensionalQuadratic) {
  const TransformConfig cfg(2, 1.0);
  const auto st = transform_spectrum(Spectrum{1.0, 1.0}, cfg);
  EXPECT_DOUBLE_EQ(st.mu[0], 1.0 / (1.0 + cfg.Kbar()));
  EXPECT_NEAR(st.residual, 0.0, 1e-15);
}

TEST(TransformSpectrum, DomainErrors) {
  const TransformConfig cfg(3, 1.0);
  EXPECT_THROW(transform_spectrum(Spectrum{1.0, 1.0, -3.0}, cfg), TransformDomainError);
  EXPECT_THROW(transform_spectrum(Spectrum{1.0, 1.0, -2.0}, cfg), TransformDomainError);  // mu >= 1
  EXPECT_THROW(transform_spectrum(Spectrum{1.0, 1.0}, cfg), DomainError);
}

TEST(TransformSpectrum, OffManifoldResidualExpansion) {
  RandomStream rng(1, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.index(5);
    const TransformConfig cfg(n, 2.0);
    std::vector<double> l(n);
    for (double& v : l) v = rng.uniform(-2.0, 6.0);
    const auto st = transform_spectrum(Spectrum(l), cfg);
    const double want = brute_sigma_k(st.mu.values(), static_cast<int>(n)) * (1.0 - brute_sigma_k(l, 2));
    EXPECT_NEAR(st.residual, want, 1e-10 * std::max(1.0, std::abs(want)));
    // H = sigma_n(mu) [G + 1] with G(D^2 w) = -sigma_2(-Kbar + 1/mu).
    std::vector<double> back(n);
    for (std::size_t i = 0; i < n; ++i) back[i] = 1.0 / st.mu[i] - cfg.Kbar();
    const double g = -brute_sigma_k(back, 2);
    EXPECT_NEAR(brute_sigma_k(st.mu.values(), static_cast<int>(n)) * (g + 1.0), st.residual,
                1e-10 * std::max(1.0, std::abs(st.residual)));
  }
}

TEST(TransformSpectrum, OnManifoldIdentities) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (double k : {1.0, 5.0, 10.0}) {
      const TransformConfig cfg(n, k);
      for (const auto& s : sample_constraint(n, k, 500, 3 + n)) {
        const auto st = transform_spectrum(s.spectrum(), cfg);
        EXPECT_LE(std::abs(st.residual), tol::kTransformResidual);
        double inv = 0.0;
        for (double m : st.mu.values()) {
          EXPECT_GT(m, 0.0);
          EXPECT_LT(m, 1.0);
          inv += 1.0 / m;
        }
        EXPECT_NEAR(s.sigma1() + n * cfg.Kbar(), inv, tol::kTraceIdentity * inv);
        EXPECT_NEAR(st.a * st.a * st.a * inv, 1.0, 1e-12);
        EXPECT_NEAR(st.q, 1.0 / (cfg.A1() - cfg.A2() * st.a * st.a * st.a), tol::kQuotientIdentity * st.q);
      }
    }
}

TEST(EigenvalueBounds, SingleState) {
  const TransformConfig cfg(3, 1.0);
  const std::vector<TransformedState> one{transform_spectrum(Spectrum{kT, kT, kT}, cfg)};
  const auto b = eigenvalue_bounds_check(one);
  EXPECT_DOUBLE_EQ(b.c_top, 1.0 / (kT + 8.0 / 3.0));
  EXPECT_DOUBLE_EQ(b.c_rest, b.c_top);
  EXPECT_THROW(eigenvalue_bounds_check(std::span<const TransformedState>{}), DomainError);
}

TEST(EigenvalueBounds, RayFamily) {
  RandomStream rng(2, 0);
  for (std::size_t n = 2; n <= 5; ++n) {
    const TransformConfig cfg(n, 1.0);
    std::vector<TransformedState> near, far;
    for (const auto& s : sample_ray(n, 1.0, 500, rng)) {
      (s.lambda(0) > 1e5 ? far : near).push_back(transform_spectrum(s.spectrum(), cfg));
    }
    ASSERT_FALSE(far.empty());
    const auto bf = eigenvalue_bounds_check(far);
    EXPECT_LT(bf.c_top, 1e-5);
    // Remaining eigenvalues stay bounded below on the whole ray.
    const auto bn = eigenvalue_bounds_check(near);
    EXPECT_GT(std::min(bn.c_rest, bf.c_rest), 1.0 / (n * 1.0 + cfg.Kbar()) - 1e-12);
  }
}

TEST(EigenvalueBounds, TwoDimensionalFeasibility) {
  // n = 2: lambda_1 lambda_2 = 1 with both positive, so the smaller eigenvalue
  // is at most 1 and every mu_i with i >= 2 is at least 1 / (1 + Kbar).
  const TransformConfig cfg(2, 1.0);
  std::vector<TransformedState> states;
  for (const auto& s : sample_constraint(2, 1.0, 5000, 9)) states.push_back(transform_spectrum(s.spectrum(), cfg));
  const auto b = eigenvalue_bounds_check(states);
  EXPECT_GE(b.c_rest, 1.0 / (1.0 + cfg.Kbar()) - 1e-15);
  EXPECT_LT(b.c_top, 1.0);
}

TEST(QuotientQ, ClosedFormAndIdentity) {
  for (std::size_t n = 2; n <= 7; ++n) {
    const double m = 0.37;
    EXPECT_NEAR(quotient_q(Spectrum(std::vector<double>(n, m))), 2.0 * m / (n - 1.0), 1e-15);
  }
  const TransformConfig cfg(3, 1.0);
  const auto st = transform_spectrum(Spectrum{kT, kT, kT}, cfg);
  EXPECT_NEAR(quotient_q(st.mu), 1.0 / (cfg.A1() - cfg.A2() * std::pow(st.a, 3)), 1e-10);
}

TEST(QuotientQ, IdentityGapIsFirstOrderInEquationResidual) {
  RandomStream rng(3, 0);
  const TransformConfig cfg(4, 2.0);
  for (const auto& s : sample_constraint(4, 2.0, 50, 5)) {
    const auto st = transform_spectrum(s.spectrum(), cfg);
    std::vector<double> dir(4);
    for (double& v : dir) v = rng.normal();
    double ratio[2];
    for (int level = 0; level < 2; ++level) {
      const double eps = 1e-4 / (1 << level);
      std::vector<double> mu(4);
      for (std::size_t i = 0; i < 4; ++i) mu[i] = st.mu[i] * (1.0 + eps * dir[i]);
      const Spectrum pm(mu);
      const double a3 = quotient(pm, 4, 3);
      const double gap = quotient_q(pm) - 1.0 / (cfg.A1() - cfg.A2() * a3);
      ratio[level] = gap / conformal_residual(mu, cfg);
    }
    EXPECT_NEAR(ratio[0], ratio[1], 0.05 * std::abs(ratio[1]));
  }
}

TEST(QEllipticity, Examples) {
  const auto sym = q_ellipticity(Spectrum{0.3, 0.3, 0.3, 0.3});
  for (double g : sym) EXPECT_NEAR(g, sym[0], 1e-15);
  const auto two = q_ellipticity(Spectrum{0.2, 0.7});
  EXPECT_DOUBLE_EQ(two[0], 1.0);
  EXPECT_DOUBLE_EQ(two[1], 1.0);
  EXPECT_THROW(q_ellipticity(Spectrum{0.2, 0.0, 0.5}), DomainError);
}

TEST(QEllipticity, PositiveAndMatchesFiniteDifferences) {
  for (std::size_t n = 2; n <= 6; ++n) {
    const TransformConfig cfg(n, 5.0);
    for (const auto& s : sample_constraint(n, 5.0, 200, 20 + n)) {
      const auto st = transform_spectrum(s.spectrum(), cfg);
      const auto grad = q_ellipticity(st.mu);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_GT(grad[i], 0.0);
        std::vector<double> up(st.mu.values().begin(), st.mu.values().end()), dn = up;
        const double h = 1e-5 * st.mu[i];
        up[i] += h;
        dn[i] -= h;
        const double fd = (quotient_q(Spectrum(up)) - quotient_q(Spectrum(dn))) / (2 * h);
        EXPECT_LE(std::abs(fd - grad[i]), tol::kFiniteDifference * std::abs(grad[i]));
      }
    }
  }
}

TEST(QConcavity, MidpointOnPositivePairs) {
  RandomStream rng(4, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.index(5);
    std::vector<double> a(n), b(n), mid(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(1e-3, 1.0);
      b[i] = rng.uniform(1e-3, 1.0);
      mid[i] = 0.5 * (a[i] + b[i]);
    }
    const double qa = quotient_q(Spectrum(a)), qb = quotient_q(Spectrum(b)), qm = quotient_q(Spectrum(mid));
    EXPECT_GE(qm, 0.5 * qa + 0.5 * qb - tol::kConcavitySlack);
  }
}

}  // namespace
}  // namespace s2wb
