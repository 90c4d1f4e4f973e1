#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "s2wb/jacobi_cert.hpp"
#include "test_support.hpp"

namespace s2wb {
namespace {

const double kT = 1.0 / std::sqrt(3.0);

// (Delta_F b - eps |grad_F b|^2) before regrouping: the fourth-order terms
// replaced by sum_ijk c^2 - sum_k (Delta u_k)^2, then the two first-order
// pieces subtracted separately.
double excess_unregrouped(const Jet& jet) {
  const auto& s = jet.sample();
  const auto& c = jet.tensor();
  const std::size_t n = s.n();
  const double base = s.sigma1() + s.J();
  double all = 0.0, lap2 = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) all += c(i, j, k) * c(i, j, k);
  for (std::size_t i = 0; i < n; ++i) {
    double lap = 0.0;
    for (std::size_t k = 0; k < n; ++k) lap += c(k, k, i);
    lap2 += lap * lap;
    weighted += s.f(i) * lap * lap;
  }
  const double lap_b = (all - lap2 - weighted / base) / base;
  const double grad_b2 = weighted / (base * base);
  return lap_b - s.epsilon() * grad_b2;
}

ConstraintSample remark_sample(double k = 1.0) { return ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, k); }

TEST(ConstraintSample, DefaultsAndInvariants) {
  const auto s = remark_sample();
  EXPECT_DOUBLE_EQ(s.J(), 8.0);
  EXPECT_EQ(s.epsilon(), 1.0 / 3.0);
  EXPECT_EQ(s.delta(), 1.0 + s.epsilon());
  EXPECT_EQ(s.delta(), 4.0 / 3.0);
  EXPECT_THROW(ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, 0.5), PreconditionError);
  EXPECT_THROW(ConstraintSample::with_default_shift(Spectrum{1, 2, 3}, 1.0), PreconditionError);
  EXPECT_THROW(ConstraintSample(Spectrum{-kT, -kT, -kT}, 1.0, 8.0), BranchError);
}

TEST(SampleConstraint, RemarkSpectrumAcceptedForLargeEnoughK) {
  for (double k : {0.75, 1.0, 5.0}) EXPECT_NO_THROW(ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, k));
}

TEST(SampleConstraint, OutputsLieOnManifold) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (double k : {1.0, 5.0, 10.0}) {
      const auto samples = sample_constraint(n, k, 2000, 7);
      ASSERT_EQ(samples.size(), 2000u);
      int pinned = 0;
      for (const auto& s : samples) {
        EXPECT_NEAR(testing::double_sum_sigma2(s.spectrum().values()), 1.0, 1e-10);
        EXPECT_GE(s.spectrum().min(), -k - 1e-12);
        EXPECT_GT(s.sigma1(), 0.0);
        EXPECT_DOUBLE_EQ(s.J(), 8.0 * n * k / 3.0);
        for (std::size_t i = 1; i < n; ++i) pinned += (s.lambda(i) == -k);
      }
      if (n > 2) {
        EXPECT_GT(pinned, 0) << "pinned family missing for n=" << n;
      }
    }
}

TEST(SampleConstraint, PinnedFamilyInThreeDimensions) {
  const auto samples = sample_constraint(3, 1.0, 500, 3);
  bool found = false;
  for (const auto& s : samples)
    if (s.lambda(2) == -1.0 || s.lambda(1) == -1.0) {
      found = true;
      EXPECT_NEAR(sigma_k(s.spectrum(), 2), 1.0, 1e-12);
    }
  EXPECT_TRUE(found);
}

TEST(SampleConstraint, DeterministicForFixedSeed) {
  const auto a = sample_constraint(4, 5.0, 300, 99);
  const auto b = sample_constraint(4, 5.0, 300, 99);
  for (std::size_t s = 0; s < a.size(); ++s)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a[s].lambda(i), b[s].lambda(i));
}

TEST(SampleConstraint, StarvationIsReported) {
  SamplerOptions opts;
  opts.upper = 1e-9;  // rest traces never exceed the acceptance threshold
  EXPECT_THROW(sample_constraint(3, 1.0, 1, 1, opts), SamplerStarvationError);
}

TEST(SampleConstraint, NoFloorNeedsExplicitShift) {
  EXPECT_THROW(sample_constraint(3, kNoFloor, 10, 1), PreconditionError);
  SamplerOptions opts;
  opts.shift = 0.0;
  const auto samples = sample_constraint(3, kNoFloor, 2000, 1, opts);
  double lowest = 0.0;
  for (const auto& s : samples) lowest = std::min(lowest, s.spectrum().min());
  EXPECT_LT(lowest, -1.0);
}

TEST(SampleRay, LargeTopEigenvalue) {
  RandomStream rng(5, 0);
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto ray = sample_ray(n, 1.0, 200, rng);
    for (const auto& s : ray) {
      EXPECT_GE(s.lambda(0), 10.0);
      EXPECT_GE(s.spectrum().min(), -1.0);
      EXPECT_NEAR(sigma_k(s.spectrum(), 2), 1.0, 1e-10);
    }
  }
}

TEST(ProjectJet, AlreadyTangentIsUnchanged) {
  const auto s = remark_sample();
  RandomStream rng(1, 0);
  const Jet once = project_jet(s, random_symmetric_tensor(3, rng));
  const Jet twice = project_jet(s, once.tensor());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(twice.tensor()(i, j, k), once.tensor()(i, j, k), 1e-14);
}

TEST(ProjectJet, AlignedViolationIsRemoved) {
  const auto s = remark_sample();
  SymmetricTensor3 raw(3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i) raw.set(i, i, k, s.f(i));  // last write wins on shared slots
  const Jet jet = project_jet(s, raw);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(jet.tangency_residual(k), 0.0, 1e-12);
}

TEST(ProjectJet, RandomRawIsSymmetricTangentAndNearest) {
  RandomStream rng(2, 0);
  for (std::size_t n = 2; n <= 6; ++n) {
    const auto samples = sample_constraint(n, 5.0, 50, 11 + n);
    for (const auto& s : samples) {
      const SymmetricTensor3 raw = random_symmetric_tensor(n, rng);
      const Jet jet = project_jet(s, raw);
      const auto& c = jet.tensor();
      for (std::size_t k = 0; k < n; ++k)
        EXPECT_LE(std::abs(jet.tangency_residual(k)), 1e-10 * std::sqrt(s.df2() * c.frobenius2()) + 1e-14);
      // Residual raw - c is Frobenius-orthogonal to every tangent tensor.
      const Jet other = project_jet(s, random_symmetric_tensor(n, rng));
      double inner = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) {
            inner += (raw(i, j, k) - c(i, j, k)) * other.tensor()(i, j, k);
            scale += std::abs((raw(i, j, k) - c(i, j, k)) * other.tensor()(i, j, k));
          }
      EXPECT_LE(std::abs(inner), 1e-12 * std::max(1.0, scale));
      EXPECT_EQ(c(0, 1, n - 1), c(n - 1, 0, 1));
    }
  }
}

TEST(QFormDirect, Examples) {
  const auto s = ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, 1.0);
  EXPECT_EQ(q_form_direct(s, 0, std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_THROW(q_form_direct(s, 0, std::vector<double>{1, 0, 0}), PreconditionError);
}

TEST(QFormDirect, OrthogonalToReductionPlaneGivesThreeNormSquared) {
  // n = 5: tangent space has dimension 4, so it contains directions orthogonal to E and L.
  const auto samples = sample_constraint(5, 1.0, 20, 4);
  RandomStream rng(3, 0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < 5; ++i) {
      const QReduction r = q_reduction_eigen(s, i);
      std::vector<std::vector<double>> basis;  // orthonormalized {Df, E, L}
      for (auto b : {s.df(), r.E, r.L}) {
        for (const auto& q : basis) {
          const double c = dot(b, q);
          for (std::size_t a = 0; a < 5; ++a) b[a] -= c * q[a];
        }
        const double norm = std::sqrt(dot(b, b));
        if (norm < 1e-7) continue;
        for (double& v : b) v /= norm;
        basis.push_back(b);
      }
      std::vector<double> t(5);
      for (double& v : t) v = rng.normal();
      for (const auto& q : basis) {
        const double c = dot(t, q);
        for (std::size_t a = 0; a < 5; ++a) t[a] -= c * q[a];
      }
      EXPECT_NEAR(q_form_direct(s, i, t), 3.0 * dot(t, t), 1e-10);
    }
}

TEST(QFormDirect, NonNegativeAtRemarkSpectrum) {
  const auto s = ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, 1.0);
  RandomStream rng(6, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Jet jet = project_jet(s, random_symmetric_tensor(3, rng));
    for (std::size_t i = 0; i < 3; ++i) {
      const auto t = jet.tensor().slice(i);
      const double q = q_form_direct(s, i, t);
      EXPECT_GE(q, -1e-12);
      EXPECT_GE(q, q_reduction_eigen(s, i).xi_min * dot(t, t) - 1e-10);
    }
  }
}

TEST(QReduction, SymmetricPointValues) {
  const ConstraintSample s(Spectrum{kT, kT, kT}, 1.0, 0.0);
  const QReduction r = q_reduction_eigen(s, 0);
  EXPECT_NEAR(s.df2(), 4.0, 1e-14);
  const double f1 = 2.0 / std::sqrt(3.0);
  EXPECT_NEAR(r.normE2, 1.0 - f1 * f1 / 4.0, 1e-14);
  EXPECT_NEAR(r.normE2, 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(r.normL2, 0.0, 1e-14);
  EXPECT_NEAR(r.EdotL, 0.0, 1e-14);
  EXPECT_NEAR(r.eta, 17.0 / 9.0, 1e-14);
  EXPECT_NEAR(r.trQ, 14.0 / 3.0, 1e-13);
  EXPECT_NEAR(r.detQ, 5.0, 1e-13);
  EXPECT_NEAR(r.xi_min, 5.0 / 3.0, 1e-13);
  EXPECT_NEAR(r.xi_max, 3.0, 1e-13);
}

TEST(QReduction, GramInvariantsAndBounds) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (double k : {1.0, 5.0, 10.0}) {
      for (const auto& s : sample_constraint(n, k, 300, 40 + n)) {
        for (std::size_t i = 0; i < n; ++i) {
          const QReduction r = q_reduction_eigen(s, i);
          const ClosedFormGram g = closed_form_gram(s, i);
          EXPECT_NEAR(r.normE2, g.normE2, 1e-10);
          EXPECT_NEAR(r.normL2, g.normL2, 1e-10);
          EXPECT_NEAR(r.EdotL, g.EdotL, 1e-10);
          EXPECT_LT(r.normE2, 1.0);
          EXPECT_LT(r.normL2, 1.0);
          EXPECT_DOUBLE_EQ(r.eta, 1.0 + s.delta() * s.f(i) / (s.sigma1() + s.J()));
          EXPECT_GT(r.trQ, 3.0 - s.delta() * s.f(i) / (s.sigma1() + s.J()));
          EXPECT_GT(r.trQ, 0.0);
        }
      }
    }
}

TEST(QReduction, MatchesProjectedFormOracle) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (const auto& s : sample_constraint(n, 5.0, 200, 60 + n))
      for (std::size_t i = 0; i < n; ++i) {
        const QReduction r = q_reduction_eigen(s, i);
        const auto eig = eigen_sym(projected_q_form(s, i)).spectrum.sorted_ascending();
        // The extension contributes eigenvalue 3 with multiplicity n - 2.
        double tr = -3.0 * (n - 2.0), det = 1.0 / std::pow(3.0, n - 2.0);
        for (double e : eig) {
          tr += e;
          det *= e;
        }
        EXPECT_NEAR(r.trQ, tr, 1e-8 * (1.0 + std::abs(tr)));
        EXPECT_NEAR(r.detQ, det, 1e-8 * (1.0 + std::abs(det)));
        EXPECT_NEAR(r.xi_min, eig.front(), 1e-8 * (1.0 + std::abs(eig.front())));
      }
}

TEST(DetLowerBound, RemarkSpectrumAtTightFloor) {
  const auto s = ConstraintSample::with_default_shift(Spectrum{2, 2, -0.75}, 0.75);
  const DetBound b = det_lower_bound(s, 2);
  EXPECT_GT(b.rhs, 0.0);
  EXPECT_GE(b.margin(), 0.0);
}

TEST(DetLowerBound, NonNegativeEigenvalueCase) {
  for (const auto& s : sample_constraint(4, 1.0, 500, 8))
    for (std::size_t i = 0; i < 4; ++i)
      if (s.lambda(i) >= 0.0) {
        EXPECT_GE(det_lower_bound(s, i).rhs, 8.0);
      }
}

TEST(DetLowerBound, HoldsAndMatchesProjectedDeterminant) {
  for (std::size_t n = 2; n <= 6; ++n)
    for (double k : {1.0, 5.0, 10.0})
      for (const auto& s : sample_constraint(n, k, 300, 70 + n)) {
        for (std::size_t i = 0; i < n; ++i) {
          const DetBound b = det_lower_bound(s, i);
          EXPECT_GE(b.margin(), 0.0) << "n=" << n << " K=" << k << " i=" << i;
          EXPECT_GT(b.rhs, 0.0);
          const auto eig = eigen_sym(projected_q_form(s, i)).spectrum;
          double det = 1.0 / std::pow(3.0, n - 2.0);
          for (double e : eig.values()) det *= e;
          const double lhs_oracle = det * (s.sigma1() + s.J()) * s.df2() / s.f(i);
          EXPECT_NEAR(b.lhs, lhs_oracle, 1e-8 * (1.0 + std::abs(lhs_oracle)));
        }
      }
}

TEST(DetLowerBound, Preconditions) {
  const ConstraintSample s(Spectrum{2, 2, -0.75}, 1.0, 8.0, 0.5);
  EXPECT_THROW(det_lower_bound(s, 0), PreconditionError);
}

TEST(JacobiExcess, ZeroTensor) {
  const Jet jet(remark_sample(), SymmetricTensor3(3));
  EXPECT_EQ(jacobi_excess(jet), 0.0);
  EXPECT_EQ(superharmonic_form(jet), 0.0);
}

TEST(JacobiExcess, RegroupingIdentity) {
  RandomStream rng(9, 0);
  for (std::size_t n = 2; n <= 6; ++n) {
    const SymmetricTensor3 c = random_symmetric_tensor(n, rng);
    double distinct = 0, paired = 0, diag = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k)
          if (i > j && j > k) distinct += c(i, j, k) * c(i, j, k);
        if (i != j) paired += c(j, j, i) * c(j, j, i);
      }
    for (std::size_t i = 0; i < n; ++i) diag += c(i, i, i) * c(i, i, i);
    EXPECT_NEAR(6 * distinct + 3 * paired + diag, c.frobenius2(), 1e-12 * c.frobenius2());
  }
}

TEST(JacobiExcess, SliceDecompositionAndUnregroupedForm) {
  RandomStream rng(10, 0);
  for (std::size_t n = 2; n <= 6; ++n)
    for (const auto& s : sample_constraint(n, 5.0, 100, 80 + n)) {
      const Jet jet = project_jet(s, random_symmetric_tensor(n, rng));
      const auto& c = jet.tensor();
      double distinct = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
          for (std::size_t k = 0; k < j; ++k) distinct += c(i, j, k) * c(i, j, k);
      double slices = 0.0;
      for (std::size_t i = 0; i < n; ++i) slices += q_form_direct(s, i, c.slice(i));
      const double scaled = (s.sigma1() + s.J()) * jacobi_excess(jet);
      const double mag = c.frobenius2() * (2.0 + s.delta()) * n;
      EXPECT_NEAR(scaled, 6.0 * distinct + slices, 1e-10 * std::max(1.0, mag));
      EXPECT_NEAR(jacobi_excess(jet), excess_unregrouped(jet), 1e-10 * std::max(1.0, mag));
    }
}

TEST(JacobiExcess, NonNegativeOnSampledJets) {
  RandomStream rng(12, 0);
  for (std::size_t n = 3; n <= 6; ++n)
    for (double k : {1.0, 5.0, 10.0})
      for (const auto& s : sample_constraint(n, k, 300, 90 + n)) {
        EXPECT_GE(jacobi_excess(project_jet(s, random_symmetric_tensor(n, rng))), tol::kExcessFloor);
        std::vector<double> scales(n);
        for (double& v : scales) v = rng.normal();
        EXPECT_GE(jacobi_excess(extremal_jet(s, scales)), tol::kExcessFloor);
      }
}

TEST(SuperharmonicForm, IdentityWithExcess) {
  RandomStream rng(13, 0);
  for (const auto& s : sample_constraint(4, 1.0, 200, 5)) {
    const Jet jet = project_jet(s, random_symmetric_tensor(4, rng));
    const double ex = jacobi_excess(jet);
    const double sh = superharmonic_form(jet);
    EXPECT_NEAR(sh, -(1.0 / 3.0) * std::pow(s.sigma1() + s.J(), -1.0 / 3.0) * ex, 1e-12 * std::max(1.0, std::abs(sh)));
    EXPECT_LE(sh, 1e-9);
    if (ex > 0) {
      EXPECT_LT(sh, 0.0);
    }
  }
}

TEST(Remark3d, Examples) {
  const Remark3d r = remark_3d(2.0, 2.0);
  EXPECT_DOUBLE_EQ(r.lambda3, -0.75);
  EXPECT_NEAR(r.ratio, 13.0 / 3.0, 1e-15);
  const Remark3d far = remark_3d(1e3, 1e3);
  EXPECT_GT(far.ratio - 3.0, 0.0);
  EXPECT_LT(far.ratio - 3.0, 1e-5);
  EXPECT_THROW(remark_3d(1.0, 0.5), PreconditionError);
  EXPECT_THROW(remark_3d(0.5, 1.0), PreconditionError);
}

TEST(Remark3d, SubstitutionOracle) {
  RandomStream rng(14, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    double a = std::exp(rng.uniform(-3, 5)), b = std::exp(rng.uniform(-3, 5));
    if (a < b) std::swap(a, b);
    if (a * b <= 1.0 + 1e-6) continue;
    const Remark3d r = remark_3d(a, b);
    const std::vector<double> l{a, b, r.lambda3};
    EXPECT_NEAR(testing::double_sum_sigma2(l), 1.0, 1e-12 * (1.0 + a * b));
    EXPECT_GT(r.ratio, 3.0);
    EXPECT_GE(r.ratio, r.amgm_bound - 1e-12 * r.ratio);
  }
}

TEST(UnshiftedThreeDimensional, ExcessNonNegativeWithoutFloor) {
  SamplerOptions opts;
  opts.shift = 0.0;
  RandomStream rng(15, 0);
  for (const auto& s : sample_constraint(3, kNoFloor, 2000, 21, opts)) {
    EXPECT_GE(jacobi_excess(project_jet(s, random_symmetric_tensor(3, rng))), tol::kExcessFloor);
    std::vector<double> scales{rng.normal(), rng.normal(), rng.normal()};
    EXPECT_GE(jacobi_excess(extremal_jet(s, scales)), tol::kExcessFloor);
  }
}

TEST(MinimalShift, BelowDefaultShift) {
  for (const auto& s : sample_constraint(4, 1.0, 50, 31)) {
    const double j = minimal_shift(s, s.J());
    EXPECT_LE(j, s.J());
    EXPECT_GE(min_slice_eigenvalue(s.with_shift(j)), -1e-9);
  }
}

}  // namespace
}  // namespace s2wb
