#pragma once

// Executable form of the shifted trace Jacobi inequality for sigma_2 = 1:
// samples of the constraint manifold, third-order jets obeying the
// differentiated equation, the per-slice quadratic form and its closed-form
// 2x2 reduction, and the pointwise excess Delta_F b - eps |grad_F b|^2 with
// b = ln(Delta u + J).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s2wb/errors.hpp"
#include "s2wb/rng.hpp"
#include "s2wb/sym_core.hpp"
#include "s2wb/tolerances.hpp"

namespace s2wb {

inline constexpr double kDefaultEpsilon = 1.0 / 3.0;
inline constexpr double kNoFloor = std::numeric_limits<double>::infinity();

/// J = 8nK/3.
inline double default_shift(std::size_t n, double k_semiconvex) {
  return 8.0 * static_cast<double>(n) * k_semiconvex / 3.0;
}

/// Point of {sigma_2 = 1, sigma_1 > 0, lambda >= -K} with the certificate parameters.
/// K = kNoFloor drops the semiconvexity floor; J must then be explicit.
class ConstraintSample {
 public:
  ConstraintSample(Spectrum spectrum, double k_semiconvex, double shift, double epsilon = kDefaultEpsilon)
      : spectrum_(std::move(spectrum)), k_(k_semiconvex), j_(shift), epsilon_(epsilon), delta_(1.0 + epsilon) {
    if (!(k_ > 0.0)) throw PreconditionError("ConstraintSample: K must be positive");
    if (!(j_ >= 0.0) || !std::isfinite(j_)) throw PreconditionError("ConstraintSample: J must be finite and >= 0");
    const double s2 = sigma_k(spectrum_, 2);
    if (!(std::abs(s2 - 1.0) <= tol::kSampleManifold))
      throw PreconditionError("ConstraintSample: sigma_2 = " + std::to_string(s2));
    sigma1_ = sigma_k(spectrum_, 1);
    if (!(sigma1_ > 0.0)) throw BranchError("ConstraintSample: sigma_1 <= 0");
    if (std::isfinite(k_) && spectrum_.min() < -k_ - tol::kFloorSlack)
      throw PreconditionError("ConstraintSample: eigenvalue below -K");
    df2_ = 0.0;
    for (std::size_t i = 0; i < spectrum_.size(); ++i) df2_ += f(i) * f(i);
  }

  /// Sample with the default shift 8nK/3.
  static ConstraintSample with_default_shift(Spectrum spectrum, double k_semiconvex,
                                             double epsilon = kDefaultEpsilon) {
    const double j = default_shift(spectrum.size(), k_semiconvex);
    return ConstraintSample(std::move(spectrum), k_semiconvex, j, epsilon);
  }

  const Spectrum& spectrum() const noexcept { return spectrum_; }
  std::size_t n() const noexcept { return spectrum_.size(); }
  double K() const noexcept { return k_; }
  double J() const noexcept { return j_; }
  double epsilon() const noexcept { return epsilon_; }
  double delta() const noexcept { return delta_; }
  double sigma1() const noexcept { return sigma1_; }
  double lambda(std::size_t i) const { return spectrum_[i]; }
  /// f_i = d sigma_2 / d lambda_i = sigma_1 - lambda_i.
  double f(std::size_t i) const { return sigma1_ - spectrum_[i]; }
  /// |Df|^2.
  double df2() const noexcept { return df2_; }
  std::vector<double> df() const {
    std::vector<double> out(n());
    for (std::size_t i = 0; i < n(); ++i) out[i] = f(i);
    return out;
  }
  /// eta_i = 1 + delta f_i / (sigma_1 + J).
  double eta(std::size_t i) const { return 1.0 + delta_ * f(i) / (sigma1_ + j_); }

  ConstraintSample with_shift(double shift) const { return ConstraintSample(spectrum_, k_, shift, epsilon_); }

 private:
  Spectrum spectrum_;
  double k_;
  double j_;
  double epsilon_;
  double delta_;
  double sigma1_ = 0.0;
  double df2_ = 0.0;
};

/// Fully symmetric n x n x n tensor; one stored value per sorted index triple.
class SymmetricTensor3 {
 public:
  SymmetricTensor3() = default;
  explicit SymmetricTensor3(std::size_t n) : n_(n), lookup_(n * n * n) {
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        for (std::size_t k = j; k < n; ++k) {
          const std::size_t slot = next++;
          const std::size_t idx[3] = {i, j, k};
          // all permutations of (i, j, k) share one slot
          const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
          for (const auto& p : perms) lookup_[(idx[p[0]] * n + idx[p[1]]) * n + idx[p[2]]] = slot;
        }
    values_.assign(next, 0.0);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t stored() const noexcept { return values_.size(); }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return values_[slot(i, j, k)]; }
  void set(std::size_t i, std::size_t j, std::size_t k, double v) { values_[slot(i, j, k)] = v; }

  /// t = (c_11i, ..., c_nni).
  std::vector<double> slice(std::size_t i) const {
    std::vector<double> t(n_);
    for (std::size_t j = 0; j < n_; ++j) t[j] = (*this)(j, j, i);
    return t;
  }

  /// Sum over all n^3 index triples of c_ijk^2.
  double frobenius2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t k = 0; k < n_; ++k) s += (*this)(i, j, k) * (*this)(i, j, k);
    return s;
  }

 private:
  std::size_t slot(std::size_t i, std::size_t j, std::size_t k) const {
    if (i >= n_ || j >= n_ || k >= n_) throw DomainError("SymmetricTensor3 index out of range");
    return lookup_[(i * n_ + j) * n_ + k];
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> lookup_;
  std::vector<double> values_;
};

/// Third derivatives u_ijk at a point where D^2u is diagonal, tangent to the level set.
class Jet {
 public:
  Jet(ConstraintSample sample, SymmetricTensor3 c) : sample_(std::move(sample)), c_(std::move(c)) {
    if (c_.n() != sample_.n()) throw DomainError("Jet: tensor size differs from spectrum size");
    const double scale = std::sqrt(sample_.df2() * std::max(c_.frobenius2(), 1e-300));
    for (std::size_t k = 0; k < c_.n(); ++k) {
      if (std::abs(tangency_residual(k)) > tol::kTangency * std::max(1.0, scale))
        throw PreconditionError("Jet: slice " + std::to_string(k) + " violates tangency");
    }
  }

  const ConstraintSample& sample() const noexcept { return sample_; }
  const SymmetricTensor3& tensor() const noexcept { return c_; }

  /// sum_i f_i c_iik.
  double tangency_residual(std::size_t k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < c_.n(); ++i) s += sample_.f(i) * c_(i, i, k);
    return s;
  }

 private:
  ConstraintSample sample_;
  SymmetricTensor3 c_;
};

/// Tensor with independent standard normal stored entries.
inline SymmetricTensor3 random_symmetric_tensor(std::size_t n, RandomStream& rng) {
  SymmetricTensor3 c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) c.set(i, j, k, rng.normal());
  return c;
}

/// Frobenius-nearest tensor satisfying every tangency constraint.
///
/// Constraint k involves only the entries {i,i,k}, and no entry belongs to two
/// constraints, so the projection splits into n independent weighted problems.
/// An entry {i,i,k} with i != k carries weight 3 (its permutation count).
inline Jet project_jet(const ConstraintSample& sample, const SymmetricTensor3& raw) {
  const std::size_t n = sample.n();
  if (raw.n() != n) throw DomainError("project_jet: tensor size differs from spectrum size");
  SymmetricTensor3 c = raw;
  for (std::size_t k = 0; k < n; ++k) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (i == k) ? 1.0 : 3.0;
      num += sample.f(i) * raw(i, i, k);
      den += sample.f(i) * sample.f(i) / w;
    }
    if (num == 0.0) continue;
    const double mult = num / den;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (i == k) ? 1.0 : 3.0;
      c.set(i, i, k, raw(i, i, k) - mult * sample.f(i) / w);
    }
  }
  return Jet(sample, std::move(c));
}

/// Q(t) = 3|t|^2 - 2 t_i^2 - eta_i (sum t)^2 for a tangent t.
inline double q_form_direct(const ConstraintSample& sample, std::size_t i, std::span<const double> t) {
  const std::size_t n = sample.n();
  if (i >= n || t.size() != n) throw DomainError("q_form_direct: index or size mismatch");
  double t2 = 0.0;
  double tsum = 0.0;
  double tdf = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    t2 += t[j] * t[j];
    tsum += t[j];
    tdf += sample.f(j) * t[j];
  }
  if (std::abs(tdf) > tol::kTangencyPrecondition * std::sqrt(sample.df2() * t2))
    throw PreconditionError("q_form_direct: t is not tangent to the level set");
  return 3.0 * t2 - 2.0 * t[i] * t[i] - sample.eta(i) * tsum * tsum;
}

/// Gram data of the tangential projections of e_i and (1,...,1), and the
/// 2x2 eigen-reduction of Q = 3I - 2 E(x)E - eta L(x)L on span{E, L}.
struct QReduction {
  std::size_t i = 0;
  std::vector<double> E;
  std::vector<double> L;
  double normE2 = 0.0;  // from the explicit vectors
  double normL2 = 0.0;
  double EdotL = 0.0;
  double eta = 0.0;
  double trQ = 0.0;     // from the closed-form Gram values
  double detQ = 0.0;
  double xi_min = 0.0;
  double xi_max = 0.0;
};

/// Closed-form Gram values valid on sigma_2 = 1.
struct ClosedFormGram {
  double normE2;
  double normL2;
  double EdotL;
};

inline ClosedFormGram closed_form_gram(const ConstraintSample& s, std::size_t i) {
  const double nm1 = static_cast<double>(s.n() - 1);
  const double fi = s.f(i);
  return {1.0 - fi * fi / s.df2(), 1.0 - 2.0 * nm1 / s.df2(), 1.0 - nm1 * s.sigma1() * fi / s.df2()};
}

/// tr and det of the 2x2 eigen-equation matrix in the (non-orthogonal) basis {E, L}.
inline std::pair<double, double> reduced_trace_det(double normE2, double normL2, double EdotL, double eta) {
  const double tr = 6.0 - 2.0 * normE2 - eta * normL2;
  const double det = 9.0 - 6.0 * normE2 - 3.0 * eta * normL2 + 2.0 * eta * (normE2 * normL2 - EdotL * EdotL);
  return {tr, det};
}

inline QReduction q_reduction_eigen(const ConstraintSample& s, std::size_t i) {
  const std::size_t n = s.n();
  if (i >= n) throw DomainError("q_reduction_eigen: index out of range");
  if (!(s.df2() > tol::kDegenerateGradient)) throw SingularityError("q_reduction_eigen: |Df|^2 degenerate", s.df2());
  QReduction r;
  r.i = i;
  r.E.assign(n, 0.0);
  r.L.assign(n, 1.0);
  const double ce = s.f(i) / s.df2();
  const double cl = static_cast<double>(n - 1) * s.sigma1() / s.df2();
  for (std::size_t j = 0; j < n; ++j) {
    r.E[j] = (j == i ? 1.0 : 0.0) - ce * s.f(j);
    r.L[j] -= cl * s.f(j);
  }
  r.normE2 = dot(r.E, r.E);
  r.normL2 = dot(r.L, r.L);
  r.EdotL = dot(r.E, r.L);
  r.eta = s.eta(i);
  const ClosedFormGram g = closed_form_gram(s, i);
  std::tie(r.trQ, r.detQ) = reduced_trace_det(g.normE2, g.normL2, g.EdotL, r.eta);
  double disc = r.trQ * r.trQ - 4.0 * r.detQ;
  if (disc < -tol::kDiscriminantSlack * (1.0 + r.trQ * r.trQ))
    throw NumericalError("q_reduction_eigen: complex eigenvalues, tr^2 - 4 det = " + std::to_string(disc));
  disc = std::max(disc, 0.0);
  const double root = std::sqrt(disc);
  r.xi_max = 0.5 * (r.trQ + root);
  // Stable smaller root: det / xi_max.
  r.xi_min = r.xi_max != 0.0 ? r.detQ / r.xi_max : 0.5 * (r.trQ - root);
  return r;
}

struct DetBound {
  double lhs;
  double rhs;
  /// lhs - rhs + slack; non-negative when the bound holds.
  double margin() const { return lhs - rhs + tol::kDetBoundSlack * (1.0 + std::abs(lhs)); }
};

/// det * (sigma_1 + J)|Df|^2 / f_i against its explicit lower bound at delta = 4/3.
inline DetBound det_lower_bound(const ConstraintSample& s, std::size_t i) {
  if (std::abs(s.delta() - 4.0 / 3.0) > 1e-15) throw PreconditionError("det_lower_bound: requires delta = 4/3");
  const double fi = s.f(i);
  if (!(fi > 0.0)) throw EllipticityError("det_lower_bound: f_i = " + std::to_string(fi) + " <= 0");
  const QReduction r = q_reduction_eigen(s, i);
  const double n = static_cast<double>(s.n());
  const double j = s.J();
  const double s1 = s.sigma1();
  const double li = s.lambda(i);
  const double lhs = r.detQ * (s1 + j) * s.df2() / fi;
  const double rhs = 8.0 + 2.0 * (n + 1.0) * j * s1 + 2.0 * (n - 3.0) * j * li + (2.0 * (n + 1.0) / 3.0) * s1 * fi +
                     (8.0 / 3.0) * n * li * fi;
  return {lhs, rhs};
}

/// (Delta_F b - eps |grad_F b|^2) at the jet's point.
inline double jacobi_excess(const Jet& jet) {
  const ConstraintSample& s = jet.sample();
  const SymmetricTensor3& c = jet.tensor();
  const std::size_t n = s.n();
  double distinct = 0.0;  // i > j > k
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      for (std::size_t k = 0; k < j; ++k) distinct += c(i, j, k) * c(i, j, k);
  double paired = 0.0;  // i != j, c_jji
  double diagonal = 0.0;
  double trace_terms = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double lap_i = 0.0;  // Delta u_i
    for (std::size_t j = 0; j < n; ++j) {
      const double v = c(j, j, i);
      lap_i += v;
      if (j != i) paired += v * v;
    }
    diagonal += c(i, i, i) * c(i, i, i);
    trace_terms += s.eta(i) * lap_i * lap_i;
  }
  return (6.0 * distinct + 3.0 * paired + diagonal - trace_terms) / (s.sigma1() + s.J());
}

/// Delta_F (Delta u + J)^{-1/3} = -(1/3)(sigma_1 + J)^{-1/3} * excess at eps = 1/3.
inline double superharmonic_form(const Jet& jet) {
  if (std::abs(jet.sample().epsilon() - 1.0 / 3.0) > 1e-15)
    throw PreconditionError("superharmonic_form: requires epsilon = 1/3");
  const double base = jet.sample().sigma1() + jet.sample().J();
  return -(1.0 / 3.0) * std::pow(base, -1.0 / 3.0) * jacobi_excess(jet);
}

struct Remark3d {
  double lambda3;
  double ratio;  // sigma_1 / (-lambda_3)
  double amgm_bound;  // -1 + 4 l1 l2 / (l1 l2 - 1)
};

/// Third eigenvalue on sigma_2 = 1 in three dimensions and the ratio sigma_1 / (-lambda_3).
inline Remark3d remark_3d(double lambda1, double lambda2) {
  if (!(lambda1 >= lambda2 && lambda2 > 0.0)) throw PreconditionError("remark_3d: need lambda1 >= lambda2 > 0");
  const double p = lambda1 * lambda2;
  if (!(p > 1.0)) throw PreconditionError("remark_3d: lambda1 * lambda2 <= 1, lambda3 is not negative");
  const double s = lambda1 + lambda2;
  const double lambda3 = (1.0 - p) / s;
  const double ratio = -1.0 + s * s / (p - 1.0);
  return {lambda3, ratio, -1.0 + 4.0 * p / (p - 1.0)};
}

// ---------------------------------------------------------------------------
// Sampling

struct SamplerOptions {
  /// Upper end of the draw range; NaN selects 10 (1 + K), or 20 without a floor.
  double upper = std::numeric_limits<double>::quiet_NaN();
  /// Lower end when K = kNoFloor; NaN selects -upper.
  double lower_without_floor = std::numeric_limits<double>::quiet_NaN();
  double pin_probability = 0.25;
  /// Shift for the produced samples; NaN selects 8nK/3.
  double shift = std::numeric_limits<double>::quiet_NaN();
  double epsilon = kDefaultEpsilon;
};

struct SamplerStats {
  long attempts = 0;
  long accepted = 0;
  long rejected_rest_trace = 0;
  long rejected_floor = 0;
  long rejected_trace = 0;
  long rejected_roundoff = 0;
};

namespace detail {

inline double resolve_upper(double k, const SamplerOptions& o) {
  if (!std::isnan(o.upper)) return o.upper;
  return std::isfinite(k) ? 10.0 * (1.0 + k) : 20.0;
}

inline double resolve_shift(std::size_t n, double k, const SamplerOptions& o) {
  if (!std::isnan(o.shift)) return o.shift;
  if (!std::isfinite(k)) throw PreconditionError("sampler: an explicit shift is required without a floor");
  return default_shift(n, k);
}

}  // namespace detail

/// Draws `count` samples from `rng`. lambda_2..lambda_n are uniform on
/// [-K, upper] (one of them pinned at -K with the pin probability) and
/// lambda_1 = (1 - sigma_2(rest)) / sigma_1(rest).
inline std::vector<ConstraintSample> sample_constraint(std::size_t n, double k, std::size_t count, RandomStream& rng,
                                                       const SamplerOptions& opts = {},
                                                       SamplerStats* stats_out = nullptr) {
  if (n < 2) throw DomainError("sample_constraint: n must be >= 2");
  if (!(k > 0.0)) throw DomainError("sample_constraint: K must be positive");
  const double upper = detail::resolve_upper(k, opts);
  const double lower = std::isfinite(k) ? -k
                       : (!std::isnan(opts.lower_without_floor) ? opts.lower_without_floor : -upper);
  const double shift = detail::resolve_shift(n, k, opts);
  if (!(upper > lower)) throw DomainError("sample_constraint: empty draw range");

  std::vector<ConstraintSample> out;
  out.reserve(count);
  SamplerStats stats;
  long window_attempts = 0;
  long window_rejections = 0;
  std::vector<double> lambda(n);
  while (out.size() < count) {
    ++stats.attempts;
    ++window_attempts;
    for (std::size_t j = 1; j < n; ++j) lambda[j] = rng.uniform(lower, upper);
    if (std::isfinite(k) && rng.uniform() < opts.pin_probability) lambda[1 + rng.index(n - 1)] = -k;
    const std::span<const double> rest(lambda.data() + 1, n - 1);
    const double s1_rest = sigma_k(rest, 1);
    const double s2_rest = n > 2 ? sigma_k(rest, 2) : 0.0;
    bool ok = true;
    if (s1_rest <= tol::kSamplerMinRestTrace) {
      ++stats.rejected_rest_trace;
      ok = false;
    } else {
      lambda[0] = (1.0 - s2_rest) / s1_rest;
      if (std::isfinite(k) && lambda[0] < -k) {
        ++stats.rejected_floor;
        ok = false;
      } else if (!(lambda[0] + s1_rest > 0.0)) {
        ++stats.rejected_trace;
        ok = false;
      } else if (std::abs(sigma_k(lambda, 2) - 1.0) > tol::kSampleManifold) {
        ++stats.rejected_roundoff;
        ok = false;
      }
    }
    if (ok) {
      out.emplace_back(Spectrum(lambda), k, shift, opts.epsilon);
      ++stats.accepted;
    } else {
      ++window_rejections;
    }
    if (window_attempts == tol::kSamplerWindow) {
      if (static_cast<double>(window_rejections) > tol::kSamplerStarvation * static_cast<double>(window_attempts))
        throw SamplerStarvationError(
            "sample_constraint: rejection rate above 99.9% (rest-trace " + std::to_string(stats.rejected_rest_trace) +
            ", floor " + std::to_string(stats.rejected_floor) + ", trace " + std::to_string(stats.rejected_trace) +
            ", roundoff " + std::to_string(stats.rejected_roundoff) + " of " + std::to_string(stats.attempts) + ")");
      window_attempts = 0;
      window_rejections = 0;
    }
  }
  if (stats_out) *stats_out = stats;
  return out;
}

/// Seeded convenience overload using substream 0.
inline std::vector<ConstraintSample> sample_constraint(std::size_t n, double k, std::size_t count,
                                                       std::uint64_t seed, const SamplerOptions& opts = {}) {
  RandomStream rng(seed, 0);
  return sample_constraint(n, k, count, rng, opts);
}

/// Samples along the ray lambda_1 = L -> large: L is log-uniform on
/// [10, max_top], lambda_3..lambda_n uniform on [-K, upper], and lambda_2
/// solves sigma_2 = 1.
inline std::vector<ConstraintSample> sample_ray(std::size_t n, double k, std::size_t count, RandomStream& rng,
                                                double max_top = 1e6, const SamplerOptions& opts = {}) {
  if (n < 2) throw DomainError("sample_ray: n must be >= 2");
  if (!std::isfinite(k) || !(k > 0.0)) throw DomainError("sample_ray: needs a finite K > 0");
  const double upper = std::min(detail::resolve_upper(k, opts), k);
  const double shift = detail::resolve_shift(n, k, opts);
  std::vector<ConstraintSample> out;
  out.reserve(count);
  std::vector<double> lambda(n);
  long attempts = 0;
  while (out.size() < count) {
    if (++attempts > static_cast<long>(count) * 1000 + tol::kSamplerWindow)
      throw SamplerStarvationError("sample_ray: could not place samples on the ray");
    const double top = std::exp(rng.uniform(std::log(10.0), std::log(max_top)));
    lambda[0] = top;
    for (std::size_t j = 2; j < n; ++j) lambda[j] = rng.uniform(-k, upper);
    const std::span<const double> rest(lambda.data() + 2, n - 2);
    const double s1r = n > 2 ? sigma_k(rest, 1) : 0.0;
    const double s2r = n > 3 ? sigma_k(rest, 2) : 0.0;
    // sigma_2 = lambda_2 (top + s1r) + top s1r + s2r = 1
    lambda[1] = (1.0 - top * s1r - s2r) / (top + s1r);
    if (lambda[1] < -k) continue;
    if (std::abs(sigma_k(lambda, 2) - 1.0) > tol::kSampleManifold) continue;
    if (!(sigma_k(lambda, 1) > 0.0)) continue;
    out.emplace_back(Spectrum(lambda), k, shift, opts.epsilon);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probes

namespace detail {

// Tangential projector P = I - Df Df^T / |Df|^2.
inline Matrix tangential_projector(const ConstraintSample& s) {
  const std::size_t n = s.n();
  Matrix p = Matrix::identity(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) p(a, b) -= s.f(a) * s.f(b) / s.df2();
  return p;
}

}  // namespace detail

/// P (3I - 2 e_i e_i^T - eta 11^T) P + 3 (I - P): the slice form on the tangent
/// space, extended by 3 along the normal Df.
inline SymmetricMatrix projected_q_form(const ConstraintSample& s, std::size_t i) {
  const std::size_t n = s.n();
  Matrix m(n, n);
  const double eta = s.eta(i);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) m(a, b) = (a == b ? 3.0 : 0.0) - (a == i && b == i ? 2.0 : 0.0) - eta;
  const Matrix p = detail::tangential_projector(s);
  Matrix pmp = p * m * p;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) pmp(a, b) += 3.0 * ((a == b ? 1.0 : 0.0) - p(a, b));
  return SymmetricMatrix::from_dense(pmp);
}

/// Jet whose i-th diagonal slice points along the most negative direction of
/// Q_i on the tangent space, scaled by `scales[i]`; mixed entries vanish.
inline Jet extremal_jet(const ConstraintSample& s, std::span<const double> scales) {
  const std::size_t n = s.n();
  if (scales.size() != n) throw DomainError("extremal_jet: need one scale per slice");
  SymmetricTensor3 c(n);
  const Matrix p = detail::tangential_projector(s);
  for (std::size_t i = 0; i < n; ++i) {
    const EigenDecomposition eig = eigen_sym(projected_q_form(s, i));
    std::vector<double> v(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) v[a] += p(a, b) * eig.vectors(b, n - 1);
    const double norm = std::sqrt(dot(v, v));
    for (std::size_t a = 0; a < n; ++a) c.set(a, a, i, norm > 0.0 ? scales[i] * v[a] / norm : 0.0);
  }
  return project_jet(s, c);
}

/// Smallest eigenvalue over i of the reduced slice forms at the sample's shift.
inline double min_slice_eigenvalue(const ConstraintSample& s) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.n(); ++i) worst = std::min(worst, q_reduction_eigen(s, i).xi_min);
  return worst;
}

/// Smallest J in [0, j_max] (to `resolution`) with every slice form positive
/// semidefinite, found by bisection assuming monotonicity in J. Returns
/// j_max + resolution when even j_max fails.
inline double minimal_shift(const ConstraintSample& s, double j_max, double resolution = 1e-6) {
  auto ok = [&](double j) { return min_slice_eigenvalue(s.with_shift(j)) >= 0.0; };
  if (ok(0.0)) return 0.0;
  if (!ok(j_max)) return j_max + resolution;
  double lo = 0.0;
  double hi = j_max;
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace s2wb
