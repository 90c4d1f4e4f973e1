#pragma once

// Batch commands behind the s2wb tool. Each returns the JSON report and the
// process exit code; the CLI only parses flags and writes files.

#include <algorithm>
#include <array>
#include <iterator>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "s2wb/experiments.hpp"
#include "s2wb/jacobi_cert.hpp"
#include "s2wb/legendre_lewy.hpp"
#include "s2wb/parallel.hpp"
#include "s2wb/report.hpp"
#include "s2wb/rng.hpp"

namespace s2wb {

/// Samples per chunk; chunk c draws from substream c of the seed.
inline constexpr std::size_t kChunkSamples = 1000;

struct CommandResult {
  json report;
  int exit_code = kExitOk;
  std::vector<std::pair<std::string, std::string>> files;  // relative name, contents
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json spectrum_json(const Spectrum& s) { return json(std::vector<double>(s.values().begin(), s.values().end())); }

inline std::size_t chunk_count(std::size_t samples) { return (samples + kChunkSamples - 1) / kChunkSamples; }
inline std::size_t chunk_size(std::size_t samples, std::size_t c) {
  return std::min(kChunkSamples, samples - c * kChunkSamples);
}

inline std::string checks_csv(const CheckSet& cs) {
  std::vector<std::vector<json>> rows;
  for (const auto& c : cs.checks())
    rows.push_back({c.name(), c.hard() ? "hard" : "info", c.count(), c.pass(),
                    c.count() && std::isfinite(c.worst_margin()) ? json(c.worst_margin()) : json("")});
  return to_csv({"name", "kind", "count", "pass", "worst_margin"}, rows);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// verify-jacobi

struct JacobiRunConfig {
  std::size_t n = 3;
  double K = 1.0;
  std::optional<double> j_override;
  double epsilon = kDefaultEpsilon;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  bool no_floor = false;  // implied by --j-override 0 with n = 3
  unsigned threads = 0;

  bool floor() const { return !(no_floor || remark_mode()); }
  bool remark_mode() const { return n == 3 && j_override && *j_override == 0.0; }
  double J() const { return j_override ? *j_override : default_shift(n, K); }

  void validate() const {
    if (n < 2 || n > 64) throw ConfigError("--n must be in 2..64");
    if (!(K > 0.0) || !std::isfinite(K)) throw ConfigError("--k-semiconvex must be positive and finite");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("--epsilon must be positive");
    if (j_override && !(*j_override >= 0.0)) throw ConfigError("--j-override must be >= 0");
    if (samples == 0) throw ConfigError("--samples must be positive");
    if (!floor() && !j_override) throw ConfigError("sampling without a floor needs --j-override");
  }

  json to_json() const {
    json j;
    j["n"] = n;
    j["k_semiconvex"] = K;
    j["j"] = J();
    j["j_source"] = j_override ? "override" : "8nK/3";
    j["epsilon"] = epsilon;
    j["delta"] = 1.0 + epsilon;
    j["samples"] = samples;
    j["seed"] = seed;
    j["semiconvexity_floor"] = floor();
    j["remark_mode"] = remark_mode();
    return j;
  }
};

namespace detail {

inline CheckSet jacobi_checkset(const JacobiRunConfig& cfg) {
  CheckSet cs;
  const bool default_params = cfg.floor() && !cfg.j_override && cfg.epsilon == kDefaultEpsilon;
  cs.add("sample_on_manifold");
  cs.add("ellipticity_f_positive", true, true);
  cs.add("jet_tangency");
  cs.add("jacobi_excess_random");
  cs.add("jacobi_excess_extremal");
  cs.add("reduction_matches_projected_form");
  cs.add("reduction_soundness");
  cs.add("reduction_trace_positive", 1.0 + cfg.epsilon <= 1.5, true);
  cs.add("q_form_direct_above_reduced_minimum");
  if (cfg.epsilon == kDefaultEpsilon) cs.add("det_lower_bound", default_params);
  if (cfg.remark_mode()) {
    cs.add("remark_ratio_above_three", true, true);
    cs.add("remark_amgm_bound");
  }
  return cs;
}

// Bins of jacobi_excess on random jets: < 0, then [0, 1e-9), [1e-9, 1e-6),
// [1e-6, 1e-3), [1e-3, 1), [1, inf).
inline constexpr double kExcessBinEdges[] = {0.0, 1e-9, 1e-6, 1e-3, 1.0};
inline constexpr std::size_t kExcessBins = std::size(kExcessBinEdges) + 1;

struct JacobiChunk {
  CheckSet checks;
  double max_minimal_shift = 0.0;  // over probed samples
  long attempts = 0;
  std::array<long, kExcessBins> excess_histogram{};
  long unshifted_slices = 0;  // J = 0 probe: slices examined
  long unshifted_det_nonpositive = 0;
  json unshifted_witness;
};

inline JacobiChunk jacobi_chunk(const JacobiRunConfig& cfg, std::size_t chunk) {
  JacobiChunk out;
  out.checks = jacobi_checkset(cfg);
  RandomStream rng(cfg.seed, chunk);
  SamplerOptions opts;
  opts.epsilon = cfg.epsilon;
  if (cfg.j_override) opts.shift = *cfg.j_override;
  const std::size_t n = cfg.n;
  const std::size_t count = chunk_size(cfg.samples, chunk);
  SamplerStats stats;
  const auto batch = sample_constraint(n, cfg.floor() ? cfg.K : kNoFloor, count, rng, opts, &stats);
  out.attempts = stats.attempts;
  CheckSet& cs = out.checks;
  std::vector<double> ones(n, 1.0), t(n);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const ConstraintSample& s = batch[k];
    auto where = [&s](std::optional<std::size_t> i = std::nullopt) {
      json w;
      w["spectrum"] = spectrum_json(s.spectrum());
      if (i) w["i"] = *i;
      return w;
    };
    cs["sample_on_manifold"].record(tol::kSampleManifold - std::abs(sigma_k(s.spectrum(), 2) - 1.0), [&] { return where(); });
    double fmin = HUGE_VAL;
    for (std::size_t i = 0; i < n; ++i) fmin = std::min(fmin, s.f(i));
    cs["ellipticity_f_positive"].record(fmin, [&] { return where(); });

    const Jet jet = project_jet(s, random_symmetric_tensor(n, rng));
    double tang = 0.0;
    const double scale = std::max(1.0, std::sqrt(s.df2() * jet.tensor().frobenius2()));
    for (std::size_t c = 0; c < n; ++c) tang = std::max(tang, std::abs(jet.tangency_residual(c)) / scale);
    cs["jet_tangency"].record(tol::kTangency - tang, [&] { return where(); });
    const double excess = jacobi_excess(jet);
    cs["jacobi_excess_random"].record(excess - tol::kExcessFloor, [&] { return where(); });
    std::size_t bin = 0;
    while (bin < std::size(kExcessBinEdges) && excess >= kExcessBinEdges[bin]) ++bin;
    ++out.excess_histogram[bin];
    cs["jacobi_excess_extremal"].record(jacobi_excess(extremal_jet(s, ones)) - tol::kExcessFloor,
                                        [&] { return where(); });

    for (std::size_t i = 0; i < n; ++i) {
      QReduction red;
      try {
        red = q_reduction_eigen(s, i);
      } catch (const Error&) {
        const double nan = std::nan("");
        cs["reduction_matches_projected_form"].record(nan, [&] { return where(i); });
        continue;
      }
      const auto eig = eigen_sym(projected_q_form(s, i)).spectrum;
      double tr = -3.0 * (static_cast<double>(n) - 2.0), det = std::pow(3.0, -(static_cast<double>(n) - 2.0));
      for (double e : eig.values()) {
        tr += e;
        det *= e;
      }
      const double m_tr = tol::kProjectedFormAgreement * (1.0 + std::abs(tr)) - std::abs(red.trQ - tr);
      const double m_det = tol::kProjectedFormAgreement * (1.0 + std::abs(det)) - std::abs(red.detQ - det);
      cs["reduction_matches_projected_form"].record(std::min(m_tr, m_det), [&] { return where(i); });
      cs["reduction_trace_positive"].record(red.trQ, [&] { return where(i); });
      if (red.trQ > 0.0 && red.detQ > 0.0)
        cs["reduction_soundness"].record(eig.min() + 1e-9, [&] { return where(i); });
      if (cfg.J() == 0.0 && n >= 4) {
        ++out.unshifted_slices;
        if (red.detQ <= 0.0 && out.unshifted_det_nonpositive++ == 0) {
          out.unshifted_witness = where(i);
          out.unshifted_witness["det"] = red.detQ;
        }
      }

      for (double& v : t) v = rng.normal();
      double tdf = 0.0;
      for (std::size_t a = 0; a < n; ++a) tdf += s.f(a) * t[a];
      double t2 = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        t[a] -= tdf * s.f(a) / s.df2();
        t2 += t[a] * t[a];
      }
      const double q = q_form_direct(s, i, t);
      const double floor_value = std::min(red.xi_min, 3.0) * t2;
      cs["q_form_direct_above_reduced_minimum"].record(
          q - floor_value + tol::kProjectedFormAgreement * (1.0 + std::abs(q) + std::abs(floor_value)),
          [&] { return where(i); });

      if (cfg.epsilon == kDefaultEpsilon && s.f(i) > 0.0) {
        const DetBound b = det_lower_bound(s, i);
        cs["det_lower_bound"].record(b.margin(), [&] {
          json w = where(i);
          w["lhs"] = b.lhs;
          w["rhs"] = b.rhs;
          return w;
        });
      }
    }
    if (k < 20 && cfg.J() > 0.0 && cfg.floor())
      out.max_minimal_shift = std::max(out.max_minimal_shift, minimal_shift(s, cfg.J(), 1e-6 * cfg.J()));
  }
  if (cfg.remark_mode()) {
    // (lambda_1, lambda_2) with lambda_1 >= lambda_2 > 0 and product 1 + 10^U(-6,3)
    for (std::size_t k = 0; k < count; ++k) {
      const double p = 1.0 + std::pow(10.0, rng.uniform(-6.0, 3.0));
      const double r = std::pow(10.0, rng.uniform(0.0, 6.0));
      const double l1 = std::sqrt(p * r), l2 = std::sqrt(p / r);
      const Remark3d rm = remark_3d(l1, l2);
      auto w = [&] {
        json j;
        j["lambda1"] = l1;
        j["lambda2"] = l2;
        j["ratio"] = rm.ratio;
        return j;
      };
      cs["remark_ratio_above_three"].record(rm.ratio - 3.0, w);
      cs["remark_amgm_bound"].record(rm.ratio - rm.amgm_bound + 1e-12 * (1.0 + rm.ratio), w);
    }
  }
  return out;
}

}  // namespace detail

inline CommandResult cmd_verify_jacobi(const JacobiRunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const std::size_t chunks = detail::chunk_count(cfg.samples);
  const auto parts = parallel_chunks(chunks, worker_count(cfg.threads),
                                     [&cfg](std::size_t c) { return detail::jacobi_chunk(cfg, c); });
  CheckSet cs = detail::jacobi_checkset(cfg);
  double min_shift = 0.0;
  long attempts = 0, slices = 0, det_nonpositive = 0;
  std::array<long, detail::kExcessBins> histogram{};
  json unshifted_witness;
  for (const auto& p : parts) {
    cs.merge(p.checks);
    min_shift = std::max(min_shift, p.max_minimal_shift);
    attempts += p.attempts;
    for (std::size_t b = 0; b < histogram.size(); ++b) histogram[b] += p.excess_histogram[b];
    slices += p.unshifted_slices;
    if (det_nonpositive == 0 && p.unshifted_det_nonpositive > 0) unshifted_witness = p.unshifted_witness;
    det_nonpositive += p.unshifted_det_nonpositive;
  }
  const int code = cs.any_failed() ? kExitViolation : kExitOk;
  CommandResult res{make_report("verify-jacobi", cfg.to_json(), cfg.seed, cs, code, 0.0), code, {}};
  res.report["diagnostics"]["sampler_attempts"] = attempts;
  res.report["diagnostics"]["acceptance_rate"] = static_cast<double>(cfg.samples) / static_cast<double>(attempts);
  res.report["tables"]["jacobi_excess_histogram"] = {{"edges", detail::kExcessBinEdges}, {"counts", histogram}};
  if (cfg.floor() && cfg.J() > 0.0) {
    // sharpness of J, bisected on the first 20 samples of every chunk
    res.report["diagnostics"]["empirical_minimal_shift"] = min_shift;
    res.report["diagnostics"]["empirical_minimal_shift_ratio"] = min_shift / cfg.J();
  }
  if (cfg.J() == 0.0 && cfg.n >= 4) {
    res.report["diagnostics"]["unshifted_slices"] = slices;
    res.report["diagnostics"]["unshifted_det_nonpositive"] = det_nonpositive;
    res.report["diagnostics"]["unshifted_witness"] = unshifted_witness;
  }
  res.files.emplace_back("checks.csv", detail::checks_csv(cs));
  res.report["wall_time_seconds"] = detail::seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// verify-transform

struct TransformRunConfig {
  std::size_t n = 3;
  double K = 1.0;
  std::optional<double> kbar;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  bool ray = false;
  unsigned threads = 0;

  TransformConfig transform() const { return TransformConfig(n, K, kbar); }

  void validate() const {
    if (n < 2 || n > 64) throw ConfigError("--n must be in 2..64");
    if (samples == 0) throw ConfigError("--samples must be positive");
    (void)transform();  // throws ConfigError when Kbar <= K
  }

  json to_json() const {
    const TransformConfig tc = transform();
    json j;
    j["n"] = n;
    j["k_semiconvex"] = K;
    j["kbar"] = tc.Kbar();
    j["kbar_rule"] = to_string(tc.rule());
    j["J"] = tc.J();
    j["A1"] = tc.A1();
    j["A2"] = tc.A2();
    j["samples"] = samples;
    j["seed"] = seed;
    j["ray"] = ray;
    return j;
  }
};

namespace detail {

inline CheckSet transform_checkset(const TransformRunConfig& cfg) {
  CheckSet cs;
  cs.add("conformal_residual");
  cs.add("residual_factorization");
  cs.add("trace_identity");
  cs.add("a_cubed_identity");
  cs.add("quotient_identity");
  cs.add("mu_in_unit_band", true, true);
  cs.add("q_ellipticity_positive", true, true);
  cs.add("q_ellipticity_finite_difference");
  cs.add("q_midpoint_concavity");
  if (cfg.ray) cs.add("ray_rest_bounded_below", true, true);
  return cs;
}

struct TransformChunk {
  CheckSet checks;
  // mu ascending: mu[0] belongs to the top eigenvalue lambda_1
  double c_top = 0.0, c_rest = HUGE_VAL;
  double ray_c_top = 0.0, ray_mu_top_min = HUGE_VAL, ray_c_rest = HUGE_VAL;
  double grad_min = HUGE_VAL, grad_max = 0.0;
};

inline void check_state(CheckSet& cs, TransformChunk& out, const TransformConfig& tc, const ConstraintSample& s,
                        const TransformedState& st) {
  const std::size_t n = s.n();
  auto where = [&] {
    json w;
    w["lambda"] = spectrum_json(s.spectrum());
    w["mu"] = spectrum_json(st.mu);
    return w;
  };
  cs["conformal_residual"].record(tol::kTransformResidual - std::abs(st.residual), where);
  std::vector<double> back(n);
  double inv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    back[i] = 1.0 / st.mu[i] - tc.Kbar();
    inv += 1.0 / st.mu[i];
  }
  const double sn = sigma_k(st.mu, static_cast<int>(n));
  const double factored = sn * (1.0 - sigma_k(back, 2));
  cs["residual_factorization"].record(tol::kTraceIdentity * std::max(1.0, std::abs(st.residual)) -
                                          std::abs(factored - st.residual),
                                      where);
  const double trace = s.sigma1() + static_cast<double>(n) * tc.Kbar();
  cs["trace_identity"].record(tol::kTraceIdentity * inv - std::abs(trace - inv), where);
  cs["a_cubed_identity"].record(1e-12 - std::abs(st.a * st.a * st.a * inv - 1.0), where);
  const double q_id = 1.0 / (tc.A1() - tc.A2() * st.a * st.a * st.a);
  cs["quotient_identity"].record(tol::kQuotientIdentity * std::abs(st.q) - std::abs(st.q - q_id), where);
  cs["mu_in_unit_band"].record(std::min(st.mu[0], 1.0 - st.mu[n - 1]), where);

  const auto grad = q_ellipticity(st.mu);
  std::vector<double> up(st.mu.values().begin(), st.mu.values().end()), dn = up;
  double worst_fd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.grad_min = std::min(out.grad_min, grad[i]);
    out.grad_max = std::max(out.grad_max, grad[i]);
    const double h = 1e-5 * st.mu[n - 1];  // scaled by the largest mu; mu_1 -> 0 on the ray
    up[i] += h;
    dn[i] -= h;
    const double fd = (quotient_q(Spectrum(up)) - quotient_q(Spectrum(dn))) / (2.0 * h);
    up[i] = dn[i] = st.mu[i];
    worst_fd = std::max(worst_fd, std::abs(fd - grad[i]) / std::abs(grad[i]));
  }
  cs["q_ellipticity_positive"].record(*std::min_element(grad.begin(), grad.end()), where);
  cs["q_ellipticity_finite_difference"].record(tol::kFiniteDifference - worst_fd, where);
}

inline TransformChunk transform_chunk(const TransformRunConfig& cfg, std::size_t chunk) {
  const TransformConfig tc = cfg.transform();
  TransformChunk out;
  out.checks = transform_checkset(cfg);
  RandomStream rng(cfg.seed, chunk);
  const std::size_t count = chunk_size(cfg.samples, chunk);
  const auto batch = sample_constraint(cfg.n, cfg.K, count, rng);
  std::optional<TransformedState> prev;
  for (const auto& s : batch) {
    const TransformedState st = transform_spectrum(s.spectrum(), tc);
    check_state(out.checks, out, tc, s, st);
    out.c_top = std::max(out.c_top, st.mu[0]);
    for (std::size_t i = 1; i < cfg.n; ++i) out.c_rest = std::min(out.c_rest, st.mu[i]);
    if (prev) {
      std::vector<double> mid(cfg.n);
      for (std::size_t i = 0; i < cfg.n; ++i) mid[i] = 0.5 * (st.mu[i] + prev->mu[i]);
      const double margin = quotient_q(Spectrum(mid)) - 0.5 * st.q - 0.5 * prev->q + tol::kConcavitySlack;
      out.checks["q_midpoint_concavity"].record(margin, [&] {
        json w;
        w["mu"] = spectrum_json(st.mu);
        w["nu"] = spectrum_json(prev->mu);
        return w;
      });
    }
    prev = st;
  }
  if (cfg.ray) {
    RandomStream ray_rng(cfg.seed, (std::uint64_t{1} << 40) + chunk);
    for (const auto& s : sample_ray(cfg.n, cfg.K, count, ray_rng)) {
      const TransformedState st = transform_spectrum(s.spectrum(), tc);
      check_state(out.checks, out, tc, s, st);
      double rest = HUGE_VAL;
      for (std::size_t i = 1; i < cfg.n; ++i) rest = std::min(rest, st.mu[i]);
      out.ray_c_top = std::max(out.ray_c_top, st.mu[0]);
      out.ray_mu_top_min = std::min(out.ray_mu_top_min, st.mu[0]);
      out.ray_c_rest = std::min(out.ray_c_rest, rest);
      out.checks["ray_rest_bounded_below"].record(rest, [&] {
        json w;
        w["lambda"] = spectrum_json(s.spectrum());
        return w;
      });
    }
  }
  return out;
}

}  // namespace detail

inline CommandResult cmd_verify_transform(const TransformRunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const std::size_t chunks = detail::chunk_count(cfg.samples);
  const auto parts = parallel_chunks(chunks, worker_count(cfg.threads),
                                     [&cfg](std::size_t c) { return detail::transform_chunk(cfg, c); });
  CheckSet cs = detail::transform_checkset(cfg);
  detail::TransformChunk agg;
  for (const auto& p : parts) {
    cs.merge(p.checks);
    agg.c_top = std::max(agg.c_top, p.c_top);
    agg.c_rest = std::min(agg.c_rest, p.c_rest);
    agg.ray_c_top = std::max(agg.ray_c_top, p.ray_c_top);
    agg.ray_mu_top_min = std::min(agg.ray_mu_top_min, p.ray_mu_top_min);
    agg.ray_c_rest = std::min(agg.ray_c_rest, p.ray_c_rest);
    agg.grad_min = std::min(agg.grad_min, p.grad_min);
    agg.grad_max = std::max(agg.grad_max, p.grad_max);
  }
  const int code = cs.any_failed() ? kExitViolation : kExitOk;
  CommandResult res{make_report("verify-transform", cfg.to_json(), cfg.seed, cs, code, 0.0), code, {}};
  auto& d = res.report["diagnostics"];
  d["c_top"] = agg.c_top;    // max of mu_1 = 1 / (lambda_1 + Kbar)
  d["c_rest"] = agg.c_rest;  // min of mu_i, i >= 2
  d["q_gradient_min"] = agg.grad_min;
  d["q_gradient_max"] = agg.grad_max;
  if (cfg.ray) {
    d["ray_c_top"] = agg.ray_c_top;
    d["ray_mu_top_min"] = agg.ray_mu_top_min;
    d["ray_c_rest"] = agg.ray_c_rest;
  }
  res.files.emplace_back("checks.csv", detail::checks_csv(cs));
  res.report["wall_time_seconds"] = detail::seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// solve and experiment

enum class BoundaryKind { Quadratic, Perturbed };

inline BoundaryKind parse_boundary(const std::string& s) {
  if (s == "quadratic") return BoundaryKind::Quadratic;
  if (s == "perturbed") return BoundaryKind::Perturbed;
  throw ConfigError("--boundary must be 'quadratic' or 'perturbed'");
}

inline ScalarField make_boundary(BoundaryKind b, std::size_t n, double amplitude) {
  return b == BoundaryKind::Quadratic ? quadratic_boundary(n) : perturbed_boundary(n, amplitude);
}

struct SolveRunConfig {
  std::size_t n = 2;
  double R = 1.0;
  std::size_t m = 65;
  double K = 1.0;
  double tol = 1e-10;
  int max_iter = 50;
  std::string boundary = "perturbed";
  double amplitude = 0.1;
  double xi = 1e-4;
  int levels = 4;

  void validate() const {
    if (n != 2 && n != 3) throw ConfigError("--n must be 2 or 3 for the solver");
    if (!(R > 0.0)) throw ConfigError("--R must be positive");
    if (m < kMinGridNodes) throw ConfigError("--m must be >= 5");
    if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
    if (max_iter < 0) throw ConfigError("--max-iter must be >= 0");
    if (!(xi > 0.0)) throw ConfigError("--xi must be positive");
    parse_boundary(boundary);
    (void)TransformConfig(n, K);
  }

  json to_json() const {
    json j;
    j["n"] = n;
    j["R"] = R;
    j["m"] = m;
    j["k_semiconvex"] = K;
    j["kbar"] = TransformConfig(n, K).Kbar();
    j["tol"] = tol;
    j["max_iter"] = max_iter;
    j["boundary"] = boundary;
    j["amplitude"] = amplitude;
    j["xi"] = xi;
    j["levels"] = levels;
    return j;
  }
};

inline std::string grid_text(const PotentialGrid& g) {
  std::ostringstream os;
  write_s2grid(os, g);
  return os.str();
}

inline CommandResult cmd_solve(const SolveRunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const TransformConfig tc(cfg.n, cfg.K);
  SolveOptions opts;
  opts.K = cfg.K;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  CheckSet cs;
  cs.add("solve_residual");
  cs.add("positive_branch", true, true);
  cs.add("dual_assembly");
  cs.add("superharmonic_positive_part", false);
  CommandResult res;
  json diag = json::object();
  json tables = json::object();
  try {
    const auto sol = solve_dirichlet(make_boundary(parse_boundary(cfg.boundary), cfg.n, cfg.amplitude), cfg.n, cfg.R,
                                     cfg.m, opts);
    res.files.emplace_back("u.s2grid", grid_text(sol.u));
    cs["solve_residual"].record(cfg.tol - sol.report.residual);
    cs["positive_branch"].record(sol.report.branch == Branch::PositiveTrace ? 1.0 : -1.0);
    diag["iterations"] = sol.report.iterations;
    diag["residual"] = sol.report.residual;
    diag["residual_history"] = sol.report.history;
    diag["damping_steps"] = sol.report.steps;
    diag["branch"] = to_string(sol.report.branch);
    diag["min_eigenvalue_plus_K"] = sol.report.min_shifted_eigenvalue;
    diag["branch_projections"] = sol.report.projections;
    diag["m_matrix_violations"] = sol.report.m_matrix_violations;
    diag["diagonally_dominant_rows"] = sol.report.diagonally_dominant_rows;
    diag["linear_solver"] = to_string(sol.report.linear_solver);

    const auto tr = transform_grid(sol.u, tc);
    res.files.emplace_back("w.s2grid", grid_text(tr.w));
    diag["transform_valid_nodes"] = tr.valid;
    diag["w_bounds"] = {{"lo", tr.w.lower()}, {"hi", tr.w.upper()}};
    const auto sh = superharmonicity_residual(tr.w, tc);
    cs["dual_assembly"].record(tol::kFormulaAgreement - sh.max_dual_defect);
    const double pos = max_positive_part(sh.delta_h);
    cs["superharmonic_positive_part"].record(-pos);
    diag["superharmonic_positive_part_half_box"] = pos;
    diag["equation_defect_max"] = sh.max_equation_defect;
    diag["hessian_oscillation_half_box"] = hessian_oscillation(tr.w);

    const auto conc = concentration_diagnostic(tr.w, tc, cfg.xi, cfg.levels);
    json rows = json::array();
    std::vector<std::vector<json>> csv;
    for (const auto& r : conc.rows) {
      rows.push_back({{"level", r.level}, {"nodes", r.nodes}, {"a_min", r.a_min}, {"bad_fraction", r.bad_fraction}});
      csv.push_back({r.level, r.nodes, r.a_min, r.bad_fraction});
    }
    tables["concentration"] = {{"diagnostic_only", true},
                               {"truncated", conc.truncated},
                               {"non_increasing", conc.non_increasing},
                               {"rows", rows}};
    if (conc.truncated) diag["warnings"].push_back("concentration levels truncated below 5 nodes per axis");
    res.files.emplace_back("concentration.csv", to_csv({"level", "nodes", "a_min", "bad_fraction"}, csv));
    res.exit_code = cs.any_failed() ? kExitViolation : kExitOk;
  } catch (const ConvergenceError& e) {
    diag["error"] = e.what();
    diag["residual_history"] = e.history();
    res.exit_code = kExitToolError;
  } catch (const Error& e) {
    diag["error"] = e.what();
    res.exit_code = kExitToolError;
  }
  res.report = make_report("solve", cfg.to_json(), 0, cs, res.exit_code, 0.0);
  res.report["tables"] = tables;
  res.report["diagnostics"] = diag;
  res.files.emplace_back("checks.csv", detail::checks_csv(cs));
  res.report["wall_time_seconds"] = detail::seconds_since(t0);
  return res;
}

struct ExperimentRunConfig {
  std::size_t n = 2;
  std::vector<double> R_list{1, 2, 4, 8};
  std::vector<std::size_t> m_list{65};
  double K = 1.0;
  double tol = 1e-10;
  int max_iter = 50;
  std::string boundary = "perturbed";
  double amplitude = 0.1;
  unsigned threads = 0;

  void validate() const {
    if (n != 2 && n != 3) throw ConfigError("--n must be 2 or 3 for the solver");
    if (R_list.empty()) throw ConfigError("--R-list must not be empty");
    for (std::size_t i = 0; i < R_list.size(); ++i) {
      if (!(R_list[i] > 0.0)) throw ConfigError("--R-list entries must be positive");
      if (i > 0 && !(R_list[i] > R_list[i - 1])) throw ConfigError("--R-list must be increasing");
    }
    if (m_list.empty()) throw ConfigError("--m must be given at least once");
    for (std::size_t m : m_list)
      if (m < kMinGridNodes) throw ConfigError("--m must be >= 5");
    if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
    parse_boundary(boundary);
    (void)TransformConfig(n, K);
  }

  json to_json() const {
    json j;
    j["n"] = n;
    j["R_list"] = R_list;
    j["m_list"] = m_list;
    j["k_semiconvex"] = K;
    j["kbar"] = TransformConfig(n, K).Kbar();
    j["tol"] = tol;
    j["max_iter"] = max_iter;
    j["boundary"] = boundary;
    j["amplitude"] = amplitude;
    return j;
  }
};

inline CommandResult cmd_experiment(const ExperimentRunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const bool flat = parse_boundary(cfg.boundary) == BoundaryKind::Quadratic;
  const ScalarField boundary = make_boundary(parse_boundary(cfg.boundary), cfg.n, cfg.amplitude);
  SolveOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  CheckSet cs;
  json tables = json::object();
  json diag = json::object();
  std::vector<std::vector<json>> csv;
  std::vector<ScalingTable> results;
  bool incomplete = false;
  for (std::size_t m : cfg.m_list) {
    const std::string tag = "_m" + std::to_string(m);
    const ScalingTable t = scaling_experiment(boundary, cfg.n, cfg.R_list, m, cfg.K, worker_count(cfg.threads), opts);
    json rows = json::array();
    for (const auto& r : t.rows) {
      json row{{"R", r.R}, {"osc", r.osc}, {"iterations", r.iterations}, {"residual", r.residual}, {"valid", r.valid}};
      if (r.error) row["error"] = *r.error;
      rows.push_back(row);
      csv.push_back({m, r.R, r.osc, r.iterations, r.residual, r.valid});
    }
    tables["scaling" + tag] = {{"m", m}, {"alpha_hat", std::isfinite(t.alpha_hat) ? json(t.alpha_hat) : json(nullptr)},
                               {"strictly_decreasing", t.strictly_decreasing}, {"rows", rows}};
    auto& complete = cs.add("solves_complete" + tag);
    complete.record(t.complete() ? 0.0 : -1.0);
    if (!t.complete()) incomplete = true;
    if (flat) {
      auto& c = cs.add("flat_oscillation" + tag);
      for (const auto& r : t.rows)
        if (!r.error) c.record(1e-9 - r.osc, [&] { return json{{"R", r.R}}; });
    } else {
      auto& dec = cs.add("oscillation_strictly_decreasing" + tag, true, true);
      for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
        const auto& a = t.rows[i];
        const auto& b = t.rows[i + 1];
        if (a.error || b.error) continue;
        dec.record((a.osc - b.osc) / a.osc, [&] { return json{{"R", a.R}, {"R_next", b.R}}; });
      }
      if (cfg.R_list.size() >= 2) cs.add("alpha_hat_positive" + tag, true, true).record(t.alpha_hat);
    }
    results.push_back(t);
  }
  if (cfg.m_list.size() >= 2 && !flat) {
    auto& agree = cs.add("refinement_agreement");
    for (std::size_t k = 0; k + 1 < results.size(); ++k)
      for (std::size_t i = 0; i < cfg.R_list.size(); ++i) {
        const auto& c = results[k].rows[i];
        const auto& f = results[k + 1].rows[i];
        if (c.error || f.error) continue;
        agree.record(tol::kOscillationRefinement * f.osc - std::abs(c.osc - f.osc), [&] {
          return json{{"R", c.R}, {"m_coarse", cfg.m_list[k]}, {"m_fine", cfg.m_list[k + 1]}};
        });
      }
  }
  CommandResult res;
  res.exit_code = incomplete ? kExitToolError : cs.any_failed() ? kExitViolation : kExitOk;
  res.report = make_report("experiment", cfg.to_json(), 0, cs, res.exit_code, 0.0);
  res.report["tables"] = tables;
  res.report["diagnostics"] = diag;
  res.files.emplace_back("scaling.csv", to_csv({"m", "R", "osc", "iterations", "residual", "valid"}, csv));
  res.files.emplace_back("checks.csv", detail::checks_csv(cs));
  res.report["wall_time_seconds"] = detail::seconds_since(t0);
  return res;
}

/// Writes report.json and the command's files under `dir`.
inline void write_outputs(const CommandResult& res, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_text((std::filesystem::path(dir) / "report.json").string(), res.report.dump(2) + "\n");
  for (const auto& [name, text] : res.files) write_text((std::filesystem::path(dir) / name).string(), text);
}

}  // namespace s2wb
