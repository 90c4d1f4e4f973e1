// s2wb: batch verification and finite-difference experiments.
//
// Exit codes: 0 all hard checks pass, 2 a hard check failed, 3 configuration,
// I/O or solver failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "s2wb/commands.hpp"

namespace {

int finish(const s2wb::CommandResult& res, const std::string& output) {
  if (output.empty()) {
    std::cout << res.report.dump(2) << "\n";
  } else {
    s2wb::write_outputs(res, output);
    std::cerr << "s2wb: " << res.report["status"].get<std::string>() << ", report written to " << output
              << "/report.json\n";
  }
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"s2wb: sigma_2 Jacobi certificate and Legendre-Lewy transform checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(s2wb::kLibraryVersion));

  std::string output;
  unsigned threads = 0;
  auto common = [&](CLI::App* c) {
    c->add_option("--output", output, "Directory for report.json and tables (default: report on stdout)");
    c->add_option("--threads", threads, "Worker threads (S2WB_THREADS takes precedence)");
  };

  s2wb::JacobiRunConfig jc;
  double j_override = 0.0;
  auto* vj = app.add_subcommand("verify-jacobi", "Sample the constraint surface and check the Jacobi inequality");
  vj->add_option("--n", jc.n, "Dimension")->check(CLI::Range(2, 64));
  vj->add_option("--k-semiconvex", jc.K, "Semiconvexity constant K");
  auto* jopt = vj->add_option("--j-override", j_override, "Shift J (default 8nK/3; 0 with n = 3 selects the remark)");
  vj->add_option("--epsilon", jc.epsilon, "Exponent epsilon (delta = 1 + epsilon)");
  vj->add_option("--samples", jc.samples, "Number of samples");
  vj->add_option("--seed", jc.seed, "Random seed");
  vj->add_flag("--no-floor", jc.no_floor, "Drop the semiconvexity floor (needs --j-override)");
  common(vj);

  s2wb::TransformRunConfig tc;
  double kbar = 0.0;
  auto* vt = app.add_subcommand("verify-transform", "Check the spectral Legendre-Lewy transform identities");
  vt->add_option("--n", tc.n, "Dimension")->check(CLI::Range(2, 64));
  vt->add_option("--k-semiconvex", tc.K, "Semiconvexity constant K");
  auto* kopt = vt->add_option("--kbar", kbar, "Shift Kbar (default max(8K/3, K + 1 + 1e-6))");
  vt->add_option("--samples", tc.samples, "Number of samples");
  vt->add_option("--seed", tc.seed, "Random seed");
  vt->add_flag("--ray", tc.ray, "Add the lambda_1 -> 1e6 ray family");
  common(vt);

  s2wb::SolveRunConfig sc;
  auto* so = app.add_subcommand("solve", "Solve sigma_2(D^2 u) = 1 on a box, transform and check superharmonicity");
  so->add_option("--n", sc.n, "Dimension (2 or 3)");
  so->add_option("--R", sc.R, "Box half-width");
  so->add_option("--m", sc.m, "Nodes per axis");
  so->add_option("--k-semiconvex", sc.K, "Semiconvexity constant K");
  so->add_option("--tol", sc.tol, "Newton residual tolerance");
  so->add_option("--max-iter", sc.max_iter, "Newton iteration cap");
  so->add_option("--boundary", sc.boundary, "quadratic or perturbed");
  so->add_option("--amplitude", sc.amplitude, "Amplitude of the perturbed boundary");
  so->add_option("--xi", sc.xi, "Concentration threshold");
  so->add_option("--levels", sc.levels, "Dyadic concentration levels");
  common(so);

  s2wb::ExperimentRunConfig ec;
  auto* ex = app.add_subcommand("experiment", "Hessian oscillation of w against the box size");
  ex->add_option("--n", ec.n, "Dimension (2 or 3)");
  ex->add_option("--R-list", ec.R_list, "Increasing box half-widths")->delimiter(',');
  ex->add_option("--m", ec.m_list, "Nodes per axis; repeat for a refinement check");
  ex->add_option("--k-semiconvex", ec.K, "Semiconvexity constant K");
  ex->add_option("--tol", ec.tol, "Newton residual tolerance");
  ex->add_option("--max-iter", ec.max_iter, "Newton iteration cap");
  ex->add_option("--boundary", ec.boundary, "quadratic or perturbed");
  ex->add_option("--amplitude", ec.amplitude, "Amplitude of the perturbed boundary");
  common(ex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return s2wb::kExitToolError;
  }

  try {
    if (*vj) {
      if (jopt->count()) jc.j_override = j_override;
      jc.threads = threads;
      return finish(s2wb::cmd_verify_jacobi(jc), output);
    }
    if (*vt) {
      if (kopt->count()) tc.kbar = kbar;
      tc.threads = threads;
      return finish(s2wb::cmd_verify_transform(tc), output);
    }
    if (*so) return finish(s2wb::cmd_solve(sc), output);
    if (*ex) {
      ec.threads = threads;
      return finish(s2wb::cmd_experiment(ec), output);
    }
  } catch (const std::exception& e) {
    std::cerr << "s2wb: error: " << e.what() << "\n";
    return s2wb::kExitToolError;
  }
  return s2wb::kExitToolError;
}
