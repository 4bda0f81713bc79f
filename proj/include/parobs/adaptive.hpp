#pragma once

// Solve–estimate–mark–refine driver producing one convergence record per
// mesh level. Uniform refinement quarters (d = 1) or eighths (d = 2) every
// element; adaptive refinement bisects a Dörfler-marked set. Adaptivity is
// available for one-dimensional simplicial meshes; other families fall back
// to uniform refinement with a notice on stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "assembly.hpp"
#include "estimator.hpp"
#include "fespace.hpp"
#include "mesh.hpp"
#include "problem.hpp"
#include "solver.hpp"

namespace parobs {

struct ConvergenceRecord {
  int level = 0;
  long long n_elements = 0;
  long long n_dofs = 0;
  double rho_r = 0.0, rho_p = 0.0, rho_c = 0.0, rho_total = 0.0;
  // NaN when the problem has no exact solution.
  double err_total = 0.0, err_grad = 0.0, err_u0 = 0.0, err_uT = 0.0,
         err_sigma = 0.0, err_div = 0.0;
  int newton_iterations = 0;
  double wall_seconds = 0.0;
  // Solver diagnostics (not part of the CSV schema).
  double kkt_residual = 0.0;
  bool pdas_converged = false;
};

struct AdaptOptions {
  bool adaptive = false;  // false: uniform refinement throughout
  double theta = 0.5;     // Dörfler bulk parameter
  int max_levels = 100;
  long long max_elements = 100000;  // stop once a recorded level reaches this
  std::optional<EstimatorVariant> variant;  // unset: the problem's default
  int quad_degree = 4;
  double c_a = 1.0;
  // The active set migrates by layers on these least-squares systems, so the
  // pass count grows with refinement; each warm-started pass is cheap.
  int pdas_max_iter = 500;
  SolveOpts linear;
  bool measure_time = true;  // false records wall_seconds = 0 (reproducible)
};

using LevelObserver =
    std::function<void(int level, const Mesh&, const Spaces&,
                       const DiscreteSolution&, const EstimatorReport&,
                       const PdasResult&)>;

inline std::vector<ConvergenceRecord> adaptive_loop(
    const ProblemSpec& prob, Mesh mesh, const AdaptOptions& opt = {},
    const LevelObserver& observe = {}) {
  const EstimatorVariant variant = opt.variant.value_or(prob.default_variant);
  const bool can_adapt =
      std::holds_alternative<SimplicialMesh>(mesh) && prob.d == 1;
  if (opt.adaptive && !can_adapt)
    std::fprintf(stderr,
                 "[adaptive_loop] adaptive refinement is limited to "
                 "one-dimensional simplicial meshes; using uniform refinement "
                 "for '%s'\n",
                 prob.name.c_str());

  std::vector<ConvergenceRecord> records;
  std::optional<Mesh> prev_mesh;
  std::optional<Spaces> prev_sp;
  std::optional<DiscreteSolution> prev_sol;

  for (int level = 0; level < opt.max_levels; ++level) {
    const auto t0 = std::chrono::steady_clock::now();
    const Spaces sp = build_spaces(mesh, prob.g);
    const QpSystem qp = assemble_system(prob, mesh, sp, opt.quad_degree);

    std::optional<Eigen::VectorXd> x0;
    if (prev_mesh) {
      const DiscreteSolution lifted =
          prolong(*prev_mesh, *prev_sp, *prev_sol, mesh, sp);
      x0 = join_solution(sp, lifted);
    }
    const PdasResult pr = [&] {
      try {
        return pdas_solve(qp, x0, opt.c_a, opt.pdas_max_iter, opt.linear);
      } catch (const solve_error&) {
        if (!x0) throw;
        // A warm start occasionally steers the active-set iteration into a
        // cycle of guesses; the clamped unconstrained start is slower but
        // reliable, so retry cold before giving up.
        return pdas_solve(qp, std::nullopt, opt.c_a, opt.pdas_max_iter,
                          opt.linear);
      }
    }();
    const DiscreteSolution sol = split_solution(sp, pr.x);
    const EstimatorReport rep =
        compute_estimator(prob, mesh, sp, sol, variant, opt.quad_degree);

    ConvergenceRecord rec;
    rec.level = level;
    rec.n_elements = n_elements(mesh);
    rec.n_dofs = sp.n_total();
    rec.rho_r = rep.rho_r();
    rec.rho_p = rep.rho_p();
    rec.rho_c = rep.rho_c();
    rec.rho_total = rep.total();
    if (prob.has_exact) {
      const ErrorParts err = compute_error(prob, mesh, sp, sol, opt.quad_degree);
      rec.err_total = err.total();
      rec.err_grad = std::sqrt(err.grad2);
      rec.err_u0 = std::sqrt(err.u02);
      rec.err_uT = std::sqrt(err.uT2);
      rec.err_sigma = std::sqrt(err.sigma2);
      rec.err_div = std::sqrt(err.div2);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rec.err_total = rec.err_grad = rec.err_u0 = rec.err_uT = rec.err_sigma =
          rec.err_div = nan;
    }
    rec.newton_iterations = pr.iterations;
    rec.kkt_residual = pr.kkt_residual;
    rec.pdas_converged = pr.converged;
    rec.wall_seconds =
        opt.measure_time
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count()
            : 0.0;
    records.push_back(rec);
    if (observe) observe(level, mesh, sp, sol, rep, pr);

    if (rec.n_elements >= opt.max_elements || level + 1 >= opt.max_levels) break;

    Mesh next;
    if (opt.adaptive && can_adapt) {
      const std::vector<int> marked = dorfler_mark(rep, opt.theta);
      next = nvb_refine(std::get<SimplicialMesh>(mesh), marked);
    } else {
      next = std::visit([](const auto& mm) { return Mesh(uniform_refine(mm)); },
                        mesh);
    }
    // The budget caps the meshes that are solved, so a refinement that
    // overshoots it ends the study instead of producing one oversized level.
    if (n_elements(next) > opt.max_elements) break;
    prev_mesh = std::move(mesh);
    prev_sp = sp;
    prev_sol = sol;
    mesh = std::move(next);
  }
  return records;
}

}  // namespace parobs
