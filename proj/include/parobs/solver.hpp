#pragma once

// Linear and constrained solvers.
//
//  * sparse_spd_solve: sparse Cholesky for moderate systems, diagonally
//    preconditioned conjugate gradients for large ones.
//  * pdas_solve: primal-dual active set iteration (semi-smooth Newton) for
//    min 1/2 x^T S x - F^T x subject to x_i >= l_i on a constrained subset.
//  * oracle_qp_solve: brute-force active-set enumeration on tiny systems,
//    used as an independent reference in tests.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#if defined(PAROBS_USE_CHOLMOD)
#include <Eigen/CholmodSupport>
#endif
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "assembly.hpp"
#include "core.hpp"

namespace parobs {

struct SolveOpts {
  // Direct factorization while nnz stays at or below this; CG above it.
  std::size_t direct_nnz_threshold = 200000;
  double cg_tol = 1e-11;  // relative residual target
  int cg_max_iterations = 30000;
};

inline Eigen::VectorXd sparse_spd_solve(const Eigen::SparseMatrix<double>& S,
                                        const Eigen::VectorXd& rhs,
                                        const SolveOpts& opts = {},
                                        const Eigen::VectorXd* guess = nullptr) {
  if (S.rows() != S.cols() || S.rows() != rhs.size())
    throw std::invalid_argument("sparse_spd_solve: dimension mismatch");
  if (rhs.size() == 0) return Eigen::VectorXd();
  if (static_cast<std::size_t>(S.nonZeros()) <= opts.direct_nnz_threshold) {
#if defined(PAROBS_USE_CHOLMOD)
    // The supernodal factorization works in dense blocks, which keeps the
    // volume meshes tractable; the simplicial one below is the fallback when
    // the library is not installed.
    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> llt;
    llt.cholmod().print = 0;
    llt.compute(S);
#else
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(S);
#endif
    if (llt.info() != Eigen::Success)
      throw linalg_error("sparse_spd_solve: Cholesky factorization failed "
                         "(matrix not positive definite?)");
    Eigen::VectorXd x = llt.solve(rhs);
    if (llt.info() != Eigen::Success)
      throw linalg_error("sparse_spd_solve: Cholesky solve failed");
    // A couple of refinement steps push the factorization roundoff down to
    // the scale of the residual evaluation itself, which the ill-conditioned
    // fine-level systems need.
    for (int step = 0; step < 2; ++step) {
      const Eigen::VectorXd res = rhs - S * x;
      if (res.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + rhs.cwiseAbs().maxCoeff()))
        break;
      x += llt.solve(res);
    }
    return x;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(opts.cg_tol);
  cg.setMaxIterations(opts.cg_max_iterations);
  cg.compute(S);
  Eigen::VectorXd x;
  if (guess && guess->size() == rhs.size())
    x = cg.solveWithGuess(rhs, *guess);
  else
    x = cg.solve(rhs);
  if (cg.info() != Eigen::Success)
    throw linalg_error("sparse_spd_solve: CG stagnated at relative residual " +
                       std::to_string(cg.error()));
  return x;
}

inline Eigen::VectorXd sparse_spd_solve(const SparseSymMatrix& S,
                                        const Eigen::VectorXd& rhs,
                                        const SolveOpts& opts = {},
                                        const Eigen::VectorXd* guess = nullptr) {
  return sparse_spd_solve(to_eigen(S), rhs, opts, guess);
}

struct PdasResult {
  Eigen::VectorXd x;
  Eigen::VectorXd m;  // multiplier, nonzero only on active constrained dofs
  int iterations = 0;
  int active_size = 0;
  bool converged = false;
  double kkt_residual = 0.0;
};

struct solve_error : std::runtime_error {
  PdasResult last;
  solve_error(const std::string& msg, PdasResult r)
      : std::runtime_error(msg), last(std::move(r)) {}
};

namespace detail {

// Defects of the optimality system, kept per family because each family has
// its own tolerance in the result invariants.
struct KktDefects {
  double stationarity = 0.0;    // ||Sx - F - m||_inf
  double feasibility = 0.0;     // max l_i - x_i
  double dual = 0.0;            // max -m_i
  double complementarity = 0.0; // max |m_i (x_i - l_i)|
  double max() const {
    return std::max(std::max(stationarity, feasibility),
                    std::max(dual, complementarity));
  }
};

inline KktDefects kkt_defects(const SparseSymMatrix& S, const Eigen::VectorXd& F,
                              const std::vector<std::pair<int, double>>& bounds,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& m) {
  KktDefects d;
  const Eigen::VectorXd r = spmv(S, x) - F - m;
  if (r.size() > 0) d.stationarity = r.cwiseAbs().maxCoeff();
  for (const auto& [i, l] : bounds) {
    d.feasibility = std::max(d.feasibility, l - x[i]);
    d.dual = std::max(d.dual, -m[i]);
    d.complementarity = std::max(d.complementarity, std::abs(m[i] * (x[i] - l)));
  }
  return d;
}

// max of stationarity, primal/dual feasibility and complementarity defects.
inline double kkt_residual(const SparseSymMatrix& S, const Eigen::VectorXd& F,
                           const std::vector<std::pair<int, double>>& bounds,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& m) {
  return kkt_defects(S, F, bounds, x, m).max();
}

}  // namespace detail

// Primal-dual active set solver. Starting from a warm iterate (previous
// solution) or from the clamped unconstrained minimizer, each pass guesses
// the active set A = { i : m_i + c_a (l_i - x_i) > 0 }, pins x_A to the
// bounds, solves the reduced SPD system on the inactive dofs, and recovers
// multipliers from the residual. The iteration stops when the active set
// repeats or the iterate satisfies the optimality system at the tolerances
// of the PdasResult invariants.
//
// The plain update is a deterministic map on active sets and is not globally
// convergent for these systems: it can revisit an earlier set (a cycle), and
// near many weakly active constraints it can reshuffle guesses indefinitely.
// Revisits are first answered by restarting from the union of the recently
// visited sets (pinning the whole contested layer). When restarts are
// exhausted, or when the KKT defect stops improving for a window of passes,
// the solver switches to a feasible active-set descent: from a feasible,
// over-pinned point it releases batches of negative-multiplier constraints
// and walks to the nearest blocking bound, which decreases the objective
// monotonically and terminates at the minimizer. Results are certified
// against the PdasResult invariants on every exit path; `iterations` counts
// linear solves.
inline PdasResult pdas_solve(const QpSystem& qp,
                             const std::optional<Eigen::VectorXd>& x0 = {},
                             double c_a = 1.0, int max_iter = 500,
                             const SolveOpts& opts = {}) {
  const int n = qp.n();
  if (qp.F.size() != n)
    throw std::invalid_argument("pdas_solve: inconsistent system");
  const auto& bounds = qp.lower_bounds;
  const int nc = static_cast<int>(bounds.size());

  Eigen::VectorXd x(n), m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd unconstrained;  // cached cold-start solve
  if (x0 && x0->size() == n) {
    x = *x0;
    Eigen::VectorXd r = spmv(qp.S, x) - qp.F;
    for (const auto& [i, l] : bounds) m[i] = std::max(r[i], 0.0);
  } else {
    unconstrained = sparse_spd_solve(qp.S, qp.F, opts);
    x = unconstrained;
    for (const auto& [i, l] : bounds) x[i] = std::max(x[i], l);
  }

  // Tolerances of the PdasResult invariants, one per defect family.
  const double tol_stat = 1e-9 * (1.0 + qp.F.cwiseAbs().maxCoeff());
  const double tol_feas = 1e-10;
  const double tol_dual = 1e-10;
  const double tol_comp = 1e-9;
  const auto certified = [&](const detail::KktDefects& d) {
    return d.stationarity <= tol_stat && d.feasibility <= tol_feas &&
           d.dual <= tol_dual && d.complementarity <= tol_comp;
  };
  const auto fingerprint = [](const std::vector<char>& set) {
    std::uint64_t fp = 1469598103934665603ull;  // FNV-1a
    for (const char a : set) {
      fp ^= static_cast<std::uint64_t>(a);
      fp *= 1099511628211ull;
    }
    return fp;
  };

  // Minimize J over the affine set { x : x_i = l_i for pinned i }; `from`
  // seeds the iterative path when CG handles the reduced system.
  const auto solve_pinned = [&](const std::vector<char>& pinned,
                                const Eigen::VectorXd& from) {
    std::vector<int> red(n, 0);  // reduced index, -1 when pinned
    std::vector<double> pin(n, 0.0);
    for (int k = 0; k < nc; ++k)
      if (pinned[k]) {
        red[bounds[k].first] = -1;
        pin[bounds[k].first] = bounds[k].second;
      }
    int ni = 0;
    for (int i = 0; i < n; ++i)
      if (red[i] >= 0) red[i] = ni++;
    Eigen::VectorXd out(n);
    if (ni == 0) {
      for (int i = 0; i < n; ++i) out[i] = pin[i];
      return out;
    }
    Eigen::VectorXd rhs(ni), guess(ni);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(qp.S.nnz());
    for (int i = 0; i < qp.S.n; ++i) {
      if (red[i] < 0) continue;
      double acc = qp.F[i];
      for (int k = qp.S.row_ptr[i]; k < qp.S.row_ptr[i + 1]; ++k) {
        const int j = qp.S.col_idx[k];
        if (red[j] >= 0)
          trip.emplace_back(red[i], red[j], qp.S.values[k]);
        else
          acc -= qp.S.values[k] * pin[j];
      }
      rhs[red[i]] = acc;
      guess[red[i]] = from[i];
    }
    Eigen::SparseMatrix<double> Sred(ni, ni);
    Sred.setFromTriplets(trip.begin(), trip.end());
    const Eigen::VectorXd xi = sparse_spd_solve(Sred, rhs, opts, &guess);
    for (int i = 0; i < n; ++i) out[i] = red[i] >= 0 ? xi[red[i]] : pin[i];
    return out;
  };

  // Finish for a proven cycle of the plain iteration: walk from a feasible,
  // over-pinned point, releasing one negative-multiplier constraint at a time
  // and stepping only as far as the nearest blocking constraint. Every
  // release strictly decreases J, so the walk reaches the minimizer after
  // finitely many solves, and the result satisfies the invariants by
  // construction.
  const auto descent_finish = [&](std::vector<char> work, Eigen::VectorXd xf,
                                  int passes_used) {
    for (int k = 0; k < nc; ++k) {
      const auto& [i, l] = bounds[k];
      if (work[k] || xf[i] < l) {
        xf[i] = l;
        work[k] = 1;
      }
    }
    std::vector<char> barred(nc, 0);  // degenerate releases, reset on movement
    std::vector<char> released_now(nc, 0);  // releases of the current batch
    constexpr int kDescentBudget = 2000;
    constexpr int kReleaseBlock = 64;
    for (int solves = 1; solves <= kDescentBudget; ++solves) {
      const Eigen::VectorXd xh = solve_pinned(work, xf);
      double alpha = 1.0;
      int blocking = -1;
      for (int k = 0; k < nc; ++k) {
        if (work[k]) continue;
        const auto& [i, l] = bounds[k];
        if (xh[i] < l && xh[i] < xf[i]) {
          const double a = (xf[i] - l) / (xf[i] - xh[i]);
          if (a < alpha) {
            alpha = a;
            blocking = k;
          }
        }
      }
      if (blocking >= 0) {
        if (alpha == 0.0 && released_now[blocking]) {
          // Releasing this constraint cannot move: re-pin it and leave it
          // barred until the iterate moves again.
          work[blocking] = 1;
          barred[blocking] = 1;
          released_now[blocking] = 0;
        } else {
          if (alpha > 0.0) {
            for (int i = 0; i < n; ++i) xf[i] += alpha * (xh[i] - xf[i]);
            std::fill(barred.begin(), barred.end(), 0);
          }
          for (int k = 0; k < nc; ++k) {
            if (work[k]) continue;
            const auto& [i, l] = bounds[k];
            if (k == blocking || xf[i] <= l) {
              xf[i] = l;
              work[k] = 1;
              released_now[k] = 0;
            }
          }
        }
        continue;
      }
      const bool moved = (xh - xf).cwiseAbs().maxCoeff() > 0.0;
      xf = xh;
      if (moved) std::fill(barred.begin(), barred.end(), 0);
      const Eigen::VectorXd r = spmv(qp.S, xf) - qp.F;
      std::vector<int> cand;
      for (int k = 0; k < nc; ++k)
        if (work[k] && !barred[k] && r[bounds[k].first] < -tol_dual)
          cand.push_back(k);
      if (!cand.empty()) {
        std::sort(cand.begin(), cand.end(), [&](int a, int b) {
          return r[bounds[a].first] < r[bounds[b].first];
        });
        // Release a spread-out batch, most negative multipliers first.
        // Skipping neighbours of dofs already in the batch keeps the joint
        // step close to independent single releases, which each provably
        // ascend, so the batch rarely drives anyone straight back down.
        std::fill(released_now.begin(), released_now.end(), 0);
        std::vector<char> taken(n, 0);
        int batch = 0;
        for (const int k : cand) {
          if (batch >= kReleaseBlock) break;
          const int i = bounds[k].first;
          bool adjacent = false;
          if (batch > 0)
            for (int p = qp.S.row_ptr[i];
                 p < qp.S.row_ptr[i + 1] && !adjacent; ++p)
              adjacent = taken[qp.S.col_idx[p]] != 0;
          if (adjacent) continue;
          work[k] = 0;
          released_now[k] = 1;
          taken[i] = 1;
          ++batch;
        }
        continue;
      }
      Eigen::VectorXd mf = Eigen::VectorXd::Zero(n);
      for (int k = 0; k < nc; ++k)
        if (work[k]) mf[bounds[k].first] = r[bounds[k].first];
      detail::KktDefects d;
      for (int i = 0; i < n; ++i)
        d.stationarity = std::max(d.stationarity, std::abs(r[i] - mf[i]));
      for (const auto& [i, l] : bounds) {
        d.feasibility = std::max(d.feasibility, l - xf[i]);
        d.dual = std::max(d.dual, -mf[i]);
        d.complementarity =
            std::max(d.complementarity, std::abs(mf[i] * (xf[i] - l)));
      }
      PdasResult out;
      out.x = std::move(xf);
      out.m = std::move(mf);
      out.iterations = passes_used + solves;
      out.active_size =
          static_cast<int>(std::count(work.begin(), work.end(), 1));
      out.kkt_residual = d.max();
      out.converged = certified(d);
      if (!out.converged)
        throw solve_error(
            "pdas_solve: descent finish ended with KKT residual " +
                std::to_string(out.kkt_residual) + " above the tolerance",
            out);
      return out;
    }
    PdasResult out;
    out.x = std::move(xf);
    out.iterations = passes_used + kDescentBudget;
    out.active_size =
        static_cast<int>(std::count(work.begin(), work.end(), 1));
    out.converged = false;
    throw solve_error("pdas_solve: descent finish exceeded its solve budget",
                      out);
  };

  constexpr int kMaxRestarts = 8;
  constexpr std::size_t kRingSize = 32;  // cycles seen in practice are short
  constexpr int kStallWindow = 80;       // passes without progress tolerated
  std::vector<char> active(nc, 0), prev_active;
  std::unordered_set<std::uint64_t> seen;    // fingerprints of visited sets
  std::vector<std::vector<char>> ring;       // the most recent of those sets
  int restarts = 0;
  double best_defect = HUGE_VAL;
  int last_event_pass = 0;
  PdasResult res;

  for (int pass = 1; pass <= max_iter; ++pass) {
    for (int k = 0; k < nc; ++k) {
      const auto& [i, l] = bounds[k];
      active[k] = (m[i] + c_a * (l - x[i]) > 0.0) ? 1 : 0;
    }
    if (pass > 1 && active == prev_active) {
      const detail::KktDefects d =
          detail::kkt_defects(qp.S, qp.F, bounds, x, m);
      res.x = x;
      res.m = m;
      res.iterations = pass - 1;
      res.active_size =
          static_cast<int>(std::count(active.begin(), active.end(), 1));
      res.kkt_residual = d.max();
      res.converged = certified(d);
      if (!res.converged)
        throw solve_error("pdas_solve: active set repeated but KKT residual " +
                              std::to_string(res.kkt_residual) +
                              " exceeds the tolerance",
                          res);
      return res;
    }

    if (!seen.insert(fingerprint(active)).second) {
      // Cycle detected. Pin the union of the recently visited sets and
      // continue; a degenerate toggling constraint then stays pinned with a
      // multiplier of zero, which the certification below accepts.
      if (restarts >= kMaxRestarts) {
        // Restarting no longer helps; hand the contested layer (union of the
        // recently visited sets) to the guaranteed descent walk.
        std::vector<char> work = active;
        for (const std::vector<char>& past : ring)
          for (int k = 0; k < nc; ++k) work[k] |= past[k];
        return descent_finish(std::move(work), x, pass - 1);
      }
      ++restarts;
      last_event_pass = pass;
      for (const std::vector<char>& past : ring)
        for (int k = 0; k < nc; ++k) active[k] |= past[k];
      ring.clear();
      seen.clear();
      seen.insert(fingerprint(active));
    }
    prev_active = active;
    if (ring.size() == kRingSize) ring.erase(ring.begin());
    ring.push_back(active);

    const bool any_active =
        std::any_of(active.begin(), active.end(), [](char a) { return a != 0; });
    if (!any_active && unconstrained.size() == n)
      x = unconstrained;
    else
      x = solve_pinned(active, x);

    Eigen::VectorXd r = spmv(qp.S, x) - qp.F;
    m.setZero();
    for (int k = 0; k < nc; ++k)
      if (active[k]) m[bounds[k].first] = r[bounds[k].first];

    // A constraint that is weakly active at the solution (value on the bound
    // and multiplier zero) makes the active-set guess toggle without ever
    // repeating; the iterate itself is still optimal. Accept it as soon as
    // the optimality system holds.
    detail::KktDefects d;
    for (int i = 0; i < n; ++i)
      d.stationarity = std::max(d.stationarity, std::abs(r[i] - m[i]));
    for (const auto& [i, l] : bounds) {
      d.feasibility = std::max(d.feasibility, l - x[i]);
      d.dual = std::max(d.dual, -m[i]);
      d.complementarity =
          std::max(d.complementarity, std::abs(m[i] * (x[i] - l)));
    }
    if (certified(d)) {
      res.x = x;
      res.m = m;
      res.iterations = pass;
      res.active_size =
          static_cast<int>(std::count(active.begin(), active.end(), 1));
      res.kkt_residual = d.max();
      res.converged = true;
      return res;
    }
    if (d.max() < 0.9 * best_defect) {
      best_defect = d.max();
      last_event_pass = pass;
    } else if (pass - last_event_pass >= kStallWindow) {
      // Many weakly active constraints make the active-set guesses reshuffle
      // indefinitely without closing the optimality gap; once progress stops,
      // finish from the current face with the guaranteed descent walk.
      return descent_finish(active, x, pass);
    }
  }

  res.x = x;
  res.m = m;
  res.iterations = max_iter;
  res.active_size =
      static_cast<int>(std::count(active.begin(), active.end(), 1));
  res.kkt_residual = detail::kkt_residual(qp.S, qp.F, bounds, x, m);
  res.converged = false;
  throw solve_error("pdas_solve: no convergence within " +
                        std::to_string(max_iter) + " passes",
                    res);
}

// Exhaustive reference solver: tries every active subset of the constrained
// dofs on a dense copy and returns the KKT-consistent minimizer. Intended
// for cross-checking; limited to n <= 20 unknowns and 12 constrained dofs.
inline PdasResult oracle_qp_solve(const QpSystem& qp) {
  const int n = qp.n();
  const int nc = static_cast<int>(qp.lower_bounds.size());
  if (n > 20 || nc > 12)
    throw std::invalid_argument("oracle_qp_solve: system too large (n <= 20, "
                                "at most 12 constrained dofs)");
  Eigen::MatrixXd S = Eigen::MatrixXd(to_eigen(qp.S));
  const double scale = 1.0 + qp.F.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * scale;

  PdasResult best;
  double best_j = 0.0;
  bool found = false;
  for (unsigned mask = 0; mask < (1u << nc); ++mask) {
    std::vector<int> inactive;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<char> is_active(n, 0);
    for (int k = 0; k < nc; ++k)
      if (mask & (1u << k)) {
        x[qp.lower_bounds[k].first] = qp.lower_bounds[k].second;
        is_active[qp.lower_bounds[k].first] = 1;
      }
    for (int i = 0; i < n; ++i)
      if (!is_active[i]) inactive.push_back(i);
    const int ni = static_cast<int>(inactive.size());
    if (ni > 0) {
      Eigen::MatrixXd Sii(ni, ni);
      Eigen::VectorXd rhs(ni);
      for (int a = 0; a < ni; ++a) {
        double acc = qp.F[inactive[a]];
        for (int i = 0; i < n; ++i)
          if (is_active[i]) acc -= S(inactive[a], i) * x[i];
        rhs[a] = acc;
        for (int b = 0; b < ni; ++b) Sii(a, b) = S(inactive[a], inactive[b]);
      }
      Eigen::VectorXd xi = Sii.ldlt().solve(rhs);
      for (int a = 0; a < ni; ++a) x[inactive[a]] = xi[a];
    }
    Eigen::VectorXd r = S * x - qp.F;
    bool ok = true;
    for (int k = 0; k < nc && ok; ++k) {
      const auto& [i, l] = qp.lower_bounds[k];
      if (is_active[i])
        ok = r[i] >= -tol;  // nonnegative multiplier
      else
        ok = x[i] >= l - tol;  // primal feasibility
    }
    if (!ok) continue;
    const double j = 0.5 * x.dot(S * x) - qp.F.dot(x);
    if (!found || j < best_j) {
      found = true;
      best_j = j;
      best.x = x;
      best.m = Eigen::VectorXd::Zero(n);
      for (int k = 0; k < nc; ++k) {
        const auto& [i, l] = qp.lower_bounds[k];
        (void)l;
        if (is_active[i]) best.m[i] = std::max(r[i], 0.0);
      }
      best.active_size = std::popcount(mask);
      best.converged = true;
      best.iterations = 1;
      best.kkt_residual =
          detail::kkt_residual(qp.S, qp.F, qp.lower_bounds, best.x, best.m);
    }
  }
  if (!found)
    throw linalg_error("oracle_qp_solve: no KKT-consistent active set found");
  return best;
}

}  // namespace parobs
