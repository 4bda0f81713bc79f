#pragma once

// A posteriori error estimation and marking.
//
// The estimator has three parts, each summed from per-element indicators:
//   residual   eta_r^2 = (L/a)||f - R(u,sigma,lambda)||^2
//                        + ||A^-1/2 sigma + A^1/2 grad u||^2
//                        + ||u0 - u(0)||^2                (bottom traces)
//   complement eta_c^2 = (lambda_+, (u - g)_+)
//   penetration eta_p^2, built from the positive part w = (g - u)_+:
//     ||A^1/2 grad w||^2 + (a/L + (b_sup^2 + c_sup^2 L)/a) ||w||^2
//     + time term + ||w(0)||^2 + ||w(T)||^2               (traces)
//   with time term (L/a)||dt w||^2 (plain variant) or
//   a^-1 ||h dt w||^2 with the element diameter h (weighted variant).
//
// compute_error evaluates the exact-solution error in the norm the least
// squares functional controls; the divergence part uses the identity
// dt u + div sigma - lambda = f - b . grad u - c u of the exact triple.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "fespace.hpp"
#include "mesh.hpp"
#include "problem.hpp"

namespace parobs {

struct EstimatorReport {
  EstimatorVariant variant = EstimatorVariant::tilde;
  std::vector<double> eta_r2, eta_p2, eta_c2;  // per element, squared
  double rho_r2 = 0.0, rho_p2 = 0.0, rho_c2 = 0.0;
  // Decomposition of rho_r2 for diagnostics: space-time residual, weighted
  // gradient mismatch, initial-trace defect.
  double res2 = 0.0, grad2 = 0.0, trace02 = 0.0;

  double rho_r() const { return std::sqrt(rho_r2); }
  double rho_p() const { return std::sqrt(rho_p2); }
  double rho_c() const { return std::sqrt(rho_c2); }
  double total() const { return std::sqrt(rho_r2 + rho_p2 + rho_c2); }
  double indicator2(int e) const { return eta_r2[e] + eta_p2[e] + eta_c2[e]; }
  int n_elements() const { return static_cast<int>(eta_r2.size()); }
};

struct ErrorParts {
  double grad2 = 0.0;   // ||grad_x (u - u_h)||^2 over the cylinder
  double u02 = 0.0;     // ||(u - u_h)(0)||^2
  double uT2 = 0.0;     // ||(u - u_h)(T)||^2
  double sigma2 = 0.0;  // ||sigma - sigma_h||^2
  double div2 = 0.0;    // ||dt e_u + div e_sigma - e_lambda||^2
  double total() const { return std::sqrt(grad2 + u02 + uT2 + sigma2 + div2); }
};

inline EstimatorReport compute_estimator(const ProblemSpec& prob, const Mesh& mesh,
                                         const Spaces& sp, const DiscreteSolution& sol,
                                         EstimatorVariant variant, int degree = 4) {
  EstimatorReport rep;
  rep.variant = variant;
  const int ne = n_elements(mesh);
  rep.eta_r2.assign(ne, 0.0);
  rep.eta_p2.assign(ne, 0.0);
  rep.eta_c2.assign(ne, 0.0);

  const double wr = prob.lambda_weight / prob.alpha;
  const double pen_coef = prob.alpha / prob.lambda_weight +
                          (sqr(prob.b_sup) + sqr(prob.c_sup) * prob.lambda_weight) /
                              prob.alpha;

  for_each_element(mesh, sp, degree, [&](const ElemCtx& ctx) {
    double er = 0.0, ep = 0.0, ec = 0.0, e_res = 0.0, e_grad = 0.0;
    for (int iq = 0; iq < ctx.nq; ++iq) {
      const Pt& p = ctx.pt[iq];
      const double w = ctx.w[iq];
      double uh = 0.0, uth = 0.0;
      Vec2 uxh{0.0, 0.0}, sh{0.0, 0.0};
      double dsh = 0.0, lh = 0.0;
      for (int k = 0; k < ctx.nu; ++k) {
        if (ctx.udof[k] < 0) continue;
        const double ck = sol.u[ctx.udof[k]];
        uh += ck * ctx.uval[k][iq];
        uth += ck * ctx.ut[k][iq];
        uxh[0] += ck * ctx.ux[k][iq][0];
        uxh[1] += ck * ctx.ux[k][iq][1];
      }
      for (int k = 0; k < ctx.ns; ++k) {
        const double ck = sol.sigma[ctx.sdof[k]];
        sh[0] += ck * ctx.sval[k][iq][0];
        sh[1] += ck * ctx.sval[k][iq][1];
        dsh += ck * ctx.sdiv[k][iq];
      }
      for (int k = 0; k < ctx.nl; ++k) lh += sol.lambda[ctx.ldof[k]] * ctx.lval[k][iq];

      const SymMat2 A = prob.A(p);
      const SymMat2 Ai = A.inverse(ctx.d);
      const Vec2 bq = prob.b(p);
      const double cq = prob.c(p);
      const double lplus = std::max(lh, 0.0);

      const double resid = prob.f(p) -
                           (uth + dsh + bq[0] * uxh[0] + bq[1] * uxh[1] + cq * uh - lh);
      const double rterm = wr * sqr(resid);
      const double gterm = Ai.inner(ctx.d, sh, sh) + 2.0 * (sh[0] * uxh[0] + sh[1] * uxh[1]) +
                           A.inner(ctx.d, uxh, uxh);
      er += w * (rterm + gterm);
      e_res += w * rterm;
      e_grad += w * gterm;

      const double gq = prob.g(p);
      ec += w * lplus * std::max(uh - gq, 0.0);

      if (gq > uh) {
        const double pw = gq - uh;
        const Vec2 gx = prob.g_x(p);
        const Vec2 pwx{gx[0] - uxh[0], gx[1] - uxh[1]};
        const double pwt = prob.g_t(p) - uth;
        const double tweight =
            variant == EstimatorVariant::tilde ? wr : sqr(ctx.h) / prob.alpha;
        ep += w * (A.inner(ctx.d, pwx, pwx) + pen_coef * sqr(pw) + tweight * sqr(pwt));
      }
    }
    rep.eta_r2[ctx.elem] += er;
    rep.eta_p2[ctx.elem] += ep;
    rep.eta_c2[ctx.elem] += ec;
    rep.res2 += e_res;
    rep.grad2 += e_grad;
  });

  for_each_time_facet(mesh, sp, degree, [&](const FaceCtx& f) {
    for (int iq = 0; iq < f.nq; ++iq) {
      double uh = 0.0;
      for (int i = 0; i < f.nu; ++i)
        if (f.udof[i] >= 0) uh += sol.u[f.udof[i]] * f.uval[i][iq];
      const double w = f.w[iq];
      const double pw = std::max(prob.g(f.pt[iq]) - uh, 0.0);
      rep.eta_p2[f.owner] += w * sqr(pw);
      if (f.cls == FacetClass::bottom) {
        const double tr = sqr(prob.u0(f.pt[iq]) - uh);
        rep.eta_r2[f.owner] += w * tr;
        rep.trace02 += w * tr;
      }
    }
  });

  for (int e = 0; e < ne; ++e) {
    rep.rho_r2 += rep.eta_r2[e];
    rep.rho_p2 += rep.eta_p2[e];
    rep.rho_c2 += rep.eta_c2[e];
  }
  return rep;
}

// Error of a discrete triple against the problem's exact solution, in the
// coercivity norm of the least-squares functional. Requires exact data.
inline ErrorParts compute_error(const ProblemSpec& prob, const Mesh& mesh,
                                const Spaces& sp, const DiscreteSolution& sol,
                                int degree = 4) {
  if (!prob.has_exact)
    throw unsupported_error("compute_error: problem '" + prob.name +
                            "' has no exact solution");
  ErrorParts err;
  for_each_element(mesh, sp, degree, [&](const ElemCtx& ctx) {
    for (int iq = 0; iq < ctx.nq; ++iq) {
      const Pt& p = ctx.pt[iq];
      const double w = ctx.w[iq];
      double uh = 0.0, uth = 0.0;
      Vec2 uxh{0.0, 0.0}, sh{0.0, 0.0};
      double dsh = 0.0, lh = 0.0;
      for (int k = 0; k < ctx.nu; ++k) {
        if (ctx.udof[k] < 0) continue;
        const double ck = sol.u[ctx.udof[k]];
        uh += ck * ctx.uval[k][iq];
        uth += ck * ctx.ut[k][iq];
        uxh[0] += ck * ctx.ux[k][iq][0];
        uxh[1] += ck * ctx.ux[k][iq][1];
      }
      for (int k = 0; k < ctx.ns; ++k) {
        const double ck = sol.sigma[ctx.sdof[k]];
        sh[0] += ck * ctx.sval[k][iq][0];
        sh[1] += ck * ctx.sval[k][iq][1];
        dsh += ck * ctx.sdiv[k][iq];
      }
      for (int k = 0; k < ctx.nl; ++k) lh += sol.lambda[ctx.ldof[k]] * ctx.lval[k][iq];

      const Vec2 gu = prob.exact_grad_u(p);
      const Vec2 sg = prob.exact_sigma(p);
      err.grad2 += w * (sqr(gu[0] - uxh[0]) + sqr(gu[1] - uxh[1]));
      err.sigma2 += w * (sqr(sg[0] - sh[0]) + sqr(sg[1] - sh[1]));

      // dt u + div sigma - lambda = f - b . grad u - c u for the exact triple.
      const Vec2 bq = prob.b(p);
      const double exact_div = prob.f(p) - bq[0] * gu[0] - bq[1] * gu[1] -
                               prob.c(p) * prob.exact_u(p);
      err.div2 += w * sqr(exact_div - (uth + dsh - lh));
    }
  });
  for_each_time_facet(mesh, sp, degree, [&](const FaceCtx& f) {
    for (int iq = 0; iq < f.nq; ++iq) {
      double uh = 0.0;
      for (int i = 0; i < f.nu; ++i)
        if (f.udof[i] >= 0) uh += sol.u[f.udof[i]] * f.uval[i][iq];
      const double dv = sqr(prob.exact_u(f.pt[iq]) - uh);
      if (f.cls == FacetClass::bottom)
        err.u02 += f.w[iq] * dv;
      else
        err.uT2 += f.w[iq] * dv;
    }
  });
  return err;
}

// Bulk (Dörfler) marking: smallest set of elements, by decreasing indicator,
// whose indicators sum to at least theta times the total. Ties break by
// element id; theta = 1 marks every element with a nonzero indicator.
// Returns ascending element ids.
inline std::vector<int> dorfler_mark(const std::vector<double>& indicator2,
                                     double theta) {
  if (!(theta > 0.0) || theta > 1.0)
    throw std::invalid_argument("dorfler_mark: theta must lie in (0, 1]");
  const int ne = static_cast<int>(indicator2.size());
  std::vector<int> order(ne);
  for (int i = 0; i < ne; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return indicator2[a] != indicator2[b] ? indicator2[a] > indicator2[b] : a < b;
  });
  double total = 0.0;
  for (int i : order) total += indicator2[i];
  std::vector<int> marked;
  double acc = 0.0;
  for (int i : order) {
    if (acc >= theta * total) break;
    marked.push_back(i);
    acc += indicator2[i];
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

inline std::vector<int> dorfler_mark(const EstimatorReport& rep, double theta) {
  std::vector<double> ind(rep.n_elements());
  for (int e = 0; e < rep.n_elements(); ++e) ind[e] = rep.indicator2(e);
  return dorfler_mark(ind, theta);
}

}  // namespace parobs
