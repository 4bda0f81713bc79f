#pragma once

// Assembly of the symmetric positive definite least-squares system.
//
// With the residual operator R(v, tau, mu) = dt v + div_x tau + b.grad_x v
// + c v - mu, the bilinear form on (u, sigma, lambda) triples reads
//
//   a(U, V) = (L/a) (R(U), R(V))_Q + (A^-1/2 sigma + A^1/2 grad u,
//             A^-1/2 tau + A^1/2 grad v)_Q + (u(0), v(0))_Omega
//             + (lambda, v)_Q / 2 + (mu, u)_Q / 2,
//   F(V)    = (L/a) (f, R(V))_Q + (u0, v(0))_Omega + (g, mu)_Q / 2,
//
// where L is the residual weight and a the ellipticity constant. Matrix
// entries avoid square roots of A by expanding the weighted gradient inner
// product through A and A^-1.

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "fespace.hpp"
#include "mesh.hpp"
#include "problem.hpp"

namespace parobs {

// Compressed sparse rows, full (not triangle-only) symmetric storage.
struct SparseSymMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n + 1
  std::vector<int> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
};

inline Eigen::VectorXd spmv(const SparseSymMatrix& S, const Eigen::VectorXd& x) {
  Eigen::VectorXd y(S.n);
  for (int i = 0; i < S.n; ++i) {
    double acc = 0.0;
    for (int k = S.row_ptr[i]; k < S.row_ptr[i + 1]; ++k)
      acc += S.values[k] * x[S.col_idx[k]];
    y[i] = acc;
  }
  return y;
}

inline Eigen::SparseMatrix<double> to_eigen(const SparseSymMatrix& S) {
  Eigen::SparseMatrix<double> M(S.n, S.n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(S.nnz());
  for (int i = 0; i < S.n; ++i)
    for (int k = S.row_ptr[i]; k < S.row_ptr[i + 1]; ++k)
      trip.emplace_back(i, S.col_idx[k], S.values[k]);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

struct QpSystem {
  SparseSymMatrix S;
  Eigen::VectorXd F;
  std::vector<std::pair<int, double>> lower_bounds;  // ascending dof index
  int n_u = 0, n_sigma = 0, n_lambda = 0;

  int n() const { return n_u + n_sigma + n_lambda; }
  int offset_u() const { return 0; }
  int offset_sigma() const { return n_u; }
  int offset_lambda() const { return n_u + n_sigma; }
};

// J(x) = x^T S x / 2 - F^T x (constant-free convention, J(0) = 0).
inline double functional_value(const QpSystem& qp, const Eigen::VectorXd& x) {
  if (x.size() != qp.F.size())
    throw std::invalid_argument("functional_value: size mismatch");
  return 0.5 * x.dot(spmv(qp.S, x)) - qp.F.dot(x);
}

namespace detail {

struct Triplet {
  int r, c;
  double v;
};

inline SparseSymMatrix triplets_to_csr(int n, std::vector<Triplet>& trip) {
  std::sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  SparseSymMatrix S;
  S.n = n;
  S.row_ptr.assign(n + 1, 0);
  for (std::size_t k = 0; k < trip.size();) {
    std::size_t j = k;
    double acc = 0.0;
    while (j < trip.size() && trip[j].r == trip[k].r && trip[j].c == trip[k].c)
      acc += trip[j++].v;
    S.col_idx.push_back(trip[k].c);
    S.values.push_back(acc);
    S.row_ptr[trip[k].r + 1]++;
    k = j;
  }
  for (int i = 0; i < n; ++i) S.row_ptr[i + 1] += S.row_ptr[i];
  return S;
}

}  // namespace detail

// Assembles the full system for one mesh. Quadrature degree 2 or 4 (default
// 4; exact for the polynomial parts of every constant-coefficient problem).
// Data callables are evaluated at quadrature points; non-finite samples
// raise data_error tagged with the element.
inline QpSystem assemble_system(const ProblemSpec& prob, const Mesh& mesh,
                                const Spaces& sp, int degree = 4) {
  QpSystem qp;
  qp.n_u = sp.u.n_global;
  qp.n_sigma = sp.sigma.n_global;
  qp.n_lambda = sp.lambda.n_global;
  const int n = qp.n();
  qp.F = Eigen::VectorXd::Zero(n);
  qp.lower_bounds = sp.system_bounds();
  std::sort(qp.lower_bounds.begin(), qp.lower_bounds.end());

  const double wr = prob.lambda_weight / prob.alpha;
  std::vector<detail::Triplet> trip;

  for_each_element(mesh, sp, degree, [&](const ElemCtx& ctx) {
    const int nloc = ctx.nu + ctx.ns + ctx.nl;
    int gdof[kMaxU + kMaxS + kMaxL];
    for (int k = 0; k < ctx.nu; ++k)
      gdof[k] = ctx.udof[k] >= 0 ? ctx.udof[k] + qp.offset_u() : -1;
    for (int k = 0; k < ctx.ns; ++k) gdof[ctx.nu + k] = ctx.sdof[k] + qp.offset_sigma();
    for (int k = 0; k < ctx.nl; ++k)
      gdof[ctx.nu + ctx.ns + k] = ctx.ldof[k] + qp.offset_lambda();

    double Sloc[kMaxU + kMaxS + kMaxL][kMaxU + kMaxS + kMaxL] = {};
    double Floc[kMaxU + kMaxS + kMaxL] = {};

    for (int iq = 0; iq < ctx.nq; ++iq) {
      const Pt& p = ctx.pt[iq];
      const double w = ctx.w[iq];
      const SymMat2 A = prob.A(p);
      const SymMat2 Ai = A.inverse(ctx.d);
      const Vec2 bq = prob.b(p);
      const double cq = prob.c(p);
      const double fq = prob.f(p);
      const double gq = prob.g(p);
      if (!std::isfinite(fq) || !std::isfinite(gq) || !std::isfinite(cq))
        throw data_error("assemble_system: non-finite data on element " +
                         std::to_string(ctx.elem));

      // Residual row, spatial flux and gradient of each local basis triple.
      double R[kMaxU + kMaxS + kMaxL];
      Vec2 tau[kMaxU + kMaxS + kMaxL];
      Vec2 gv[kMaxU + kMaxS + kMaxL];
      double vv[kMaxU + kMaxS + kMaxL];  // u component value
      double mu[kMaxU + kMaxS + kMaxL];  // lambda component value
      for (int k = 0; k < nloc; ++k) {
        tau[k] = {0.0, 0.0};
        gv[k] = {0.0, 0.0};
        vv[k] = 0.0;
        mu[k] = 0.0;
      }
      for (int k = 0; k < ctx.nu; ++k) {
        gv[k] = {ctx.ux[k][iq][0], ctx.ux[k][iq][1]};
        vv[k] = ctx.uval[k][iq];
        R[k] = ctx.ut[k][iq] + bq[0] * gv[k][0] + bq[1] * gv[k][1] + cq * vv[k];
      }
      for (int k = 0; k < ctx.ns; ++k) {
        const int s = ctx.nu + k;
        tau[s] = {ctx.sval[k][iq][0], ctx.sval[k][iq][1]};
        R[s] = ctx.sdiv[k][iq];
      }
      for (int k = 0; k < ctx.nl; ++k) {
        const int s = ctx.nu + ctx.ns + k;
        mu[s] = ctx.lval[k][iq];
        R[s] = -mu[s];
      }

      for (int i = 0; i < nloc; ++i) {
        for (int j = i; j < nloc; ++j) {
          double v = wr * R[i] * R[j] + Ai.inner(ctx.d, tau[i], tau[j]) +
                     tau[i][0] * gv[j][0] + tau[i][1] * gv[j][1] +
                     tau[j][0] * gv[i][0] + tau[j][1] * gv[i][1] +
                     A.inner(ctx.d, gv[i], gv[j]) +
                     0.5 * (mu[i] * vv[j] + mu[j] * vv[i]);
          Sloc[i][j] += w * v;
        }
        Floc[i] += w * (wr * fq * R[i] + 0.5 * gq * mu[i]);
      }
    }

    for (int i = 0; i < nloc; ++i) {
      if (gdof[i] < 0) continue;
      qp.F[gdof[i]] += Floc[i];
      for (int j = i; j < nloc; ++j) {
        if (gdof[j] < 0) continue;
        trip.push_back({gdof[i], gdof[j], Sloc[i][j]});
        if (gdof[i] != gdof[j]) trip.push_back({gdof[j], gdof[i], Sloc[i][j]});
      }
    }
  });

  // Initial trace: (u(0), v(0)) into S and (u0, v(0)) into F.
  for_each_time_facet(mesh, sp, degree, [&](const FaceCtx& f) {
    if (f.cls != FacetClass::bottom) return;
    for (int iq = 0; iq < f.nq; ++iq) {
      const double w = f.w[iq];
      const double u0q = prob.u0(f.pt[iq]);
      if (!std::isfinite(u0q))
        throw data_error("assemble_system: non-finite initial datum near element " +
                         std::to_string(f.owner));
      for (int i = 0; i < f.nu; ++i) {
        if (f.udof[i] < 0) continue;
        const int gi = f.udof[i] + qp.offset_u();
        qp.F[gi] += w * u0q * f.uval[i][iq];
        for (int j = i; j < f.nu; ++j) {
          if (f.udof[j] < 0) continue;
          const int gj = f.udof[j] + qp.offset_u();
          const double v = w * f.uval[i][iq] * f.uval[j][iq];
          trip.push_back({gi, gj, v});
          if (gi != gj) trip.push_back({gj, gi, v});
        }
      }
    }
  });

  qp.S = detail::triplets_to_csr(n, trip);
  return qp;
}

// Assembles and evaluates J at x; convenience wrapper over functional_value.
inline double functional_value(const ProblemSpec& prob, const Mesh& mesh,
                               const Spaces& sp, const Eigen::VectorXd& x,
                               int degree = 4) {
  return functional_value(assemble_system(prob, mesh, sp, degree), x);
}

inline void write_matrix_market(const SparseSymMatrix& S, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("write_matrix_market: cannot open " + path);
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << S.n << " " << S.n << " " << S.nnz() << "\n";
  char buf[64];
  for (int i = 0; i < S.n; ++i)
    for (int k = S.row_ptr[i]; k < S.row_ptr[i + 1]; ++k) {
      std::snprintf(buf, sizeof buf, "%d %d %.16e\n", i + 1, S.col_idx[k] + 1,
                    S.values[k]);
      os << buf;
    }
}

}  // namespace parobs
