#pragma once

// Test-side reference assembly. Rebuilds the least-squares system densely
// from scratch — its own element maps, basis evaluation and dof lookup —
// sharing only the quadrature tables with the library. Small meshes only.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>

#include "parobs/fespace.hpp"
#include "parobs/mesh.hpp"
#include "parobs/problem.hpp"
#include "parobs/quadrature.hpp"

namespace oracle {

struct DenseSystem {
  Eigen::MatrixXd S;
  Eigen::VectorXd F;
};

struct BasisSample {
  double value = 0.0;   // u or lambda value
  double dt = 0.0;      // time derivative (u only)
  parobs::Vec2 dx{0.0, 0.0};  // spatial gradient (u) or flux value (sigma)
  double div = 0.0;     // spatial divergence (sigma only)
};

// ---- triangles / tetrahedra -------------------------------------------------

inline void simplex_basis(const parobs::SimplicialMesh& m, int e, const parobs::Pt& p,
                          BasisSample* out /* verts_per_element entries */) {
  const int nv = m.verts_per_element();
  // Solve for barycentric coordinates from the vertex positions.
  Eigen::MatrixXd M(nv, nv);
  Eigen::VectorXd rhs(nv);
  for (int k = 0; k < nv; ++k) {
    const parobs::Pt& v = m.vertices[m.elements[e][k]];
    M(0, k) = 1.0;
    M(1, k) = v.t;
    M(2, k) = v.x;
    if (nv == 4) M(3, k) = v.y;
  }
  rhs(0) = 1.0;
  rhs(1) = p.t;
  rhs(2) = p.x;
  if (nv == 4) rhs(3) = p.y;
  const Eigen::VectorXd bary = M.fullPivLu().solve(rhs);
  // Gradients: row k of M^{-1} gives the affine form of basis k.
  const Eigen::MatrixXd Minv = M.inverse();
  for (int k = 0; k < nv; ++k) {
    out[k].value = bary(k);
    out[k].dt = Minv(k, 1);
    out[k].dx = {Minv(k, 2), nv == 4 ? Minv(k, 3) : 0.0};
  }
}

inline DenseSystem assemble_dense(const parobs::ProblemSpec& prob,
                                  const parobs::SimplicialMesh& m,
                                  const parobs::Spaces& sp, int degree) {
  using namespace parobs;
  const int n = sp.n_total();
  DenseSystem sys;
  sys.S = Eigen::MatrixXd::Zero(n, n);
  sys.F = Eigen::VectorXd::Zero(n);
  const double wr = prob.lambda_weight / prob.alpha;
  const int nv = m.verts_per_element();
  const QuadRule q =
      quad_rule(m.d == 1 ? RefDomain::triangle : RefDomain::tetrahedron, degree);

  for (int e = 0; e < m.n_elements(); ++e) {
    // Map reference points through the element vertices.
    const Pt& a = m.vertices[m.elements[e][0]];
    std::array<Pt, 3> edges;
    for (int k = 1; k < nv; ++k) {
      const Pt& b = m.vertices[m.elements[e][k]];
      edges[k - 1] = {b.t - a.t, b.x - a.x, b.y - a.y};
    }
    const double measure = element_measure(m, e);
    const double ref_measure = m.d == 1 ? 0.5 : 1.0 / 6.0;

    for (std::size_t iq = 0; iq < q.points.size(); ++iq) {
      Pt p = a;
      for (int k = 0; k < nv - 1; ++k) {
        p.t += q.points[iq][k] * edges[k].t;
        p.x += q.points[iq][k] * edges[k].x;
        p.y += q.points[iq][k] * edges[k].y;
      }
      const double w = q.weights[iq] * measure / ref_measure;

      BasisSample bs[4];
      simplex_basis(m, e, p, bs);

      const SymMat2 A = prob.A(p);
      const SymMat2 Ai = A.inverse(m.d);
      const Vec2 bq = prob.b(p);
      const double cq = prob.c(p), fq = prob.f(p), gq = prob.g(p);

      // Global dof, residual, flux, gradient, value, multiplier per local.
      const int nloc = nv + nv * m.d + 1;
      std::vector<int> gd(nloc, -1);
      std::vector<double> R(nloc, 0.0), vv(nloc, 0.0), mu(nloc, 0.0);
      std::vector<Vec2> tau(nloc, Vec2{0.0, 0.0}), gv(nloc, Vec2{0.0, 0.0});
      for (int k = 0; k < nv; ++k) {
        const int dof = sp.u.dof(e, k);
        gd[k] = dof >= 0 ? dof : -1;
        vv[k] = bs[k].value;
        gv[k] = bs[k].dx;
        R[k] = bs[k].dt + bq[0] * bs[k].dx[0] + bq[1] * bs[k].dx[1] + cq * bs[k].value;
      }
      for (int k = 0; k < nv; ++k)
        for (int c = 0; c < m.d; ++c) {
          const int loc = nv + k * m.d + c;
          gd[loc] = sp.offset_sigma() + sp.sigma.dof(e, k * m.d + c);
          tau[loc] = c == 0 ? Vec2{bs[k].value, 0.0} : Vec2{0.0, bs[k].value};
          R[loc] = bs[k].dx[c];
        }
      {
        const int loc = nloc - 1;
        gd[loc] = sp.offset_lambda() + sp.lambda.dof(e, 0);
        mu[loc] = 1.0;
        R[loc] = -1.0;
      }

      for (int i = 0; i < nloc; ++i) {
        if (gd[i] < 0) continue;
        sys.F[gd[i]] += w * (wr * fq * R[i] + 0.5 * gq * mu[i]);
        for (int j = 0; j < nloc; ++j) {
          if (gd[j] < 0) continue;
          sys.S(gd[i], gd[j]) +=
              w * (wr * R[i] * R[j] + Ai.inner(m.d, tau[i], tau[j]) +
                   tau[i][0] * gv[j][0] + tau[i][1] * gv[j][1] +
                   tau[j][0] * gv[i][0] + tau[j][1] * gv[i][1] +
                   A.inner(m.d, gv[i], gv[j]) + 0.5 * (mu[i] * vv[j] + mu[j] * vv[i]));
        }
      }
    }
  }

  // Bottom facets: (u(0), v(0)) and (u0, v(0)).
  const QuadRule fq =
      quad_rule(m.d == 1 ? RefDomain::interval : RefDomain::triangle, degree);
  for (const auto& f : m.facets) {
    if (f.cls != FacetClass::bottom) continue;
    const int e = f.owner;
    const Pt& a = m.vertices[f.v[0]];
    const Pt& b = m.vertices[f.v[1]];
    const Pt* c = f.nv == 3 ? &m.vertices[f.v[2]] : nullptr;
    double fmeasure;
    if (f.nv == 2) {
      fmeasure = std::hypot(b.t - a.t, b.x - a.x);
    } else {
      const double u1 = b.x - a.x, v1 = b.y - a.y;
      const double u2 = c->x - a.x, v2 = c->y - a.y;
      fmeasure = 0.5 * std::abs(u1 * v2 - u2 * v1);
    }
    const double ref = f.nv == 2 ? 1.0 : 0.5;
    for (std::size_t iq = 0; iq < fq.points.size(); ++iq) {
      Pt p = a;
      p.t = 0.0;
      p.x += fq.points[iq][0] * (b.x - a.x);
      p.y += fq.points[iq][0] * (b.y - a.y);
      if (c) {
        p.x += fq.points[iq][1] * (c->x - a.x);
        p.y += fq.points[iq][1] * (c->y - a.y);
      }
      const double w = fq.weights[iq] * fmeasure / ref;
      BasisSample bs[4];
      simplex_basis(m, e, p, bs);
      const double u0q = prob.u0(p);
      for (int i = 0; i < m.verts_per_element(); ++i) {
        const int gi = sp.u.dof(e, i);
        if (gi < 0) continue;
        sys.F[gi] += w * u0q * bs[i].value;
        for (int j = 0; j < m.verts_per_element(); ++j) {
          const int gj = sp.u.dof(e, j);
          if (gj < 0) continue;
          sys.S(gi, gj) += w * bs[i].value * bs[j].value;
        }
      }
    }
  }
  return sys;
}

// ---- tensor-product rectangles ----------------------------------------------

inline DenseSystem assemble_dense(const parobs::ProblemSpec& prob,
                                  const parobs::TensorMesh& m,
                                  const parobs::Spaces& sp, int degree) {
  using namespace parobs;
  const int n = sp.n_total();
  DenseSystem sys;
  sys.S = Eigen::MatrixXd::Zero(n, n);
  sys.F = Eigen::VectorXd::Zero(n);
  const double wr = prob.lambda_weight / prob.alpha;
  const QuadRule q = quad_rule(RefDomain::square, degree);

  for (int i = 0; i < m.nt(); ++i)
    for (int j = 0; j < m.nx(); ++j) {
      const int e = i * m.nx() + j;
      const double t0 = m.tgrid[i], t1 = m.tgrid[i + 1];
      const double x0 = m.xgrid[j], x1 = m.xgrid[j + 1];
      const double ht = t1 - t0, hx = x1 - x0;

      for (std::size_t iq = 0; iq < q.points.size(); ++iq) {
        const double st = q.points[iq][0], xi = q.points[iq][1];
        const Pt p{t0 + st * ht, x0 + xi * hx, 0.0};
        const double w = q.weights[iq] * ht * hx;

        // u: bilinear on the rectangle, local order (i,j),(i+1,j),(i,j+1),(i+1,j+1).
        double uval[4], udt[4], udx[4];
        const double nt_[2] = {1.0 - st, st}, dnt[2] = {-1.0 / ht, 1.0 / ht};
        const double nx_[2] = {1.0 - xi, xi}, dnx[2] = {-1.0 / hx, 1.0 / hx};
        for (int bx = 0; bx < 2; ++bx)
          for (int bt = 0; bt < 2; ++bt) {
            uval[bx * 2 + bt] = nt_[bt] * nx_[bx];
            udt[bx * 2 + bt] = dnt[bt] * nx_[bx];
            udx[bx * 2 + bt] = nt_[bt] * dnx[bx];
          }
        // sigma: quadratic in x (endpoint, bubble, endpoint), constant in t.
        const double sval[3] = {1.0 - xi, 4.0 * xi * (1.0 - xi), xi};
        const double sdx[3] = {-1.0 / hx, (4.0 - 8.0 * xi) / hx, 1.0 / hx};
        // lambda: affine in x, constant in t.
        const double lval[2] = {1.0 - xi, xi};

        const SymMat2 A = prob.A(p);
        const SymMat2 Ai = A.inverse(1);
        const Vec2 bq = prob.b(p);
        const double cq = prob.c(p), fq2 = prob.f(p), gq = prob.g(p);

        const int nloc = 9;
        int gd[9];
        double R[9], vv[9] = {0}, mu[9] = {0}, tau[9] = {0}, gvx[9] = {0};
        for (int k = 0; k < 4; ++k) {
          const int dof = sp.u.dof(e, k);
          gd[k] = dof >= 0 ? dof : -1;
          vv[k] = uval[k];
          gvx[k] = udx[k];
          R[k] = udt[k] + bq[0] * udx[k] + cq * uval[k];
        }
        for (int k = 0; k < 3; ++k) {
          gd[4 + k] = sp.offset_sigma() + sp.sigma.dof(e, k);
          tau[4 + k] = sval[k];
          R[4 + k] = sdx[k];
        }
        for (int k = 0; k < 2; ++k) {
          gd[7 + k] = sp.offset_lambda() + sp.lambda.dof(e, k);
          mu[7 + k] = lval[k];
          R[7 + k] = -lval[k];
        }

        for (int a2 = 0; a2 < nloc; ++a2) {
          if (gd[a2] < 0) continue;
          sys.F[gd[a2]] += w * (wr * fq2 * R[a2] + 0.5 * gq * mu[a2]);
          for (int b2 = 0; b2 < nloc; ++b2) {
            if (gd[b2] < 0) continue;
            sys.S(gd[a2], gd[b2]) +=
                w * (wr * R[a2] * R[b2] + Ai.a11 * tau[a2] * tau[b2] +
                     tau[a2] * gvx[b2] + tau[b2] * gvx[a2] +
                     A.a11 * gvx[a2] * gvx[b2] + 0.5 * (mu[a2] * vv[b2] + mu[b2] * vv[a2]));
          }
        }
      }
    }

  // Bottom traces on the first slab.
  const QuadRule ql = quad_rule(RefDomain::interval, degree);
  for (int j = 0; j < m.nx(); ++j) {
    const int e = j;  // slab i = 0
    const double x0 = m.xgrid[j], hx = m.xgrid[j + 1] - m.xgrid[j];
    for (std::size_t iq = 0; iq < ql.points.size(); ++iq) {
      const double xi = ql.points[iq][0];
      const Pt p{0.0, x0 + xi * hx, 0.0};
      const double w = ql.weights[iq] * hx;
      // Trace of the bilinear basis at t = 0: only the bt = 0 pair is active.
      const double tval[4] = {1.0 - xi, 0.0, xi, 0.0};
      const double u0q = prob.u0(p);
      for (int a2 = 0; a2 < 4; ++a2) {
        const int gi = sp.u.dof(e, a2);
        if (gi < 0) continue;
        sys.F[gi] += w * u0q * tval[a2];
        for (int b2 = 0; b2 < 4; ++b2) {
          const int gj = sp.u.dof(e, b2);
          if (gj < 0) continue;
          sys.S(gi, gj) += w * tval[a2] * tval[b2];
        }
      }
    }
  }
  return sys;
}

inline DenseSystem assemble_dense(const parobs::ProblemSpec& prob, const parobs::Mesh& m,
                                  const parobs::Spaces& sp, int degree) {
  return std::visit([&](const auto& mm) { return assemble_dense(prob, mm, sp, degree); },
                    m);
}

}  // namespace oracle
