#pragma once

// Discrete trial spaces on a space-time mesh and their element-local
// evaluation tables.
//
// Simplicial family: u continuous piecewise affine with clamped lateral
// vertices, sigma continuous piecewise affine with d components per vertex,
// lambda piecewise constant. Tensor family (one space dimension): u
// continuous piecewise bilinear on the grid with clamped end columns, sigma
// per time slab continuous piecewise quadratic in x (nodal values plus one
// interior bubble per interval, discontinuous across slabs), lambda per
// rectangle constant in time and affine in x (a coefficient per rectangle
// endpoint; both nonnegative iff the function is).
//
// Obstacle constraints are nodal: every free u dof carries the lower bound
// g(z) at its node, every lambda dof the bound 0.

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "core.hpp"
#include "mesh.hpp"
#include "problem.hpp"
#include "quadrature.hpp"

namespace parobs {

enum class Family { simplicial, tensor };
enum class Field { u, sigma, lambda };

struct DofMap {
  Field field = Field::u;
  int n_global = 0;               // dofs in this field (u counts free only)
  int per_element = 0;
  std::vector<int> element_dofs;  // field-local ids, -1 for clamped u dofs
  std::vector<std::pair<int, double>> constrained;  // (field-local id, bound)

  int dof(int elem, int k) const { return element_dofs[elem * per_element + k]; }
};

struct Spaces {
  Family family = Family::simplicial;
  int d = 1;
  DofMap u, sigma, lambda;
  std::vector<int> u_dof_of_vertex;  // per vertex/node, -1 where clamped

  int n_total() const { return u.n_global + sigma.n_global + lambda.n_global; }
  int offset_u() const { return 0; }
  int offset_sigma() const { return u.n_global; }
  int offset_lambda() const { return u.n_global + sigma.n_global; }

  // System-global bound constraints (u bounds then lambda bounds).
  std::vector<std::pair<int, double>> system_bounds() const {
    std::vector<std::pair<int, double>> out;
    out.reserve(u.constrained.size() + lambda.constrained.size());
    for (const auto& [i, b] : u.constrained) out.emplace_back(i + offset_u(), b);
    for (const auto& [i, b] : lambda.constrained) out.emplace_back(i + offset_lambda(), b);
    return out;
  }
};

struct DiscreteSolution {
  Eigen::VectorXd u, sigma, lambda;
  Family family = Family::simplicial;
};

inline DiscreteSolution split_solution(const Spaces& sp, const Eigen::VectorXd& x) {
  DiscreteSolution s;
  s.family = sp.family;
  s.u = x.segment(sp.offset_u(), sp.u.n_global);
  s.sigma = x.segment(sp.offset_sigma(), sp.sigma.n_global);
  s.lambda = x.segment(sp.offset_lambda(), sp.lambda.n_global);
  return s;
}

inline Eigen::VectorXd join_solution(const Spaces& sp, const DiscreteSolution& s) {
  Eigen::VectorXd x(sp.n_total());
  x.segment(sp.offset_u(), sp.u.n_global) = s.u;
  x.segment(sp.offset_sigma(), sp.sigma.n_global) = s.sigma;
  x.segment(sp.offset_lambda(), sp.lambda.n_global) = s.lambda;
  return x;
}

namespace detail {

inline bool vertex_is_lateral(const SimplicialMesh& m, const Pt& p) {
  return on_spatial_boundary(m, p, geom_tol(m));
}

}  // namespace detail

// Builds the three dof maps for the mesh's family. The obstacle must be
// nonpositive (within 1e-10) at clamped lateral nodes; free u dofs get the
// nodal obstacle values as lower bounds, lambda dofs the bound 0.
inline Spaces build_spaces(const SimplicialMesh& m, const ScalarFn& g) {
  Spaces sp;
  sp.family = Family::simplicial;
  sp.d = m.d;
  const int nv = m.verts_per_element();

  sp.u.field = Field::u;
  sp.u_dof_of_vertex.assign(m.n_vertices(), -1);
  for (int v = 0; v < m.n_vertices(); ++v) {
    if (detail::vertex_is_lateral(m, m.vertices[v])) {
      if (g(m.vertices[v]) > 1e-10)
        throw data_error("build_spaces: obstacle is positive at a clamped lateral vertex");
      continue;
    }
    sp.u_dof_of_vertex[v] = sp.u.n_global++;
  }
  sp.u.per_element = nv;
  sp.u.element_dofs.resize(m.n_elements() * nv);
  for (int e = 0; e < m.n_elements(); ++e)
    for (int k = 0; k < nv; ++k)
      sp.u.element_dofs[e * nv + k] = sp.u_dof_of_vertex[m.elements[e][k]];
  for (int v = 0; v < m.n_vertices(); ++v)
    if (sp.u_dof_of_vertex[v] >= 0)
      sp.u.constrained.emplace_back(sp.u_dof_of_vertex[v], g(m.vertices[v]));

  sp.sigma.field = Field::sigma;
  sp.sigma.n_global = m.d * m.n_vertices();
  sp.sigma.per_element = nv * m.d;
  sp.sigma.element_dofs.resize(m.n_elements() * sp.sigma.per_element);
  for (int e = 0; e < m.n_elements(); ++e)
    for (int k = 0; k < nv; ++k)
      for (int c = 0; c < m.d; ++c)
        sp.sigma.element_dofs[e * sp.sigma.per_element + k * m.d + c] =
            m.d * m.elements[e][k] + c;

  sp.lambda.field = Field::lambda;
  sp.lambda.n_global = m.n_elements();
  sp.lambda.per_element = 1;
  sp.lambda.element_dofs.resize(m.n_elements());
  for (int e = 0; e < m.n_elements(); ++e) sp.lambda.element_dofs[e] = e;
  sp.lambda.constrained.reserve(m.n_elements());
  for (int e = 0; e < m.n_elements(); ++e) sp.lambda.constrained.emplace_back(e, 0.0);
  return sp;
}

inline Spaces build_spaces(const TensorMesh& m, const ScalarFn& g) {
  Spaces sp;
  sp.family = Family::tensor;
  sp.d = 1;
  const int nt = m.nt(), nx = m.nx();

  sp.u.field = Field::u;
  sp.u_dof_of_vertex.assign(m.n_nodes(), -1);
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j <= nx; ++j) {
      const Pt z{m.tgrid[i], m.xgrid[j], 0.0};
      if (j == 0 || j == nx) {
        if (g(z) > 1e-10)
          throw data_error("build_spaces: obstacle is positive at a clamped lateral node");
        continue;
      }
      sp.u_dof_of_vertex[m.node(i, j)] = sp.u.n_global++;
    }
  sp.u.per_element = 4;  // nodes (i,j), (i+1,j), (i,j+1), (i+1,j+1)
  sp.u.element_dofs.resize(m.n_elements() * 4);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      const int e = i * nx + j;
      sp.u.element_dofs[e * 4 + 0] = sp.u_dof_of_vertex[m.node(i, j)];
      sp.u.element_dofs[e * 4 + 1] = sp.u_dof_of_vertex[m.node(i + 1, j)];
      sp.u.element_dofs[e * 4 + 2] = sp.u_dof_of_vertex[m.node(i, j + 1)];
      sp.u.element_dofs[e * 4 + 3] = sp.u_dof_of_vertex[m.node(i + 1, j + 1)];
    }
  for (int i = 0; i <= nt; ++i)
    for (int j = 1; j < nx; ++j)
      sp.u.constrained.emplace_back(sp.u_dof_of_vertex[m.node(i, j)],
                                    g(Pt{m.tgrid[i], m.xgrid[j], 0.0}));

  // Per slab: 2 nx + 1 dofs ordered node0, bubble0, node1, bubble1, ..., node nx.
  sp.sigma.field = Field::sigma;
  const int per_slab = 2 * nx + 1;
  sp.sigma.n_global = nt * per_slab;
  sp.sigma.per_element = 3;
  sp.sigma.element_dofs.resize(m.n_elements() * 3);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      const int e = i * nx + j;
      sp.sigma.element_dofs[e * 3 + 0] = i * per_slab + 2 * j;
      sp.sigma.element_dofs[e * 3 + 1] = i * per_slab + 2 * j + 1;
      sp.sigma.element_dofs[e * 3 + 2] = i * per_slab + 2 * j + 2;
    }

  sp.lambda.field = Field::lambda;
  sp.lambda.n_global = 2 * m.n_elements();
  sp.lambda.per_element = 2;
  sp.lambda.element_dofs.resize(m.n_elements() * 2);
  for (int e = 0; e < m.n_elements(); ++e) {
    sp.lambda.element_dofs[e * 2 + 0] = 2 * e;
    sp.lambda.element_dofs[e * 2 + 1] = 2 * e + 1;
    sp.lambda.constrained.emplace_back(2 * e, 0.0);
    sp.lambda.constrained.emplace_back(2 * e + 1, 0.0);
  }
  return sp;
}

inline Spaces build_spaces(const Mesh& m, const ScalarFn& g) {
  return std::visit([&](const auto& mm) { return build_spaces(mm, g); }, m);
}

// ---------------------------------------------------------------------------
// Element-local evaluation tables.

inline constexpr int kMaxQ = 16;
inline constexpr int kMaxU = 8;
inline constexpr int kMaxS = 8;
inline constexpr int kMaxL = 2;

// All basis values the bilinear form needs at the element's quadrature
// points; weights carry the physical measure.
struct ElemCtx {
  int elem = 0;
  int d = 1;
  int nq = 0;
  Pt pt[kMaxQ];
  double w[kMaxQ];
  double measure = 0.0;
  double h = 0.0;  // element diameter
  int nu = 0, ns = 0, nl = 0;
  int udof[kMaxU];
  int sdof[kMaxS];
  int ldof[kMaxL];
  double uval[kMaxU][kMaxQ];
  double ut[kMaxU][kMaxQ];
  double ux[kMaxU][kMaxQ][2];
  double sval[kMaxS][kMaxQ][2];
  double sdiv[kMaxS][kMaxQ];
  double lval[kMaxL][kMaxQ];
};

// Trace tables on a bottom or top facet; only the owner's u basis is needed.
struct FaceCtx {
  int owner = 0;
  FacetClass cls = FacetClass::bottom;
  int nq = 0;
  Pt pt[kMaxQ];
  double w[kMaxQ];
  double measure = 0.0;
  int nu = 0;
  int udof[kMaxU];
  double uval[kMaxU][kMaxQ];
};

namespace detail {

// Barycentric gradients of the d+2 vertex basis functions of element e;
// grads[k] = (d/dt, d/dx, d/dy). Returns the measure.
inline double simplex_gradients(const SimplicialMesh& m, int e, double grads[4][3]) {
  const auto& el = m.elements[e];
  const Pt& a = m.vertices[el[0]];
  if (m.d == 1) {
    const Pt& b = m.vertices[el[1]];
    const Pt& c = m.vertices[el[2]];
    const double j00 = b.t - a.t, j01 = c.t - a.t;
    const double j10 = b.x - a.x, j11 = c.x - a.x;
    const double det = j00 * j11 - j01 * j10;
    // Rows of the inverse transposed Jacobian are the barycentric gradients.
    grads[1][0] = j11 / det;
    grads[1][1] = -j01 / det;
    grads[1][2] = 0.0;
    grads[2][0] = -j10 / det;
    grads[2][1] = j00 / det;
    grads[2][2] = 0.0;
    for (int c2 = 0; c2 < 3; ++c2) grads[0][c2] = -grads[1][c2] - grads[2][c2];
    return 0.5 * det;
  }
  const Pt& b = m.vertices[el[1]];
  const Pt& c = m.vertices[el[2]];
  const Pt& dd = m.vertices[el[3]];
  const double J[3][3] = {{b.t - a.t, c.t - a.t, dd.t - a.t},
                          {b.x - a.x, c.x - a.x, dd.x - a.x},
                          {b.y - a.y, c.y - a.y, dd.y - a.y}};
  const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                     J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                     J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
  const double inv[3][3] = {
      {(J[1][1] * J[2][2] - J[1][2] * J[2][1]) / det,
       (J[0][2] * J[2][1] - J[0][1] * J[2][2]) / det,
       (J[0][1] * J[1][2] - J[0][2] * J[1][1]) / det},
      {(J[1][2] * J[2][0] - J[1][0] * J[2][2]) / det,
       (J[0][0] * J[2][2] - J[0][2] * J[2][0]) / det,
       (J[0][2] * J[1][0] - J[0][0] * J[1][2]) / det},
      {(J[1][0] * J[2][1] - J[1][1] * J[2][0]) / det,
       (J[0][1] * J[2][0] - J[0][0] * J[2][1]) / det,
       (J[0][0] * J[1][1] - J[0][1] * J[1][0]) / det}};
  for (int k = 1; k <= 3; ++k)
    for (int c2 = 0; c2 < 3; ++c2) grads[k][c2] = inv[k - 1][c2];
  for (int c2 = 0; c2 < 3; ++c2) grads[0][c2] = -grads[1][c2] - grads[2][c2] - grads[3][c2];
  return det / 6.0;
}

inline void fill_element(const SimplicialMesh& m, const Spaces& sp, const QuadRule& q,
                         int e, ElemCtx& ctx) {
  const int nv = m.verts_per_element();
  double grads[4][3];
  const double measure = simplex_gradients(m, e, grads);
  const double ref = m.d == 1 ? 0.5 : 1.0 / 6.0;
  ctx.elem = e;
  ctx.d = m.d;
  ctx.nq = static_cast<int>(q.points.size());
  ctx.measure = measure;
  ctx.h = element_diameter(m, e);
  ctx.nu = nv;
  ctx.ns = nv * m.d;
  ctx.nl = 1;
  const auto& el = m.elements[e];
  const Pt& a = m.vertices[el[0]];
  for (int k = 0; k < nv; ++k) ctx.udof[k] = sp.u.dof(e, k);
  for (int k = 0; k < ctx.ns; ++k) ctx.sdof[k] = sp.sigma.dof(e, k);
  ctx.ldof[0] = sp.lambda.dof(e, 0);
  for (int iq = 0; iq < ctx.nq; ++iq) {
    const auto& rp = q.points[iq];
    double bary[4];
    bary[1] = rp[0];
    bary[2] = rp[1];
    bary[3] = rp[2];
    bary[0] = 1.0 - rp[0] - rp[1] - (m.d == 2 ? rp[2] : 0.0);
    Pt p{0.0, 0.0, 0.0};
    for (int k = 0; k < nv; ++k) {
      const Pt& v = m.vertices[el[k]];
      p.t += bary[k] * v.t;
      p.x += bary[k] * v.x;
      p.y += bary[k] * v.y;
    }
    (void)a;
    ctx.pt[iq] = p;
    ctx.w[iq] = q.weights[iq] / ref * measure;
    for (int k = 0; k < nv; ++k) {
      ctx.uval[k][iq] = bary[k];
      ctx.ut[k][iq] = grads[k][0];
      ctx.ux[k][iq][0] = grads[k][1];
      ctx.ux[k][iq][1] = m.d == 2 ? grads[k][2] : 0.0;
    }
    for (int k = 0; k < nv; ++k)
      for (int c = 0; c < m.d; ++c) {
        const int s = k * m.d + c;
        ctx.sval[s][iq][0] = c == 0 ? bary[k] : 0.0;
        ctx.sval[s][iq][1] = c == 1 ? bary[k] : 0.0;
        ctx.sdiv[s][iq] = grads[k][1 + c];
      }
    ctx.lval[0][iq] = 1.0;
  }
}

inline void fill_element(const TensorMesh& m, const Spaces& sp, const QuadRule& q,
                         int e, ElemCtx& ctx) {
  const int i = e / m.nx(), j = e % m.nx();
  const double t0 = m.tgrid[i], ht = m.tgrid[i + 1] - t0;
  const double x0 = m.xgrid[j], hx = m.xgrid[j + 1] - x0;
  ctx.elem = e;
  ctx.d = 1;
  ctx.nq = static_cast<int>(q.points.size());
  ctx.measure = ht * hx;
  ctx.h = std::hypot(ht, hx);
  ctx.nu = 4;
  ctx.ns = 3;
  ctx.nl = 2;
  for (int k = 0; k < 4; ++k) ctx.udof[k] = sp.u.dof(e, k);
  for (int k = 0; k < 3; ++k) ctx.sdof[k] = sp.sigma.dof(e, k);
  for (int k = 0; k < 2; ++k) ctx.ldof[k] = sp.lambda.dof(e, k);
  for (int iq = 0; iq < ctx.nq; ++iq) {
    const double s = q.points[iq][0], xi = q.points[iq][1];
    ctx.pt[iq] = {t0 + s * ht, x0 + xi * hx, 0.0};
    ctx.w[iq] = q.weights[iq] * ht * hx;
    const double nt[2] = {1.0 - s, s}, nxv[2] = {1.0 - xi, xi};
    const double dt[2] = {-1.0 / ht, 1.0 / ht}, dx[2] = {-1.0 / hx, 1.0 / hx};
    // u order: (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    for (int bx = 0; bx < 2; ++bx)
      for (int bt = 0; bt < 2; ++bt) {
        const int k = bx * 2 + bt;
        ctx.uval[k][iq] = nt[bt] * nxv[bx];
        ctx.ut[k][iq] = dt[bt] * nxv[bx];
        ctx.ux[k][iq][0] = nt[bt] * dx[bx];
        ctx.ux[k][iq][1] = 0.0;
      }
    // sigma order: left node, bubble, right node; constant in time.
    const double sv[3] = {1.0 - xi, 4.0 * xi * (1.0 - xi), xi};
    const double sd[3] = {-1.0 / hx, (4.0 - 8.0 * xi) / hx, 1.0 / hx};
    for (int k = 0; k < 3; ++k) {
      ctx.sval[k][iq][0] = sv[k];
      ctx.sval[k][iq][1] = 0.0;
      ctx.sdiv[k][iq] = sd[k];
    }
    ctx.lval[0][iq] = 1.0 - xi;
    ctx.lval[1][iq] = xi;
  }
}

}  // namespace detail

// Visits every element in index order with freshly filled tables. `degree`
// selects the quadrature accuracy (2 or 4).
template <typename Fn>
void for_each_element(const SimplicialMesh& m, const Spaces& sp, int degree, Fn&& fn) {
  const QuadRule q =
      quad_rule(m.d == 1 ? RefDomain::triangle : RefDomain::tetrahedron, degree);
  ElemCtx ctx;
  for (int e = 0; e < m.n_elements(); ++e) {
    detail::fill_element(m, sp, q, e, ctx);
    fn(ctx);
  }
}

template <typename Fn>
void for_each_element(const TensorMesh& m, const Spaces& sp, int degree, Fn&& fn) {
  const QuadRule q = quad_rule(RefDomain::square, degree);
  ElemCtx ctx;
  for (int e = 0; e < m.n_elements(); ++e) {
    detail::fill_element(m, sp, q, e, ctx);
    fn(ctx);
  }
}

template <typename Fn>
void for_each_element(const Mesh& m, const Spaces& sp, int degree, Fn&& fn) {
  std::visit([&](const auto& mm) { for_each_element(mm, sp, degree, fn); }, m);
}

namespace detail {

// Barycentric coordinates of p in element e (d+2 entries).
inline void barycentric(const SimplicialMesh& m, int e, const Pt& p, double bary[4]) {
  double grads[4][3];
  simplex_gradients(m, e, grads);
  const auto& el = m.elements[e];
  const Pt& a = m.vertices[el[0]];
  const double dt = p.t - a.t, dx = p.x - a.x, dy = p.y - a.y;
  const int nv = m.verts_per_element();
  for (int k = 1; k < nv; ++k)
    bary[k] = grads[k][0] * dt + grads[k][1] * dx + grads[k][2] * dy;
  bary[0] = 1.0;
  for (int k = 1; k < nv; ++k) bary[0] -= bary[k];
  if (m.d == 1) bary[3] = 0.0;
}

}  // namespace detail

// Visits the bottom (t = 0) and top (t = T) facets with the owner element's
// u-basis traces.
template <typename Fn>
void for_each_time_facet(const SimplicialMesh& m, const Spaces& sp, int degree, Fn&& fn) {
  const QuadRule q =
      quad_rule(m.d == 1 ? RefDomain::interval : RefDomain::triangle, degree);
  FaceCtx ctx;
  const int nv = m.verts_per_element();
  for (const Facet& f : m.facets) {
    if (f.cls == FacetClass::lateral) continue;
    ctx.owner = f.owner;
    ctx.cls = f.cls;
    ctx.nq = static_cast<int>(q.points.size());
    ctx.nu = nv;
    for (int k = 0; k < nv; ++k) ctx.udof[k] = sp.u.dof(f.owner, k);
    const Pt& a = m.vertices[f.v[0]];
    const Pt& b = m.vertices[f.v[1]];
    double measure, ref;
    Pt c{};
    if (m.d == 1) {
      measure = std::hypot(b.t - a.t, b.x - a.x);
      ref = 1.0;
    } else {
      c = m.vertices[f.v[2]];
      const double u1 = b.x - a.x, u2 = b.y - a.y;
      const double v1 = c.x - a.x, v2 = c.y - a.y;
      measure = 0.5 * std::abs(u1 * v2 - u2 * v1);  // facet lies in a t-plane
      ref = 0.5;
    }
    ctx.measure = measure;
    for (int iq = 0; iq < ctx.nq; ++iq) {
      const double r0 = q.points[iq][0], r1 = q.points[iq][1];
      Pt p;
      if (m.d == 1) {
        p = {a.t + r0 * (b.t - a.t), a.x + r0 * (b.x - a.x), 0.0};
      } else {
        p = {a.t + r0 * (b.t - a.t) + r1 * (c.t - a.t),
             a.x + r0 * (b.x - a.x) + r1 * (c.x - a.x),
             a.y + r0 * (b.y - a.y) + r1 * (c.y - a.y)};
      }
      ctx.pt[iq] = p;
      ctx.w[iq] = q.weights[iq] / ref * measure;
      double bary[4];
      detail::barycentric(m, f.owner, p, bary);
      for (int k = 0; k < nv; ++k) ctx.uval[k][iq] = bary[k];
    }
    fn(ctx);
  }
}

template <typename Fn>
void for_each_time_facet(const TensorMesh& m, const Spaces& sp, int degree, Fn&& fn) {
  const QuadRule q = quad_rule(RefDomain::interval, degree);
  FaceCtx ctx;
  const int nt = m.nt(), nx = m.nx();
  for (int pass = 0; pass < 2; ++pass) {
    const bool bottom = pass == 0;
    const int i = bottom ? 0 : nt - 1;
    const double tface = bottom ? 0.0 : m.t_end;
    for (int j = 0; j < nx; ++j) {
      const int e = i * nx + j;
      const double x0 = m.xgrid[j], hx = m.xgrid[j + 1] - x0;
      ctx.owner = e;
      ctx.cls = bottom ? FacetClass::bottom : FacetClass::top;
      ctx.nq = static_cast<int>(q.points.size());
      ctx.measure = hx;
      ctx.nu = 4;
      for (int k = 0; k < 4; ++k) ctx.udof[k] = sp.u.dof(e, k);
      for (int iq = 0; iq < ctx.nq; ++iq) {
        const double xi = q.points[iq][0];
        ctx.pt[iq] = {tface, x0 + xi * hx, 0.0};
        ctx.w[iq] = q.weights[iq] * hx;
        // u order (i,j), (i+1,j), (i,j+1), (i+1,j+1); trace picks one time row.
        ctx.uval[0][iq] = bottom ? 1.0 - xi : 0.0;
        ctx.uval[1][iq] = bottom ? 0.0 : 1.0 - xi;
        ctx.uval[2][iq] = bottom ? xi : 0.0;
        ctx.uval[3][iq] = bottom ? 0.0 : xi;
      }
      fn(ctx);
    }
  }
}

template <typename Fn>
void for_each_time_facet(const Mesh& m, const Spaces& sp, int degree, Fn&& fn) {
  std::visit([&](const auto& mm) { for_each_time_facet(mm, sp, degree, fn); }, m);
}

// ---------------------------------------------------------------------------
// Point evaluation (element scan; intended for tests, export and diagnostics).

namespace detail {

inline int locate(const SimplicialMesh& m, const Pt& p, double bary[4]) {
  for (int e = 0; e < m.n_elements(); ++e) {
    barycentric(m, e, p, bary);
    bool inside = true;
    for (int k = 0; k < m.verts_per_element(); ++k) inside = inside && bary[k] >= -1e-10;
    if (inside) return e;
  }
  throw std::domain_error("evaluate: point outside the space-time cylinder");
}

// Grid interval containing v; the last interval is closed on the right.
inline int locate_1d(const std::vector<double>& grid, double v) {
  const double tol = 1e-12 * std::max(1.0, std::abs(grid.back() - grid.front()));
  if (v < grid.front() - tol || v > grid.back() + tol)
    throw std::domain_error("evaluate: point outside the space-time cylinder");
  const auto it = std::upper_bound(grid.begin(), grid.end(), v);
  int j = static_cast<int>(it - grid.begin()) - 1;
  return std::clamp(j, 0, static_cast<int>(grid.size()) - 2);
}

}  // namespace detail

inline double evaluate_u(const SimplicialMesh& m, const Spaces& sp,
                         const DiscreteSolution& s, const Pt& p) {
  double bary[4];
  const int e = detail::locate(m, p, bary);
  double v = 0.0;
  for (int k = 0; k < m.verts_per_element(); ++k) {
    const int dof = sp.u.dof(e, k);
    if (dof >= 0) v += bary[k] * s.u[dof];
  }
  return v;
}

inline Vec2 evaluate_sigma(const SimplicialMesh& m, const Spaces& sp,
                           const DiscreteSolution& s, const Pt& p) {
  double bary[4];
  const int e = detail::locate(m, p, bary);
  Vec2 v{0.0, 0.0};
  for (int k = 0; k < m.verts_per_element(); ++k)
    for (int c = 0; c < m.d; ++c)
      v[c] += bary[k] * s.sigma[sp.sigma.dof(e, k * m.d + c)];
  return v;
}

inline double evaluate_lambda(const SimplicialMesh& m, const Spaces& sp,
                              const DiscreteSolution& s, const Pt& p) {
  double bary[4];
  const int e = detail::locate(m, p, bary);
  return s.lambda[sp.lambda.dof(e, 0)];
}

inline double evaluate_u(const TensorMesh& m, const Spaces& sp, const DiscreteSolution& s,
                         const Pt& p) {
  const int i = detail::locate_1d(m.tgrid, p.t);
  const int j = detail::locate_1d(m.xgrid, p.x);
  const double st = (p.t - m.tgrid[i]) / (m.tgrid[i + 1] - m.tgrid[i]);
  const double xi = (p.x - m.xgrid[j]) / (m.xgrid[j + 1] - m.xgrid[j]);
  const int e = i * m.nx() + j;
  const double shp[4] = {(1.0 - st) * (1.0 - xi), st * (1.0 - xi), (1.0 - st) * xi,
                         st * xi};
  double v = 0.0;
  for (int k = 0; k < 4; ++k) {
    const int dof = sp.u.dof(e, k);
    if (dof >= 0) v += shp[k] * s.u[dof];
  }
  return v;
}

inline Vec2 evaluate_sigma(const TensorMesh& m, const Spaces& sp,
                           const DiscreteSolution& s, const Pt& p) {
  const int i = detail::locate_1d(m.tgrid, p.t);
  const int j = detail::locate_1d(m.xgrid, p.x);
  const double xi = (p.x - m.xgrid[j]) / (m.xgrid[j + 1] - m.xgrid[j]);
  const int e = i * m.nx() + j;
  const double c0 = s.sigma[sp.sigma.dof(e, 0)];
  const double cb = s.sigma[sp.sigma.dof(e, 1)];
  const double c1 = s.sigma[sp.sigma.dof(e, 2)];
  return Vec2{c0 * (1.0 - xi) + cb * 4.0 * xi * (1.0 - xi) + c1 * xi, 0.0};
}

inline double evaluate_lambda(const TensorMesh& m, const Spaces& sp,
                              const DiscreteSolution& s, const Pt& p) {
  const int i = detail::locate_1d(m.tgrid, p.t);
  const int j = detail::locate_1d(m.xgrid, p.x);
  const double xi = (p.x - m.xgrid[j]) / (m.xgrid[j + 1] - m.xgrid[j]);
  const int e = i * m.nx() + j;
  return s.lambda[sp.lambda.dof(e, 0)] * (1.0 - xi) + s.lambda[sp.lambda.dof(e, 1)] * xi;
}

inline double evaluate_u(const Mesh& m, const Spaces& sp, const DiscreteSolution& s,
                         const Pt& p) {
  return std::visit([&](const auto& mm) { return evaluate_u(mm, sp, s, p); }, m);
}
inline Vec2 evaluate_sigma(const Mesh& m, const Spaces& sp, const DiscreteSolution& s,
                           const Pt& p) {
  return std::visit([&](const auto& mm) { return evaluate_sigma(mm, sp, s, p); }, m);
}
inline double evaluate_lambda(const Mesh& m, const Spaces& sp, const DiscreteSolution& s,
                              const Pt& p) {
  return std::visit([&](const auto& mm) { return evaluate_lambda(mm, sp, s, p); }, m);
}

inline std::vector<double> interpolate_vertexwise(const ScalarFn& fn,
                                                  const SimplicialMesh& m) {
  std::vector<double> out(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) out[v] = fn(m.vertices[v]);
  return out;
}

inline std::vector<double> interpolate_vertexwise(const ScalarFn& fn, const TensorMesh& m) {
  std::vector<double> out;
  out.reserve(m.n_nodes());
  for (double t : m.tgrid)
    for (double x : m.xgrid) out.push_back(fn(Pt{t, x, 0.0}));
  return out;
}

// Vertex/node values of the discrete u (clamped nodes contribute 0).
inline std::vector<double> vertex_values_u(const Spaces& sp, const DiscreteSolution& s) {
  std::vector<double> out(sp.u_dof_of_vertex.size(), 0.0);
  for (std::size_t v = 0; v < out.size(); ++v)
    if (sp.u_dof_of_vertex[v] >= 0) out[v] = s.u[sp.u_dof_of_vertex[v]];
  return out;
}

// ---------------------------------------------------------------------------
// Carrying a solution to the once-refined mesh (nodal interpolation of u and
// sigma, inheritance of lambda). `fine` must have been produced from
// `coarse` by one refinement call, so its bookkeeping refers to `coarse`.

inline DiscreteSolution prolong(const SimplicialMesh& coarse, const Spaces& csp,
                                const DiscreteSolution& s, const SimplicialMesh& fine,
                                const Spaces& fsp) {
  DiscreteSolution out;
  out.family = Family::simplicial;
  // Vertex passes in creation order: parents always precede children.
  std::vector<double> val(fine.n_vertices(), 0.0);
  for (int v = 0; v < fine.n_vertices(); ++v) {
    const auto& pr = fine.vertex_parents[v];
    if (pr[0] == v && pr[1] == v) {
      const int dof = csp.u_dof_of_vertex[v];
      val[v] = dof >= 0 ? s.u[dof] : 0.0;
    } else {
      val[v] = 0.5 * (val[pr[0]] + val[pr[1]]);
    }
  }
  out.u.resize(fsp.u.n_global);
  for (int v = 0; v < fine.n_vertices(); ++v)
    if (fsp.u_dof_of_vertex[v] >= 0) out.u[fsp.u_dof_of_vertex[v]] = val[v];
  out.sigma.resize(fsp.sigma.n_global);
  for (int c = 0; c < fine.d; ++c) {
    for (int v = 0; v < fine.n_vertices(); ++v) {
      const auto& pr = fine.vertex_parents[v];
      val[v] = (pr[0] == v && pr[1] == v) ? s.sigma[fine.d * v + c]
                                          : 0.5 * (val[pr[0]] + val[pr[1]]);
    }
    for (int v = 0; v < fine.n_vertices(); ++v) out.sigma[fine.d * v + c] = val[v];
  }
  out.lambda.resize(fsp.lambda.n_global);
  for (int e = 0; e < fine.n_elements(); ++e) out.lambda[e] = s.lambda[fine.parent[e]];
  return out;
}

inline DiscreteSolution prolong(const TensorMesh& coarse, const Spaces& csp,
                                const DiscreteSolution& s, const TensorMesh& fine,
                                const Spaces& fsp) {
  DiscreteSolution out;
  out.family = Family::tensor;
  const int cnx = coarse.nx(), cnt = coarse.nt();
  const int fnx = fine.nx(), fnt = fine.nt();
  if (fnx != 2 * cnx || fnt != 2 * cnt)
    throw std::invalid_argument("prolong: tensor meshes are not one halving apart");
  auto cu = [&](int i, int j) {
    const int dof = csp.u_dof_of_vertex[coarse.node(i, j)];
    return dof >= 0 ? s.u[dof] : 0.0;
  };
  out.u.resize(fsp.u.n_global);
  for (int i = 0; i <= fnt; ++i)
    for (int j = 0; j <= fnx; ++j) {
      const int dof = fsp.u_dof_of_vertex[fine.node(i, j)];
      if (dof < 0) continue;
      const int ci = i / 2, cj = j / 2;
      double v;
      if (i % 2 == 0 && j % 2 == 0)
        v = cu(ci, cj);
      else if (i % 2 == 1 && j % 2 == 0)
        v = 0.5 * (cu(ci, cj) + cu(ci + 1, cj));
      else if (i % 2 == 0)
        v = 0.5 * (cu(ci, cj) + cu(ci, cj + 1));
      else
        v = 0.25 * (cu(ci, cj) + cu(ci + 1, cj) + cu(ci, cj + 1) + cu(ci + 1, cj + 1));
      out.u[dof] = v;
    }
  // Per-slab quadratic in x: evaluate the coarse profile at fine nodes and
  // recover fine bubble coefficients from midpoint values.
  const int cper = 2 * cnx + 1, fper = 2 * fnx + 1;
  out.sigma.resize(fsp.sigma.n_global);
  auto ceval = [&](int cslab, double x) {
    const int j = detail::locate_1d(coarse.xgrid, x);
    const double xi = (x - coarse.xgrid[j]) / (coarse.xgrid[j + 1] - coarse.xgrid[j]);
    const double c0 = s.sigma[cslab * cper + 2 * j];
    const double cb = s.sigma[cslab * cper + 2 * j + 1];
    const double c1 = s.sigma[cslab * cper + 2 * j + 2];
    return c0 * (1.0 - xi) + cb * 4.0 * xi * (1.0 - xi) + c1 * xi;
  };
  for (int fi = 0; fi < fnt; ++fi) {
    const int ci = fi / 2;
    for (int j = 0; j <= fnx; ++j)
      out.sigma[fi * fper + 2 * j] = ceval(ci, fine.xgrid[j]);
    for (int j = 0; j < fnx; ++j) {
      const double mid = 0.5 * (fine.xgrid[j] + fine.xgrid[j + 1]);
      out.sigma[fi * fper + 2 * j + 1] =
          ceval(ci, mid) -
          0.5 * (out.sigma[fi * fper + 2 * j] + out.sigma[fi * fper + 2 * j + 2]);
    }
  }
  out.lambda.resize(fsp.lambda.n_global);
  for (int fi = 0; fi < fnt; ++fi)
    for (int j = 0; j < fnx; ++j) {
      const int fe = fi * fnx + j;
      const int ce = (fi / 2) * cnx + j / 2;
      const double l0 = s.lambda[2 * ce], l1 = s.lambda[2 * ce + 1];
      const double a = j % 2 == 0 ? 0.0 : 0.5, b = a + 0.5;
      out.lambda[2 * fe] = l0 + (l1 - l0) * a;
      out.lambda[2 * fe + 1] = l0 + (l1 - l0) * b;
    }
  return out;
}

inline DiscreteSolution prolong(const Mesh& coarse, const Spaces& csp,
                                const DiscreteSolution& s, const Mesh& fine,
                                const Spaces& fsp) {
  if (std::holds_alternative<SimplicialMesh>(coarse))
    return prolong(std::get<SimplicialMesh>(coarse), csp, s,
                   std::get<SimplicialMesh>(fine), fsp);
  return prolong(std::get<TensorMesh>(coarse), csp, s, std::get<TensorMesh>(fine), fsp);
}

}  // namespace parobs
