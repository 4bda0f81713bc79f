#pragma once

// Space-time meshes of the cylinder (0,T) x Omega, time listed first.
//
// SimplicialMesh: triangles for one space dimension, tetrahedra for two.
// Triangle meshes support newest-vertex bisection with conforming closure;
// tetrahedral meshes refine uniformly by red subdivision (Bey's rule).
// TensorMesh: time-slab x space-interval rectangles for one space dimension,
// refined uniformly by halving every interval.
//
// Refinement bookkeeping (parent per element, parent edge endpoints per
// vertex) is retained for one generation so solutions can be carried to the
// refined mesh.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "core.hpp"

namespace parobs {

enum class FacetClass { bottom, lateral, top };

// Boundary facet: an edge (2 vertices) for d = 1, a triangle (3) for d = 2.
struct Facet {
  std::array<int, 3> v{-1, -1, -1};
  int nv = 0;
  int owner = -1;
  FacetClass cls = FacetClass::lateral;
};

struct SimplicialMesh {
  int d = 1;  // space dimension; elements have d + 2 vertices
  double t_end = 1.0;
  std::array<double, 2> xlo{0.0, 0.0};
  std::array<double, 2> xhi{1.0, 1.0};
  std::vector<Pt> vertices;
  std::vector<std::array<int, 4>> elements;  // first d + 2 entries used
  std::vector<int> refinement_edge;  // d = 1: local edge k (opposite vertex k)
  std::vector<Facet> facets;         // classified boundary facets
  std::vector<int> parent;           // element in the previous mesh, -1 root
  std::vector<std::array<int, 2>> vertex_parents;  // split edge; {v,v} inherited

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
  int verts_per_element() const { return d + 2; }
};

struct TensorMesh {
  double t_end = 1.0;
  double x0 = 0.0, x1 = 1.0;
  std::vector<double> tgrid;  // ascending, tgrid.front() = 0
  std::vector<double> xgrid;  // ascending

  int nt() const { return static_cast<int>(tgrid.size()) - 1; }
  int nx() const { return static_cast<int>(xgrid.size()) - 1; }
  int n_elements() const { return nt() * nx(); }
  int n_nodes() const { return static_cast<int>(tgrid.size() * xgrid.size()); }
  // Element e = slab * nx() + interval; node (i, j) = i * (nx()+1) + j.
  int node(int i, int j) const { return i * (nx() + 1) + j; }
};

using Mesh = std::variant<SimplicialMesh, TensorMesh>;

inline int n_elements(const Mesh& m) {
  return std::visit([](const auto& mm) { return mm.n_elements(); }, m);
}

namespace detail {

inline std::int64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::int64_t>(b);
}

inline double geom_tol(const SimplicialMesh& m) {
  double ext = std::max(1.0, m.t_end);
  for (int k = 0; k < m.d; ++k) ext = std::max(ext, m.xhi[k] - m.xlo[k]);
  return 1e-12 * ext;
}

inline bool on_spatial_boundary(const SimplicialMesh& m, const Pt& p, double tol) {
  if (std::abs(p.x - m.xlo[0]) <= tol || std::abs(p.x - m.xhi[0]) <= tol) return true;
  if (m.d == 2 &&
      (std::abs(p.y - m.xlo[1]) <= tol || std::abs(p.y - m.xhi[1]) <= tol))
    return true;
  return false;
}

}  // namespace detail

inline double element_measure(const SimplicialMesh& m, int e) {
  const auto& el = m.elements[e];
  const Pt& a = m.vertices[el[0]];
  if (m.d == 1) {
    const Pt& b = m.vertices[el[1]];
    const Pt& c = m.vertices[el[2]];
    return 0.5 * ((b.t - a.t) * (c.x - a.x) - (b.x - a.x) * (c.t - a.t));
  }
  const Pt& b = m.vertices[el[1]];
  const Pt& c = m.vertices[el[2]];
  const Pt& d = m.vertices[el[3]];
  const double m00 = b.t - a.t, m01 = b.x - a.x, m02 = b.y - a.y;
  const double m10 = c.t - a.t, m11 = c.x - a.x, m12 = c.y - a.y;
  const double m20 = d.t - a.t, m21 = d.x - a.x, m22 = d.y - a.y;
  const double det = m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) +
                     m02 * (m10 * m21 - m11 * m20);
  return det / 6.0;
}

inline double element_measure(const TensorMesh& m, int e) {
  const int i = e / m.nx(), j = e % m.nx();
  return (m.tgrid[i + 1] - m.tgrid[i]) * (m.xgrid[j + 1] - m.xgrid[j]);
}

inline double element_diameter(const SimplicialMesh& m, int e) {
  const auto& el = m.elements[e];
  const int nv = m.verts_per_element();
  double h2 = 0.0;
  for (int i = 0; i < nv; ++i)
    for (int j = i + 1; j < nv; ++j) {
      const Pt& p = m.vertices[el[i]];
      const Pt& q = m.vertices[el[j]];
      h2 = std::max(h2, sqr(p.t - q.t) + sqr(p.x - q.x) + sqr(p.y - q.y));
    }
  return std::sqrt(h2);
}

inline double element_diameter(const TensorMesh& m, int e) {
  const int i = e / m.nx(), j = e % m.nx();
  return std::hypot(m.tgrid[i + 1] - m.tgrid[i], m.xgrid[j + 1] - m.xgrid[j]);
}

inline double total_measure(const SimplicialMesh& m) {
  double s = 0.0;
  for (int e = 0; e < m.n_elements(); ++e) s += element_measure(m, e);
  return s;
}

inline double total_measure(const TensorMesh& m) {
  double s = 0.0;
  for (int e = 0; e < m.n_elements(); ++e) s += element_measure(m, e);
  return s;
}

namespace detail {

// Rebuild the classified boundary facet list from scratch.
inline void build_facets(SimplicialMesh& m) {
  m.facets.clear();
  const double tol = geom_tol(m);
  if (m.d == 1) {
    std::unordered_map<std::int64_t, int> count;
    for (const auto& el : m.elements)
      for (int k = 0; k < 3; ++k)
        count[edge_key(el[(k + 1) % 3], el[(k + 2) % 3])]++;
    for (int e = 0; e < m.n_elements(); ++e) {
      const auto& el = m.elements[e];
      for (int k = 0; k < 3; ++k) {
        const int a = el[(k + 1) % 3], b = el[(k + 2) % 3];
        if (count[edge_key(a, b)] != 1) continue;
        Facet f;
        f.v = {a, b, -1};
        f.nv = 2;
        f.owner = e;
        const Pt& pa = m.vertices[a];
        const Pt& pb = m.vertices[b];
        if (std::abs(pa.t) <= tol && std::abs(pb.t) <= tol)
          f.cls = FacetClass::bottom;
        else if (std::abs(pa.t - m.t_end) <= tol && std::abs(pb.t - m.t_end) <= tol)
          f.cls = FacetClass::top;
        else
          f.cls = FacetClass::lateral;
        m.facets.push_back(f);
      }
    }
    return;
  }
  // d = 2: boundary faces of tetrahedra.
  struct FaceRec {
    int count = 0;
    int owner = -1;
    std::array<int, 3> v{};
  };
  std::unordered_map<std::string, FaceRec> count;
  auto face_id = [](std::array<int, 3> f) {
    std::sort(f.begin(), f.end());
    return std::to_string(f[0]) + "," + std::to_string(f[1]) + "," +
           std::to_string(f[2]);
  };
  for (int e = 0; e < m.n_elements(); ++e) {
    const auto& el = m.elements[e];
    for (int k = 0; k < 4; ++k) {
      std::array<int, 3> f{el[(k + 1) % 4], el[(k + 2) % 4], el[(k + 3) % 4]};
      auto& rec = count[face_id(f)];
      rec.count++;
      rec.owner = e;
      rec.v = f;
    }
  }
  for (auto& [key, rec] : count) {
    if (rec.count != 1) continue;
    Facet f;
    f.v = rec.v;
    f.nv = 3;
    f.owner = rec.owner;
    bool bottom = true, top = true;
    for (int i = 0; i < 3; ++i) {
      const Pt& p = m.vertices[rec.v[i]];
      bottom = bottom && std::abs(p.t) <= tol;
      top = top && std::abs(p.t - m.t_end) <= tol;
    }
    f.cls = bottom ? FacetClass::bottom : (top ? FacetClass::top : FacetClass::lateral);
    m.facets.push_back(f);
  }
  // Deterministic order independent of hash iteration.
  std::sort(m.facets.begin(), m.facets.end(), [](const Facet& a, const Facet& b) {
    if (a.owner != b.owner) return a.owner < b.owner;
    return a.v < b.v;
  });
}

// Longest edge, ties resolved toward the smallest opposite local vertex.
inline int longest_edge_index(const SimplicialMesh& m, int e) {
  const auto& el = m.elements[e];
  int best = 0;
  double best_len = -1.0;
  for (int k = 0; k < 3; ++k) {
    const Pt& a = m.vertices[el[(k + 1) % 3]];
    const Pt& b = m.vertices[el[(k + 2) % 3]];
    const double len = sqr(a.t - b.t) + sqr(a.x - b.x);
    if (len > best_len * (1.0 + 1e-14)) {
      best_len = len;
      best = k;
    }
  }
  return best;
}

inline void reset_bookkeeping(SimplicialMesh& m) {
  m.parent.assign(m.n_elements(), -1);
  m.vertex_parents.resize(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) m.vertex_parents[v] = {v, v};
}

}  // namespace detail

// Uniform triangulation of (0,T) x (x0,x1); every cell is split along the
// diagonal running toward increasing t and x, whose two triangles both take
// the shared hypotenuse as refinement edge.
inline SimplicialMesh make_square_mesh(int nt, int nx, double t_end = 1.0,
                                       double x0 = 0.0, double x1 = 1.0) {
  if (nt < 1 || nx < 1 || !(t_end > 0.0) || !(x1 > x0))
    throw std::invalid_argument("make_square_mesh: need nt, nx >= 1 and a proper box");
  SimplicialMesh m;
  m.d = 1;
  m.t_end = t_end;
  m.xlo = {x0, 0.0};
  m.xhi = {x1, 0.0};
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j <= nx; ++j)
      m.vertices.push_back(
          {t_end * i / nt, x0 + (x1 - x0) * j / nx, 0.0});
  auto vid = [nx](int i, int j) { return i * (nx + 1) + j; };
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      m.elements.push_back({v00, v10, v11, -1});
      m.elements.push_back({v00, v11, v01, -1});
    }
  m.refinement_edge.resize(m.n_elements());
  for (int e = 0; e < m.n_elements(); ++e)
    m.refinement_edge[e] = detail::longest_edge_index(m, e);
  detail::build_facets(m);
  detail::reset_bookkeeping(m);
  return m;
}

// Kuhn triangulation of the unit cube (0,1)^3 into 6 n^3 positively oriented
// tetrahedra, all sharing the cell diagonals; conforming across cells.
inline SimplicialMesh make_cube_mesh(int n) {
  if (n < 1) throw std::invalid_argument("make_cube_mesh: need n >= 1");
  SimplicialMesh m;
  m.d = 2;
  m.t_end = 1.0;
  m.xlo = {0.0, 0.0};
  m.xhi = {1.0, 1.0};
  const int s = n + 1;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j)
      for (int k = 0; k < s; ++k)
        m.vertices.push_back({double(i) / n, double(j) / n, double(k) / n});
  auto vid = [s](int i, int j, int k) { return (i * s + j) * s + k; };
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (const auto& p : perms) {
          int c[3] = {i, j, k};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int step = 0; step < 3; ++step) {
            c[p[step]] += 1;
            tet[step + 1] = vid(c[0], c[1], c[2]);
          }
          m.elements.push_back(tet);
          if (element_measure(m, m.n_elements() - 1) < 0.0)
            std::swap(m.elements.back()[2], m.elements.back()[3]);
        }
  detail::build_facets(m);
  detail::reset_bookkeeping(m);
  return m;
}

inline TensorMesh make_tensor_mesh(int nt, int nx, double t_end = 1.0,
                                   double x0 = 0.0, double x1 = 1.0) {
  if (nt < 1 || nx < 1 || !(t_end > 0.0) || !(x1 > x0))
    throw std::invalid_argument("make_tensor_mesh: need nt, nx >= 1 and a proper box");
  TensorMesh m;
  m.t_end = t_end;
  m.x0 = x0;
  m.x1 = x1;
  for (int i = 0; i <= nt; ++i) m.tgrid.push_back(t_end * i / nt);
  for (int j = 0; j <= nx; ++j) m.xgrid.push_back(x0 + (x1 - x0) * j / nx);
  return m;
}

// Newest-vertex bisection of the marked triangles with conforming closure.
// Closure marks edges until every element with a marked edge also has its
// refinement edge marked; each element then bisects all its marked edges,
// children taking the edge opposite the new vertex as refinement edge.
inline SimplicialMesh nvb_refine(const SimplicialMesh& m, const std::vector<int>& marked) {
  if (m.d != 1)
    throw unsupported_error("nvb_refine: bisection is only provided for triangle meshes");
  for (int e : marked)
    if (e < 0 || e >= m.n_elements())
      throw std::invalid_argument("nvb_refine: marked element out of range");

  std::unordered_map<std::int64_t, int> midpoint;  // marked edge -> new vertex
  auto ref_edge_of = [&](int e) {
    const auto& el = m.elements[e];
    const int k = m.refinement_edge[e];
    return detail::edge_key(el[(k + 1) % 3], el[(k + 2) % 3]);
  };
  for (int e : marked) midpoint.emplace(ref_edge_of(e), -1);

  // Closure: marks only grow, so this terminates within #edges rounds.
  bool grew = true;
  while (grew) {
    grew = false;
    for (int e = 0; e < m.n_elements(); ++e) {
      const auto& el = m.elements[e];
      bool any = false;
      for (int k = 0; k < 3 && !any; ++k)
        any = midpoint.count(detail::edge_key(el[(k + 1) % 3], el[(k + 2) % 3])) > 0;
      if (any) grew = midpoint.emplace(ref_edge_of(e), -1).second || grew;
    }
  }

  SimplicialMesh out;
  out.d = 1;
  out.t_end = m.t_end;
  out.xlo = m.xlo;
  out.xhi = m.xhi;
  out.vertices = m.vertices;
  out.vertex_parents.resize(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) out.vertex_parents[v] = {v, v};
  // Deterministic midpoint numbering: scan elements in order.
  for (int e = 0; e < m.n_elements(); ++e) {
    const auto& el = m.elements[e];
    for (int k = 0; k < 3; ++k) {
      const int a = el[(k + 1) % 3], b = el[(k + 2) % 3];
      auto it = midpoint.find(detail::edge_key(a, b));
      if (it == midpoint.end() || it->second >= 0) continue;
      it->second = out.n_vertices();
      const Pt& pa = m.vertices[a];
      const Pt& pb = m.vertices[b];
      out.vertices.push_back({0.5 * (pa.t + pb.t), 0.5 * (pa.x + pb.x), 0.0});
      out.vertex_parents.push_back({a, b});
    }
  }

  // Emit (a, b, c) positively oriented with refinement edge (a, b); recurse
  // into children while their refinement edge is a marked (original) edge.
  auto emit = [&](auto&& self, int a, int b, int c, int parent_el) -> void {
    auto it = midpoint.find(detail::edge_key(a, b));
    if (it == midpoint.end()) {
      out.elements.push_back({a, b, c, -1});
      out.refinement_edge.push_back(2);
      out.parent.push_back(parent_el);
      return;
    }
    const int mid = it->second;
    self(self, c, a, mid, parent_el);
    self(self, b, c, mid, parent_el);
  };
  for (int e = 0; e < m.n_elements(); ++e) {
    const auto& el = m.elements[e];
    const int k = m.refinement_edge[e];
    emit(emit, el[(k + 1) % 3], el[(k + 2) % 3], el[k], e);
  }
  detail::build_facets(out);
  return out;
}

namespace detail {

// Compose one-generation bookkeeping: `fine` was produced from `mid`, which
// was produced from the original mesh; rewrite fine's records to refer to
// the original. Vertex ids of `mid` are a prefix of fine's, so parent edge
// endpoints stay valid, and {v, v} is left only on original vertices.
inline void compose_bookkeeping(SimplicialMesh& fine, const SimplicialMesh& mid) {
  for (auto& p : fine.parent)
    if (p >= 0) p = mid.parent[p];
  for (int v = 0; v < mid.n_vertices(); ++v)
    fine.vertex_parents[v] = mid.vertex_parents[v];
}

}  // namespace detail

// One uniform refinement step: triangles quarter via two full bisection
// sweeps, tetrahedra split red into 8 (Bey's rule, interior diagonal fixed
// between the midpoints of edges 02 and 13).
inline SimplicialMesh uniform_refine(const SimplicialMesh& m) {
  if (m.d == 1) {
    std::vector<int> all(m.n_elements());
    for (int e = 0; e < m.n_elements(); ++e) all[e] = e;
    SimplicialMesh mid = nvb_refine(m, all);
    std::vector<int> all2(mid.n_elements());
    for (int e = 0; e < mid.n_elements(); ++e) all2[e] = e;
    SimplicialMesh fine = nvb_refine(mid, all2);
    detail::compose_bookkeeping(fine, mid);
    return fine;
  }
  SimplicialMesh out;
  out.d = 2;
  out.t_end = m.t_end;
  out.xlo = m.xlo;
  out.xhi = m.xhi;
  out.vertices = m.vertices;
  out.vertex_parents.resize(m.n_vertices());
  for (int v = 0; v < m.n_vertices(); ++v) out.vertex_parents[v] = {v, v};
  std::unordered_map<std::int64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    auto [it, inserted] = midpoint.emplace(detail::edge_key(a, b), out.n_vertices());
    if (inserted) {
      const Pt& pa = m.vertices[a];
      const Pt& pb = m.vertices[b];
      out.vertices.push_back(
          {0.5 * (pa.t + pb.t), 0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
      out.vertex_parents.push_back({a, b});
    }
    return it->second;
  };
  for (int e = 0; e < m.n_elements(); ++e) {
    const auto& el = m.elements[e];
    const int v0 = el[0], v1 = el[1], v2 = el[2], v3 = el[3];
    const int m01 = mid(v0, v1), m02 = mid(v0, v2), m03 = mid(v0, v3);
    const int m12 = mid(v1, v2), m13 = mid(v1, v3), m23 = mid(v2, v3);
    const std::array<std::array<int, 4>, 8> children = {{{v0, m01, m02, m03},
                                                         {m01, v1, m12, m13},
                                                         {m02, m12, v2, m23},
                                                         {m03, m13, m23, v3},
                                                         {m01, m02, m03, m13},
                                                         {m01, m02, m12, m13},
                                                         {m02, m03, m13, m23},
                                                         {m02, m12, m13, m23}}};
    for (const auto& c : children) {
      out.elements.push_back(c);
      out.parent.push_back(e);
      if (element_measure(out, out.n_elements() - 1) < 0.0)
        std::swap(out.elements.back()[2], out.elements.back()[3]);
    }
  }
  detail::build_facets(out);
  return out;
}

inline TensorMesh uniform_refine(const TensorMesh& m) {
  TensorMesh out;
  out.t_end = m.t_end;
  out.x0 = m.x0;
  out.x1 = m.x1;
  auto halve = [](const std::vector<double>& g) {
    std::vector<double> r;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      r.push_back(g[i]);
      r.push_back(0.5 * (g[i] + g[i + 1]));
    }
    r.push_back(g.back());
    return r;
  };
  out.tgrid = halve(m.tgrid);
  out.xgrid = halve(m.xgrid);
  return out;
}

// Smallest interior angle over all triangles (radians). Bisection produces
// finitely many similarity classes, so this stabilizes under refinement.
inline double min_angle(const SimplicialMesh& m) {
  if (m.d != 1) throw unsupported_error("min_angle: triangle meshes only");
  double best = 4.0;
  for (const auto& el : m.elements)
    for (int k = 0; k < 3; ++k) {
      const Pt& a = m.vertices[el[k]];
      const Pt& b = m.vertices[el[(k + 1) % 3]];
      const Pt& c = m.vertices[el[(k + 2) % 3]];
      const double ux = b.t - a.t, uy = b.x - a.x;
      const double vx = c.t - a.t, vy = c.x - a.x;
      const double dot = ux * vx + uy * vy;
      const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
      best = std::min(best, std::acos(std::clamp(dot / (nu * nv), -1.0, 1.0)));
    }
  return best;
}

// Every facet is shared by at most two elements and single-owner facets lie
// on the domain boundary; hanging vertices would violate one of the two.
inline bool is_conforming(const SimplicialMesh& m) {
  const double tol = 1e-9;
  if (m.d == 1) {
    std::unordered_map<std::int64_t, int> count;
    for (const auto& el : m.elements)
      for (int k = 0; k < 3; ++k)
        count[detail::edge_key(el[(k + 1) % 3], el[(k + 2) % 3])]++;
    for (const auto& [key, c] : count) {
      if (c > 2) return false;
      if (c == 1) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffff);
        const Pt pm{0.5 * (m.vertices[a].t + m.vertices[b].t),
                    0.5 * (m.vertices[a].x + m.vertices[b].x), 0.0};
        const bool on_time_cap = std::abs(pm.t) <= tol || std::abs(pm.t - m.t_end) <= tol;
        if (!on_time_cap && !detail::on_spatial_boundary(m, pm, tol)) return false;
      }
    }
    return true;
  }
  std::unordered_map<std::string, int> count;
  for (const auto& el : m.elements)
    for (int k = 0; k < 4; ++k) {
      std::array<int, 3> f{el[(k + 1) % 4], el[(k + 2) % 4], el[(k + 3) % 4]};
      std::sort(f.begin(), f.end());
      count[std::to_string(f[0]) + "," + std::to_string(f[1]) + "," +
            std::to_string(f[2])]++;
    }
  for (const auto& [key, c] : count)
    if (c > 2) return false;
  return true;
}

// Legacy-VTK text export; vertices are written as (t, x, y). An optional
// vertex scalar field is attached as point data named `field_name`.
inline void write_vtk(const SimplicialMesh& m, const std::string& path,
                      const std::vector<double>& vertex_field = {},
                      const std::string& field_name = "u") {
  std::ofstream os(path);
  if (!os) throw data_error("write_vtk: cannot open " + path);
  os << "# vtk DataFile Version 3.0\nspace-time mesh\nASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.n_vertices() << " double\n";
  char buf[96];
  for (const auto& p : m.vertices) {
    std::snprintf(buf, sizeof buf, "%.16e %.16e %.16e\n", p.t, p.x, p.y);
    os << buf;
  }
  const int nv = m.verts_per_element();
  os << "CELLS " << m.n_elements() << " " << m.n_elements() * (nv + 1) << "\n";
  for (const auto& el : m.elements) {
    os << nv;
    for (int k = 0; k < nv; ++k) os << " " << el[k];
    os << "\n";
  }
  os << "CELL_TYPES " << m.n_elements() << "\n";
  for (int e = 0; e < m.n_elements(); ++e) os << (m.d == 1 ? 5 : 10) << "\n";
  if (!vertex_field.empty()) {
    os << "POINT_DATA " << m.n_vertices() << "\n";
    os << "SCALARS " << field_name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : vertex_field) {
      std::snprintf(buf, sizeof buf, "%.16e\n", v);
      os << buf;
    }
  }
}

inline void write_vtk(const TensorMesh& m, const std::string& path,
                      const std::vector<double>& node_field = {},
                      const std::string& field_name = "u") {
  std::ofstream os(path);
  if (!os) throw data_error("write_vtk: cannot open " + path);
  const int nt = m.nt(), nx = m.nx();
  os << "# vtk DataFile Version 3.0\nspace-time tensor mesh\nASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.n_nodes() << " double\n";
  char buf[96];
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j <= nx; ++j) {
      std::snprintf(buf, sizeof buf, "%.16e %.16e 0\n", m.tgrid[i], m.xgrid[j]);
      os << buf;
    }
  os << "CELLS " << m.n_elements() << " " << m.n_elements() * 5 << "\n";
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j)
      os << "4 " << m.node(i, j) << " " << m.node(i + 1, j) << " "
         << m.node(i + 1, j + 1) << " " << m.node(i, j + 1) << "\n";
  os << "CELL_TYPES " << m.n_elements() << "\n";
  for (int e = 0; e < m.n_elements(); ++e) os << 9 << "\n";
  if (!node_field.empty()) {
    os << "POINT_DATA " << m.n_nodes() << "\n";
    os << "SCALARS " << field_name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : node_field) {
      std::snprintf(buf, sizeof buf, "%.16e\n", v);
      os << buf;
    }
  }
}

}  // namespace parobs
