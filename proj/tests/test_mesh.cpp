#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "parobs/mesh.hpp"

using namespace parobs;

namespace {

int count_class(const SimplicialMesh& m, FacetClass c) {
  int n = 0;
  for (const auto& f : m.facets)
    if (f.cls == c) ++n;
  return n;
}

}  // namespace

TEST_CASE("unit square seed meshes have the expected sizes") {
  const SimplicialMesh m1 = make_square_mesh(1, 1);
  CHECK(m1.n_elements() == 2);
  CHECK(m1.n_vertices() == 4);
  CHECK(m1.facets.size() == 4);
  CHECK(count_class(m1, FacetClass::bottom) == 1);
  CHECK(count_class(m1, FacetClass::top) == 1);
  CHECK(count_class(m1, FacetClass::lateral) == 2);
  CHECK(total_measure(m1) == doctest::Approx(1.0).epsilon(1e-12));

  const SimplicialMesh m2 = make_square_mesh(2, 2);
  CHECK(m2.n_elements() == 8);
  CHECK(m2.n_vertices() == 9);
  CHECK(m2.facets.size() == 8);
  CHECK(total_measure(m2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(is_conforming(m2));

  const SimplicialMesh mb = make_square_mesh(3, 5, 2.0, -1.0, 3.0);
  CHECK(mb.n_elements() == 30);
  CHECK(total_measure(mb) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("every element is positively oriented") {
  for (const SimplicialMesh& m :
       {make_square_mesh(2, 3), make_square_mesh(1, 1), make_cube_mesh(2)})
    for (int e = 0; e < m.n_elements(); ++e) CHECK(element_measure(m, e) > 0.0);
}

TEST_CASE("cube seed meshes have the expected sizes") {
  const SimplicialMesh c1 = make_cube_mesh(1);
  CHECK(c1.n_elements() == 6);
  CHECK(c1.n_vertices() == 8);
  CHECK(total_measure(c1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c1.facets.size() == 12);
  CHECK(count_class(c1, FacetClass::bottom) == 2);
  CHECK(count_class(c1, FacetClass::top) == 2);

  const SimplicialMesh c2 = make_cube_mesh(2);
  CHECK(c2.n_elements() == 48);
  CHECK(c2.n_vertices() == 27);
  CHECK(total_measure(c2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(is_conforming(c2));
}

TEST_CASE("bisecting one triangle of the unit square bisects its neighbor too") {
  const SimplicialMesh m = make_square_mesh(1, 1);
  const SimplicialMesh r = nvb_refine(m, {0});
  CHECK(r.n_elements() == 4);  // shared hypotenuse, so both parents split
  CHECK(r.n_vertices() == 5);
  CHECK(is_conforming(r));
  CHECK(total_measure(r) == doctest::Approx(1.0).epsilon(1e-12));
  for (int e = 0; e < r.n_elements(); ++e) {
    CHECK(r.parent[e] >= 0);
    CHECK(r.parent[e] < m.n_elements());
  }

  const SimplicialMesh all = nvb_refine(m, {0, 1});
  CHECK(all.n_elements() == 4);
  CHECK(all.n_vertices() == 5);
}

TEST_CASE("refining nothing returns the mesh unchanged") {
  const SimplicialMesh m = make_square_mesh(2, 2);
  const SimplicialMesh r = nvb_refine(m, {});
  CHECK(r.n_elements() == m.n_elements());
  CHECK(r.n_vertices() == m.n_vertices());
}

TEST_CASE("marking an invalid element id throws") {
  const SimplicialMesh m = make_square_mesh(1, 1);
  CHECK_THROWS_AS(nvb_refine(m, {7}), std::invalid_argument);
  CHECK_THROWS_AS(nvb_refine(m, {-1}), std::invalid_argument);
}

TEST_CASE("uniform refinement quarters triangles and eighths tetrahedra") {
  const SimplicialMesh m = make_square_mesh(1, 1);
  const SimplicialMesh r = uniform_refine(m);
  CHECK(r.n_elements() == 8);
  CHECK(r.n_vertices() == 9);
  CHECK(is_conforming(r));
  CHECK(total_measure(r) == doctest::Approx(1.0).epsilon(1e-12));

  const SimplicialMesh c = make_cube_mesh(1);
  const SimplicialMesh rc = uniform_refine(c);
  CHECK(rc.n_elements() == 48);
  CHECK(is_conforming(rc));
  CHECK(total_measure(rc) == doctest::Approx(1.0).epsilon(1e-12));
  for (int e = 0; e < rc.n_elements(); ++e) CHECK(element_measure(rc, e) > 0.0);

  const TensorMesh t = make_tensor_mesh(2, 2);
  const TensorMesh rt = uniform_refine(t);
  CHECK(rt.nt() == 4);
  CHECK(rt.nx() == 4);
  CHECK(rt.n_elements() == 16);
  CHECK(total_measure(rt) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("repeated bisection keeps the minimum angle at 45 degrees") {
  // Every triangle in this family is a right isosceles one whose refinement
  // edge is its hypotenuse, so bisection reproduces the family.
  const double quarter_pi = std::acos(-1.0) / 4.0;
  SimplicialMesh m = make_square_mesh(2, 2);
  CHECK(min_angle(m) == doctest::Approx(quarter_pi).epsilon(1e-10));
  for (int sweep = 0; sweep < 3; ++sweep) {
    std::vector<int> marks;
    for (int e = 0; e < m.n_elements(); e += 3) marks.push_back(e);
    m = nvb_refine(m, marks);
    CHECK(is_conforming(m));
    CHECK(min_angle(m) == doctest::Approx(quarter_pi).epsilon(1e-10));
    CHECK(total_measure(m) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("midpoint vertices track their parent edge") {
  const SimplicialMesh m = make_square_mesh(1, 1);
  const SimplicialMesh r = nvb_refine(m, {0});
  int midpoints = 0;
  for (int v = 0; v < r.n_vertices(); ++v) {
    const auto [a, b] = r.vertex_parents[v];
    if (a == b) {
      CHECK(v < m.n_vertices());
    } else {
      ++midpoints;
      const Pt pa = m.vertices[a], pb = m.vertices[b];
      CHECK(r.vertices[v].t == doctest::Approx(0.5 * (pa.t + pb.t)).epsilon(1e-14));
      CHECK(r.vertices[v].x == doctest::Approx(0.5 * (pa.x + pb.x)).epsilon(1e-14));
    }
  }
  CHECK(midpoints == 1);
}

TEST_CASE("tensor meshes expose their grid layout") {
  const TensorMesh t = make_tensor_mesh(2, 3, 2.0, -1.0, 1.0);
  CHECK(t.n_elements() == 6);
  CHECK(t.n_nodes() == 12);
  CHECK(t.node(1, 2) == 6);
  CHECK(total_measure(t) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(element_measure(t, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("vtk export writes a legacy grid file") {
  const std::string path = "test_mesh_out.vtk";
  write_vtk(make_square_mesh(2, 2), path);
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string first;
  std::getline(is, first);
  CHECK(first.rfind("# vtk DataFile", 0) == 0);
  is.close();
  std::remove(path.c_str());
}
