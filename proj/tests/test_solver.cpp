#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "parobs/assembly.hpp"
#include "parobs/mesh.hpp"
#include "parobs/problem.hpp"
#include "parobs/solver.hpp"

using namespace parobs;

namespace {

QpSystem make_qp(const Eigen::MatrixXd& S, const Eigen::VectorXd& F,
                 const std::vector<std::pair<int, double>>& bounds) {
  QpSystem qp;
  qp.n_u = static_cast<int>(S.rows());  // plain box QP; field split irrelevant
  qp.F = F;
  qp.lower_bounds = bounds;
  std::vector<detail::Triplet> trip;
  for (int i = 0; i < S.rows(); ++i)
    for (int j = 0; j < S.cols(); ++j)
      if (S(i, j) != 0.0) trip.push_back({i, j, S(i, j)});
  qp.S = detail::triplets_to_csr(static_cast<int>(S.rows()), trip);
  return qp;
}

Eigen::MatrixXd random_spd(std::mt19937& rng, int n) {
  std::normal_distribution<double> dist;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
  return A.transpose() * A + n * Eigen::MatrixXd::Identity(n, n);
}

void check_kkt(const QpSystem& qp, const PdasResult& r, double tol) {
  const Eigen::VectorXd resid = spmv(qp.S, r.x) - qp.F - r.m;
  CHECK(resid.cwiseAbs().maxCoeff() <= tol);
  for (const auto& [i, l] : qp.lower_bounds) {
    CHECK(r.x[i] >= l - tol);
    CHECK(r.m[i] >= -tol);
    CHECK(std::abs(r.m[i] * (r.x[i] - l)) <= tol);
  }
}

}  // namespace

TEST_CASE("active-set solve of the two-dof reference trace") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
  S(0, 0) = 2.0;
  S(1, 1) = 2.0;
  Eigen::VectorXd F(2);
  F << -2.0, 2.0;
  const QpSystem qp = make_qp(S, F, {{0, 0.0}, {1, 0.0}});

  const PdasResult r = pdas_solve(qp);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(r.x[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.m[0] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(r.m[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-13));
  CHECK(r.active_size == 1);

  // Restarting from the solution terminates after a single pass.
  const PdasResult r2 = pdas_solve(qp, r.x);
  CHECK(r2.converged);
  CHECK(r2.iterations == 1);
  CHECK((r2.x - r.x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("an inactive constraint set converges in one pass") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
  S(0, 0) = 2.0;
  S(1, 1) = 2.0;
  Eigen::VectorXd F(2);
  F << 2.0, 4.0;  // unconstrained minimizer (1, 2) is feasible
  const QpSystem qp = make_qp(S, F, {{0, 0.0}, {1, 0.0}});
  const PdasResult r = pdas_solve(qp);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.active_size == 0);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("active-set solve agrees with exhaustive enumeration") {
  std::mt19937 rng(12345);
  std::uniform_int_distribution<int> size_dist(2, 12);
  std::uniform_int_distribution<int> nc_dist(1, 8);
  std::normal_distribution<double> val;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size_dist(rng);
    const int nc = std::min(nc_dist(rng), n);
    const Eigen::MatrixXd S = random_spd(rng, n);
    Eigen::VectorXd F(n);
    for (int i = 0; i < n; ++i) F[i] = 3.0 * val(rng);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::pair<int, double>> bounds;
    for (int k = 0; k < nc; ++k) bounds.emplace_back(idx[k], 0.5 * val(rng));
    std::sort(bounds.begin(), bounds.end());
    const QpSystem qp = make_qp(S, F, bounds);

    const PdasResult ours = pdas_solve(qp);
    const PdasResult ref = oracle_qp_solve(qp);
    const double scale = 1.0 + ref.x.cwiseAbs().maxCoeff();
    CHECK((ours.x - ref.x).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    check_kkt(qp, ours, 1e-8 * (1.0 + F.cwiseAbs().maxCoeff()));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("active-set solve on an assembled obstacle system matches enumeration") {
  const ProblemSpec prob = stefan_problem();
  const Mesh mesh = Mesh(make_square_mesh(2, 2));
  const Spaces sp = build_spaces(mesh, prob.g);
  const QpSystem qp = assemble_system(prob, mesh, sp, 4);
  REQUIRE(qp.n() == 20);
  REQUIRE(qp.lower_bounds.size() == 11);

  const PdasResult ours = pdas_solve(qp);
  const PdasResult ref = oracle_qp_solve(qp);
  const double scale = 1.0 + ref.x.cwiseAbs().maxCoeff();
  CHECK(ours.converged);
  CHECK((ours.x - ref.x).cwiseAbs().maxCoeff() <= 1e-8 * scale);
  check_kkt(qp, ours, 1e-8 * (1.0 + qp.F.cwiseAbs().maxCoeff()));

  // The solution is a functional minimizer among feasible competitors.
  std::mt19937 rng(99);
  std::normal_distribution<double> val;
  const double j_star = functional_value(qp, ours.x);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y = ours.x;
    for (int i = 0; i < y.size(); ++i) y[i] += 0.1 * val(rng);
    for (const auto& [i, l] : qp.lower_bounds) y[i] = std::max(y[i], l);
    CHECK(functional_value(qp, y) >= j_star - 1e-12);
  }

  const PdasResult warm = pdas_solve(qp, ours.x);
  CHECK(warm.iterations == 1);
}

TEST_CASE("moderate random systems satisfy the KKT conditions") {
  std::mt19937 rng(777);
  std::normal_distribution<double> val;
  const int n = 50;
  const Eigen::MatrixXd S = random_spd(rng, n);
  Eigen::VectorXd F(n);
  for (int i = 0; i < n; ++i) F[i] = 5.0 * val(rng);
  std::vector<std::pair<int, double>> bounds;
  for (int i = 0; i < n; i += 2) bounds.emplace_back(i, 0.2 * val(rng));
  const QpSystem qp = make_qp(S, F, bounds);
  const PdasResult r = pdas_solve(qp);
  CHECK(r.converged);
  check_kkt(qp, r, 1e-7 * (1.0 + F.cwiseAbs().maxCoeff()));
}

TEST_CASE("direct and iterative linear paths agree") {
  std::mt19937 rng(31);
  const int n = 80;
  const Eigen::MatrixXd Sd = random_spd(rng, n);
  std::normal_distribution<double> val;
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = val(rng);
  Eigen::SparseMatrix<double> S = Sd.sparseView();

  const Eigen::VectorXd x_direct = sparse_spd_solve(S, rhs);  // nnz below threshold
  SolveOpts force_cg;
  force_cg.direct_nnz_threshold = 0;
  const Eigen::VectorXd x_cg = sparse_spd_solve(S, rhs, force_cg);
  const double scale = 1.0 + x_direct.cwiseAbs().maxCoeff();
  CHECK((x_direct - x_cg).cwiseAbs().maxCoeff() <= 1e-8 * scale);
}

TEST_CASE("indefinite matrices are rejected by the direct path") {
  Eigen::SparseMatrix<double> S(2, 2);
  S.insert(0, 0) = 1.0;
  S.insert(1, 1) = -1.0;
  S.makeCompressed();
  Eigen::VectorXd rhs(2);
  rhs << 1.0, 1.0;
  CHECK_THROWS_AS(sparse_spd_solve(S, rhs), linalg_error);
}

TEST_CASE("enumeration rejects oversized systems") {
  std::mt19937 rng(5);
  const int n = 21;
  const QpSystem qp = make_qp(random_spd(rng, n), Eigen::VectorXd::Zero(n), {{0, 0.0}});
  CHECK_THROWS_AS(oracle_qp_solve(qp), std::invalid_argument);
}
