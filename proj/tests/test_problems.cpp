#include <doctest.h>

#include <cmath>

#include "parobs/core.hpp"
#include "parobs/problem.hpp"

using namespace parobs;

TEST_CASE("all benchmark factories pass structural validation") {
  CHECK_NOTHROW(validate_problem(stefan_problem(), 2000));
  CHECK_NOTHROW(validate_problem(pyramid_problem(), 2000));
  CHECK_NOTHROW(validate_problem(american_option_problem(), 2000));
  CHECK_NOTHROW(validate_problem(heat2d_problem(), 2000));
}

TEST_CASE("validation rejects broken data") {
  ProblemSpec p = pyramid_problem();
  p.g = [](const Pt&) { return 1.0; };  // positive on the lateral boundary
  CHECK_THROWS_AS(validate_problem(p, 100), data_error);

  ProblemSpec q = pyramid_problem();
  q.alpha = 0.0;
  CHECK_THROWS_AS(validate_problem(q, 100), data_error);

  ProblemSpec r = pyramid_problem();
  r.lambda_weight = -1.0;
  CHECK_THROWS_AS(validate_problem(r, 100), data_error);

  ProblemSpec s = pyramid_problem();
  s.c = [](const Pt&) { return -1.0; };  // -div b / 2 + c < 0
  CHECK_THROWS_AS(validate_problem(s, 100), data_error);

  ProblemSpec t = pyramid_problem();
  t.f = [](const Pt&) { return std::nan(""); };
  CHECK_THROWS_AS(validate_problem(t, 100), data_error);
}

TEST_CASE("melting benchmark: data values and exact-solution structure") {
  const ProblemSpec p = stefan_problem();
  CHECK(p.d == 1);
  CHECK(p.has_exact);
  CHECK(p.lambda_weight == 1.0);

  // g(t, x) = -(e^t - t - 1)(1 - x).
  CHECK(p.g(Pt{1.0, 0.0, 0.0}) == doctest::Approx(-(std::exp(1.0) - 2.0)).epsilon(1e-15));
  CHECK(p.g(Pt{0.0, 0.3, 0.0}) == 0.0);
  CHECK(p.g(Pt{0.5, 1.0, 0.0}) == 0.0);

  // On the coincidence set {t <= x} the solution sits on the obstacle and the
  // multiplier is one; elsewhere it is strictly above and the multiplier zero.
  const Pt on{0.3, 0.7, 0.0};
  CHECK(p.exact_u(on) == doctest::Approx(p.g(on)).epsilon(1e-15));
  CHECK(p.exact_lambda(on) == 1.0);
  const Pt off{0.7, 0.3, 0.0};
  CHECK(p.exact_u(off) > p.g(off) + 1e-3);
  CHECK(p.exact_lambda(off) == 0.0);

  // Initial and lateral conditions; flux convention sigma = -A grad u.
  CHECK(p.exact_u(Pt{0.0, 0.4, 0.0}) == 0.0);
  CHECK(p.exact_u(Pt{0.6, 1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-15));
  for (double t : {0.2, 0.55, 0.9})
    for (double x : {0.1, 0.5, 0.85}) {
      const Pt q{t, x, 0.0};
      CHECK(p.exact_sigma(q)[0] == doctest::Approx(-p.exact_grad_u(q)[0]).epsilon(1e-15));
      CHECK(p.exact_u(q) >= p.g(q) - 1e-15);
    }

  // f = dt u + L u - lambda away from the free boundary (smooth regions).
  for (const Pt& q : {Pt{0.2, 0.8, 0.0}, Pt{0.8, 0.2, 0.0}}) {
    const double eps = 1e-5;
    const double ut = (p.exact_u(Pt{q.t + eps, q.x, 0.0}) - p.exact_u(Pt{q.t - eps, q.x, 0.0})) /
                      (2.0 * eps);
    const double uxx = (p.exact_u(Pt{q.t, q.x + eps, 0.0}) - 2.0 * p.exact_u(q) +
                        p.exact_u(Pt{q.t, q.x - eps, 0.0})) /
                       (eps * eps);
    CHECK(ut - uxx - p.exact_lambda(q) == doctest::Approx(p.f(q)).epsilon(1e-5));
  }
}

TEST_CASE("pyramid benchmark: obstacle geometry") {
  const ProblemSpec p = pyramid_problem();
  CHECK_FALSE(p.has_exact);
  CHECK(p.g(Pt{0.5, 0.5, 0.0}) == 0.25);
  CHECK(p.g(Pt{0.25, 0.5, 0.0}) == 0.0);
  CHECK(p.g(Pt{0.5, 0.1, 0.0}) == 0.0);
  CHECK(p.g(Pt{0.4, 0.6, 0.0}) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(p.u0(Pt{0.0, 0.5, 0.0}) == 0.0);
  // Slopes of the active face.
  CHECK(p.g_t(Pt{0.4, 0.5, 0.0}) == 1.0);
  CHECK(p.g_t(Pt{0.6, 0.5, 0.0}) == -1.0);
  CHECK(p.g_x(Pt{0.5, 0.4, 0.0})[0] == 1.0);
  CHECK(p.g_x(Pt{0.5, 0.6, 0.0})[0] == -1.0);
  CHECK(p.g_t(Pt{0.1, 0.5, 0.0}) == 0.0);  // below the cut
}

TEST_CASE("American option: lifted payoff and coefficients") {
  const ProblemSpec p = american_option_problem();
  const double a = 0.5 * 0.4 * 0.4;
  CHECK(p.alpha == doctest::Approx(a).epsilon(1e-15));
  CHECK(p.b(Pt{0.5, 0.0, 0.0})[0] == doctest::Approx(a - 0.06).epsilon(1e-15));
  CHECK(p.c(Pt{0.5, 0.0, 0.0}) == 0.06);
  CHECK(p.lambda_weight == doctest::Approx(64.0).epsilon(1e-15));
  CHECK(p.default_variant == EstimatorVariant::hat);

  // The lift removes the boundary values of the payoff.
  CHECK(p.g(Pt{0.3, -1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.g(Pt{0.3, 7.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  // The obstacle is time-independent and the initial datum sits on it.
  for (double x : {-0.5, 0.0, 2.0, std::log(100.0), 5.0}) {
    CHECK(p.g(Pt{0.7, x, 0.0}) == p.g(Pt{0.1, x, 0.0}));
    CHECK(p.u0(Pt{0.0, x, 0.0}) == p.g(Pt{0.0, x, 0.0}));
    CHECK(p.g_t(Pt{0.5, x, 0.0}) == 0.0);
  }
  // Above log(strike) the payoff vanishes and only the affine lift remains.
  const double payoff_left = 100.0 - std::exp(-1.0);
  const double x = 6.0;
  CHECK(p.g(Pt{0.2, x, 0.0}) ==
        doctest::Approx(-payoff_left * (7.0 - x) / 8.0).epsilon(1e-13));

  CHECK_THROWS_AS(american_option_problem(0.0), data_error);
  CHECK_THROWS_AS(american_option_problem(-0.2), data_error);
  CHECK_THROWS_AS(american_option_problem(0.4, -0.01), data_error);
}

TEST_CASE("two-dimensional benchmark: blend and exact solution") {
  const ProblemSpec p = heat2d_problem();
  CHECK(p.d == 2);
  CHECK(p.has_exact);
  CHECK(p.lambda_weight == doctest::Approx(2.0).epsilon(1e-15));

  // The C^1 cubic joining (1/2, 1/4) to (3/4, 0) with flat ends is
  // 32 x^3 - 60 x^2 + 36 x - 6.75; the obstacle uses it for 1/2 <= x <= 3/4.
  auto cubic = [](double x) { return ((32.0 * x - 60.0) * x + 36.0) * x - 6.75; };
  for (double x : {0.5, 0.55, 0.6, 0.7, 0.75})
    for (double t : {0.3, 0.9}) {
      const Pt q{t, x, 0.4};
      CHECK(p.g(q) == doctest::Approx(t * cubic(x) * 0.6 * 0.4).epsilon(1e-13));
    }
  CHECK(p.g(Pt{0.5, 0.8, 0.5}) == 0.0);

  // Coincidence for x < 1/2, gap and zero multiplier beyond.
  for (double t : {0.25, 0.75})
    for (double y : {0.3, 0.6}) {
      const Pt left{t, 0.3, y};
      CHECK(p.exact_u(left) == doctest::Approx(p.g(left)).epsilon(1e-15));
      CHECK(p.exact_lambda(left) >= 0.0);
      const Pt right{t, 0.65, y};
      CHECK(p.exact_u(right) >= p.g(right) - 1e-15);
      CHECK(p.exact_lambda(right) == 0.0);
    }

  // sigma = -grad u and homogeneous initial/lateral values.
  const Pt q{0.6, 0.35, 0.7};
  CHECK(p.exact_sigma(q)[0] == doctest::Approx(-p.exact_grad_u(q)[0]).epsilon(1e-15));
  CHECK(p.exact_sigma(q)[1] == doctest::Approx(-p.exact_grad_u(q)[1]).epsilon(1e-15));
  CHECK(p.exact_u(Pt{0.0, 0.4, 0.6}) == 0.0);
  CHECK(p.exact_u(Pt{0.5, 0.0, 0.6}) == 0.0);
  CHECK(p.exact_u(Pt{0.5, 0.4, 1.0}) == 0.0);

  // f = dt u - Delta u - lambda for the known polynomial solution.
  for (const Pt& s : {Pt{0.3, 0.2, 0.6}, Pt{0.8, 0.7, 0.3}}) {
    const double ut = (1.0 - s.x) * s.x * (1.0 - s.y) * s.y;
    const double lap = -2.0 * s.t * ((1.0 - s.y) * s.y + (1.0 - s.x) * s.x);
    CHECK(ut - lap - p.exact_lambda(s) == doctest::Approx(p.f(s)).epsilon(1e-13));
  }

  // Problem diameter feeds the residual weight: sqrt(2)^2 = 2.
  CHECK(sqr(p.diam()) == doctest::Approx(p.lambda_weight).epsilon(1e-15));
}
