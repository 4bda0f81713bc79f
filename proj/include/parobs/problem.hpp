#pragma once

// Problem data for the first-order system formulation of
//
//   dt u - div_x(A grad_x u) + b . grad_x u + c u >= f,   u >= g,
//   (dt u + L u - f)(u - g) = 0,  u = 0 laterally,  u(0) = u0,
//
// posed on the cylinder (0,T) x Omega with Omega an interval (d = 1) or the
// unit square (d = 2). Coefficients and data are callables on space-time
// points; the obstacle additionally carries its time and space derivatives,
// which the penetration part of the error estimator samples.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "core.hpp"

namespace parobs {

enum class EstimatorVariant { tilde, hat };

struct ProblemSpec {
  std::string name;
  int d = 1;
  double t_end = 1.0;
  std::array<double, 2> xlo{0.0, 0.0};
  std::array<double, 2> xhi{1.0, 1.0};

  MatFn A;             // SPD diffusion, smallest eigenvalue >= alpha
  double alpha = 1.0;  // uniform ellipticity constant of A
  VecFn b;
  ScalarFn c;
  ScalarFn div_b;      // spatial divergence of b
  double b_sup = 0.0;  // sup-norm of |b|
  double c_sup = 0.0;  // sup-norm of c

  ScalarFn f, g, u0;
  ScalarFn g_t;  // dt g
  VecFn g_x;     // grad_x g

  double lambda_weight = 0.0;  // residual weight; factories set diam(Omega)^2
  EstimatorVariant default_variant = EstimatorVariant::tilde;

  bool has_exact = false;
  ScalarFn exact_u;
  VecFn exact_grad_u;   // spatial gradient
  VecFn exact_sigma;    // -A grad_x u
  ScalarFn exact_lambda;

  double diam() const {
    const double dx = xhi[0] - xlo[0];
    if (d == 1) return dx;
    return std::hypot(dx, xhi[1] - xlo[1]);
  }
};

// Sampling validation of the structural assumptions: ellipticity, the sign
// condition -div b / 2 + c >= 0 (symmetric-positive bilinear form), a
// nonpositive obstacle on the lateral boundary, and u0 >= g(0). Uses Halton
// points; throws data_error on the first violation.
inline void validate_problem(const ProblemSpec& p, int n_samples = 10000) {
  if (!(p.alpha > 0.0)) throw data_error(p.name + ": alpha must be positive");
  if (!(p.lambda_weight > 0.0)) throw data_error(p.name + ": lambda weight must be positive");
  const double tol = 1e-12;
  for (int i = 0; i < n_samples; ++i) {
    Pt q;
    q.t = p.t_end * halton(i, 2);
    q.x = p.xlo[0] + (p.xhi[0] - p.xlo[0]) * halton(i, 3);
    if (p.d == 2) q.y = p.xlo[1] + (p.xhi[1] - p.xlo[1]) * halton(i, 5);
    const SymMat2 a = p.A(q);
    double mineig = a.a11;
    if (p.d == 2) {
      const double tr = a.a11 + a.a22;
      const double det = a.a11 * a.a22 - a.a12 * a.a12;
      mineig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    }
    if (mineig < p.alpha - 1e-10)
      throw data_error(p.name + ": diffusion eigenvalue below alpha at a sample point");
    if (-0.5 * p.div_b(q) + p.c(q) < -tol)
      throw data_error(p.name + ": -div b / 2 + c is negative at a sample point");
    Pt q0 = q;
    q0.t = 0.0;
    if (p.g(q0) > p.u0(q0) + 1e-10)
      throw data_error(p.name + ": obstacle exceeds the initial datum at a sample point");
    Pt ql = q;
    ql.x = (i % 2 == 0) ? p.xlo[0] : p.xhi[0];
    if (p.d == 2 && i % 4 >= 2) {
      ql.x = q.x;
      ql.y = (i % 2 == 0) ? p.xlo[1] : p.xhi[1];
    }
    if (p.g(ql) > 1e-10)
      throw data_error(p.name + ": obstacle is positive on the lateral boundary");
    for (double v : {p.f(q), p.g(q), p.u0(q0)})
      if (!std::isfinite(v)) throw data_error(p.name + ": non-finite data sample");
  }
}

namespace detail {

inline void set_trivial_coefficients(ProblemSpec& p, double a_scale) {
  p.A = [a_scale](const Pt&) { return scaled_identity(a_scale); };
  p.alpha = a_scale;
  p.b = [](const Pt&) { return Vec2{0.0, 0.0}; };
  p.c = [](const Pt&) { return 0.0; };
  p.div_b = [](const Pt&) { return 0.0; };
  p.b_sup = 0.0;
  p.c_sup = 0.0;
}

}  // namespace detail

// One-phase melting benchmark on (0,1) x (0,1) with known solution: the free
// boundary is the diagonal t = x, the multiplier is the indicator of the
// coincidence set {t <= x}.
inline ProblemSpec stefan_problem() {
  ProblemSpec p;
  p.name = "stefan";
  p.d = 1;
  p.t_end = 1.0;
  p.xlo = {0.0, 0.0};
  p.xhi = {1.0, 0.0};
  detail::set_trivial_coefficients(p, 1.0);
  auto h = [](double t) { return std::exp(t) - t - 1.0; };
  auto hp = [](double t) { return std::exp(t) - 1.0; };
  p.f = [hp](const Pt& q) { return -1.0 - hp(q.t) * (1.0 - q.x); };
  p.g = [h](const Pt& q) { return -h(q.t) * (1.0 - q.x); };
  p.g_t = [hp](const Pt& q) { return -hp(q.t) * (1.0 - q.x); };
  p.g_x = [h](const Pt& q) { return Vec2{h(q.t), 0.0}; };
  p.u0 = [](const Pt&) { return 0.0; };
  p.lambda_weight = 1.0;
  p.has_exact = true;
  p.exact_u = [h](const Pt& q) {
    double v = -h(q.t) * (1.0 - q.x);
    if (q.t > q.x) v += std::exp(q.t - q.x) + q.x - q.t - 1.0;
    return v;
  };
  p.exact_grad_u = [h](const Pt& q) {
    double dv = h(q.t);
    if (q.t > q.x) dv += 1.0 - std::exp(q.t - q.x);
    return Vec2{dv, 0.0};
  };
  p.exact_sigma = [grad = p.exact_grad_u](const Pt& q) {
    const Vec2 gr = grad(q);
    return Vec2{-gr[0], 0.0};
  };
  p.exact_lambda = [](const Pt& q) { return q.t <= q.x ? 1.0 : 0.0; };
  return p;
}

// Homogeneous data with a pyramid obstacle: g = (dist to the boundary of the
// unit space-time square) - 1/4, cut at zero. No exact solution; estimator
// benchmarks only.
inline ProblemSpec pyramid_problem() {
  ProblemSpec p;
  p.name = "pyramid";
  p.d = 1;
  p.t_end = 1.0;
  p.xlo = {0.0, 0.0};
  p.xhi = {1.0, 0.0};
  detail::set_trivial_coefficients(p, 1.0);
  p.f = [](const Pt&) { return 0.0; };
  p.u0 = [](const Pt&) { return 0.0; };
  p.g = [](const Pt& q) {
    const double dist = std::min(std::min(q.t, 1.0 - q.t), std::min(q.x, 1.0 - q.x));
    return std::max(dist - 0.25, 0.0);
  };
  // Derivatives of the active min-branch; zero where the cut is inactive.
  p.g_t = [](const Pt& q) {
    const double dist = std::min(std::min(q.t, 1.0 - q.t), std::min(q.x, 1.0 - q.x));
    if (dist <= 0.25) return 0.0;
    if (dist == q.t) return 1.0;
    if (dist == 1.0 - q.t) return -1.0;
    return 0.0;
  };
  p.g_x = [](const Pt& q) {
    const double dist = std::min(std::min(q.t, 1.0 - q.t), std::min(q.x, 1.0 - q.x));
    if (dist <= 0.25 || dist == q.t || dist == 1.0 - q.t) return Vec2{0.0, 0.0};
    return Vec2{dist == q.x ? 1.0 : -1.0, 0.0};
  };
  p.lambda_weight = 1.0;
  return p;
}

// American put option in log-price coordinates on (0,1) x (L,R) after
// subtracting the affine lift of the payoff's boundary values. Defaults are
// the standard test data; volatility must be positive and the interest rate
// nonnegative. The weighted (mesh-size) penetration estimator is the
// problem's default.
inline ProblemSpec american_option_problem(double volatility = 0.4, double rate = 0.06,
                                           double strike = 100.0, double L = -1.0,
                                           double R = 7.0, double t_end = 1.0) {
  if (!(volatility > 0.0)) throw data_error("american_option: volatility must be positive");
  if (rate < 0.0) throw data_error("american_option: rate must be nonnegative");
  ProblemSpec p;
  p.name = "american_option";
  p.d = 1;
  p.t_end = t_end;
  p.xlo = {L, 0.0};
  p.xhi = {R, 0.0};
  const double a = 0.5 * volatility * volatility;
  p.A = [a](const Pt&) { return scaled_identity(a); };
  p.alpha = a;
  const double bcoef = a - rate;  // b = -(r - vol^2/2)
  p.b = [bcoef](const Pt&) { return Vec2{bcoef, 0.0}; };
  p.c = [rate](const Pt&) { return rate; };
  p.div_b = [](const Pt&) { return 0.0; };
  p.b_sup = std::abs(bcoef);
  p.c_sup = rate;
  const double payoff_left = std::max(strike - std::exp(L), 0.0);
  const double lift_slope = -payoff_left / (R - L);
  auto lift = [payoff_left, L, R](double x) { return payoff_left * (R - x) / (R - L); };
  p.f = [rate, a, lift_slope, lift](const Pt& q) {
    return (rate - a) * lift_slope - rate * lift(q.x);
  };
  p.g = [strike, lift](const Pt& q) {
    return std::max(strike - std::exp(q.x), 0.0) - lift(q.x);
  };
  p.g_t = [](const Pt&) { return 0.0; };
  p.g_x = [strike, lift_slope](const Pt& q) {
    const double payoff_slope = std::exp(q.x) < strike ? -std::exp(q.x) : 0.0;
    return Vec2{payoff_slope - lift_slope, 0.0};
  };
  p.u0 = [gfun = p.g](const Pt& q) {
    Pt q0 = q;
    q0.t = 0.0;
    return gfun(q0);
  };
  p.lambda_weight = sqr(R - L);
  p.default_variant = EstimatorVariant::hat;
  return p;
}

// Two space dimensions on the unit cube with known polynomial solution
// u = t(1-x)x(1-y)y; the obstacle coincides with u for x < 1/2 and is blended
// to zero by the unique C^1 cubic on [1/2, 3/4].
inline ProblemSpec heat2d_problem() {
  ProblemSpec p;
  p.name = "heat2d";
  p.d = 2;
  p.t_end = 1.0;
  p.xlo = {0.0, 0.0};
  p.xhi = {1.0, 1.0};
  detail::set_trivial_coefficients(p, 1.0);

  // Cubic blend: value 1/4 and slope 0 at x = 1/2, value and slope 0 at 3/4.
  Eigen::Matrix4d V;
  Eigen::Vector4d rhs;
  const double s0 = 0.5, s1 = 0.75;
  V << 1.0, s0, s0 * s0, s0 * s0 * s0, 0.0, 1.0, 2.0 * s0, 3.0 * s0 * s0, 1.0, s1,
      s1 * s1, s1 * s1 * s1, 0.0, 1.0, 2.0 * s1, 3.0 * s1 * s1;
  rhs << 0.25, 0.0, 0.0, 0.0;
  const Eigen::Vector4d cf = V.fullPivLu().solve(rhs);
  auto blend = [cf](double x) { return cf[0] + x * (cf[1] + x * (cf[2] + x * cf[3])); };
  auto blend_d = [cf](double x) { return cf[1] + x * (2.0 * cf[2] + x * 3.0 * cf[3]); };

  auto psi = [](const Pt& q) {
    return (1.0 - q.x) * q.x * (1.0 - q.y) * q.y +
           2.0 * q.t * (q.x * (1.0 - q.x) + q.y * (1.0 - q.y));
  };
  p.f = [psi](const Pt& q) { return q.x < 0.5 ? 2.0 * q.x * psi(q) : psi(q); };
  p.u0 = [](const Pt&) { return 0.0; };
  p.g = [blend](const Pt& q) {
    const double yy = (1.0 - q.y) * q.y;
    if (q.x < 0.5) return q.t * (1.0 - q.x) * q.x * yy;
    if (q.x <= 0.75) return q.t * blend(q.x) * yy;
    return 0.0;
  };
  p.g_t = [blend](const Pt& q) {
    const double yy = (1.0 - q.y) * q.y;
    if (q.x < 0.5) return (1.0 - q.x) * q.x * yy;
    if (q.x <= 0.75) return blend(q.x) * yy;
    return 0.0;
  };
  p.g_x = [blend, blend_d](const Pt& q) {
    const double yy = (1.0 - q.y) * q.y;
    const double dy = 1.0 - 2.0 * q.y;
    if (q.x < 0.5)
      return Vec2{q.t * (1.0 - 2.0 * q.x) * yy, q.t * (1.0 - q.x) * q.x * dy};
    if (q.x <= 0.75)
      return Vec2{q.t * blend_d(q.x) * yy, q.t * blend(q.x) * dy};
    return Vec2{0.0, 0.0};
  };
  p.lambda_weight = 2.0;
  p.has_exact = true;
  p.exact_u = [](const Pt& q) { return q.t * (1.0 - q.x) * q.x * (1.0 - q.y) * q.y; };
  p.exact_grad_u = [](const Pt& q) {
    return Vec2{q.t * (1.0 - 2.0 * q.x) * (1.0 - q.y) * q.y,
                q.t * (1.0 - q.x) * q.x * (1.0 - 2.0 * q.y)};
  };
  p.exact_sigma = [](const Pt& q) {
    return Vec2{-q.t * (1.0 - 2.0 * q.x) * (1.0 - q.y) * q.y,
                -q.t * (1.0 - q.x) * q.x * (1.0 - 2.0 * q.y)};
  };
  p.exact_lambda = [psi](const Pt& q) {
    return q.x < 0.5 ? (1.0 - 2.0 * q.x) * psi(q) : 0.0;
  };
  return p;
}

}  // namespace parobs
