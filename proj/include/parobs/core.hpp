#pragma once

// Shared small types: space-time points, symmetric coefficient matrices,
// callable aliases, error categories, and low-level numeric helpers.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace parobs {

// Space-time point (t, x) or (t, x, y); y is unused when the spatial
// dimension is 1.
struct Pt {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

using Vec2 = std::array<double, 2>;

// Symmetric 2x2 spatial diffusion matrix; d = 1 uses only a11.
struct SymMat2 {
  double a11 = 1.0;
  double a12 = 0.0;
  double a22 = 1.0;

  // u . (A v) for spatial dimension d.
  double inner(int d, const Vec2& u, const Vec2& v) const {
    if (d == 1) return u[0] * a11 * v[0];
    return u[0] * (a11 * v[0] + a12 * v[1]) + u[1] * (a12 * v[0] + a22 * v[1]);
  }

  SymMat2 inverse(int d) const {
    if (d == 1) return {1.0 / a11, 0.0, 1.0};
    const double det = a11 * a22 - a12 * a12;
    return {a22 / det, -a12 / det, a11 / det};
  }
};

inline SymMat2 scaled_identity(double s) { return {s, 0.0, s}; }

using ScalarFn = std::function<double(const Pt&)>;
using VecFn = std::function<Vec2(const Pt&)>;
using MatFn = std::function<SymMat2(const Pt&)>;

// Invalid or inconsistent problem data (callable failures, infeasible
// obstacle on the lateral boundary, out-of-range coefficients).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear-algebra failure: non-positive pivot in a factorization or
// stagnating conjugate gradients.
struct linalg_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation outside the supported configuration space (e.g. bisection of a
// tetrahedral mesh, tensor-product family in two space dimensions).
struct unsupported_error : std::logic_error {
  using std::logic_error::logic_error;
};

inline double sqr(double v) { return v * v; }

// Halton low-discrepancy sequence in base b, index i >= 0.
inline double halton(long long i, int b) {
  double f = 1.0, r = 0.0;
  for (long long n = i + 1; n > 0; n /= b) {
    f /= b;
    r += f * static_cast<double>(n % b);
  }
  return r;
}

}  // namespace parobs
