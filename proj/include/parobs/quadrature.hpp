#pragma once

// Fixed quadrature tables on reference elements. Weights sum to the
// reference measure (interval 1, triangle 1/2, tetrahedron 1/6, square 1).
// Degree 2 and 4 requests map to rules exact at least to that degree; the
// simplex degree-4 rules are the classical positive-weight 6-point
// (triangle) and 14-point (tetrahedron) rules of degree 4 resp. 5.

#include <array>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace parobs {

enum class RefDomain { interval, triangle, tetrahedron, square };

struct QuadRule {
  RefDomain domain;
  int degree = 0;                             // polynomial exactness
  std::vector<std::array<double, 3>> points;  // reference coordinates
  std::vector<double> weights;                // sum to reference measure
};

namespace detail {

inline void gauss1d(int n, std::vector<double>& p, std::vector<double>& w) {
  // Gauss-Legendre on [0,1]; n = 2 (degree 3) or n = 3 (degree 5).
  if (n == 2) {
    const double s = 0.28867513459481288225457439025098;  // 1/(2 sqrt(3))
    p = {0.5 - s, 0.5 + s};
    w = {0.5, 0.5};
  } else {
    const double s = 0.38729833462074168851792653997824;  // sqrt(3/5)/2
    p = {0.5 - s, 0.5, 0.5 + s};
    w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  }
}

}  // namespace detail

// Valid degrees are 2 and 4.
inline QuadRule quad_rule(RefDomain domain, int degree) {
  if (degree != 2 && degree != 4)
    throw std::invalid_argument("quad_rule: degree must be 2 or 4");
  QuadRule q;
  q.domain = domain;
  switch (domain) {
    case RefDomain::interval: {
      std::vector<double> p, w;
      detail::gauss1d(degree == 2 ? 2 : 3, p, w);
      q.degree = degree == 2 ? 3 : 5;
      for (std::size_t i = 0; i < p.size(); ++i) {
        q.points.push_back({p[i], 0.0, 0.0});
        q.weights.push_back(w[i]);
      }
      break;
    }
    case RefDomain::square: {
      std::vector<double> p, w;
      detail::gauss1d(degree == 2 ? 2 : 3, p, w);
      q.degree = degree == 2 ? 3 : 5;
      for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) {
          q.points.push_back({p[i], p[j], 0.0});
          q.weights.push_back(w[i] * w[j]);
        }
      break;
    }
    case RefDomain::triangle: {
      if (degree == 2) {
        q.degree = 2;
        const double a = 2.0 / 3.0, b = 1.0 / 6.0, w = 1.0 / 6.0;
        q.points = {{b, b, 0.0}, {a, b, 0.0}, {b, a, 0.0}};
        q.weights = {w, w, w};
      } else {
        q.degree = 4;
        const double a1 = 0.445948490915965;
        const double w1 = 0.223381589678011 * 0.5;
        const double a2 = 0.091576213509771;
        const double w2 = 0.109951743655322 * 0.5;
        q.points = {{a1, a1, 0.0},
                    {1.0 - 2.0 * a1, a1, 0.0},
                    {a1, 1.0 - 2.0 * a1, 0.0},
                    {a2, a2, 0.0},
                    {1.0 - 2.0 * a2, a2, 0.0},
                    {a2, 1.0 - 2.0 * a2, 0.0}};
        q.weights = {w1, w1, w1, w2, w2, w2};
      }
      break;
    }
    case RefDomain::tetrahedron: {
      const double v = 1.0 / 6.0;
      if (degree == 2) {
        q.degree = 2;
        const double a = 0.58541019662496845446137605030969;
        const double b = 0.13819660112501051517954131656344;
        q.points = {{b, b, b}, {a, b, b}, {b, a, b}, {b, b, a}};
        q.weights = {0.25 * v, 0.25 * v, 0.25 * v, 0.25 * v};
      } else {
        q.degree = 5;
        const double b1 = 0.31088591926330060980, f1 = 0.11268792571801585080;
        const double b2 = 0.09273525031089122640, f2 = 0.07349304311636194935;
        const double c = 0.04550370412564964949, f3 = 0.04254602077708146643;
        const double d = 0.5 - c;
        auto add4 = [&](double b, double f) {
          const double a = 1.0 - 3.0 * b;
          q.points.push_back({b, b, b});
          q.points.push_back({a, b, b});
          q.points.push_back({b, a, b});
          q.points.push_back({b, b, a});
          for (int i = 0; i < 4; ++i) q.weights.push_back(f * v);
        };
        add4(b1, f1);
        add4(b2, f2);
        // Six permutations with barycentric pattern (c, c, d, d).
        q.points.push_back({c, d, d});
        q.points.push_back({d, c, d});
        q.points.push_back({d, d, c});
        q.points.push_back({c, c, d});
        q.points.push_back({c, d, c});
        q.points.push_back({d, c, c});
        for (int i = 0; i < 6; ++i) q.weights.push_back(f3 * v);
      }
      break;
    }
  }
  return q;
}

}  // namespace parobs
