#pragma once

// Gauss-Legendre nodes/weights (Newton on the Legendre recurrence) plus a
// simplex-iterated integrator used by the Dyson-series oracle.

#include <cmath>
#include <utility>
#include <vector>

namespace qef {

struct GaussLegendre {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;
};

inline GaussLegendre gauss_legendre(int n) {
  GaussLegendre q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // initial guess: Chebyshev-like
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    q.nodes[i] = 0.5 * (1.0 - x);  // map [-1,1] -> [0,1], ascending-ish
    q.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

/// integral_a^b f(x) dx with an n-node Gauss-Legendre rule.
template <typename F>
auto integrate_gl(F&& f, double a, double b, int n) -> decltype(f(0.0)) {
  GaussLegendre q = gauss_legendre(n);
  auto acc = decltype(f(0.0))(f(a + (b - a) * q.nodes[0]) * ((b - a) * q.weights[0]));
  for (int i = 1; i < n; ++i)
    acc += f(a + (b - a) * q.nodes[i]) * ((b - a) * q.weights[i]);
  return acc;
}

}  // namespace qef
