#include "apnn/quadrature.hpp"

#include <cassert>
#include <cmath>

namespace apnn {

// Nodes are roots of P_n found by Newton iteration from the Chebyshev-like
// initial guess; weights w = 2 / ((1-x^2) P_n'(x)^2). Symmetrized so the
// rule is exactly even.
QuadRule gauss_legendre(int n) {
  assert(n >= 1);
  QuadRule q;
  q.x.assign(n, 0.0);
  q.w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // final polish of dp at the converged node
    {
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.x[i] = -x;          // ascending order, negative half first
    q.w[i] = w;
    q.x[n - 1 - i] = x;
    q.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.x[n / 2] = 0.0;
  return q;
}

QuadSet make_quad_set(int n) {
  QuadSet s;
  s.rule = gauss_legendre(n);
  s.full_mu = s.rule.x;
  s.full_avg.resize(n);
  s.half_mu.resize(n);
  s.half_int.resize(n);
  for (int i = 0; i < n; ++i) {
    s.full_avg[i] = 0.5 * s.rule.w[i];
    s.half_mu[i] = 0.5 * (s.rule.x[i] + 1.0);
    s.half_int[i] = 0.5 * s.rule.w[i];
  }
  return s;
}

}  // namespace apnn
