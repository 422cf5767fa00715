#pragma once

#include <vector>

namespace apnn {

// Gauss-Legendre rule on [-1, 1]: sum_i w[i] f(x[i]) ~ integral, exact for
// polynomials of degree <= 2n-1.
struct QuadRule {
  std::vector<double> x;
  std::vector<double> w;
};

QuadRule gauss_legendre(int n);

// <f> on [-1,1]: (1/2) * sum w_i f(x_i)
template <class F>
double avg_full(const QuadRule& q, F&& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * f(q.x[i]);
  return 0.5 * s;
}

// integral over [0,1] of f: nodes (x_i+1)/2, weights w_i/2
template <class F>
double avg_half(const QuadRule& q, F&& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i)
    s += 0.5 * q.w[i] * f(0.5 * (q.x[i] + 1.0));
  return s;
}

// Node/coefficient views used when recording quadrature sums on the tape.
// Full-range: nodes on [-1,1] with coefficients w_i/2 (averaging).
// Half-range: nodes on [0,1] with coefficients w_i/2 (integration, the two
// coincide because the interval has length 1).
struct QuadSet {
  QuadRule rule;                  // raw [-1,1] rule
  std::vector<double> full_mu;    // = rule.x
  std::vector<double> full_avg;   // = rule.w / 2
  std::vector<double> half_mu;    // = (rule.x+1)/2
  std::vector<double> half_int;   // = rule.w / 2
};
QuadSet make_quad_set(int n);

}  // namespace apnn
