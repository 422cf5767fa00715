#include <cmath>
#include <vector>

#include "apnn/quadrature.hpp"
#include "doctest.h"

using namespace apnn;

namespace {

// exact integral of mu^k over [-1, 1]
double moment_full(int k) { return k % 2 == 1 ? 0.0 : 2.0 / (k + 1); }

// exact integral of mu^k over [0, 1]
double moment_half(int k) { return 1.0 / (k + 1); }

}  // namespace

TEST_CASE("nodes are symmetric, inside (-1,1), and weights sum to 2") {
  for (int n : {2, 4, 8, 16, 32, 64}) {
    CAPTURE(n);
    QuadRule q = gauss_legendre(n);
    REQUIRE((int)q.x.size() == n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(q.x[i] > -1.0);
      CHECK(q.x[i] < 1.0);
      CHECK(q.w[i] > 0.0);
      CHECK(q.x[i] == -q.x[n - 1 - i]);
      CHECK(q.w[i] == doctest::Approx(q.w[n - 1 - i]).epsilon(1e-15));
      wsum += q.w[i];
    }
    CHECK(std::fabs(wsum - 2.0) < 1e-14);
    for (int i = 1; i < n; ++i) CHECK(q.x[i] > q.x[i - 1]);
  }
}

TEST_CASE("an n-point rule integrates polynomials up to degree 2n-1") {
  for (int n : {2, 4, 8, 16}) {
    CAPTURE(n);
    QuadRule q = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      CAPTURE(k);
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += q.w[i] * std::pow(q.x[i], k);
      CHECK(std::fabs(s - moment_full(k)) < 1e-12);
    }
    // degree 2n misses (the gap shrinks fast with n, so only test small n)
    if (n <= 8) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += q.w[i] * std::pow(q.x[i], 2 * n);
      CHECK(std::fabs(s - moment_full(2 * n)) > 1e-8);
    }
  }
}

TEST_CASE("16-point rule reproduces known node and weight values") {
  // reference values from the standard tables, 15 digits
  QuadRule q = gauss_legendre(16);
  CHECK(std::fabs(q.x[15] - 0.989400934991649932596) < 1e-14);
  CHECK(std::fabs(q.w[15] - 0.027152459411754094852) < 1e-14);
  CHECK(std::fabs(q.x[8] - 0.095012509837637440185) < 1e-14);
  CHECK(std::fabs(q.w[8] - 0.189450610455068496285) < 1e-14);
}

TEST_CASE("odd rules place a node exactly at zero") {
  QuadRule q = gauss_legendre(5);
  CHECK(q.x[2] == 0.0);
  CHECK(std::fabs(q.w[2] - 128.0 / 225.0) < 1e-15);
}

TEST_CASE("full-range averages halve the weights") {
  QuadSet qs = make_quad_set(8);
  REQUIRE(qs.full_mu.size() == 8);
  double one = 0.0, musq = 0.0;
  for (std::size_t i = 0; i < qs.full_mu.size(); ++i) {
    one += qs.full_avg[i];
    musq += qs.full_avg[i] * qs.full_mu[i] * qs.full_mu[i];
  }
  CHECK(std::fabs(one - 1.0) < 1e-14);        // <1> = 1
  CHECK(std::fabs(musq - 1.0 / 3.0) < 1e-14); // <mu^2> = 1/3
}

TEST_CASE("half-range nodes integrate over [0,1]") {
  QuadSet qs = make_quad_set(8);
  REQUIRE(qs.half_mu.size() == 8);
  for (double m : qs.half_mu) {
    CHECK(m > 0.0);
    CHECK(m < 1.0);
  }
  // mapped 8-point rule is exact through degree 15 on [0,1]
  for (int k = 0; k <= 15; ++k) {
    CAPTURE(k);
    double s = 0.0;
    for (std::size_t i = 0; i < qs.half_mu.size(); ++i)
      s += qs.half_int[i] * std::pow(qs.half_mu[i], k);
    CHECK(std::fabs(s - moment_half(k)) < 1e-13);
  }
}

TEST_CASE("templated averages agree with direct sums") {
  QuadSet qs = make_quad_set(12);
  auto f = [](double mu) { return std::exp(0.3 * mu) + mu * mu; };
  double direct_full = 0.0, direct_half = 0.0;
  for (std::size_t i = 0; i < qs.full_mu.size(); ++i)
    direct_full += qs.full_avg[i] * f(qs.full_mu[i]);
  for (std::size_t i = 0; i < qs.half_mu.size(); ++i)
    direct_half += qs.half_int[i] * f(qs.half_mu[i]);
  CHECK(avg_full(qs.rule, f) == doctest::Approx(direct_full).epsilon(1e-15));
  CHECK(avg_half(qs.rule, f) == doctest::Approx(direct_half).epsilon(1e-15));
  // smooth integrand: 12 points are enough for near machine accuracy
  // int_0^1 exp(0.3 mu) dmu = (e^0.3 - 1)/0.3
  double want = (std::exp(0.3) - 1.0) / 0.3 + 1.0 / 3.0;
  CHECK(std::fabs(direct_half - want) < 1e-14);
}
