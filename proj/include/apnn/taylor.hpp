#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>

namespace apnn {

// Order-2 truncated Taylor value along one scalar input direction.
// v carries the value, d1/d2 the first and second directional derivatives.
// Arithmetic follows the usual truncated product/chain rules, e.g.
//   (a*b).d2 = a.d2*b.v + 2*a.d1*b.d1 + a.v*b.d2.
struct Taylor {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

inline Taylor tconst(double v) { return {v, 0.0, 0.0}; }

inline Taylor tadd(const Taylor& a, const Taylor& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
inline Taylor tsub(const Taylor& a, const Taylor& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
inline Taylor tneg(const Taylor& a) { return {-a.v, -a.d1, -a.d2}; }
inline Taylor tscale(double c, const Taylor& a) {
  return {c * a.v, c * a.d1, c * a.d2};
}
inline Taylor tmul(const Taylor& a, const Taylor& b) {
  return {a.v * b.v,
          a.d1 * b.v + a.v * b.d1,
          a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
// From a = c*b: c.v = a.v/b.v, c.d1 = (a.d1 - c.v*b.d1)/b.v,
// c.d2 = (a.d2 - c.v*b.d2 - 2*c.d1*b.d1)/b.v.
inline Taylor tdiv(const Taylor& a, const Taylor& b) {
  assert(b.v != 0.0);
  Taylor c;
  c.v = a.v / b.v;
  c.d1 = (a.d1 - c.v * b.d1) / b.v;
  c.d2 = (a.d2 - c.v * b.d2 - 2.0 * c.d1 * b.d1) / b.v;
  return c;
}
inline Taylor trecip(const Taylor& b) { return tdiv(tconst(1.0), b); }

// Unary primitives. The tape's reverse sweep needs the local partial as a
// Taylor value, i.e. f'(u) propagated through u, which requires f''' at u.v.
enum class Ufunc : uint8_t {
  Exp, Log, Sin, Cos, Tanh, Gelu, Softplus, Relu, Sqrt
};

// First three derivatives of f at u. y is the already-computed f(u),
// reused where it saves a transcendental call.
struct Derivs3 {
  double f1, f2, f3;
};

namespace detail {
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kInvSqrt2 = 0.7071067811865475244008444;
}  // namespace detail

inline double ufunc_value(Ufunc f, double u) {
  switch (f) {
    case Ufunc::Exp: return std::exp(u);
    case Ufunc::Log: assert(u > 0.0); return std::log(u);
    case Ufunc::Sin: return std::sin(u);
    case Ufunc::Cos: return std::cos(u);
    case Ufunc::Tanh: return std::tanh(u);
    case Ufunc::Gelu:
      return u * 0.5 * (1.0 + std::erf(u * detail::kInvSqrt2));
    case Ufunc::Softplus:
      // overflow-safe branch: softplus(u) ~ u for large u
      return u > 30.0 ? u : std::log1p(std::exp(u));
    case Ufunc::Relu: return u > 0.0 ? u : 0.0;
    case Ufunc::Sqrt: assert(u >= 0.0); return std::sqrt(u);
  }
  return 0.0;
}

inline Derivs3 ufunc_derivs(Ufunc f, double u, double y) {
  switch (f) {
    case Ufunc::Exp:
      return {y, y, y};
    case Ufunc::Log: {
      double r = 1.0 / u;
      return {r, -r * r, 2.0 * r * r * r};
    }
    case Ufunc::Sin: {
      double c = std::cos(u);
      double s = y;
      return {c, -s, -c};
    }
    case Ufunc::Cos: {
      double s = std::sin(u);
      double c = y;
      return {-s, -c, s};
    }
    case Ufunc::Tanh: {
      double t = y;
      double sech2 = 1.0 - t * t;
      return {sech2, -2.0 * t * sech2, sech2 * (6.0 * t * t - 2.0)};
    }
    case Ufunc::Gelu: {
      // gelu(u) = u*Phi(u) with the exact Gaussian cdf Phi
      double phi = detail::kInvSqrt2Pi * std::exp(-0.5 * u * u);
      double Phi = 0.5 * (1.0 + std::erf(u * detail::kInvSqrt2));
      return {Phi + u * phi, (2.0 - u * u) * phi, (u * u * u - 4.0 * u) * phi};
    }
    case Ufunc::Softplus: {
      double s = 1.0 / (1.0 + std::exp(-u));
      return {s, s * (1.0 - s), s * (1.0 - s) * (1.0 - 2.0 * s)};
    }
    case Ufunc::Relu:
      return {u > 0.0 ? 1.0 : 0.0, 0.0, 0.0};
    case Ufunc::Sqrt: {
      double r = 1.0 / y;
      return {0.5 * r, -0.25 * r / u, 0.375 * r / (u * u)};
    }
  }
  return {0.0, 0.0, 0.0};
}

// f(u) composed with a Taylor argument.
inline Taylor ufunc_apply(Ufunc f, const Taylor& u) {
  double y = ufunc_value(f, u.v);
  Derivs3 d = ufunc_derivs(f, u.v, y);
  return {y, d.f1 * u.d1, d.f2 * u.d1 * u.d1 + d.f1 * u.d2};
}

// u^p for real p (u > 0).
inline Taylor tpow(const Taylor& u, double p) {
  assert(u.v > 0.0);
  double y = std::pow(u.v, p);
  double f1 = p * y / u.v;
  double f2 = (p - 1.0) * f1 / u.v;
  return {y, f1 * u.d1, f2 * u.d1 * u.d1 + f1 * u.d2};
}

}  // namespace apnn
