#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace apnn {

// Scaled 1D gray radiative transfer in slab geometry,
//   (eps^2/c) dI/dt + eps mu dI/dx = sigma ((1/2) a c T^4 - I)
//   eps^2 C_v dT/dt = sigma (int_-1^1 I dmu - a c T^4),
// whose eps->0 limit is d/dt(C_v T) + a d/dt(T^4) = d/dx((ac/3sigma) d/dx T^4).
//
// Problem kinds:
//   Linear      no material coupling, emission = rho = <I> (p1)
//   Stationary  time-independent system with conduction eps^2 T_xx (p2)
//   Grte        full time-dependent system (p3, p4)
enum class ProblemKind : uint8_t { Linear, Stationary, Grte };

enum class BoundaryKind : uint8_t {
  Inflow,               // prescribed I on inflow directions, both sides
  Periodic,             //
  ReflectPlanck,        // reflective left, Planck source right
};

struct ProblemSpec {
  std::string id;  // p1..p4
  ProblemKind kind = ProblemKind::Grte;
  BoundaryKind bc = BoundaryKind::Inflow;

  double epsilon = 1.0;
  double sigma = 1.0;
  double sigma0 = 1.0;  // micro-macro scaling constant, defaults to sigma
  double a = 1.0;
  double c = 1.0;
  double Cv = 1.0;

  double x0 = 0.0, x1 = 1.0;
  double t_end = 0.0;  // 0 for stationary

  double inflow_left = 0.0;   // I(t, x0, mu>0) for Inflow problems
  double inflow_right = 0.0;  // I(t, x1, mu<0)
  double bc_T_left = -1.0;    // Dirichlet temperature data (p2), <0 if unused
  double bc_T_right = -1.0;
  double planck_T = 0.0;  // right-boundary source temperature (p4)

  std::vector<double> eval_times;  // profile comparison times
  double x_electron = 0.0;         // probe location for the T_e time series
};

// Catalog lookup; epsilon_override < 0 keeps the problem default.
ProblemSpec problem(const std::string& id, double epsilon_override = -1.0);
std::vector<std::string> problem_ids();

// (1/2) a c T^4
inline double planck_emission(const ProblemSpec& ps, double T) {
  double T2 = T * T;
  return 0.5 * ps.a * ps.c * T2 * T2;
}

// T_r = (E / (a c))^(1/4) with E = int_-1^1 I dmu
inline double radiation_temperature(const ProblemSpec& ps, double E) {
  return std::pow(E / (ps.a * ps.c), 0.25);
}

double initial_T(const ProblemSpec& ps, double x);
double initial_I(const ProblemSpec& ps, double x, double mu);

// Intensity reconstruction from method fields:
//   PINN       I
//   micro-macro I = rho + (eps/sqrt(sigma0)) g(mu)
//   even-odd    I = r(|mu|) + sign(mu) (eps/sqrt(sigma0)) j(|mu|)
inline double reconstruct_intensity_mm(const ProblemSpec& ps, double rho,
                                       double g) {
  return rho + ps.epsilon / std::sqrt(ps.sigma0) * g;
}
inline double reconstruct_intensity_eo(const ProblemSpec& ps, double r,
                                       double j, double mu) {
  double s = mu >= 0.0 ? 1.0 : -1.0;
  return r + s * ps.epsilon / std::sqrt(ps.sigma0) * j;
}

// Pointwise residual of the limiting diffusion equation; used to cross-check
// solvers against manufactured fields.
//   Linear: f = rho:  f_t - (c/3sigma) g_xx,          g = rho
//   Grte:   f = T:    (Cv + 4 a f^3) f_t - (ac/3sigma) g_xx,  g = T^4
double diffusion_limit_residual(const ProblemSpec& ps, double f, double f_t,
                                double g_xx);

}  // namespace apnn
