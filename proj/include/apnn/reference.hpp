#pragma once

#include <string>
#include <vector>

#include "apnn/physics.hpp"

namespace apnn {

// Grid solution on cell centers; one profile row per requested time.
// rho is the angular average <I>, Tr the radiation temperature, T the
// material temperature (empty for the linear problem). te is the dense
// material-temperature time series at ps.x_electron.
struct GridSolution {
  std::vector<double> x;
  std::vector<double> times;
  std::vector<std::vector<double>> rho;
  std::vector<std::vector<double>> T;
  std::vector<std::vector<double>> Tr;
  std::vector<double> te_t, te_v;
  double te_x = 0.0;  // probe location of the Te series
};

// Deterministic kinetic solver for the time-dependent problems (p1, p3, p4).
//
// Implicit Euler in time; per step the even parity u = (I(mu)+I(-mu))/2 at
// each half-range Gauss ordinate solves the elliptic equation
//   (alpha+sigma) u - (eps mu)^2/(alpha+sigma) u_xx
//       = sigma B + alpha u^n - (eps mu alpha/(alpha+sigma)) v^n_x
// with alpha = eps^2/(c dt), after eliminating the odd parity
//   v = (alpha v^n - eps mu u_x)/(alpha+sigma).
// This stays accurate in the diffusion regime (eps << dx), where upwinding
// of the full transport operator would add O(eps dx) artificial conduction
// that swamps the physical O(eps^2/sigma) flux. Material coupling is
// resolved per step by outer iteration with a pointwise-implicit Newton
// update for T using the precomputed local radiation response.
GridSolution solve_kinetic(const ProblemSpec& ps, int n_x, int n_t, int n_mu,
                           double tol);

// Stationary solver for p2. Eliminates the transport equation through the
// dense response kernel K (rho = K q + rho_bc for emission source q), then
// runs damped Newton on the temperature equation
//   eps^2 T_xx - sigma (a c T^4 - rho) = 0.
GridSolution solve_stationary(const ProblemSpec& ps, int n_x, int n_mu,
                              double tol);

// Limiting diffusion equation:
//   linear: rho_t = (c/3sigma) rho_xx
//   grte:   d_t(Cv T) + a d_t(T^4) = d_x((ac/3sigma) d_x T^4)
//   p2:     T + (ac/3sigma) T^4 linear in x (closed form, n_t ignored)
GridSolution solve_diffusion_limit(const ProblemSpec& ps, int n_x, int n_t);

// CSV with one '# key=value' metadata line and rows t,x,quantity,value
// (quantities rho, T, Tr, Te).
void write_reference_csv(const std::string& path, const ProblemSpec& ps,
                         const GridSolution& sol, const std::string& solver,
                         int n_x, int n_t, int n_mu, double tol);
GridSolution read_reference_csv(const std::string& path);

// Linear interpolation in x on the profile stored for time t (t must match a
// stored time within 1e-9). quantity is one of rho, T, Tr.
double sample_profile(const GridSolution& sol, const std::string& quantity,
                      double t, double x);

// relative l2 distance sqrt(sum (a-b)^2 / sum b^2)
double relative_l2(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace apnn
