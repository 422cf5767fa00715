#include "apnn/physics.hpp"

#include <cmath>

#include "apnn/errors.hpp"

namespace apnn {

ProblemSpec problem(const std::string& id, double epsilon_override) {
  ProblemSpec ps;
  ps.id = id;
  if (id == "p1") {
    // linear transport, diffusive regime: isotropic inflow 1 on the left,
    // vacuum on the right, zero initial intensity
    ps.kind = ProblemKind::Linear;
    ps.bc = BoundaryKind::Inflow;
    ps.epsilon = 1e-3;
    ps.sigma = 1.0;
    ps.c = 1.0;
    ps.x0 = 0.0;
    ps.x1 = 1.0;
    ps.t_end = 0.1;
    ps.inflow_left = 1.0;
    ps.inflow_right = 0.0;
    ps.eval_times = {0.1};
  } else if (id == "p2") {
    // stationary radiative transfer with material conduction
    ps.kind = ProblemKind::Stationary;
    ps.bc = BoundaryKind::Inflow;
    ps.epsilon = 1e-3;
    ps.sigma = 1.0;
    ps.a = 1.0;
    ps.c = 1.0;
    ps.x0 = 0.0;
    ps.x1 = 1.0;
    ps.inflow_left = 1.0;
    ps.inflow_right = 0.0;
    ps.bc_T_left = 1.0;
    ps.bc_T_right = 0.0;
    ps.eval_times = {0.0};
  } else if (id == "p3") {
    // smooth periodic problem, run at eps = 1 and eps = 1e-3
    ps.kind = ProblemKind::Grte;
    ps.bc = BoundaryKind::Periodic;
    ps.epsilon = 1.0;
    ps.sigma = 10.0;
    ps.a = 1.0;
    ps.c = 1.0;
    ps.Cv = 0.1;
    ps.x0 = 0.0;
    ps.x1 = 2.0;
    ps.t_end = 0.5;
    ps.eval_times = {0.1, 0.2, 0.3, 0.4, 0.5};
    ps.x_electron = 0.0025;
  } else if (id == "p4") {
    // Marshak-type cooling: reflective left wall, Planck source at T = 0.1
    // on the right, material initially in equilibrium at T = 1
    ps.kind = ProblemKind::Grte;
    ps.bc = BoundaryKind::ReflectPlanck;
    ps.epsilon = 1.0;
    ps.sigma = 10.0;
    ps.a = 0.01372;
    ps.c = 29.98;
    ps.Cv = 1.0;
    ps.x0 = 0.0;
    ps.x1 = 0.25;
    ps.t_end = 1.0;
    ps.planck_T = 0.1;
    ps.eval_times = {0.2, 0.4, 0.6, 0.8};
    ps.x_electron = 0.0025;
  } else {
    throw ConfigError("unknown problem id: " + id);
  }
  if (epsilon_override > 0.0) ps.epsilon = epsilon_override;
  ps.sigma0 = ps.sigma;
  return ps;
}

std::vector<std::string> problem_ids() { return {"p1", "p2", "p3", "p4"}; }

double initial_T(const ProblemSpec& ps, double x) {
  if (ps.id == "p3") return (3.0 + std::sin(M_PI * x)) / 4.0;
  if (ps.id == "p4") return 1.0;
  return 0.0;
}

double initial_I(const ProblemSpec& ps, double x, double /*mu*/) {
  if (ps.kind == ProblemKind::Linear) return 0.0;
  // equilibrium with the initial temperature
  return planck_emission(ps, initial_T(ps, x));
}

double diffusion_limit_residual(const ProblemSpec& ps, double f, double f_t,
                                double g_xx) {
  double kappa = ps.c / (3.0 * ps.sigma);
  if (ps.kind == ProblemKind::Linear) return f_t - kappa * g_xx;
  return (ps.Cv + 4.0 * ps.a * f * f * f) * f_t - ps.a * kappa * g_xx;
}

}  // namespace apnn
