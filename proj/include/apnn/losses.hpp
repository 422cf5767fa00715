#pragma once

#include <string>
#include <vector>

#include "apnn/network.hpp"
#include "apnn/physics.hpp"
#include "apnn/quadrature.hpp"
#include "apnn/tape.hpp"

namespace apnn {

enum class Method : uint8_t { Pinn, Mm, Eo };
const char* method_name(Method m);
Method method_from_name(const std::string& name);

// Flat parameter vector plus the nets living in it.
struct ParamStore {
  std::vector<double> theta;
  std::vector<FieldNet> nets;
  const FieldNet& net(const std::string& name) const;
  const FieldNet* find(const std::string& name) const;
};

// Wire up the nets of a method for a problem:
//   pinn: I (positive)                      [+ T for grte/stationary]
//   mm:   rho (positive), g (mean_zero)     [+ T]
//   eo:   rho (positive), r (even_positive), j (odd)  [+ T]
// Macro nets (rho, T) take (t,x) or (x); micro nets (g, r, j, I) also take mu.
ParamStore build_nets(Method m, const ProblemSpec& ps, uint32_t width_macro,
                      uint32_t width_micro, uint32_t blocks);

// per-problem default sizes (overridable in run configs)
void default_net_sizes(const std::string& problem_id, uint32_t& width_macro,
                       uint32_t& width_micro, uint32_t& blocks);

struct InteriorSample {
  double t, x, mu;
};
struct BoundarySample {
  double t, mu;
};
struct InitialSample {
  double x, mu;
};

struct Batch {
  std::vector<InteriorSample> interior;
  std::vector<BoundarySample> boundary;
  std::vector<InitialSample> initial;
};

// Residual nodes for one sample; squared and averaged by the risk assembly.
struct ResidualSet {
  Ad eq[6];
  int n = 0;
  Ad cons[1];
  int ncons = 0;
  void add(Ad a) { eq[n++] = a; }
  void add_cons(Ad a) { cons[ncons++] = a; }
};

ResidualSet interior_residuals(Tape& tp, const ParamStore& store, Method m,
                               const ProblemSpec& ps, const QuadSet& q,
                               const InteriorSample& s);
ResidualSet boundary_residuals(Tape& tp, const ParamStore& store, Method m,
                               const ProblemSpec& ps, const QuadSet& q,
                               const BoundarySample& s);
ResidualSet initial_residuals(Tape& tp, const ParamStore& store, Method m,
                              const ProblemSpec& ps, const QuadSet& q,
                              const InitialSample& s);

struct RiskWeights {
  double interior = 1.0;
  double constraint = 1.0;
  double boundary = 1.0;
  double initial = 1.0;
};

// Group terms are lambda_g * mean over samples of the summed squared
// residuals in the group; total is their sum.
struct RiskParts {
  double total = 0.0;
  double interior = 0.0;
  double constraint = 0.0;
  double boundary = 0.0;
  double initial = 0.0;
};

// Empirical risk over a batch; if grad != nullptr the parameter gradient is
// accumulated into it (caller zeroes). Deterministic: samples are processed
// in order on a single tape.
RiskParts risk_and_grad(Tape& tp, const ParamStore& store, Method m,
                        const ProblemSpec& ps, const QuadSet& q,
                        const Batch& batch, const RiskWeights& w,
                        std::vector<double>* grad);

}  // namespace apnn
