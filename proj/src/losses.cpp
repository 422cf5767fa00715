#include "apnn/losses.hpp"

#include <array>
#include <cassert>
#include <cmath>

#include "apnn/errors.hpp"

namespace apnn {

const char* method_name(Method m) {
  switch (m) {
    case Method::Pinn: return "pinn";
    case Method::Mm: return "mm";
    case Method::Eo: return "eo";
  }
  return "pinn";
}

Method method_from_name(const std::string& name) {
  if (name == "pinn") return Method::Pinn;
  if (name == "mm") return Method::Mm;
  if (name == "eo") return Method::Eo;
  throw ConfigError("unknown method: " + name);
}

const FieldNet* ParamStore::find(const std::string& name) const {
  for (const auto& f : nets)
    if (f.name == name) return &f;
  return nullptr;
}

const FieldNet& ParamStore::net(const std::string& name) const {
  const FieldNet* f = find(name);
  if (!f) throw ConfigError("no such net in parameter store: " + name);
  return *f;
}

void default_net_sizes(const std::string& problem_id, uint32_t& width_macro,
                       uint32_t& width_micro, uint32_t& blocks) {
  if (problem_id == "p1") {
    width_macro = 128;
    width_micro = 256;
    blocks = 2;
  } else {
    width_macro = 96;
    width_micro = 128;
    blocks = 3;
  }
}

ParamStore build_nets(Method m, const ProblemSpec& ps, uint32_t width_macro,
                      uint32_t width_micro, uint32_t blocks) {
  if (m == Method::Pinn && ps.kind == ProblemKind::Stationary)
    throw ConfigError("pinn residuals are not defined for stationary problems");
  const uint32_t macro_in = ps.kind == ProblemKind::Stationary ? 1 : 2;
  const uint32_t micro_in = macro_in + 1;
  ParamStore store;
  uint32_t offset = 0;
  const double st = ps.t_end > 0.0 ? 2.0 / ps.t_end : 1.0;
  const double ct = ps.t_end > 0.0 ? -1.0 : 0.0;
  const double sx = 2.0 / (ps.x1 - ps.x0);
  const double cx = -(ps.x1 + ps.x0) / (ps.x1 - ps.x0);
  auto push = [&](const std::string& name, uint32_t in_dim, uint32_t width,
                  Wrap wrap) {
    ResNetShape shape{in_dim, width, blocks};
    store.nets.push_back({name, {shape, offset}, wrap, {st, sx}, {ct, cx}});
    offset += param_count(shape);
  };
  switch (m) {
    case Method::Pinn:
      push("I", micro_in, width_micro, Wrap::Positive);
      break;
    case Method::Mm:
      push("rho", macro_in, width_macro, Wrap::Positive);
      push("g", micro_in, width_micro, Wrap::MeanZero);
      break;
    case Method::Eo:
      push("rho", macro_in, width_macro, Wrap::Positive);
      push("r", micro_in, width_micro, Wrap::EvenPositive);
      push("j", micro_in, width_micro, Wrap::Odd);
      break;
  }
  if (ps.kind != ProblemKind::Linear)
    push("T", macro_in, width_macro, Wrap::Positive);
  store.theta.assign(offset, 0.0);
  return store;
}

namespace {

constexpr int kMaxQuad = 64;

enum class Seed : uint8_t { None, T, X };

// Record a raw net evaluation. Macro nets ignore mu; stationary nets have no
// t input. value_only drops the derivative channels.
Ad eval_raw(Tape& tp, const FieldNet& f, const ProblemSpec& ps, Seed seed,
            double t, double x, double mu, bool value_only) {
  Ad in[3];
  int n = 0;
  auto coord = [&](double u, int slot, bool seeded) {
    Ad node = tp.input(u, !value_only && seeded ? 1.0 : 0.0);
    return tp.shift(tp.scale(node, f.in_scale[slot]), f.in_shift[slot]);
  };
  if (ps.kind != ProblemKind::Stationary)
    in[n++] = coord(t, 0, seed == Seed::T);
  in[n++] = coord(x, 1, seed == Seed::X);
  if (f.net.shape.in_dim == static_cast<uint32_t>(n) + 1)
    in[n++] = tp.input(mu, 0.0);
  assert(f.net.shape.in_dim == static_cast<uint32_t>(n));
  return resnet_forward(tp, f.net, in, value_only);
}

Ad softplus(Tape& tp, Ad x) { return tp.unary(Ufunc::Softplus, x); }

// Wrapped evaluation; MeanZero builds its own quadrature average.
Ad eval_wrapped(Tape& tp, const FieldNet& f, const ProblemSpec& ps,
                const QuadSet& q, Seed seed, double t, double x, double mu,
                bool value_only) {
  switch (f.wrap) {
    case Wrap::Plain:
      return eval_raw(tp, f, ps, seed, t, x, mu, value_only);
    case Wrap::Positive:
      return softplus(tp, eval_raw(tp, f, ps, seed, t, x, mu, value_only));
    case Wrap::EvenPositive: {
      Ad p = eval_raw(tp, f, ps, seed, t, x, mu, value_only);
      Ad m = eval_raw(tp, f, ps, seed, t, x, -mu, value_only);
      return softplus(tp, p + m);
    }
    case Wrap::Odd: {
      Ad p = eval_raw(tp, f, ps, seed, t, x, mu, value_only);
      Ad m = eval_raw(tp, f, ps, seed, t, x, -mu, value_only);
      return p - m;
    }
    case Wrap::MeanZero: {
      std::array<Ad, kMaxQuad> nodes;
      int n = static_cast<int>(q.full_mu.size());
      for (int k = 0; k < n; ++k)
        nodes[k] = eval_raw(tp, f, ps, seed, t, x, q.full_mu[k], value_only);
      Ad avg = tp.wsum({nodes.data(), static_cast<std::size_t>(n)},
                       {q.full_avg.data(), static_cast<std::size_t>(n)});
      Ad at = eval_raw(tp, f, ps, seed, t, x, mu, value_only);
      return at - avg;
    }
  }
  return {};
}

Ad pow4(Tape& tp, Ad x) { return tp.pow(x, 4.0); }

struct Coeffs {
  double eps, eps2, s0;  // s0 = sqrt(sigma0)
  double sigma, a, c, Cv;
};
Coeffs coeffs(const ProblemSpec& ps) {
  return {ps.epsilon, ps.epsilon * ps.epsilon, std::sqrt(ps.sigma0),
          ps.sigma, ps.a, ps.c, ps.Cv};
}

ResidualSet interior_pinn(Tape& tp, const ParamStore& store,
                          const ProblemSpec& ps, const QuadSet& q,
                          const InteriorSample& s) {
  const Coeffs k = coeffs(ps);
  const FieldNet& fI = store.net("I");
  const int n = static_cast<int>(q.full_mu.size());
  ResidualSet out;

  Ad I_x = eval_wrapped(tp, fI, ps, q, Seed::X, s.t, s.x, s.mu, false);
  Ad I_t = eval_wrapped(tp, fI, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad Ix = tp.extract_d1(I_x);
  Ad It = tp.extract_d1(I_t);

  std::array<Ad, kMaxQuad> Iq;
  for (int i = 0; i < n; ++i)
    Iq[i] = eval_wrapped(tp, fI, ps, q, Seed::None, s.t, s.x, q.full_mu[i],
                         true);
  Ad Iavg = tp.wsum({Iq.data(), static_cast<std::size_t>(n)},
                    {q.full_avg.data(), static_cast<std::size_t>(n)});

  if (ps.kind == ProblemKind::Linear) {
    // (eps/c) I_t + mu I_x - (sigma/eps)(<I> - I)
    out.add(k.eps / k.c * It + s.mu * Ix -
            k.sigma / k.eps * (Iavg - I_x));
    return out;
  }
  const FieldNet& fT = store.net("T");
  Ad T_t = eval_wrapped(tp, fT, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad Tt = tp.extract_d1(T_t);
  Ad T4 = pow4(tp, T_t);
  // (eps^2/c) I_t + eps mu I_x - sigma((1/2) a c T^4 - I)
  out.add(k.eps2 / k.c * It + k.eps * s.mu * Ix -
          k.sigma * (0.5 * k.a * k.c * T4 - I_x));
  // eps^2 Cv T_t - sigma(int I dmu - a c T^4); int I dmu = 2 <I>
  out.add(k.eps2 * k.Cv * Tt - k.sigma * (2.0 * Iavg - k.a * k.c * T4));
  return out;
}

ResidualSet interior_mm(Tape& tp, const ParamStore& store,
                        const ProblemSpec& ps, const QuadSet& q,
                        const InteriorSample& s) {
  const Coeffs k = coeffs(ps);
  const FieldNet& frho = store.net("rho");
  const FieldNet& fg = store.net("g");
  const bool stationary = ps.kind == ProblemKind::Stationary;
  const int n = static_cast<int>(q.full_mu.size());
  ResidualSet out;

  // X pass: raw g at the sample mu and at all full-range nodes
  std::array<Ad, kMaxQuad> gq, gxq;
  for (int i = 0; i < n; ++i) {
    gq[i] = eval_raw(tp, fg, ps, Seed::X, s.t, s.x, q.full_mu[i], false);
    gxq[i] = tp.extract_d1(gq[i]);
  }
  Ad g_mu = eval_raw(tp, fg, ps, Seed::X, s.t, s.x, s.mu, false);
  std::span<const Ad> gq_s{gq.data(), static_cast<std::size_t>(n)};
  std::span<const Ad> gxq_s{gxq.data(), static_cast<std::size_t>(n)};
  std::span<const double> avg{q.full_avg.data(), static_cast<std::size_t>(n)};

  Ad g_avg = tp.wsum(gq_s, avg);        // <g~>
  Ad g_val = g_mu - g_avg;              // g(mu)
  Ad gx_avg = tp.wsum(gxq_s, avg);      // <g~_x>
  Ad gx_mu = tp.extract_d1(g_mu) - gx_avg;  // g_x(mu)
  // <mu g_x> assembled literally from per-node g_x values
  std::array<Ad, kMaxQuad> gx_nodes;
  std::array<double, kMaxQuad> mu_avg;
  for (int i = 0; i < n; ++i) {
    gx_nodes[i] = gxq[i] - gx_avg;
    mu_avg[i] = q.full_avg[i] * q.full_mu[i];
  }
  Ad mu_gx_avg = tp.wsum({gx_nodes.data(), static_cast<std::size_t>(n)},
                         {mu_avg.data(), static_cast<std::size_t>(n)});

  Ad rho_x = eval_wrapped(tp, frho, ps, q, Seed::X, s.t, s.x, s.mu, false);
  Ad rhox = tp.extract_d1(rho_x);

  if (stationary) {
    const FieldNet& fT = store.net("T");
    Ad T_x = eval_wrapped(tp, fT, ps, q, Seed::X, s.t, s.x, s.mu, false);
    Ad Txx = tp.extract_d2(T_x);
    Ad T4 = pow4(tp, T_x);
    // (1/sqrt(sigma0)) <mu g_x> - T_xx
    out.add(1.0 / k.s0 * mu_gx_avg - Txx);
    // sqrt(sigma0) mu rho_x + eps (mu g_x - <mu g_x>) + sigma g
    out.add(k.s0 * s.mu * rhox +
            k.eps * (s.mu * gx_mu - mu_gx_avg) + k.sigma * g_val);
    // eps^2 T_xx - sigma(a c T^4 - rho); p2 emission is a c T^4 as printed
    out.add(k.eps2 * Txx - k.sigma * (k.a * k.c * T4 - rho_x));
    return out;
  }

  // T pass: time derivatives
  std::array<Ad, kMaxQuad> gqt;
  for (int i = 0; i < n; ++i)
    gqt[i] = eval_raw(tp, fg, ps, Seed::T, s.t, s.x, q.full_mu[i], false);
  Ad gt_avg = tp.wsum({gqt.data(), static_cast<std::size_t>(n)}, avg);
  Ad g_mu_t = eval_raw(tp, fg, ps, Seed::T, s.t, s.x, s.mu, false);
  Ad g_t = tp.extract_d1(g_mu_t - gt_avg);
  Ad rho_t = tp.extract_d1(
      eval_wrapped(tp, frho, ps, q, Seed::T, s.t, s.x, s.mu, false));

  if (ps.kind == ProblemKind::Linear) {
    // (1/c) rho_t + (1/sqrt(sigma0)) <mu g_x>
    out.add(1.0 / k.c * rho_t + 1.0 / k.s0 * mu_gx_avg);
    // (eps^2/c) g_t + eps(Id-Pi)(mu g_x) + sqrt(sigma0) mu rho_x + sigma g
    out.add(k.eps2 / k.c * g_t + k.eps * (s.mu * gx_mu - mu_gx_avg) +
            k.s0 * s.mu * rhox + k.sigma * g_val);
    return out;
  }

  const FieldNet& fT = store.net("T");
  Ad T_t = eval_wrapped(tp, fT, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad Tt = tp.extract_d1(T_t);
  Ad T4 = pow4(tp, T_t);
  out.add(1.0 / k.c * rho_t + 1.0 / k.s0 * mu_gx_avg + 0.5 * k.Cv * Tt);
  out.add(k.eps2 / k.c * g_t + k.eps * (s.mu * gx_mu - mu_gx_avg) +
          k.s0 * s.mu * rhox + k.sigma * g_val);
  // eps^2 Cv T_t - sigma(2 rho - a c T^4)
  out.add(k.eps2 * k.Cv * Tt - k.sigma * (2.0 * rho_x - k.a * k.c * T4));
  return out;
}

ResidualSet interior_eo(Tape& tp, const ParamStore& store,
                        const ProblemSpec& ps, const QuadSet& q,
                        const InteriorSample& s) {
  const Coeffs k = coeffs(ps);
  const FieldNet& frho = store.net("rho");
  const FieldNet& fr = store.net("r");
  const FieldNet& fj = store.net("j");
  const bool stationary = ps.kind == ProblemKind::Stationary;
  const int n = static_cast<int>(q.half_mu.size());
  ResidualSet out;

  // X pass at the sample mu (mu in [0,1] for the half-range system)
  Ad r_x = eval_wrapped(tp, fr, ps, q, Seed::X, s.t, s.x, s.mu, false);
  Ad j_x = eval_wrapped(tp, fj, ps, q, Seed::X, s.t, s.x, s.mu, false);
  Ad rx = tp.extract_d1(r_x);
  Ad jx = tp.extract_d1(j_x);

  // <mu j_x> over the half range
  std::array<Ad, kMaxQuad> jxq;
  std::array<double, kMaxQuad> mu_int;
  for (int i = 0; i < n; ++i) {
    Ad jq = eval_wrapped(tp, fj, ps, q, Seed::X, s.t, s.x, q.half_mu[i],
                         false);
    jxq[i] = tp.extract_d1(jq);
    mu_int[i] = q.half_int[i] * q.half_mu[i];
  }
  Ad mu_jx = tp.wsum({jxq.data(), static_cast<std::size_t>(n)},
                     {mu_int.data(), static_cast<std::size_t>(n)});

  // constraint rho = <r>, value-only evaluations
  std::array<Ad, kMaxQuad> rq;
  for (int i = 0; i < n; ++i)
    rq[i] = eval_wrapped(tp, fr, ps, q, Seed::None, s.t, s.x, q.half_mu[i],
                         true);
  Ad r_avg = tp.wsum({rq.data(), static_cast<std::size_t>(n)},
                     {q.half_int.data(), static_cast<std::size_t>(n)});

  if (stationary) {
    const FieldNet& fT = store.net("T");
    Ad rho = eval_wrapped(tp, frho, ps, q, Seed::None, s.t, s.x, s.mu, true);
    Ad T_x = eval_wrapped(tp, fT, ps, q, Seed::X, s.t, s.x, s.mu, false);
    Ad Txx = tp.extract_d2(T_x);
    Ad T4 = pow4(tp, T_x);
    // (eps^2/sqrt(sigma0)) mu j_x - sigma(a c T^4 - r)
    out.add(k.eps2 / k.s0 * s.mu * jx - k.sigma * (k.a * k.c * T4 - r_x));
    // mu r_x + (sigma/sqrt(sigma0)) j
    out.add(s.mu * rx + k.sigma / k.s0 * j_x);
    // (1/sqrt(sigma0)) <mu j_x> - T_xx
    out.add(1.0 / k.s0 * mu_jx - Txx);
    // eps^2 T_xx - sigma(a c T^4 - rho)
    out.add(k.eps2 * Txx - k.sigma * (k.a * k.c * T4 - rho));
    out.add_cons(rho - r_avg);
    return out;
  }

  // T pass
  Ad r_t = eval_wrapped(tp, fr, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad j_t = eval_wrapped(tp, fj, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad rt = tp.extract_d1(r_t);
  Ad jt = tp.extract_d1(j_t);
  Ad rho_t = eval_wrapped(tp, frho, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad rhot = tp.extract_d1(rho_t);

  if (ps.kind == ProblemKind::Linear) {
    // (eps^2/c) r_t + (eps^2/sqrt(sigma0)) mu j_x - sigma(rho - r)
    out.add(k.eps2 / k.c * rt + k.eps2 / k.s0 * s.mu * jx -
            k.sigma * (rho_t - r_x));
    // (eps^2/(c sqrt(sigma0))) j_t + mu r_x + (sigma/sqrt(sigma0)) j
    out.add(k.eps2 / (k.c * k.s0) * jt + s.mu * rx + k.sigma / k.s0 * j_x);
    // (1/c) rho_t + (1/sqrt(sigma0)) <mu j_x>
    out.add(1.0 / k.c * rhot + 1.0 / k.s0 * mu_jx);
    out.add_cons(rho_t - r_avg);
    return out;
  }

  const FieldNet& fT = store.net("T");
  Ad T_t = eval_wrapped(tp, fT, ps, q, Seed::T, s.t, s.x, s.mu, false);
  Ad Tt = tp.extract_d1(T_t);
  Ad T4 = pow4(tp, T_t);
  // (eps^2/c) r_t + (eps^2/sqrt(sigma0)) mu j_x - sigma((1/2) a c T^4 - r)
  out.add(k.eps2 / k.c * rt + k.eps2 / k.s0 * s.mu * jx -
          k.sigma * (0.5 * k.a * k.c * T4 - r_x));
  out.add(k.eps2 / (k.c * k.s0) * jt + s.mu * rx + k.sigma / k.s0 * j_x);
  out.add(1.0 / k.c * rhot + 1.0 / k.s0 * mu_jx + 0.5 * k.Cv * Tt);
  // eps^2 Cv T_t - sigma(2 rho - a c T^4)
  out.add(k.eps2 * k.Cv * Tt - k.sigma * (2.0 * rho_t - k.a * k.c * T4));
  out.add_cons(rho_t - r_avg);
  return out;
}

// Reconstructed intensity at (t, x, mu) from the method fields (value-only).
Ad reconstruct(Tape& tp, const ParamStore& store, Method m,
               const ProblemSpec& ps, const QuadSet& q, double t, double x,
               double mu) {
  const Coeffs k = coeffs(ps);
  switch (m) {
    case Method::Pinn:
      return eval_wrapped(tp, store.net("I"), ps, q, Seed::None, t, x, mu,
                          true);
    case Method::Mm: {
      Ad rho = eval_wrapped(tp, store.net("rho"), ps, q, Seed::None, t, x, mu,
                            true);
      Ad g = eval_wrapped(tp, store.net("g"), ps, q, Seed::None, t, x, mu,
                          true);
      return rho + k.eps / k.s0 * g;
    }
    case Method::Eo: {
      double am = std::abs(mu);
      double sign = mu >= 0.0 ? 1.0 : -1.0;
      Ad r = eval_wrapped(tp, store.net("r"), ps, q, Seed::None, t, x, am,
                          true);
      Ad j = eval_wrapped(tp, store.net("j"), ps, q, Seed::None, t, x, am,
                          true);
      return r + sign * k.eps / k.s0 * j;
    }
  }
  return {};
}

}  // namespace

ResidualSet interior_residuals(Tape& tp, const ParamStore& store, Method m,
                               const ProblemSpec& ps, const QuadSet& q,
                               const InteriorSample& s) {
  switch (m) {
    case Method::Pinn: return interior_pinn(tp, store, ps, q, s);
    case Method::Mm: return interior_mm(tp, store, ps, q, s);
    case Method::Eo: return interior_eo(tp, store, ps, q, s);
  }
  return {};
}

ResidualSet boundary_residuals(Tape& tp, const ParamStore& store, Method m,
                               const ProblemSpec& ps, const QuadSet& q,
                               const BoundarySample& s) {
  ResidualSet out;
  switch (ps.bc) {
    case BoundaryKind::Inflow: {
      // s.mu > 0: left inflow at +mu, right inflow at -mu
      Ad L = reconstruct(tp, store, m, ps, q, s.t, ps.x0, s.mu);
      Ad R = reconstruct(tp, store, m, ps, q, s.t, ps.x1, -s.mu);
      out.add(L - ps.inflow_left);
      out.add(R - ps.inflow_right);
      if (ps.bc_T_left >= 0.0) {
        const FieldNet& fT = store.net("T");
        Ad TL = eval_wrapped(tp, fT, ps, q, Seed::None, s.t, ps.x0, 0.0, true);
        Ad TR = eval_wrapped(tp, fT, ps, q, Seed::None, s.t, ps.x1, 0.0, true);
        out.add(TL - ps.bc_T_left);
        out.add(TR - ps.bc_T_right);
      }
      break;
    }
    case BoundaryKind::Periodic: {
      Ad L = reconstruct(tp, store, m, ps, q, s.t, ps.x0, s.mu);
      Ad R = reconstruct(tp, store, m, ps, q, s.t, ps.x1, s.mu);
      out.add(L - R);
      const FieldNet& fT = store.net("T");
      Ad TL = eval_wrapped(tp, fT, ps, q, Seed::None, s.t, ps.x0, 0.0, true);
      Ad TR = eval_wrapped(tp, fT, ps, q, Seed::None, s.t, ps.x1, 0.0, true);
      out.add(TL - TR);
      break;
    }
    case BoundaryKind::ReflectPlanck: {
      // reflective left: I(t, x0, mu) = I(t, x0, -mu) for mu > 0
      Ad Lp = reconstruct(tp, store, m, ps, q, s.t, ps.x0, s.mu);
      Ad Lm = reconstruct(tp, store, m, ps, q, s.t, ps.x0, -s.mu);
      out.add(Lp - Lm);
      // Planck source right: I(t, x1, -mu) = (1/2) a c T_s^4
      Ad R = reconstruct(tp, store, m, ps, q, s.t, ps.x1, -s.mu);
      out.add(R - planck_emission(ps, ps.planck_T));
      break;
    }
  }
  return out;
}

ResidualSet initial_residuals(Tape& tp, const ParamStore& store, Method m,
                              const ProblemSpec& ps, const QuadSet& q,
                              const InitialSample& s) {
  ResidualSet out;
  Ad I0 = reconstruct(tp, store, m, ps, q, 0.0, s.x, s.mu);
  out.add(I0 - initial_I(ps, s.x, s.mu));
  if (ps.kind != ProblemKind::Linear) {
    const FieldNet& fT = store.net("T");
    Ad T0 = eval_wrapped(tp, fT, ps, q, Seed::None, 0.0, s.x, 0.0, true);
    out.add(T0 - initial_T(ps, s.x));
  }
  return out;
}

RiskParts risk_and_grad(Tape& tp, const ParamStore& store, Method m,
                        const ProblemSpec& ps, const QuadSet& q,
                        const Batch& batch, const RiskWeights& w,
                        std::vector<double>* grad) {
  RiskParts parts;
  auto run_sample = [&](const ResidualSet& rs, double w_eq, double w_cons,
                        double& acc_eq, double& acc_cons) {
    // root for the reverse sweep: weighted squares of this sample's residuals
    Ad root{};
    bool have = false;
    auto fold = [&](Ad res, double weight) {
      Ad sq = tp.mul(res, res);
      Ad term = tp.scale(sq, weight);
      root = have ? tp.add(root, term) : term;
      have = true;
    };
    for (int i = 0; i < rs.n; ++i) {
      double v = tp.val(rs.eq[i]);
      acc_eq += v * v;
      fold(rs.eq[i], w_eq);
    }
    for (int i = 0; i < rs.ncons; ++i) {
      double v = tp.val(rs.cons[i]);
      acc_cons += v * v;
      fold(rs.cons[i], w_cons);
    }
    if (grad && have) tp.backward(root, *grad);
  };

  tp.bind(store.theta.data(), store.theta.size());
  const std::size_t n_int = batch.interior.size();
  const std::size_t n_bdy = batch.boundary.size();
  const std::size_t n_ini = batch.initial.size();

  for (const auto& s : batch.interior) {
    tp.clear();
    ResidualSet rs = interior_residuals(tp, store, m, ps, q, s);
    run_sample(rs, w.interior / static_cast<double>(n_int),
               w.constraint / static_cast<double>(n_int), parts.interior,
               parts.constraint);
  }
  for (const auto& s : batch.boundary) {
    tp.clear();
    ResidualSet rs = boundary_residuals(tp, store, m, ps, q, s);
    run_sample(rs, w.boundary / static_cast<double>(n_bdy), 0.0,
               parts.boundary, parts.constraint);
  }
  for (const auto& s : batch.initial) {
    tp.clear();
    ResidualSet rs = initial_residuals(tp, store, m, ps, q, s);
    run_sample(rs, w.initial / static_cast<double>(n_ini), 0.0, parts.initial,
               parts.constraint);
  }

  if (n_int) {
    parts.interior *= w.interior / static_cast<double>(n_int);
    parts.constraint *= w.constraint / static_cast<double>(n_int);
  }
  if (n_bdy) parts.boundary *= w.boundary / static_cast<double>(n_bdy);
  if (n_ini) parts.initial *= w.initial / static_cast<double>(n_ini);
  parts.total =
      parts.interior + parts.constraint + parts.boundary + parts.initial;
  return parts;
}

}  // namespace apnn
