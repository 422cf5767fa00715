#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "apnn/errors.hpp"
#include "apnn/losses.hpp"
#include "doctest.h"

using namespace apnn;

// ---------------------------------------------------------------------------
// Test-local oracle: order-2 dual numbers pushed through an explicit
// layer-by-layer network walk. Everything here is independent of the tape.
// ---------------------------------------------------------------------------

namespace {

struct D2 {
  double v = 0.0;  // value
  double d = 0.0;  // first derivative along the seeded input
  double h = 0.0;  // second derivative
};

D2 con(double c) { return {c, 0.0, 0.0}; }
D2 operator+(D2 a, D2 b) { return {a.v + b.v, a.d + b.d, a.h + b.h}; }
D2 operator-(D2 a, D2 b) { return {a.v - b.v, a.d - b.d, a.h - b.h}; }
D2 operator*(double c, D2 a) { return {c * a.v, c * a.d, c * a.h}; }
D2 operator*(D2 a, D2 b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d,
          a.h * b.v + 2.0 * a.d * b.d + a.v * b.h};
}

D2 dgelu(D2 u) {
  double phi = std::exp(-0.5 * u.v * u.v) / std::sqrt(2.0 * M_PI);
  double Phi = 0.5 * (1.0 + std::erf(u.v / std::sqrt(2.0)));
  double f = u.v * Phi;
  double f1 = Phi + u.v * phi;
  double f2 = (2.0 - u.v * u.v) * phi;
  return {f, f1 * u.d, f2 * u.d * u.d + f1 * u.h};
}

D2 dsoftplus(D2 u) {
  double f = u.v > 30.0 ? u.v : std::log1p(std::exp(u.v));
  double s = 1.0 / (1.0 + std::exp(-u.v));
  double f2 = s * (1.0 - s);
  return {f, s * u.d, f2 * u.d * u.d + s * u.h};
}

D2 dpow4(D2 u) {
  double u2 = u.v * u.v;
  return {u2 * u2, 4.0 * u2 * u.v * u.d,
          12.0 * u2 * u.d * u.d + 4.0 * u2 * u.v * u.h};
}

D2 dual_resnet(const double* theta, const ResNet& net,
               const std::vector<D2>& in) {
  const ResNetShape& s = net.shape;
  const double* p = theta + net.offset;
  auto layer = [&](const std::vector<D2>& x, uint32_t fin, uint32_t fout) {
    std::vector<D2> y(fout);
    for (uint32_t i = 0; i < fout; ++i) {
      D2 acc = con(p[fout * fin + i]);
      for (uint32_t j = 0; j < fin; ++j) acc = acc + p[i * fin + j] * x[j];
      y[i] = acc;
    }
    p += fout * fin + fout;
    return y;
  };
  std::vector<D2> hcur = layer(in, s.in_dim, s.width);
  for (uint32_t b = 0; b < s.blocks; ++b) {
    std::vector<D2> u = layer(hcur, s.width, s.width);
    for (auto& e : u) e = dgelu(e);
    std::vector<D2> v = layer(u, s.width, s.width);
    for (uint32_t i = 0; i < s.width; ++i) hcur[i] = hcur[i] + dgelu(v[i]);
  }
  return layer(hcur, s.width, 1)[0];
}

// seed: 0 none, 1 along t, 2 along x
D2 ofield(const double* theta, const FieldNet& f, const ProblemSpec& ps,
          const QuadSet& q, int seed, double t, double x, double mu) {
  auto raw = [&](double m) {
    std::vector<D2> in;
    if (ps.kind != ProblemKind::Stationary)
      in.push_back({t * f.in_scale[0] + f.in_shift[0],
                    (seed == 1 ? 1.0 : 0.0) * f.in_scale[0], 0.0});
    in.push_back({x * f.in_scale[1] + f.in_shift[1],
                  (seed == 2 ? 1.0 : 0.0) * f.in_scale[1], 0.0});
    if (f.net.shape.in_dim == in.size() + 1) in.push_back(con(m));
    return dual_resnet(theta, f.net, in);
  };
  switch (f.wrap) {
    case Wrap::Plain:
      return raw(mu);
    case Wrap::Positive:
      return dsoftplus(raw(mu));
    case Wrap::EvenPositive:
      return dsoftplus(raw(mu) + raw(-mu));
    case Wrap::Odd:
      return raw(mu) - raw(-mu);
    case Wrap::MeanZero: {
      D2 avg = con(0.0);
      for (std::size_t i = 0; i < q.full_mu.size(); ++i)
        avg = avg + q.full_avg[i] * raw(q.full_mu[i]);
      return raw(mu) - avg;
    }
  }
  return con(0.0);
}

struct OracleOut {
  std::vector<double> eq;
  std::vector<double> cons;
};

OracleOut oracle_interior(Method m, const ProblemSpec& ps, const QuadSet& q,
                          const ParamStore& st, const InteriorSample& s) {
  const double* th = st.theta.data();
  const double eps = ps.epsilon, eps2 = eps * eps, s0 = std::sqrt(ps.sigma0);
  const double sig = ps.sigma, a = ps.a, c = ps.c, Cv = ps.Cv;
  OracleOut out;

  if (m == Method::Pinn) {
    const FieldNet& fI = st.net("I");
    D2 IX = ofield(th, fI, ps, q, 2, s.t, s.x, s.mu);
    D2 IT = ofield(th, fI, ps, q, 1, s.t, s.x, s.mu);
    double Iavg = 0.0;
    for (std::size_t i = 0; i < q.full_mu.size(); ++i)
      Iavg += q.full_avg[i] *
              ofield(th, fI, ps, q, 0, s.t, s.x, q.full_mu[i]).v;
    if (ps.kind == ProblemKind::Linear) {
      out.eq.push_back(eps / c * IT.d + s.mu * IX.d -
                       sig / eps * (Iavg - IX.v));
      return out;
    }
    const FieldNet& fT = st.net("T");
    D2 TT = ofield(th, fT, ps, q, 1, s.t, s.x, 0.0);
    double T4 = dpow4(TT).v;
    out.eq.push_back(eps2 / c * IT.d + eps * s.mu * IX.d -
                     sig * (0.5 * a * c * T4 - IX.v));
    out.eq.push_back(eps2 * Cv * TT.d - sig * (2.0 * Iavg - a * c * T4));
    return out;
  }

  if (m == Method::Mm) {
    const FieldNet& fg = st.net("g");
    const FieldNet& frho = st.net("rho");
    D2 gX = ofield(th, fg, ps, q, 2, s.t, s.x, s.mu);
    double mu_gx = 0.0;
    for (std::size_t i = 0; i < q.full_mu.size(); ++i)
      mu_gx += q.full_avg[i] * q.full_mu[i] *
               ofield(th, fg, ps, q, 2, s.t, s.x, q.full_mu[i]).d;
    D2 rhoX = ofield(th, frho, ps, q, 2, s.t, s.x, 0.0);

    if (ps.kind == ProblemKind::Stationary) {
      const FieldNet& fT = st.net("T");
      D2 TX = ofield(th, fT, ps, q, 2, s.t, s.x, 0.0);
      double T4 = dpow4(TX).v;
      out.eq.push_back(1.0 / s0 * mu_gx - TX.h);
      out.eq.push_back(s0 * s.mu * rhoX.d + eps * (s.mu * gX.d - mu_gx) +
                       sig * gX.v);
      out.eq.push_back(eps2 * TX.h - sig * (a * c * T4 - rhoX.v));
      return out;
    }
    D2 gT = ofield(th, fg, ps, q, 1, s.t, s.x, s.mu);
    D2 rhoT = ofield(th, frho, ps, q, 1, s.t, s.x, 0.0);
    if (ps.kind == ProblemKind::Linear) {
      out.eq.push_back(1.0 / c * rhoT.d + 1.0 / s0 * mu_gx);
      out.eq.push_back(eps2 / c * gT.d + eps * (s.mu * gX.d - mu_gx) +
                       s0 * s.mu * rhoX.d + sig * gX.v);
      return out;
    }
    const FieldNet& fT = st.net("T");
    D2 TT = ofield(th, fT, ps, q, 1, s.t, s.x, 0.0);
    double T4 = dpow4(TT).v;
    out.eq.push_back(1.0 / c * rhoT.d + 1.0 / s0 * mu_gx + 0.5 * Cv * TT.d);
    out.eq.push_back(eps2 / c * gT.d + eps * (s.mu * gX.d - mu_gx) +
                     s0 * s.mu * rhoX.d + sig * gX.v);
    out.eq.push_back(eps2 * Cv * TT.d - sig * (2.0 * rhoX.v - a * c * T4));
    return out;
  }

  // even-odd
  const FieldNet& fr = st.net("r");
  const FieldNet& fj = st.net("j");
  const FieldNet& frho = st.net("rho");
  D2 rX = ofield(th, fr, ps, q, 2, s.t, s.x, s.mu);
  D2 jX = ofield(th, fj, ps, q, 2, s.t, s.x, s.mu);
  double mu_jx = 0.0, r_avg = 0.0;
  for (std::size_t i = 0; i < q.half_mu.size(); ++i) {
    mu_jx += q.half_int[i] * q.half_mu[i] *
             ofield(th, fj, ps, q, 2, s.t, s.x, q.half_mu[i]).d;
    r_avg += q.half_int[i] *
             ofield(th, fr, ps, q, 0, s.t, s.x, q.half_mu[i]).v;
  }

  if (ps.kind == ProblemKind::Stationary) {
    const FieldNet& fT = st.net("T");
    double rho = ofield(th, frho, ps, q, 0, s.t, s.x, 0.0).v;
    D2 TX = ofield(th, fT, ps, q, 2, s.t, s.x, 0.0);
    double T4 = dpow4(TX).v;
    out.eq.push_back(eps2 / s0 * s.mu * jX.d - sig * (a * c * T4 - rX.v));
    out.eq.push_back(s.mu * rX.d + sig / s0 * jX.v);
    out.eq.push_back(1.0 / s0 * mu_jx - TX.h);
    out.eq.push_back(eps2 * TX.h - sig * (a * c * T4 - rho));
    out.cons.push_back(rho - r_avg);
    return out;
  }
  D2 rT = ofield(th, fr, ps, q, 1, s.t, s.x, s.mu);
  D2 jT = ofield(th, fj, ps, q, 1, s.t, s.x, s.mu);
  D2 rhoT = ofield(th, frho, ps, q, 1, s.t, s.x, 0.0);
  if (ps.kind == ProblemKind::Linear) {
    out.eq.push_back(eps2 / c * rT.d + eps2 / s0 * s.mu * jX.d -
                     sig * (rhoT.v - rX.v));
    out.eq.push_back(eps2 / (c * s0) * jT.d + s.mu * rX.d + sig / s0 * jX.v);
    out.eq.push_back(1.0 / c * rhoT.d + 1.0 / s0 * mu_jx);
    out.cons.push_back(rhoT.v - r_avg);
    return out;
  }
  const FieldNet& fT = st.net("T");
  D2 TT = ofield(th, fT, ps, q, 1, s.t, s.x, 0.0);
  double T4 = dpow4(TT).v;
  out.eq.push_back(eps2 / c * rT.d + eps2 / s0 * s.mu * jX.d -
                   sig * (0.5 * a * c * T4 - rX.v));
  out.eq.push_back(eps2 / (c * s0) * jT.d + s.mu * rX.d + sig / s0 * jX.v);
  out.eq.push_back(1.0 / c * rhoT.d + 1.0 / s0 * mu_jx + 0.5 * Cv * TT.d);
  out.eq.push_back(eps2 * Cv * TT.d - sig * (2.0 * rhoT.v - a * c * T4));
  out.cons.push_back(rhoT.v - r_avg);
  return out;
}

double oracle_reconstruct(Method m, const ProblemSpec& ps, const QuadSet& q,
                          const ParamStore& st, double t, double x,
                          double mu) {
  const double* th = st.theta.data();
  const double scale = ps.epsilon / std::sqrt(ps.sigma0);
  switch (m) {
    case Method::Pinn:
      return ofield(th, st.net("I"), ps, q, 0, t, x, mu).v;
    case Method::Mm:
      return ofield(th, st.net("rho"), ps, q, 0, t, x, 0.0).v +
             scale * ofield(th, st.net("g"), ps, q, 0, t, x, mu).v;
    case Method::Eo: {
      double am = std::fabs(mu);
      double sign = mu >= 0.0 ? 1.0 : -1.0;
      return ofield(th, st.net("r"), ps, q, 0, t, x, am).v +
             sign * scale * ofield(th, st.net("j"), ps, q, 0, t, x, am).v;
    }
  }
  return 0.0;
}

OracleOut oracle_boundary(Method m, const ProblemSpec& ps, const QuadSet& q,
                          const ParamStore& st, const BoundarySample& s) {
  const double* th = st.theta.data();
  OracleOut out;
  switch (ps.bc) {
    case BoundaryKind::Inflow:
      out.eq.push_back(oracle_reconstruct(m, ps, q, st, s.t, ps.x0, s.mu) -
                       ps.inflow_left);
      out.eq.push_back(oracle_reconstruct(m, ps, q, st, s.t, ps.x1, -s.mu) -
                       ps.inflow_right);
      if (ps.bc_T_left >= 0.0) {
        out.eq.push_back(ofield(th, st.net("T"), ps, q, 0, s.t, ps.x0, 0.0).v -
                         ps.bc_T_left);
        out.eq.push_back(ofield(th, st.net("T"), ps, q, 0, s.t, ps.x1, 0.0).v -
                         ps.bc_T_right);
      }
      break;
    case BoundaryKind::Periodic:
      out.eq.push_back(oracle_reconstruct(m, ps, q, st, s.t, ps.x0, s.mu) -
                       oracle_reconstruct(m, ps, q, st, s.t, ps.x1, s.mu));
      out.eq.push_back(ofield(th, st.net("T"), ps, q, 0, s.t, ps.x0, 0.0).v -
                       ofield(th, st.net("T"), ps, q, 0, s.t, ps.x1, 0.0).v);
      break;
    case BoundaryKind::ReflectPlanck:
      out.eq.push_back(oracle_reconstruct(m, ps, q, st, s.t, ps.x0, s.mu) -
                       oracle_reconstruct(m, ps, q, st, s.t, ps.x0, -s.mu));
      out.eq.push_back(oracle_reconstruct(m, ps, q, st, s.t, ps.x1, -s.mu) -
                       planck_emission(ps, ps.planck_T));
      break;
  }
  return out;
}

OracleOut oracle_initial(Method m, const ProblemSpec& ps, const QuadSet& q,
                         const ParamStore& st, const InitialSample& s) {
  const double* th = st.theta.data();
  OracleOut out;
  out.eq.push_back(oracle_reconstruct(m, ps, q, st, 0.0, s.x, s.mu) -
                   initial_I(ps, s.x, s.mu));
  if (ps.kind != ProblemKind::Linear)
    out.eq.push_back(ofield(th, st.net("T"), ps, q, 0, 0.0, s.x, 0.0).v -
                     initial_T(ps, s.x));
  return out;
}

// shared fixtures ------------------------------------------------------------

ParamStore random_store(Method m, const ProblemSpec& ps, uint64_t seed) {
  ParamStore st = build_nets(m, ps, 6, 6, 1);
  std::mt19937_64 rng(seed);
  for (auto& t : st.theta) t = uniform_bits(rng, -0.5, 0.5);
  return st;
}

double rel(double a, double b) {
  return std::fabs(a - b) / (1.0 + std::fabs(a) + std::fabs(b));
}

// inverse of softplus for y > 0
double softplus_inv(double y) { return y + std::log1p(-std::exp(-y)); }

// All-constant fields: zero weights, exit biases chosen so each positive
// field takes a prescribed value; odd and mean-zero fields vanish.
ParamStore constant_store(Method m, const ProblemSpec& ps, double rho_target,
                          double T_target) {
  ParamStore st = build_nets(m, ps, 6, 6, 1);
  std::fill(st.theta.begin(), st.theta.end(), 0.0);
  for (const auto& f : st.nets) {
    double target = f.name == "T" ? T_target : rho_target;
    double bias = 0.0;
    if (f.wrap == Wrap::Positive)
      bias = softplus_inv(target);
    else if (f.wrap == Wrap::EvenPositive)
      bias = 0.5 * softplus_inv(target);
    st.theta[f.net.offset + param_count(f.net.shape) - 1] = bias;
  }
  return st;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("net wiring per method and problem kind") {
  ProblemSpec p3 = problem("p3");
  ParamStore eo = build_nets(Method::Eo, p3, 8, 10, 2);
  REQUIRE(eo.nets.size() == 4);
  CHECK(eo.net("rho").net.shape.in_dim == 2);
  CHECK(eo.net("rho").net.shape.width == 8);
  CHECK(eo.net("r").net.shape.in_dim == 3);
  CHECK(eo.net("r").net.shape.width == 10);
  CHECK(eo.net("r").wrap == Wrap::EvenPositive);
  CHECK(eo.net("j").wrap == Wrap::Odd);
  CHECK(eo.net("T").wrap == Wrap::Positive);
  std::size_t want = param_count({2, 8, 2}) + 2 * param_count({3, 10, 2}) +
                     param_count({2, 8, 2});
  CHECK(eo.theta.size() == want);

  ProblemSpec p2 = problem("p2");
  ParamStore mm = build_nets(Method::Mm, p2, 8, 10, 2);
  CHECK(mm.net("rho").net.shape.in_dim == 1);  // stationary: x only
  CHECK(mm.net("g").net.shape.in_dim == 2);
  CHECK(mm.net("g").wrap == Wrap::MeanZero);
  CHECK_THROWS_AS(build_nets(Method::Pinn, p2, 8, 10, 2), ConfigError);

  ProblemSpec p1 = problem("p1");
  ParamStore pinn = build_nets(Method::Pinn, p1, 8, 10, 2);
  REQUIRE(pinn.nets.size() == 1);  // no material temperature in the linear case
  CHECK(pinn.net("I").net.shape.in_dim == 3);
}

TEST_CASE("interior residuals match the dual-number oracle") {
  struct Combo {
    const char* pid;
    Method m;
    double eps;
  };
  const Combo combos[] = {
      {"p1", Method::Pinn, -1.0}, {"p1", Method::Mm, -1.0},
      {"p1", Method::Eo, -1.0},   {"p2", Method::Mm, -1.0},
      {"p2", Method::Eo, -1.0},   {"p3", Method::Pinn, 1.0},
      {"p3", Method::Mm, 1.0},    {"p3", Method::Eo, 1.0},
      {"p3", Method::Mm, 1e-2},   {"p3", Method::Eo, 1e-2},
      {"p4", Method::Pinn, -1.0}, {"p4", Method::Eo, -1.0},
  };
  QuadSet q = make_quad_set(8);
  for (const auto& cb : combos) {
    CAPTURE(cb.pid);
    CAPTURE(method_name(cb.m));
    ProblemSpec ps = problem(cb.pid, cb.eps);
    ParamStore st = random_store(cb.m, ps, 100 + (uint64_t)cb.m);
    std::mt19937_64 rng(17);
    Tape tp;
    for (int k = 0; k < 3; ++k) {
      InteriorSample s;
      s.t = ps.kind == ProblemKind::Stationary
                ? 0.0
                : uniform_bits(rng, 0.0, std::max(ps.t_end, 0.1));
      s.x = uniform_bits(rng, ps.x0, ps.x1);
      s.mu = cb.m == Method::Eo ? uniform_bits(rng, 0.0, 1.0)
                                : uniform_bits(rng, -1.0, 1.0);
      tp.clear();
      tp.bind(st.theta.data(), st.theta.size());
      ResidualSet rs = interior_residuals(tp, st, cb.m, ps, q, s);
      OracleOut want = oracle_interior(cb.m, ps, q, st, s);
      REQUIRE(rs.n == (int)want.eq.size());
      REQUIRE(rs.ncons == (int)want.cons.size());
      for (int i = 0; i < rs.n; ++i) {
        CAPTURE(i);
        CHECK(rel(tp.val(rs.eq[i]), want.eq[i]) < 1e-12);
      }
      for (int i = 0; i < rs.ncons; ++i)
        CHECK(rel(tp.val(rs.cons[i]), want.cons[i]) < 1e-12);
    }
  }
}

TEST_CASE("boundary and initial residuals match the oracle") {
  struct Combo {
    const char* pid;
    Method m;
  };
  const Combo combos[] = {
      {"p1", Method::Pinn}, {"p1", Method::Eo}, {"p2", Method::Mm},
      {"p2", Method::Eo},   {"p3", Method::Mm}, {"p4", Method::Eo},
      {"p4", Method::Pinn},
  };
  QuadSet q = make_quad_set(8);
  for (const auto& cb : combos) {
    CAPTURE(cb.pid);
    CAPTURE(method_name(cb.m));
    ProblemSpec ps = problem(cb.pid);
    ParamStore st = random_store(cb.m, ps, 55);
    Tape tp;
    tp.bind(st.theta.data(), st.theta.size());

    BoundarySample bs{0.07, ps.bc == BoundaryKind::Periodic ? -0.6 : 0.6};
    tp.clear();
    ResidualSet rb = boundary_residuals(tp, st, cb.m, ps, q, bs);
    OracleOut wb = oracle_boundary(cb.m, ps, q, st, bs);
    REQUIRE(rb.n == (int)wb.eq.size());
    for (int i = 0; i < rb.n; ++i) {
      CAPTURE(i);
      CHECK(rel(tp.val(rb.eq[i]), wb.eq[i]) < 1e-12);
    }

    if (ps.kind != ProblemKind::Stationary) {
      InitialSample is{0.5 * (ps.x0 + ps.x1) + 0.13, -0.45};
      tp.clear();
      ResidualSet ri = initial_residuals(tp, st, cb.m, ps, q, is);
      OracleOut wi = oracle_initial(cb.m, ps, q, st, is);
      REQUIRE(ri.n == (int)wi.eq.size());
      for (int i = 0; i < ri.n; ++i)
        CHECK(rel(tp.val(ri.eq[i]), wi.eq[i]) < 1e-12);
    }
  }
}

TEST_CASE("equilibrium fields annihilate every interior residual") {
  QuadSet q = make_quad_set(16);
  std::mt19937_64 rng(3);
  for (const char* pid : {"p1", "p2", "p3", "p4"}) {
    ProblemSpec ps = problem(pid);
    double Tstar = ps.id == "p4" ? 1.0 : 0.8;
    // stationary coupling uses a c T^4, the kinetic one (1/2) a c T^4
    double rho_star = ps.kind == ProblemKind::Stationary
                          ? ps.a * ps.c * std::pow(Tstar, 4.0)
                          : planck_emission(ps, Tstar);
    if (ps.kind == ProblemKind::Linear) rho_star = 0.7;
    for (Method m : {Method::Pinn, Method::Mm, Method::Eo}) {
      if (m == Method::Pinn && ps.kind == ProblemKind::Stationary) continue;
      CAPTURE(pid);
      CAPTURE(method_name(m));
      ParamStore st = constant_store(m, ps, rho_star, Tstar);
      Tape tp;
      tp.bind(st.theta.data(), st.theta.size());
      for (int k = 0; k < 4; ++k) {
        InteriorSample s;
        s.t = ps.kind == ProblemKind::Stationary
                  ? 0.0
                  : uniform_bits(rng, 0.0, std::max(ps.t_end, 0.1));
        s.x = uniform_bits(rng, ps.x0, ps.x1);
        s.mu = m == Method::Eo ? uniform_bits(rng, 0.0, 1.0)
                               : uniform_bits(rng, -1.0, 1.0);
        tp.clear();
        ResidualSet rs = interior_residuals(tp, st, m, ps, q, s);
        for (int i = 0; i < rs.n; ++i) {
          CAPTURE(i);
          CHECK(std::fabs(tp.val(rs.eq[i])) < 1e-12);
        }
        for (int i = 0; i < rs.ncons; ++i)
          CHECK(std::fabs(tp.val(rs.cons[i])) < 1e-13);
      }
    }
  }
}

TEST_CASE("even-odd interior residuals are affine in eps^2") {
  // with frozen nets the first, second and fourth equations are affine in
  // eps^2 and the third is independent of eps; two anchors then predict
  // a third epsilon exactly
  QuadSet q = make_quad_set(8);
  ProblemSpec base = problem("p3");
  ParamStore st = random_store(Method::Eo, base, 2024);
  InteriorSample s{0.21, 1.3, 0.37};

  auto eval_at = [&](double eps) {
    ProblemSpec ps = problem("p3", eps);
    Tape tp;
    tp.bind(st.theta.data(), st.theta.size());
    ResidualSet rs = interior_residuals(tp, st, Method::Eo, ps, q, s);
    std::vector<double> v;
    for (int i = 0; i < rs.n; ++i) v.push_back(tp.val(rs.eq[i]));
    v.push_back(tp.val(rs.cons[0]));
    return v;
  };

  const double ea = 0.5, eb = 0.1, ec = 1e-3;
  std::vector<double> ra = eval_at(ea), rb = eval_at(eb), rc = eval_at(ec);
  REQUIRE(ra.size() == 5);
  for (int i : {0, 1, 3}) {
    CAPTURE(i);
    double slope = (ra[i] - rb[i]) / (ea * ea - eb * eb);
    double icept = ra[i] - slope * ea * ea;
    double pred = icept + slope * ec * ec;
    CHECK(rel(pred, rc[i]) < 1e-10);
  }
  // macro flux equation and the constraint carry no eps dependence
  CHECK(rel(ra[2], rc[2]) < 1e-13);
  CHECK(rel(ra[4], rc[4]) < 1e-13);
}

TEST_CASE("risk assembly: group means, weights, and the gradient") {
  ProblemSpec ps = problem("p3");
  QuadSet q = make_quad_set(4);
  ParamStore st = random_store(Method::Eo, ps, 9);

  Batch b;
  b.interior = {{0.1, 0.4, 0.7}, {0.3, 1.1, 0.2}};
  b.boundary = {{0.2, -0.5}};
  b.initial = {{0.9, 0.3}};

  RiskWeights w;
  Tape tp;
  RiskParts parts = risk_and_grad(tp, st, Method::Eo, ps, q, b, w, nullptr);

  // group values recomputed from the oracle residuals
  double interior = 0.0, cons = 0.0, boundary = 0.0, initial = 0.0;
  for (const auto& s : b.interior) {
    OracleOut o = oracle_interior(Method::Eo, ps, q, st, s);
    for (double v : o.eq) interior += v * v;
    for (double v : o.cons) cons += v * v;
  }
  for (const auto& s : b.boundary) {
    OracleOut o = oracle_boundary(Method::Eo, ps, q, st, s);
    for (double v : o.eq) boundary += v * v;
  }
  for (const auto& s : b.initial) {
    OracleOut o = oracle_initial(Method::Eo, ps, q, st, s);
    for (double v : o.eq) initial += v * v;
  }
  CHECK(rel(parts.interior, interior / 2.0) < 1e-12);
  CHECK(rel(parts.constraint, cons / 2.0) < 1e-12);
  CHECK(rel(parts.boundary, boundary) < 1e-12);
  CHECK(rel(parts.initial, initial) < 1e-12);
  CHECK(parts.total == doctest::Approx(parts.interior + parts.constraint +
                                       parts.boundary + parts.initial)
                           .epsilon(1e-14));

  // weights scale their group linearly
  RiskWeights w2 = w;
  w2.boundary = 3.0;
  RiskParts p2 = risk_and_grad(tp, st, Method::Eo, ps, q, b, w2, nullptr);
  CHECK(rel(p2.boundary, 3.0 * parts.boundary) < 1e-13);
  CHECK(rel(p2.interior, parts.interior) < 1e-13);

  // gradient against central differences of the (already validated) risk
  std::vector<double> grad(st.theta.size(), 0.0);
  risk_and_grad(tp, st, Method::Eo, ps, q, b, w, &grad);
  ParamStore probe = st;
  auto f = [&](const double* th) {
    std::copy(th, th + probe.theta.size(), probe.theta.begin());
    Tape t2;
    return risk_and_grad(t2, probe, Method::Eo, ps, q, b, w, nullptr).total;
  };
  GradCheck gc = check_gradient(f, st.theta, grad, 1e-4);
  CHECK(gc.max_rel_err < 1e-5);

  // determinism: identical calls produce bit-identical results
  std::vector<double> g2(st.theta.size(), 0.0);
  RiskParts p3 = risk_and_grad(tp, st, Method::Eo, ps, q, b, w, &g2);
  CHECK(std::memcmp(&p3.total, &parts.total, sizeof(double)) == 0);
  CHECK(std::memcmp(g2.data(), grad.data(), g2.size() * sizeof(double)) == 0);
}
