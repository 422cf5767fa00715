#include "apnn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "apnn/errors.hpp"
#include "apnn/quadrature.hpp"

namespace apnn {
namespace {

// ---------------------------------------------------------------- tridiag --

std::vector<double> thomas(const std::vector<double>& lo,
                           const std::vector<double>& di,
                           const std::vector<double>& up,
                           std::vector<double> rhs) {
  int n = static_cast<int>(di.size());
  std::vector<double> c(n);
  double piv = di[0];
  c[0] = up[0] / piv;
  rhs[0] /= piv;
  for (int i = 1; i < n; ++i) {
    piv = di[i] - lo[i] * c[i - 1];
    c[i] = up[i] / piv;
    rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / piv;
  }
  for (int i = n - 2; i >= 0; --i) rhs[i] -= c[i] * rhs[i + 1];
  return rhs;
}

// Tridiagonal system; when cyclic, lo[0] couples row 0 to the last unknown
// and up[n-1] couples the last row to the first (Sherman-Morrison).
struct Tridiag {
  std::vector<double> lo, di, up;
  bool cyclic = false;

  int n() const { return static_cast<int>(di.size()); }

  std::vector<double> solve(std::vector<double> rhs) const {
    if (!cyclic) return thomas(lo, di, up, std::move(rhs));
    int m = n();
    double cor_a = lo[0], cor_b = up[m - 1];
    double gamma = -di[0];
    std::vector<double> d2 = di, lo2 = lo, up2 = up;
    d2[0] -= gamma;
    d2[m - 1] -= cor_a * cor_b / gamma;
    lo2[0] = 0.0;
    up2[m - 1] = 0.0;
    std::vector<double> u(m, 0.0);
    u[0] = gamma;
    u[m - 1] = cor_b;
    auto y = thomas(lo2, d2, up2, std::move(rhs));
    auto z = thomas(lo2, d2, up2, std::move(u));
    double fact = (y[0] + cor_a * y[m - 1] / gamma) /
                  (1.0 + z[0] + cor_a * z[m - 1] / gamma);
    for (int i = 0; i < m; ++i) y[i] -= fact * z[i];
    return y;
  }
};

// --------------------------------------------------------------- dense LU --

struct DenseLU {
  int n = 0;
  std::vector<double> a;  // row-major, factored in place
  std::vector<int> piv;

  void factor(std::vector<double> m, int n_) {
    n = n_;
    a = std::move(m);
    piv.assign(n, 0);
    for (int k = 0; k < n; ++k) {
      int p = k;
      double best = std::abs(a[static_cast<std::size_t>(k) * n + k]);
      for (int i = k + 1; i < n; ++i) {
        double v = std::abs(a[static_cast<std::size_t>(i) * n + k]);
        if (v > best) {
          best = v;
          p = i;
        }
      }
      if (best == 0.0)
        throw NumericalError("singular matrix in reference solver");
      piv[k] = p;
      if (p != k)
        for (int j = 0; j < n; ++j)
          std::swap(a[static_cast<std::size_t>(k) * n + j],
                    a[static_cast<std::size_t>(p) * n + j]);
      double d = a[static_cast<std::size_t>(k) * n + k];
      for (int i = k + 1; i < n; ++i) {
        double f = a[static_cast<std::size_t>(i) * n + k] / d;
        a[static_cast<std::size_t>(i) * n + k] = f;
        if (f != 0.0)
          for (int j = k + 1; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] -=
                f * a[static_cast<std::size_t>(k) * n + j];
      }
    }
  }

  std::vector<double> solve(std::vector<double> b) const {
    for (int k = 0; k < n; ++k)
      if (piv[k] != k) std::swap(b[k], b[piv[k]]);
    for (int i = 1; i < n; ++i) {
      double s = b[i];
      const double* row = &a[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < i; ++j) s -= row[j] * b[j];
      b[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = b[i];
      const double* row = &a[static_cast<std::size_t>(i) * n];
      for (int j = i + 1; j < n; ++j) s -= row[j] * b[j];
      b[i] = s / row[i];
    }
    return b;
  }
};

std::vector<double> matvec(const std::vector<double>& m,
                           const std::vector<double>& x) {
  int n = static_cast<int>(x.size());
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = &m[static_cast<std::size_t>(i) * n];
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

double interp_linear(const std::vector<double>& xs,
                     const std::vector<double>& ys, double x) {
  int n = static_cast<int>(xs.size());
  if (n == 1) return ys[0];
  int i = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) -
                           xs.begin()) -
          1;
  i = std::clamp(i, 0, n - 2);
  double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + w * (ys[i + 1] - ys[i]);
}

std::vector<double> cell_centers(const ProblemSpec& ps, int n_x) {
  std::vector<double> x(n_x);
  double dx = (ps.x1 - ps.x0) / n_x;
  for (int k = 0; k < n_x; ++k) x[k] = ps.x0 + (k + 0.5) * dx;
  return x;
}

// Map eval times onto step indices; every eval time must land on the grid.
std::vector<int> eval_steps(const ProblemSpec& ps, double dt) {
  std::vector<int> steps;
  for (double t : ps.eval_times) {
    int k = static_cast<int>(std::llround(t / dt));
    if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, t))
      throw ConfigError("n_t does not resolve eval time " + std::to_string(t));
    steps.push_back(k);
  }
  return steps;
}

// ------------------------------------------------------- kinetic (p1/3/4) --
//
// State per step: even parity u[m][k] and odd parity v[m][k] at half-range
// ordinates mu_m, material temperature T[k] (empty for the linear problem).

class KineticSolver {
 public:
  KineticSolver(const ProblemSpec& ps, int n_x, int n_t, int n_mu, double tol)
      : ps_(ps), n_x_(n_x), n_t_(n_t), n_mu_(n_mu), tol_(tol) {
    if (ps.kind == ProblemKind::Stationary)
      throw ConfigError("kinetic solver needs a time-dependent problem");
    if (n_x < 8 || n_t < 1 || n_mu < 2 || tol <= 0.0)
      throw ConfigError("kinetic solver: bad grid sizes");
    dx_ = (ps.x1 - ps.x0) / n_x;
    dt_ = ps.t_end / n_t;
    alpha_ = ps.epsilon * ps.epsilon / (ps.c * dt_);
    asig_ = alpha_ + ps.sigma;
    QuadRule q = gauss_legendre(n_mu);
    mu_.resize(n_mu);
    wt_.resize(n_mu);
    gl_.assign(n_mu, 0.0);
    gr_.assign(n_mu, 0.0);
    for (int m = 0; m < n_mu; ++m) {
      mu_[m] = 0.5 * (q.x[m] + 1.0);
      wt_[m] = 0.5 * q.w[m];
    }
    build_ops();
    if (ps_.kind == ProblemKind::Linear)
      factor_linear_closure();
    else
      build_response();
    init_state();
  }

  GridSolution run() {
    GridSolution sol;
    sol.x = cell_centers(ps_, n_x_);
    auto snaps = eval_steps(ps_, dt_);
    record_te(0.0);
    for (int it = 1; it <= n_t_; ++it) {
      step();
      record_te(it * dt_);
      for (std::size_t s = 0; s < snaps.size(); ++s)
        if (snaps[s] == it) snapshot(sol, ps_.eval_times[s]);
    }
    sol.te_t = std::move(te_t_);
    sol.te_v = std::move(te_v_);
    sol.te_x = ps_.x_electron;
    return sol;
  }

 private:
  bool reflect_left() const { return ps_.bc == BoundaryKind::ReflectPlanck; }
  bool robin_left() const { return ps_.bc == BoundaryKind::Inflow; }
  bool robin_right() const { return ps_.bc != BoundaryKind::Periodic; }
  bool cyclic() const { return ps_.bc == BoundaryKind::Periodic; }

  // Elliptic operator per ordinate after eliminating the odd parity:
  //   asig u - (eps mu)^2/asig u_xx, boundary rows via ghost elimination.
  void build_ops() {
    op_.resize(n_mu_);
    r_.resize(n_mu_);
    cp_.resize(n_mu_);
    cm_.resize(n_mu_);
    for (int m = 0; m < n_mu_; ++m) {
      double beta = ps_.epsilon * mu_[m] * ps_.epsilon * mu_[m] / asig_;
      double r = beta / (dx_ * dx_);
      double gamma = ps_.epsilon * mu_[m] / asig_;
      r_[m] = r;
      cp_[m] = 0.5 + gamma / dx_;
      cm_[m] = 0.5 - gamma / dx_;
      Tridiag& A = op_[m];
      A.cyclic = cyclic();
      A.lo.assign(n_x_, -r);
      A.di.assign(n_x_, asig_ + 2.0 * r);
      A.up.assign(n_x_, -r);
      if (!A.cyclic) {
        A.lo[0] = 0.0;
        A.up[n_x_ - 1] = 0.0;
        if (reflect_left())
          A.di[0] = asig_ + r;  // mirror ghost u_g = u_0
        else
          A.di[0] = asig_ + 2.0 * r + r * cm_[m] / cp_[m];
        A.di[n_x_ - 1] = asig_ + 2.0 * r + r * cm_[m] / cp_[m];
      }
    }
  }

  // Dense angular response M = sum_m wt_m A_m^{-1}, built once; used for the
  // exact rho closure (linear) and the exact Newton Jacobian (grte).
  void build_dense_m() {
    std::size_t nn = static_cast<std::size_t>(n_x_) * n_x_;
    m_.assign(nn, 0.0);
    std::vector<double> e(n_x_, 0.0);
    for (int m = 0; m < n_mu_; ++m)
      for (int k = 0; k < n_x_; ++k) {
        e[k] = 1.0;
        auto col = op_[m].solve(e);
        e[k] = 0.0;
        for (int i = 0; i < n_x_; ++i)
          m_[static_cast<std::size_t>(i) * n_x_ + k] += wt_[m] * col[i];
      }
  }

  void factor_linear_closure() {
    build_dense_m();
    std::vector<double> im = m_;
    for (auto& v : im) v *= -ps_.sigma;
    for (int i = 0; i < n_x_; ++i)
      im[static_cast<std::size_t>(i) * n_x_ + i] += 1.0;
    closure_.factor(std::move(im), n_x_);
  }

  void build_response() { build_dense_m(); }

  void init_state() {
    u_.assign(n_mu_, std::vector<double>(n_x_));
    v_.assign(n_mu_, std::vector<double>(n_x_, 0.0));
    auto x = cell_centers(ps_, n_x_);
    for (int m = 0; m < n_mu_; ++m)
      for (int k = 0; k < n_x_; ++k) u_[m][k] = initial_I(ps_, x[k], mu_[m]);
    if (ps_.kind == ProblemKind::Grte) {
      T_.resize(n_x_);
      for (int k = 0; k < n_x_; ++k) T_[k] = initial_T(ps_, x[k]);
    }
  }

  // x-derivative of a per-ordinate grid field with boundary-aware stencils
  std::vector<double> deriv_v(const std::vector<double>& v) const {
    std::vector<double> d(n_x_);
    double h2 = 2.0 * dx_;
    for (int k = 1; k < n_x_ - 1; ++k) d[k] = (v[k + 1] - v[k - 1]) / h2;
    if (cyclic()) {
      d[0] = (v[1] - v[n_x_ - 1]) / h2;
      d[n_x_ - 1] = (v[0] - v[n_x_ - 2]) / h2;
    } else {
      if (reflect_left())
        d[0] = (v[1] + v[0]) / h2;  // odd mirror ghost
      else
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2;
      d[n_x_ - 1] = (3.0 * v[n_x_ - 1] - 4.0 * v[n_x_ - 2] + v[n_x_ - 3]) / h2;
    }
    return d;
  }

  // Boundary data g for the Robin rows of the current step (depends on v^n)
  void refresh_bc(int m) {
    double af = alpha_ / asig_;
    if (robin_left()) {
      double vf = 1.5 * v_[m][0] - 0.5 * v_[m][1];
      gl_[m] = ps_.inflow_left - af * vf;
    }
    if (robin_right()) {
      double vf = 1.5 * v_[m][n_x_ - 1] - 0.5 * v_[m][n_x_ - 2];
      double inc = ps_.bc == BoundaryKind::ReflectPlanck
                       ? planck_emission(ps_, ps_.planck_T)
                       : ps_.inflow_right;
      gr_[m] = inc + af * vf;
    }
  }

  // alpha u^n - (eps mu alpha/asig) d_x v^n + boundary terms; no emission
  std::vector<double> rhs_no_emission(int m) {
    std::vector<double> rhs(n_x_);
    auto dv = deriv_v(v_[m]);
    double cv = ps_.epsilon * mu_[m] * alpha_ / asig_;
    for (int k = 0; k < n_x_; ++k) rhs[k] = alpha_ * u_[m][k] - cv * dv[k];
    refresh_bc(m);
    if (robin_left()) rhs[0] += r_[m] * gl_[m] / cp_[m];
    if (robin_right()) rhs[n_x_ - 1] += r_[m] * gr_[m] / cp_[m];
    return rhs;
  }

  // v^{n+1} = (alpha v^n - eps mu u_x)/asig with ghost-consistent stencils
  void recover_v(int m, const std::vector<double>& u) {
    std::vector<double> du(n_x_);
    double h2 = 2.0 * dx_;
    for (int k = 1; k < n_x_ - 1; ++k) du[k] = (u[k + 1] - u[k - 1]) / h2;
    if (cyclic()) {
      du[0] = (u[1] - u[n_x_ - 1]) / h2;
      du[n_x_ - 1] = (u[0] - u[n_x_ - 2]) / h2;
    } else {
      if (reflect_left()) {
        du[0] = (u[1] - u[0]) / h2;
      } else {
        double ug = (gl_[m] - cm_[m] * u[0]) / cp_[m];
        du[0] = (u[1] - ug) / h2;
      }
      double ug = (gr_[m] - cm_[m] * u[n_x_ - 1]) / cp_[m];
      du[n_x_ - 1] = (ug - u[n_x_ - 2]) / h2;
    }
    double emu = ps_.epsilon * mu_[m];
    for (int k = 0; k < n_x_; ++k)
      v_[m][k] = (alpha_ * v_[m][k] - emu * du[k]) / asig_;
  }

  void step() {
    std::vector<std::vector<double>> z(n_mu_);
    for (int m = 0; m < n_mu_; ++m) z[m] = op_[m].solve(rhs_no_emission(m));
    std::vector<double> emission(n_x_);
    if (ps_.kind == ProblemKind::Linear) {
      // exact closure: (I - sigma M) rho = sum_m wt_m z_m
      std::vector<double> rhs(n_x_, 0.0);
      for (int m = 0; m < n_mu_; ++m)
        for (int k = 0; k < n_x_; ++k) rhs[k] += wt_[m] * z[m][k];
      emission = closure_.solve(std::move(rhs));
    } else {
      solve_material(z, emission);
    }
    std::vector<double> src(n_x_);
    for (int k = 0; k < n_x_; ++k) src[k] = ps_.sigma * emission[k];
    for (int m = 0; m < n_mu_; ++m) {
      auto ue = op_[m].solve(src);
      for (int k = 0; k < n_x_; ++k) ue[k] += z[m][k];
      recover_v(m, ue);
      u_[m] = std::move(ue);
    }
  }

  // Newton on T with the exact radiation response: the angular integral of
  // I^{n+1} is U(T) = 2 sigma M B(T) + G, G = 2 sum_m wt_m z_m, so
  //   F(T) = eps^2 Cv (T - T^n)/dt - sigma (U(T) - a c T^4) = 0
  // has dense Jacobian  diag(eps^2 Cv/dt + 4 sigma a c T^3)
  //                     - 4 sigma^2 a c M diag(T^3).
  void solve_material(const std::vector<std::vector<double>>& z,
                      std::vector<double>& emission) {
    double ac = ps_.a * ps_.c;
    double e2cv = ps_.epsilon * ps_.epsilon * ps_.Cv / dt_;
    std::vector<double> g(n_x_, 0.0);
    for (int m = 0; m < n_mu_; ++m)
      for (int k = 0; k < n_x_; ++k) g[k] += 2.0 * wt_[m] * z[m][k];

    std::vector<double> T = T_;
    auto planck = [&](const std::vector<double>& t) {
      std::vector<double> b(n_x_);
      for (int k = 0; k < n_x_; ++k) {
        double t2 = t[k] * t[k];
        b[k] = 0.5 * ac * t2 * t2;
      }
      return b;
    };
    auto residual = [&](const std::vector<double>& t) {
      auto rad = matvec(m_, planck(t));
      std::vector<double> f(n_x_);
      for (int k = 0; k < n_x_; ++k) {
        double t2 = t[k] * t[k];
        double uu = 2.0 * ps_.sigma * rad[k] + g[k];
        f[k] = e2cv * (t[k] - T_[k]) - ps_.sigma * (uu - ac * t2 * t2);
      }
      return f;
    };
    auto norm_inf = [](const std::vector<double>& f) {
      double s = 0.0;
      for (double v : f) s = std::max(s, std::abs(v));
      return s;
    };

    double tmax = 1.0;
    for (double t : T) tmax = std::max(tmax, std::abs(t));
    double f_tol = tol_ * std::max(1.0, ps_.sigma * ac * std::pow(tmax, 4.0));
    auto f = residual(T);
    double fn = norm_inf(f);
    for (int it = 0; it < 60; ++it) {
      if (fn <= f_tol) break;
      std::vector<double> jac(static_cast<std::size_t>(n_x_) * n_x_);
      for (int i = 0; i < n_x_; ++i) {
        double* row = &jac[static_cast<std::size_t>(i) * n_x_];
        const double* mr = &m_[static_cast<std::size_t>(i) * n_x_];
        for (int j = 0; j < n_x_; ++j) {
          double t3 = T[j] * T[j] * T[j];
          row[j] = -4.0 * ps_.sigma * ps_.sigma * ac * mr[j] * t3;
        }
        double t3 = T[i] * T[i] * T[i];
        row[i] += e2cv + 4.0 * ps_.sigma * ac * t3;
      }
      DenseLU lu;
      lu.factor(std::move(jac), n_x_);
      auto dT = lu.solve(f);
      double s = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 50; ++ls) {
        std::vector<double> tn(n_x_);
        bool pos = true;
        for (int k = 0; k < n_x_; ++k) {
          tn[k] = T[k] - s * dT[k];
          if (tn[k] <= 0.0) pos = false;
        }
        if (pos) {
          auto fnn = residual(tn);
          double fv = norm_inf(fnn);
          if (fv < fn) {
            T = std::move(tn);
            f = std::move(fnn);
            fn = fv;
            accepted = true;
            break;
          }
        }
        s *= 0.5;
      }
      if (!accepted)
        throw NumericalError("material update stalled in kinetic solver");
      if (it == 59 && fn > f_tol)
        throw NumericalError("material update did not converge");
    }
    if (fn > f_tol)
      throw NumericalError("material update did not converge");
    T_ = T;
    emission = planck(T);
  }

  void record_te(double t) {
    if (ps_.kind != ProblemKind::Grte) return;
    te_t_.push_back(t);
    te_v_.push_back(interp_linear(cell_centers(ps_, n_x_), T_, ps_.x_electron));
  }

  void snapshot(GridSolution& sol, double t) {
    sol.times.push_back(t);
    std::vector<double> rho(n_x_, 0.0);
    for (int m = 0; m < n_mu_; ++m)
      for (int k = 0; k < n_x_; ++k) rho[k] += wt_[m] * u_[m][k];
    std::vector<double> tr(n_x_);
    for (int k = 0; k < n_x_; ++k)
      tr[k] = radiation_temperature(ps_, 2.0 * rho[k]);
    sol.rho.push_back(std::move(rho));
    sol.Tr.push_back(std::move(tr));
    if (!T_.empty()) sol.T.push_back(T_);
  }

  ProblemSpec ps_;
  int n_x_, n_t_, n_mu_;
  double tol_, dx_, dt_, alpha_, asig_;
  std::vector<double> mu_, wt_;
  std::vector<Tridiag> op_;
  std::vector<double> r_, cp_, cm_;
  std::vector<double> gl_, gr_;
  std::vector<double> m_;  // dense response
  DenseLU closure_;        // linear problem: LU of (I - sigma M)
  std::vector<std::vector<double>> u_, v_;
  std::vector<double> T_;
  std::vector<double> te_t_, te_v_;
};

// --------------------------------------------------------- stationary p2 --

GridSolution stationary_impl(const ProblemSpec& ps, int n_x, int n_mu,
                             double tol) {
  if (ps.kind != ProblemKind::Stationary)
    throw ConfigError("stationary solver needs a stationary problem");
  if (n_x < 8 || n_mu < 2 || tol <= 0.0)
    throw ConfigError("stationary solver: bad grid sizes");
  double dx = (ps.x1 - ps.x0) / n_x;
  double ac = ps.a * ps.c;
  QuadRule q = gauss_legendre(n_mu);

  // Per-ordinate elliptic operator u - (eps mu/sigma)^2 u_xx = Q + bc with
  // Robin rows from the inflow conditions; dense kernel rho = K Q + rho_bc.
  std::size_t nn = static_cast<std::size_t>(n_x) * n_x;
  std::vector<double> kern(nn, 0.0);
  std::vector<double> rho_bc(n_x, 0.0);
  std::vector<double> e(n_x, 0.0);
  for (int m = 0; m < n_mu; ++m) {
    double mu = 0.5 * (q.x[m] + 1.0);
    double wt = 0.5 * q.w[m];
    double gamma = ps.epsilon * mu / ps.sigma;
    double r = gamma * gamma / (dx * dx);
    double cp = 0.5 + gamma / dx, cm = 0.5 - gamma / dx;
    Tridiag A;
    A.lo.assign(n_x, -r);
    A.di.assign(n_x, 1.0 + 2.0 * r + r * cm / cp);
    A.up.assign(n_x, -r);
    for (int k = 1; k < n_x - 1; ++k) A.di[k] = 1.0 + 2.0 * r;
    A.lo[0] = 0.0;
    A.up[n_x - 1] = 0.0;
    for (int k = 0; k < n_x; ++k) {
      e[k] = 1.0;
      auto col = A.solve(e);
      e[k] = 0.0;
      for (int i = 0; i < n_x; ++i)
        kern[static_cast<std::size_t>(i) * n_x + k] += wt * col[i];
    }
    std::vector<double> bc(n_x, 0.0);
    bc[0] = r * ps.inflow_left / cp;
    bc[n_x - 1] = r * ps.inflow_right / cp;
    auto ub = A.solve(std::move(bc));
    for (int i = 0; i < n_x; ++i) rho_bc[i] += wt * ub[i];
  }

  // Damped Newton on eps^2 T_xx - sigma (a c T^4 - K(a c T^4) - rho_bc) = 0
  // with Dirichlet temperature data entering through ghost cells.
  double e2dx = ps.epsilon * ps.epsilon / (dx * dx);
  auto emission = [&](const std::vector<double>& t) {
    std::vector<double> b(n_x);
    for (int k = 0; k < n_x; ++k) {
      double t2 = t[k] * t[k];
      b[k] = ac * t2 * t2;
    }
    return b;
  };
  auto residual = [&](const std::vector<double>& t) {
    auto qv = emission(t);
    auto kq = matvec(kern, qv);
    std::vector<double> f(n_x);
    for (int k = 0; k < n_x; ++k) {
      double lap;
      if (k == 0)
        lap = e2dx * (t[1] - 3.0 * t[0] + 2.0 * ps.bc_T_left);
      else if (k == n_x - 1)
        lap = e2dx * (2.0 * ps.bc_T_right - 3.0 * t[k] + t[k - 1]);
      else
        lap = e2dx * (t[k + 1] - 2.0 * t[k] + t[k - 1]);
      f[k] = lap - ps.sigma * (qv[k] - kq[k] - rho_bc[k]);
    }
    return f;
  };
  auto norm_inf = [](const std::vector<double>& f) {
    double s = 0.0;
    for (double v : f) s = std::max(s, std::abs(v));
    return s;
  };

  std::vector<double> x = cell_centers(ps, n_x);
  std::vector<double> T(n_x);
  for (int k = 0; k < n_x; ++k) {
    double w = (x[k] - ps.x0) / (ps.x1 - ps.x0);
    T[k] = ps.bc_T_left + w * (ps.bc_T_right - ps.bc_T_left);
  }
  double f_tol =
      tol * std::max(1.0, ps.sigma * ac + e2dx * std::abs(ps.bc_T_left));
  auto f = residual(T);
  double fn = norm_inf(f);
  for (int it = 0; fn > f_tol; ++it) {
    if (it >= 80)
      throw NumericalError("stationary material solve did not converge");
    std::vector<double> jac(nn);
    for (int i = 0; i < n_x; ++i) {
      double* row = &jac[static_cast<std::size_t>(i) * n_x];
      const double* kr = &kern[static_cast<std::size_t>(i) * n_x];
      for (int j = 0; j < n_x; ++j) {
        double t3 = T[j] * T[j] * T[j];
        row[j] = 4.0 * ps.sigma * ac * kr[j] * t3;
      }
      double t3 = T[i] * T[i] * T[i];
      row[i] += -4.0 * ps.sigma * ac * t3;
      row[i] += i == 0 || i == n_x - 1 ? -3.0 * e2dx : -2.0 * e2dx;
      if (i > 0) row[i - 1] += e2dx;
      if (i < n_x - 1) row[i + 1] += e2dx;
    }
    DenseLU lu;
    lu.factor(std::move(jac), n_x);
    auto dT = lu.solve(f);
    double s = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      std::vector<double> tn(n_x);
      for (int k = 0; k < n_x; ++k) tn[k] = T[k] - s * dT[k];
      auto fnn = residual(tn);
      double fv = norm_inf(fnn);
      if (fv < fn) {
        T = std::move(tn);
        f = std::move(fnn);
        fn = fv;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted)
      throw NumericalError("stationary Newton stalled");
  }

  GridSolution sol;
  sol.x = x;
  sol.times = {0.0};
  auto qv = emission(T);
  auto kq = matvec(kern, qv);
  std::vector<double> rho(n_x), tr(n_x);
  for (int k = 0; k < n_x; ++k) {
    rho[k] = kq[k] + rho_bc[k];
    tr[k] = radiation_temperature(ps, 2.0 * rho[k]);
  }
  sol.rho.push_back(std::move(rho));
  sol.T.push_back(T);
  sol.Tr.push_back(std::move(tr));
  return sol;
}

// ------------------------------------------------------- diffusion limits --

GridSolution limit_linear(const ProblemSpec& ps, int n_x, int n_t) {
  double dx = (ps.x1 - ps.x0) / n_x;
  double dt = ps.t_end / n_t;
  double kap = ps.c / (3.0 * ps.sigma);
  double r = kap * dt / (dx * dx);
  Tridiag A;
  A.lo.assign(n_x, -r);
  A.di.assign(n_x, 1.0 + 2.0 * r);
  A.up.assign(n_x, -r);
  A.lo[0] = 0.0;
  A.up[n_x - 1] = 0.0;
  A.di[0] = A.di[n_x - 1] = 1.0 + 3.0 * r;

  std::vector<double> rho(n_x, 0.0);
  auto snaps = eval_steps(ps, dt);
  GridSolution sol;
  sol.x = cell_centers(ps, n_x);
  for (int it = 1; it <= n_t; ++it) {
    auto rhs = rho;
    rhs[0] += 2.0 * r * ps.inflow_left;
    rhs[n_x - 1] += 2.0 * r * ps.inflow_right;
    rho = A.solve(std::move(rhs));
    for (std::size_t s = 0; s < snaps.size(); ++s)
      if (snaps[s] == it) {
        sol.times.push_back(ps.eval_times[s]);
        std::vector<double> tr(n_x);
        for (int k = 0; k < n_x; ++k)
          tr[k] = radiation_temperature(ps, 2.0 * rho[k]);
        sol.rho.push_back(rho);
        sol.Tr.push_back(std::move(tr));
      }
  }
  return sol;
}

// d_t(Cv T) + a d_t(T^4) = kapd (T^4)_xx, kapd = ac/(3 sigma); implicit
// Euler with tridiagonal Newton. p3 periodic; p4 reflective left (Neumann on
// T^4) and Dirichlet T = planck_T right.
GridSolution limit_grte(const ProblemSpec& ps, int n_x, int n_t) {
  double dx = (ps.x1 - ps.x0) / n_x;
  double dt = ps.t_end / n_t;
  double kapd = ps.a * ps.c / (3.0 * ps.sigma);
  double rr = kapd / (dx * dx);
  bool cyc = ps.bc == BoundaryKind::Periodic;
  double ws = cyc ? 0.0 : std::pow(ps.planck_T, 4.0);

  auto x = cell_centers(ps, n_x);
  std::vector<double> T(n_x);
  for (int k = 0; k < n_x; ++k) T[k] = initial_T(ps, x[k]);

  auto w4 = [](double t) { return t * t * t * t; };
  auto residual = [&](const std::vector<double>& t,
                      const std::vector<double>& tn) {
    std::vector<double> f(n_x);
    for (int k = 0; k < n_x; ++k) {
      double wl, wr;
      if (cyc) {
        wl = w4(t[(k + n_x - 1) % n_x]);
        wr = w4(t[(k + 1) % n_x]);
      } else {
        wl = k == 0 ? w4(t[0]) : w4(t[k - 1]);  // mirror ghost left
        wr = k == n_x - 1 ? 2.0 * ws - w4(t[k]) : w4(t[k + 1]);
      }
      double lap = rr * (wl - 2.0 * w4(t[k]) + wr);
      f[k] = (ps.Cv * (t[k] - tn[k]) + ps.a * (w4(t[k]) - w4(tn[k]))) / dt -
             lap;
    }
    return f;
  };

  GridSolution sol;
  sol.x = x;
  sol.te_x = ps.x_electron;
  auto snaps = eval_steps(ps, dt);
  sol.te_t.push_back(0.0);
  sol.te_v.push_back(interp_linear(x, T, ps.x_electron));
  for (int it = 1; it <= n_t; ++it) {
    auto tn = T;
    auto f = residual(T, tn);
    for (int nit = 0;; ++nit) {
      double fn = 0.0;
      for (double v : f) fn = std::max(fn, std::abs(v));
      double scale = ps.Cv * (1.0 + std::abs(T[0])) / dt;
      if (fn <= 1e-12 * std::max(1.0, scale)) break;
      if (nit >= 50)
        throw NumericalError("diffusion limit Newton did not converge");
      Tridiag J;
      J.cyclic = cyc;
      J.lo.assign(n_x, 0.0);
      J.di.assign(n_x, 0.0);
      J.up.assign(n_x, 0.0);
      for (int k = 0; k < n_x; ++k) {
        double t3 = 4.0 * T[k] * T[k] * T[k];
        double dlap_dk = -2.0;
        if (!cyc && k == 0) dlap_dk = -1.0;       // mirror ghost
        if (!cyc && k == n_x - 1) dlap_dk = -3.0; // Dirichlet ghost
        J.di[k] = (ps.Cv + ps.a * t3) / dt - rr * dlap_dk * t3;
        double t3l = k > 0 ? 4.0 * std::pow(T[k - 1], 3.0) : 0.0;
        double t3r = k < n_x - 1 ? 4.0 * std::pow(T[k + 1], 3.0) : 0.0;
        if (cyc) {
          int kl = (k + n_x - 1) % n_x, kr = (k + 1) % n_x;
          t3l = 4.0 * std::pow(T[kl], 3.0);
          t3r = 4.0 * std::pow(T[kr], 3.0);
        }
        J.lo[k] = -rr * t3l;
        J.up[k] = -rr * t3r;
      }
      if (!cyc) {
        J.lo[0] = 0.0;
        J.up[n_x - 1] = 0.0;
      }
      auto dT = J.solve(f);
      double s = 1.0;
      bool ok = false;
      double fn0 = fn;
      for (int ls = 0; ls < 50; ++ls) {
        std::vector<double> t2(n_x);
        bool pos = true;
        for (int k = 0; k < n_x; ++k) {
          t2[k] = T[k] - s * dT[k];
          if (t2[k] <= 0.0) pos = false;
        }
        if (pos) {
          auto f2 = residual(t2, tn);
          double fv = 0.0;
          for (double v : f2) fv = std::max(fv, std::abs(v));
          if (fv < fn0) {
            T = std::move(t2);
            f = std::move(f2);
            ok = true;
            break;
          }
        }
        s *= 0.5;
      }
      if (!ok) throw NumericalError("diffusion limit Newton stalled");
    }
    sol.te_t.push_back(it * dt);
    sol.te_v.push_back(interp_linear(x, T, ps.x_electron));
    for (std::size_t s = 0; s < snaps.size(); ++s)
      if (snaps[s] == it) {
        sol.times.push_back(ps.eval_times[s]);
        std::vector<double> rho(n_x), tr(n_x);
        for (int k = 0; k < n_x; ++k) {
          rho[k] = 0.5 * ps.a * ps.c * w4(T[k]);
          tr[k] = T[k];
        }
        sol.rho.push_back(std::move(rho));
        sol.T.push_back(T);
        sol.Tr.push_back(std::move(tr));
      }
  }
  return sol;
}

// p2 limit: T + (ac/3sigma) T^4 is linear between the boundary temperatures
GridSolution limit_stationary(const ProblemSpec& ps, int n_x) {
  double qc = ps.a * ps.c / (3.0 * ps.sigma);
  auto lift = [&](double t) { return t + qc * t * t * t * t; };
  double gl = lift(ps.bc_T_left), gr = lift(ps.bc_T_right);
  auto x = cell_centers(ps, n_x);
  GridSolution sol;
  sol.x = x;
  sol.times = {0.0};
  std::vector<double> T(n_x), rho(n_x), tr(n_x);
  for (int k = 0; k < n_x; ++k) {
    double w = (x[k] - ps.x0) / (ps.x1 - ps.x0);
    double target = gl + w * (gr - gl);
    double t = std::max(1e-12, target);  // monotone quartic, Newton
    for (int it = 0; it < 100; ++it) {
      double fv = lift(t) - target;
      if (std::abs(fv) <= 1e-14 * std::max(1.0, std::abs(target))) break;
      t -= fv / (1.0 + 4.0 * qc * t * t * t);
      if (t < 0.0) t = 0.0;
    }
    T[k] = t;
    rho[k] = ps.a * ps.c * t * t * t * t;
    tr[k] = radiation_temperature(ps, 2.0 * rho[k]);
  }
  sol.rho.push_back(std::move(rho));
  sol.T.push_back(std::move(T));
  sol.Tr.push_back(std::move(tr));
  return sol;
}

}  // namespace

GridSolution solve_kinetic(const ProblemSpec& ps, int n_x, int n_t, int n_mu,
                           double tol) {
  return KineticSolver(ps, n_x, n_t, n_mu, tol).run();
}

GridSolution solve_stationary(const ProblemSpec& ps, int n_x, int n_mu,
                              double tol) {
  return stationary_impl(ps, n_x, n_mu, tol);
}

GridSolution solve_diffusion_limit(const ProblemSpec& ps, int n_x, int n_t) {
  if (n_x < 8) throw ConfigError("diffusion limit solver: bad grid sizes");
  if (ps.kind == ProblemKind::Stationary) return limit_stationary(ps, n_x);
  if (n_t < 1) throw ConfigError("diffusion limit solver: bad grid sizes");
  if (ps.kind == ProblemKind::Linear) return limit_linear(ps, n_x, n_t);
  return limit_grte(ps, n_x, n_t);
}

// ------------------------------------------------------------------- csv --

void write_reference_csv(const std::string& path, const ProblemSpec& ps,
                         const GridSolution& sol, const std::string& solver,
                         int n_x, int n_t, int n_mu, double tol) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "# problem=%s solver=%s epsilon=%.17g n_x=%d n_t=%d n_mu=%d "
                "tol=%.17g\n",
                ps.id.c_str(), solver.c_str(), ps.epsilon, n_x, n_t, n_mu,
                tol);
  out << buf << "t,x,quantity,value\n";
  auto row = [&](double t, double x, const char* q, double v) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%.17g\n", t, x, q, v);
    out << buf;
  };
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    for (std::size_t k = 0; k < sol.x.size(); ++k)
      row(sol.times[i], sol.x[k], "rho", sol.rho[i][k]);
    if (!sol.T.empty())
      for (std::size_t k = 0; k < sol.x.size(); ++k)
        row(sol.times[i], sol.x[k], "T", sol.T[i][k]);
    for (std::size_t k = 0; k < sol.x.size(); ++k)
      row(sol.times[i], sol.x[k], "Tr", sol.Tr[i][k]);
  }
  for (std::size_t i = 0; i < sol.te_t.size(); ++i)
    row(sol.te_t[i], ps.x_electron, "Te", sol.te_v[i]);
  if (!out) throw ConfigError("failed writing " + path);
}

GridSolution read_reference_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  GridSolution sol;
  std::string line;
  bool saw_header = false;
  int time_idx = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "t,x,quantity,value")
        throw ConfigError(path + ": unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string ts, xs, qs, vs;
    if (!std::getline(ss, ts, ',') || !std::getline(ss, xs, ',') ||
        !std::getline(ss, qs, ',') || !std::getline(ss, vs))
      throw ConfigError(path + ": malformed row '" + line + "'");
    double t = std::stod(ts), x = std::stod(xs), v = std::stod(vs);
    if (qs == "Te") {
      if (sol.te_t.empty()) sol.te_x = x;
      sol.te_t.push_back(t);
      sol.te_v.push_back(v);
      continue;
    }
    if (sol.times.empty() || t != sol.times.back()) {
      sol.times.push_back(t);
      ++time_idx;
      sol.rho.emplace_back();
      sol.T.emplace_back();
      sol.Tr.emplace_back();
    }
    if (qs == "rho") {
      if (time_idx == 0) sol.x.push_back(x);
      sol.rho[time_idx].push_back(v);
    } else if (qs == "T") {
      sol.T[time_idx].push_back(v);
    } else if (qs == "Tr") {
      sol.Tr[time_idx].push_back(v);
    } else {
      throw ConfigError(path + ": unknown quantity '" + qs + "'");
    }
  }
  if (!saw_header) throw ConfigError(path + ": empty reference file");
  bool has_T = !sol.T.empty() && !sol.T[0].empty();
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    if (sol.rho[i].size() != sol.x.size() ||
        sol.Tr[i].size() != sol.x.size() ||
        (has_T && sol.T[i].size() != sol.x.size()))
      throw ConfigError(path + ": inconsistent profile lengths");
  }
  if (!has_T) sol.T.clear();
  return sol;
}

double sample_profile(const GridSolution& sol, const std::string& quantity,
                      double t, double x) {
  int idx = -1;
  for (std::size_t i = 0; i < sol.times.size(); ++i)
    if (std::abs(sol.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      idx = static_cast<int>(i);
  if (idx < 0) throw ConfigError("no stored profile at requested time");
  const std::vector<std::vector<double>>* field = nullptr;
  if (quantity == "rho")
    field = &sol.rho;
  else if (quantity == "T")
    field = &sol.T;
  else if (quantity == "Tr")
    field = &sol.Tr;
  else
    throw ConfigError("unknown quantity '" + quantity + "'");
  if (field->empty()) throw ConfigError("quantity not stored: " + quantity);
  return interp_linear(sol.x, (*field)[idx], x);
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ConfigError("relative_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    num += d * d;
    den += b[i] * b[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace apnn
