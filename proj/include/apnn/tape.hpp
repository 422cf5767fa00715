#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <vector>

#include "apnn/taylor.hpp"

namespace apnn {

// Scalar computational graph over Taylor-valued nodes.
//
// Forward values are computed at record time. The reverse sweep propagates
// Taylor-triple adjoints: for a node y = phi(u, ...) with local partial
// g = dphi/du (itself a Taylor value), the adjoint update is the transpose of
// multiply-by-g in the truncated ring,
//   u^.v  += y^.v*g.v + y^.d1*g.d1 + y^.d2*g.d2
//   u^.d1 += y^.d1*g.v + 2*y^.d2*g.d1
//   u^.d2 += y^.d2*g.v
// Parameter gradients are the .v components of the parameter adjoints.
//
// Affine layers are recorded as fused dot nodes over a contiguous node range
// and a contiguous parameter-slot range, so forward and reverse sweeps run as
// unit-stride loops. DotV is the value-only variant used for subgraphs whose
// d1/d2 are identically zero (no derivative extraction downstream).

class Tape;

struct Ad {
  Tape* tape = nullptr;
  uint32_t idx = 0;
};

class Tape {
 public:
  enum class Op : uint8_t {
    Leaf,      // constant or seeded input; no parents
    Param,     // a = slot; value theta[a], zero d1/d2
    Add, Sub, Mul, Div,      // a, b
    Neg,                     // a
    Scale,     // a, c: y = c*u
    Shift,     // a, c: y = u + c
    Unary,     // a, b = Ufunc code
    Pow,       // a, c = exponent
    Extract1,  // a: y = (u.d1, 0, 0)
    Extract2,  // a: y = (u.d2, 0, 0)
    Dot,       // a = index into dots_
    DotV,      // value-only dot
    WSum,      // a = index into sums_: y = sum_j coef_j * node_j
  };

  struct DotRec {
    uint32_t h0;     // first input node, inputs are [h0, h0+k)
    uint32_t k;
    uint32_t wslot;  // weights theta[wslot, wslot+k)
    uint32_t bslot;  // bias slot
  };
  struct SumRec {
    uint32_t off;  // offset into sum_idx_ / sum_coef_
    uint32_t k;
  };

  void bind(const double* theta, std::size_t n) {
    theta_ = theta;
    ntheta_ = n;
  }

  void clear() {
    v_.clear(); d1_.clear(); d2_.clear();
    op_.clear(); a_.clear(); b_.clear(); c_.clear();
    dots_.clear(); sums_.clear(); sum_idx_.clear(); sum_coef_.clear();
  }

  std::size_t size() const { return op_.size(); }
  std::size_t param_count() const { return ntheta_; }

  double val(Ad x) const { return v_[x.idx]; }
  double d1(Ad x) const { return d1_[x.idx]; }
  double d2(Ad x) const { return d2_[x.idx]; }
  Taylor taylor(Ad x) const { return {v_[x.idx], d1_[x.idx], d2_[x.idx]}; }

  Ad constant(double v) { return push(Op::Leaf, 0, 0, 0.0, {v, 0.0, 0.0}); }
  Ad input(double v, double dir1, double dir2 = 0.0) {
    return push(Op::Leaf, 0, 0, 0.0, {v, dir1, dir2});
  }
  Ad param(uint32_t slot) {
    return push(Op::Param, slot, 0, 0.0, {theta_[slot], 0.0, 0.0});
  }

  Ad add(Ad x, Ad y) { return push(Op::Add, x.idx, y.idx, 0.0, tadd(t(x), t(y))); }
  Ad sub(Ad x, Ad y) { return push(Op::Sub, x.idx, y.idx, 0.0, tsub(t(x), t(y))); }
  Ad mul(Ad x, Ad y) { return push(Op::Mul, x.idx, y.idx, 0.0, tmul(t(x), t(y))); }
  Ad div(Ad x, Ad y) { return push(Op::Div, x.idx, y.idx, 0.0, tdiv(t(x), t(y))); }
  Ad neg(Ad x) { return push(Op::Neg, x.idx, 0, 0.0, tneg(t(x))); }
  Ad scale(Ad x, double c) { return push(Op::Scale, x.idx, 0, c, tscale(c, t(x))); }
  Ad shift(Ad x, double c) {
    Taylor u = t(x);
    return push(Op::Shift, x.idx, 0, c, {u.v + c, u.d1, u.d2});
  }
  Ad unary(Ufunc f, Ad x) {
    return push(Op::Unary, x.idx, static_cast<uint32_t>(f), 0.0,
                ufunc_apply(f, t(x)));
  }
  Ad pow(Ad x, double p) { return push(Op::Pow, x.idx, 0, p, tpow(t(x), p)); }

  Ad extract_d1(Ad x) {
    return push(Op::Extract1, x.idx, 0, 0.0, {d1_[x.idx], 0.0, 0.0});
  }
  Ad extract_d2(Ad x) {
    return push(Op::Extract2, x.idx, 0, 0.0, {d2_[x.idx], 0.0, 0.0});
  }

  // y = theta[bslot] + sum_j theta[wslot+j] * node[h0+j]
  Ad dot(uint32_t wslot, uint32_t bslot, uint32_t h0, uint32_t k) {
    const double* w = theta_ + wslot;
    double s0 = theta_[bslot], s1 = 0.0, s2 = 0.0;
    const double* pv = v_.data() + h0;
    const double* p1 = d1_.data() + h0;
    const double* p2 = d2_.data() + h0;
    for (uint32_t j = 0; j < k; ++j) s0 += w[j] * pv[j];
    for (uint32_t j = 0; j < k; ++j) s1 += w[j] * p1[j];
    for (uint32_t j = 0; j < k; ++j) s2 += w[j] * p2[j];
    uint32_t rec = static_cast<uint32_t>(dots_.size());
    dots_.push_back({h0, k, wslot, bslot});
    return push(Op::Dot, rec, 0, 0.0, {s0, s1, s2});
  }

  Ad dot_value(uint32_t wslot, uint32_t bslot, uint32_t h0, uint32_t k) {
    const double* w = theta_ + wslot;
    double s0 = theta_[bslot];
    const double* pv = v_.data() + h0;
    for (uint32_t j = 0; j < k; ++j) s0 += w[j] * pv[j];
    uint32_t rec = static_cast<uint32_t>(dots_.size());
    dots_.push_back({h0, k, wslot, bslot});
    return push(Op::DotV, rec, 0, 0.0, {s0, 0.0, 0.0});
  }

  // y = sum_j coef[j] * nodes[j]; nodes need not be contiguous.
  Ad wsum(std::span<const Ad> nodes, std::span<const double> coef) {
    Taylor s{0.0, 0.0, 0.0};
    uint32_t off = static_cast<uint32_t>(sum_idx_.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      s.v += coef[j] * v_[nodes[j].idx];
      s.d1 += coef[j] * d1_[nodes[j].idx];
      s.d2 += coef[j] * d2_[nodes[j].idx];
      sum_idx_.push_back(nodes[j].idx);
      sum_coef_.push_back(coef[j]);
    }
    uint32_t rec = static_cast<uint32_t>(sums_.size());
    sums_.push_back({off, static_cast<uint32_t>(nodes.size())});
    return push(Op::WSum, rec, 0, 0.0, s);
  }

  // Reverse sweep from root. Parameter gradients accumulate (+=) into grad,
  // which must have param_count() entries.
  void backward(Ad root, std::vector<double>& grad) {
    const std::size_t n = op_.size();
    za_.assign(n, 0.0);
    z1_.assign(n, 0.0);
    z2_.assign(n, 0.0);
    za_[root.idx] = 1.0;
    for (std::size_t i = root.idx + 1; i-- > 0;) {
      double ya = za_[i], y1 = z1_[i], y2 = z2_[i];
      if (ya == 0.0 && y1 == 0.0 && y2 == 0.0) continue;
      switch (op_[i]) {
        case Op::Leaf:
          break;
        case Op::Param:
          grad[a_[i]] += ya;
          break;
        case Op::Add:
          za_[a_[i]] += ya; z1_[a_[i]] += y1; z2_[a_[i]] += y2;
          za_[b_[i]] += ya; z1_[b_[i]] += y1; z2_[b_[i]] += y2;
          break;
        case Op::Sub:
          za_[a_[i]] += ya; z1_[a_[i]] += y1; z2_[a_[i]] += y2;
          za_[b_[i]] -= ya; z1_[b_[i]] -= y1; z2_[b_[i]] -= y2;
          break;
        case Op::Mul:
          pull(a_[i], node_t(b_[i]), ya, y1, y2);
          pull(b_[i], node_t(a_[i]), ya, y1, y2);
          break;
        case Op::Div: {
          Taylor r = trecip(node_t(b_[i]));
          pull(a_[i], r, ya, y1, y2);
          pull(b_[i], tneg(tmul(node_t(i), r)), ya, y1, y2);
          break;
        }
        case Op::Neg:
          za_[a_[i]] -= ya; z1_[a_[i]] -= y1; z2_[a_[i]] -= y2;
          break;
        case Op::Scale:
          za_[a_[i]] += c_[i] * ya;
          z1_[a_[i]] += c_[i] * y1;
          z2_[a_[i]] += c_[i] * y2;
          break;
        case Op::Shift:
          za_[a_[i]] += ya; z1_[a_[i]] += y1; z2_[a_[i]] += y2;
          break;
        case Op::Unary: {
          uint32_t u = a_[i];
          Derivs3 d = ufunc_derivs(static_cast<Ufunc>(b_[i]), v_[u], v_[i]);
          Taylor g{d.f1, d.f2 * d1_[u],
                   d.f3 * d1_[u] * d1_[u] + d.f2 * d2_[u]};
          pull(u, g, ya, y1, y2);
          break;
        }
        case Op::Pow: {
          uint32_t u = a_[i];
          double p = c_[i];
          double f1 = p * v_[i] / v_[u];
          double f2 = (p - 1.0) * f1 / v_[u];
          double f3 = (p - 2.0) * f2 / v_[u];
          Taylor g{f1, f2 * d1_[u], f3 * d1_[u] * d1_[u] + f2 * d2_[u]};
          pull(u, g, ya, y1, y2);
          break;
        }
        case Op::Extract1:
          z1_[a_[i]] += ya;
          break;
        case Op::Extract2:
          z2_[a_[i]] += ya;
          break;
        case Op::Dot: {
          const DotRec& d = dots_[a_[i]];
          const double* w = theta_ + d.wslot;
          double* zav = za_.data() + d.h0;
          double* z1v = z1_.data() + d.h0;
          double* z2v = z2_.data() + d.h0;
          const double* pv = v_.data() + d.h0;
          const double* p1 = d1_.data() + d.h0;
          const double* p2 = d2_.data() + d.h0;
          double* gw = grad.data() + d.wslot;
          for (uint32_t j = 0; j < d.k; ++j) zav[j] += w[j] * ya;
          for (uint32_t j = 0; j < d.k; ++j) z1v[j] += w[j] * y1;
          for (uint32_t j = 0; j < d.k; ++j) z2v[j] += w[j] * y2;
          for (uint32_t j = 0; j < d.k; ++j)
            gw[j] += ya * pv[j] + y1 * p1[j] + y2 * p2[j];
          grad[d.bslot] += ya;
          break;
        }
        case Op::DotV: {
          // inputs of a value-only subgraph carry zero d1/d2, so only the
          // value channel contributes to the gradient
          const DotRec& d = dots_[a_[i]];
          const double* w = theta_ + d.wslot;
          double* zav = za_.data() + d.h0;
          const double* pv = v_.data() + d.h0;
          double* gw = grad.data() + d.wslot;
          for (uint32_t j = 0; j < d.k; ++j) zav[j] += w[j] * ya;
          for (uint32_t j = 0; j < d.k; ++j) gw[j] += ya * pv[j];
          grad[d.bslot] += ya;
          break;
        }
        case Op::WSum: {
          const SumRec& s = sums_[a_[i]];
          for (uint32_t j = 0; j < s.k; ++j) {
            uint32_t u = sum_idx_[s.off + j];
            double cj = sum_coef_[s.off + j];
            za_[u] += cj * ya; z1_[u] += cj * y1; z2_[u] += cj * y2;
          }
          break;
        }
      }
    }
  }

  // storage is public-ish for the network evaluator, which relies on
  // contiguity of freshly appended nodes
  uint32_t next_index() const { return static_cast<uint32_t>(op_.size()); }

 private:
  Taylor t(Ad x) const { return {v_[x.idx], d1_[x.idx], d2_[x.idx]}; }
  Taylor node_t(uint32_t i) const { return {v_[i], d1_[i], d2_[i]}; }

  // adjoint update through local partial g (transposed ring multiply)
  void pull(uint32_t u, const Taylor& g, double ya, double y1, double y2) {
    za_[u] += ya * g.v + y1 * g.d1 + y2 * g.d2;
    z1_[u] += y1 * g.v + 2.0 * y2 * g.d1;
    z2_[u] += y2 * g.v;
  }

  Ad push(Op op, uint32_t a, uint32_t b, double c, const Taylor& x) {
    v_.push_back(x.v);
    d1_.push_back(x.d1);
    d2_.push_back(x.d2);
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    c_.push_back(c);
    return {this, static_cast<uint32_t>(op_.size() - 1)};
  }

  std::vector<double> v_, d1_, d2_;
  std::vector<Op> op_;
  std::vector<uint32_t> a_, b_;
  std::vector<double> c_;
  std::vector<DotRec> dots_;
  std::vector<SumRec> sums_;
  std::vector<uint32_t> sum_idx_;
  std::vector<double> sum_coef_;
  std::vector<double> za_, z1_, z2_;  // adjoint scratch

  const double* theta_ = nullptr;
  std::size_t ntheta_ = 0;
};

// expression sugar for loss assembly
inline Ad operator+(Ad x, Ad y) { return x.tape->add(x, y); }
inline Ad operator-(Ad x, Ad y) { return x.tape->sub(x, y); }
inline Ad operator*(Ad x, Ad y) { return x.tape->mul(x, y); }
inline Ad operator/(Ad x, Ad y) { return x.tape->div(x, y); }
inline Ad operator-(Ad x) { return x.tape->neg(x); }
inline Ad operator*(double c, Ad x) { return x.tape->scale(x, c); }
inline Ad operator*(Ad x, double c) { return x.tape->scale(x, c); }
inline Ad operator+(Ad x, double c) { return x.tape->shift(x, c); }
inline Ad operator+(double c, Ad x) { return x.tape->shift(x, c); }
inline Ad operator-(Ad x, double c) { return x.tape->shift(x, -c); }
inline Ad operator-(double c, Ad x) { return x.tape->shift(x.tape->neg(x), c); }

// Max over checked components of |grad[i] - central difference| /
// (|grad[i]| + |fd| + 1e-8), with f evaluated at theta +- h*e_i. The floor
// keeps finite-difference noise on near-zero components from dominating.
struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t worst = 0;
};
GradCheck check_gradient(const std::function<double(const double*)>& f,
                         std::vector<double>& theta,
                         const std::vector<double>& grad, double h,
                         std::span<const uint32_t> components = {});

}  // namespace apnn
