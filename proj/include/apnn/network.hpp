#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apnn/quadrature.hpp"
#include "apnn/tape.hpp"

namespace apnn {

// Scalar-output ResNet: entry affine to `width`, then `blocks` residual
// blocks h <- h + act(W2 act(W1 h + b1) + b2), then exit affine to 1.
struct ResNetShape {
  uint32_t in_dim = 2;
  uint32_t width = 32;
  uint32_t blocks = 2;
};

inline uint32_t param_count(const ResNetShape& s) {
  return (s.in_dim * s.width + s.width) +
         s.blocks * 2u * (s.width * s.width + s.width) + (s.width + 1u);
}

// A network embedded in a flat parameter vector at [offset, offset+count).
// Layout: entry W (width x in_dim, row-major), entry b, then per block
// W1, b1, W2, b2, then exit W (1 x width), exit b.
struct ResNet {
  ResNetShape shape;
  uint32_t offset = 0;
};

// Output wrappers applied to raw network values:
//   Plain         f = raw(t, x, mu)
//   Positive      f = softplus(raw)
//   EvenPositive  f = softplus(raw(mu) + raw(-mu))
//   Odd           f = raw(mu) - raw(-mu)
//   MeanZero      f = raw(mu) - <raw>, full-range quadrature average
enum class Wrap : uint8_t { Plain, Positive, EvenPositive, Odd, MeanZero };

const char* wrap_name(Wrap w);
Wrap wrap_from_name(const std::string& name);

struct FieldNet {
  std::string name;  // rho, g, r, j, I, T
  ResNet net;
  Wrap wrap = Wrap::Plain;
  // Affine normalization of the coordinate inputs, u -> u * scale + shift
  // (slot 0 time, slot 1 space; mu enters unscaled). build_nets maps the
  // problem domain onto [-1, 1] so feature scales match the O(1) init
  // statistics regardless of domain size; identity by default.
  double in_scale[2] = {1.0, 1.0};
  double in_shift[2] = {0.0, 0.0};
};

// Uniform draw in [lo, hi) from explicit mantissa bits; repeatable across
// platforms, unlike std::uniform_real_distribution.
inline double uniform_bits(std::mt19937_64& rng, double lo, double hi) {
  double u = (rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Xavier-uniform weights, bound sqrt(6/(fan_in+fan_out)) per affine layer,
// zero biases. Draw order: layers in layout order, weights row-major.
void init_xavier(const ResNet& net, std::vector<double>& theta,
                 std::mt19937_64& rng);

// activation used throughout
inline constexpr Ufunc kActivation = Ufunc::Gelu;

// Record the forward pass; inputs are 2 or 3 existing nodes (t, x[, mu]) per
// shape.in_dim. value_only selects the cheap value-channel recording for
// subgraphs with no derivative extraction.
Ad resnet_forward(Tape& tp, const ResNet& net, const Ad* inputs,
                  bool value_only = false);

// Plain double forward (inference).
double resnet_value(const double* theta, const ResNet& net, const double* in);

// Wrapped scalar field evaluated without a tape. mu is ignored for 2-input
// nets. MeanZero uses the full-range average of the given QuadSet.
double field_value(const double* theta, const FieldNet& f, const QuadSet& q,
                   double t, double x, double mu, bool stationary);

// Checkpoint: one text header line
//   apnnckpt v1 name=<net> shape=<in>x<width>x<blocks> wrap=<wrap>
//     seed=<seed> iters=<iters> n=<count>
// followed by count little-endian IEEE doubles.
struct Checkpoint {
  std::string name;
  ResNetShape shape;
  Wrap wrap = Wrap::Plain;
  uint64_t seed = 0;
  uint64_t iters = 0;
  std::vector<double> values;
};
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace apnn
