#include "apnn/network.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "apnn/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace apnn {

const char* wrap_name(Wrap w) {
  switch (w) {
    case Wrap::Plain: return "plain";
    case Wrap::Positive: return "positive";
    case Wrap::EvenPositive: return "even_positive";
    case Wrap::Odd: return "odd";
    case Wrap::MeanZero: return "mean_zero";
  }
  return "plain";
}

Wrap wrap_from_name(const std::string& name) {
  if (name == "plain") return Wrap::Plain;
  if (name == "positive") return Wrap::Positive;
  if (name == "even_positive") return Wrap::EvenPositive;
  if (name == "odd") return Wrap::Odd;
  if (name == "mean_zero") return Wrap::MeanZero;
  throw ConfigError("unknown wrapper: " + name);
}

void init_xavier(const ResNet& net, std::vector<double>& theta,
                 std::mt19937_64& rng) {
  const ResNetShape& s = net.shape;
  uint32_t p = net.offset;
  auto layer = [&](uint32_t fan_in, uint32_t fan_out) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (uint32_t i = 0; i < fan_out * fan_in; ++i)
      theta[p++] = uniform_bits(rng, -bound, bound);
    for (uint32_t i = 0; i < fan_out; ++i) theta[p++] = 0.0;
  };
  layer(s.in_dim, s.width);
  for (uint32_t b = 0; b < s.blocks; ++b) {
    layer(s.width, s.width);
    layer(s.width, s.width);
  }
  layer(s.width, 1);
  assert(p == net.offset + param_count(s));
}

Ad resnet_forward(Tape& tp, const ResNet& net, const Ad* inputs,
                  bool value_only) {
  const ResNetShape& s = net.shape;
  const uint32_t w = s.width;
  auto dot = [&](uint32_t wslot, uint32_t bslot, uint32_t h0, uint32_t k) {
    return value_only ? tp.dot_value(wslot, bslot, h0, k)
                      : tp.dot(wslot, bslot, h0, k);
  };

  // stage inputs contiguously so dot nodes can use a flat range
  uint32_t in0 = tp.next_index();
  for (uint32_t i = 0; i < s.in_dim; ++i) tp.scale(inputs[i], 1.0);

  uint32_t p = net.offset;
  // entry affine
  uint32_t h = tp.next_index();
  {
    uint32_t wslot = p, bslot = p + s.in_dim * w;
    for (uint32_t i = 0; i < w; ++i)
      dot(wslot + i * s.in_dim, bslot + i, in0, s.in_dim);
    p = bslot + w;
  }
  for (uint32_t b = 0; b < s.blocks; ++b) {
    uint32_t u1 = tp.next_index();
    {
      uint32_t wslot = p, bslot = p + w * w;
      for (uint32_t i = 0; i < w; ++i) dot(wslot + i * w, bslot + i, h, w);
      p = bslot + w;
    }
    uint32_t a1 = tp.next_index();
    for (uint32_t i = 0; i < w; ++i) tp.unary(kActivation, {&tp, u1 + i});
    uint32_t u2 = tp.next_index();
    {
      uint32_t wslot = p, bslot = p + w * w;
      for (uint32_t i = 0; i < w; ++i) dot(wslot + i * w, bslot + i, a1, w);
      p = bslot + w;
    }
    uint32_t a2 = tp.next_index();
    for (uint32_t i = 0; i < w; ++i) tp.unary(kActivation, {&tp, u2 + i});
    uint32_t hn = tp.next_index();
    for (uint32_t i = 0; i < w; ++i) tp.add({&tp, h + i}, {&tp, a2 + i});
    h = hn;
  }
  Ad out = dot(p, p + w, h, w);
  assert(p + w + 1 == net.offset + param_count(s));
  return out;
}

double resnet_value(const double* theta, const ResNet& net, const double* in) {
  const ResNetShape& s = net.shape;
  const uint32_t w = s.width;
  // stack scratch keeps this allocation-free for widths up to 512
  double buf_a[512], buf_b[512];
  assert(w <= 512);
  double* h = buf_a;
  double* u = buf_b;
  const double* p = theta + net.offset;

  for (uint32_t i = 0; i < w; ++i) {
    double acc = p[s.in_dim * w + i];
    const double* row = p + i * s.in_dim;
    for (uint32_t j = 0; j < s.in_dim; ++j) acc += row[j] * in[j];
    h[i] = acc;
  }
  p += s.in_dim * w + w;
  for (uint32_t b = 0; b < s.blocks; ++b) {
    for (uint32_t i = 0; i < w; ++i) {
      double acc = p[w * w + i];
      const double* row = p + i * w;
      for (uint32_t j = 0; j < w; ++j) acc += row[j] * h[j];
      u[i] = ufunc_value(kActivation, acc);
    }
    p += w * w + w;
    for (uint32_t i = 0; i < w; ++i) {
      double acc = p[w * w + i];
      const double* row = p + i * w;
      for (uint32_t j = 0; j < w; ++j) acc += row[j] * u[j];
      h[i] += ufunc_value(kActivation, acc);
    }
    p += w * w + w;
  }
  double out = p[w];
  for (uint32_t j = 0; j < w; ++j) out += p[j] * h[j];
  return out;
}

double field_value(const double* theta, const FieldNet& f, const QuadSet& q,
                   double t, double x, double mu, bool stationary) {
  double in[3];
  auto pack = [&](double m) {
    if (stationary) {
      in[0] = x * f.in_scale[1] + f.in_shift[1];
      in[1] = m;
    } else {
      in[0] = t * f.in_scale[0] + f.in_shift[0];
      in[1] = x * f.in_scale[1] + f.in_shift[1];
      in[2] = m;
    }
  };
  auto raw = [&](double m) {
    pack(m);
    return resnet_value(theta, f.net, in);
  };
  switch (f.wrap) {
    case Wrap::Plain:
      return raw(mu);
    case Wrap::Positive:
      return ufunc_value(Ufunc::Softplus, raw(mu));
    case Wrap::EvenPositive:
      return ufunc_value(Ufunc::Softplus, raw(mu) + raw(-mu));
    case Wrap::Odd:
      return raw(mu) - raw(-mu);
    case Wrap::MeanZero: {
      double avg = 0.0;
      for (std::size_t i = 0; i < q.full_mu.size(); ++i)
        avg += q.full_avg[i] * raw(q.full_mu[i]);
      return raw(mu) - avg;
    }
  }
  return 0.0;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ConfigError("cannot write checkpoint: " + path);
  std::fprintf(fp, "apnnckpt v1 name=%s shape=%ux%ux%u wrap=%s seed=%llu "
               "iters=%llu n=%zu\n",
               ck.name.c_str(), ck.shape.in_dim, ck.shape.width,
               ck.shape.blocks, wrap_name(ck.wrap),
               static_cast<unsigned long long>(ck.seed),
               static_cast<unsigned long long>(ck.iters), ck.values.size());
  std::fwrite(ck.values.data(), sizeof(double), ck.values.size(), fp);
  std::fclose(fp);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ConfigError("cannot read checkpoint: " + path);
  char header[256];
  if (!std::fgets(header, sizeof header, fp)) {
    std::fclose(fp);
    throw ConfigError("truncated checkpoint header: " + path);
  }
  Checkpoint ck;
  char name[64], wrap[64];
  unsigned in_dim, width, blocks;
  unsigned long long seed, iters;
  std::size_t n;
  int got = std::sscanf(header,
                        "apnnckpt v1 name=%63s shape=%ux%ux%u wrap=%63s "
                        "seed=%llu iters=%llu n=%zu",
                        name, &in_dim, &width, &blocks, wrap, &seed, &iters,
                        &n);
  if (got != 8) {
    std::fclose(fp);
    throw ConfigError("malformed checkpoint header: " + path);
  }
  ck.name = name;
  ck.shape = {in_dim, width, blocks};
  ck.wrap = wrap_from_name(wrap);
  ck.seed = seed;
  ck.iters = iters;
  ck.values.assign(n, 0.0);
  if (std::fread(ck.values.data(), sizeof(double), n, fp) != n) {
    std::fclose(fp);
    throw ConfigError("truncated checkpoint payload: " + path);
  }
  std::fclose(fp);
  if (n != param_count(ck.shape))
    throw ConfigError("checkpoint size does not match shape: " + path);
  return ck;
}

}  // namespace apnn
