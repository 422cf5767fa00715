#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "apnn/errors.hpp"
#include "apnn/network.hpp"
#include "doctest.h"

using namespace apnn;

namespace {

double gelu_ref(double u) {
  return u * 0.5 * (1.0 + std::erf(u / std::sqrt(2.0)));
}

// independent forward pass through explicit weight matrices
struct Layer {
  std::vector<std::vector<double>> W;
  std::vector<double> b;
};

Layer take_layer(const double*& p, uint32_t fan_in, uint32_t fan_out) {
  Layer l;
  l.W.assign(fan_out, std::vector<double>(fan_in));
  for (uint32_t i = 0; i < fan_out; ++i)
    for (uint32_t j = 0; j < fan_in; ++j) l.W[i][j] = *p++;
  l.b.assign(fan_out, 0.0);
  for (uint32_t i = 0; i < fan_out; ++i) l.b[i] = *p++;
  return l;
}

std::vector<double> affine(const Layer& l, const std::vector<double>& v) {
  std::vector<double> out(l.b);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += l.W[i][j] * v[j];
  return out;
}

double forward_oracle(const std::vector<double>& theta, const ResNetShape& s,
                      const std::vector<double>& in) {
  const double* p = theta.data();
  Layer entry = take_layer(p, s.in_dim, s.width);
  std::vector<Layer> blocks;
  for (uint32_t b = 0; b < 2 * s.blocks; ++b)
    blocks.push_back(take_layer(p, s.width, s.width));
  Layer exit_ = take_layer(p, s.width, 1);

  std::vector<double> h = affine(entry, in);
  for (uint32_t b = 0; b < s.blocks; ++b) {
    std::vector<double> u = affine(blocks[2 * b], h);
    for (auto& x : u) x = gelu_ref(x);
    std::vector<double> v = affine(blocks[2 * b + 1], u);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += gelu_ref(v[i]);
  }
  return affine(exit_, h)[0];
}

std::vector<double> random_theta(std::size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> theta(n);
  for (auto& t : theta) t = uniform_bits(rng, -0.6, 0.6);
  return theta;
}

}  // namespace

TEST_CASE("parameter count matches the layer arithmetic") {
  CHECK(param_count({2, 128, 2}) == 66561);
  CHECK(param_count({3, 256, 2}) == 264449);
  CHECK(param_count({1, 8, 1}) == 169);
  // entry 2*16+16, two blocks of 2*(256+16), exit 17
  CHECK(param_count({2, 16, 2}) == 48 + 4 * 272 + 17);
}

TEST_CASE("xavier init respects the per-layer bounds and zeroes biases") {
  ResNet net{{2, 16, 2}, 0};
  std::vector<double> theta(param_count(net.shape), 99.0);
  std::mt19937_64 rng(42);
  init_xavier(net, theta, rng);

  double entry_bound = std::sqrt(6.0 / (2 + 16));
  for (int i = 0; i < 32; ++i) {
    CHECK(std::fabs(theta[i]) < entry_bound);
  }
  for (int i = 32; i < 48; ++i) CHECK(theta[i] == 0.0);

  double exit_bound = std::sqrt(6.0 / (16 + 1));
  std::size_t exit_off = theta.size() - 17;
  for (std::size_t i = exit_off; i < theta.size() - 1; ++i)
    CHECK(std::fabs(theta[i]) < exit_bound);
  CHECK(theta.back() == 0.0);

  // same seed, same draws; different seed, different draws
  std::vector<double> again(theta.size(), 0.0);
  std::mt19937_64 rng2(42);
  init_xavier(net, again, rng2);
  CHECK(std::memcmp(theta.data(), again.data(),
                    theta.size() * sizeof(double)) == 0);
  std::mt19937_64 rng3(43);
  init_xavier(net, again, rng3);
  CHECK(std::memcmp(theta.data(), again.data(),
                    theta.size() * sizeof(double)) != 0);
}

TEST_CASE("plain forward matches the matrix-form oracle") {
  for (ResNetShape s : {ResNetShape{2, 5, 2}, ResNetShape{3, 4, 1},
                        ResNetShape{1, 7, 3}}) {
    CAPTURE(s.in_dim);
    ResNet net{s, 0};
    std::vector<double> theta = random_theta(param_count(s), 11 + s.in_dim);
    std::vector<double> in = {0.3, -0.8, 0.45};
    in.resize(s.in_dim);
    double got = resnet_value(theta.data(), net, in.data());
    double want = forward_oracle(theta, s, in);
    CHECK(std::fabs(got - want) < 1e-13 * (1.0 + std::fabs(want)));
  }
}

TEST_CASE("tape forward reproduces the plain forward and its derivatives") {
  ResNetShape s{2, 6, 2};
  ResNet net{s, 0};
  std::vector<double> theta = random_theta(param_count(s), 5);
  const double t0 = 0.4, x0 = -0.2;

  Tape tp;
  tp.bind(theta.data(), theta.size());
  Ad tin = tp.input(t0, 0.0);
  Ad xin = tp.input(x0, 1.0);  // direction along x
  Ad ins[2] = {tin, xin};
  Ad out = resnet_forward(tp, net, ins);

  double in[2] = {t0, x0};
  CHECK(tp.val(out) ==
        doctest::Approx(resnet_value(theta.data(), net, in)).epsilon(1e-14));

  auto fx = [&](double x) {
    double p[2] = {t0, x};
    return resnet_value(theta.data(), net, p);
  };
  double d1_fd = (fx(x0 + 1e-5) - fx(x0 - 1e-5)) / 2e-5;
  double d2_fd = (fx(x0 + 1e-4) - 2.0 * fx(x0) + fx(x0 - 1e-4)) / 1e-8;
  CHECK(std::fabs(tp.d1(out) - d1_fd) < 1e-8 * (1.0 + std::fabs(d1_fd)));
  CHECK(std::fabs(tp.d2(out) - d2_fd) < 1e-5 * (1.0 + std::fabs(d2_fd)));

  // value-only recording gives the same value and no derivative channels
  Ad vo = resnet_forward(tp, net, ins, true);
  CHECK(tp.val(vo) == doctest::Approx(tp.val(out)).epsilon(1e-15));
  CHECK(tp.d1(vo) == 0.0);
  CHECK(tp.d2(vo) == 0.0);
}

TEST_CASE("wrapped fields have their declared symmetries") {
  QuadSet q = make_quad_set(16);
  ResNetShape micro{3, 8, 1};
  std::vector<double> theta = random_theta(param_count(micro), 77);
  const double t = 0.3, x = 0.6, mu = 0.37;

  FieldNet even{"r", {micro, 0}, Wrap::EvenPositive};
  double ep = field_value(theta.data(), even, q, t, x, mu, false);
  double em = field_value(theta.data(), even, q, t, x, -mu, false);
  CHECK(ep == em);
  CHECK(ep > 0.0);

  FieldNet odd{"j", {micro, 0}, Wrap::Odd};
  double op = field_value(theta.data(), odd, q, t, x, mu, false);
  double om = field_value(theta.data(), odd, q, t, x, -mu, false);
  CHECK(op == -om);
  CHECK(field_value(theta.data(), odd, q, t, x, 0.0, false) == 0.0);

  FieldNet mz{"g", {micro, 0}, Wrap::MeanZero};
  double avg = 0.0;
  for (std::size_t i = 0; i < q.full_mu.size(); ++i)
    avg += q.full_avg[i] *
           field_value(theta.data(), mz, q, t, x, q.full_mu[i], false);
  CHECK(std::fabs(avg) < 1e-13);

  FieldNet pos{"rho", {{2, 8, 1}, 0}, Wrap::Positive};
  std::vector<double> th2 = random_theta(param_count({2, 8, 1}), 78);
  double pv = field_value(th2.data(), pos, q, t, x, 0.0, false);
  CHECK(pv > 0.0);
  ResNet pn{{2, 8, 1}, 0};
  double in[2] = {t, x};
  CHECK(pv == ufunc_value(Ufunc::Softplus, resnet_value(th2.data(), pn, in)));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Checkpoint ck;
  ck.name = "rho";
  ck.shape = {2, 4, 1};
  ck.wrap = Wrap::Positive;
  ck.seed = 1234567890123ull;
  ck.iters = 20000;
  ck.values = random_theta(param_count(ck.shape), 9);
  ck.values[3] = -0.0;  // sign of zero must survive

  const char* path = "/tmp/apnn_test_ckpt.bin";
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.name == ck.name);
  CHECK(back.shape.in_dim == ck.shape.in_dim);
  CHECK(back.shape.width == ck.shape.width);
  CHECK(back.shape.blocks == ck.shape.blocks);
  CHECK(back.wrap == ck.wrap);
  CHECK(back.seed == ck.seed);
  CHECK(back.iters == ck.iters);
  REQUIRE(back.values.size() == ck.values.size());
  CHECK(std::memcmp(back.values.data(), ck.values.data(),
                    ck.values.size() * sizeof(double)) == 0);
  std::remove(path);
}

TEST_CASE("loading rejects mismatched and malformed checkpoints") {
  const char* path = "/tmp/apnn_test_ckpt_bad.bin";
  {
    std::FILE* fp = std::fopen(path, "wb");
    REQUIRE(fp);
    std::fprintf(fp, "apnnckpt v1 name=x shape=2x4x1 wrap=plain seed=0 "
                     "iters=0 n=10\n");
    double zeros[10] = {};
    std::fwrite(zeros, sizeof(double), 10, fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  {
    std::FILE* fp = std::fopen(path, "wb");
    REQUIRE(fp);
    std::fprintf(fp, "not a checkpoint\n");
    std::fclose(fp);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  CHECK_THROWS_AS(load_checkpoint("/tmp/apnn_no_such_file.bin"), ConfigError);
  std::remove(path);
}
