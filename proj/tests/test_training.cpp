#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apnn/errors.hpp"
#include "apnn/training.hpp"
#include "doctest.h"

using namespace apnn;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.problem = "p3";
  cfg.method = "eo";
  cfg.seed = 11;
  cfg.iterations = 4;
  cfg.n_int = 4;
  cfg.n_bdy = 2;
  cfg.n_init = 2;
  cfg.n_quad = 4;
  cfg.width_macro = 6;
  cfg.width_micro = 6;
  cfg.blocks = 1;
  cfg.trace_every = 2;
  return cfg;
}

}  // namespace

TEST_CASE("learning rate decays by steps") {
  RunConfig cfg;
  cfg.lr0 = 1e-3;
  cfg.lr_decay = 0.96;
  cfg.lr_period = 500;
  CHECK(lr_at(cfg, 0) == 1e-3);
  CHECK(lr_at(cfg, 499) == 1e-3);
  CHECK(lr_at(cfg, 500) == doctest::Approx(0.96e-3).epsilon(1e-15));
  CHECK(lr_at(cfg, 1499) == doctest::Approx(1e-3 * 0.96 * 0.96).epsilon(1e-15));
  CHECK(lr_at(cfg, 10000) == doctest::Approx(1e-3 * std::pow(0.96, 20)).epsilon(1e-12));
}

TEST_CASE("adam steps match the closed-form update") {
  Adam adam(2, 0.9, 0.999, 1e-8);
  std::vector<double> theta = {1.0, -2.0};
  std::vector<double> g1 = {0.5, -1.5};
  adam.step(theta, g1, 1e-2);

  // by hand: m = 0.1 g, v = 0.001 g^2, mhat = m/(1-0.9), vhat = v/(1-0.999)
  auto expect1 = [&](double th0, double g) {
    double m = 0.1 * g, v = 0.001 * g * g;
    double mh = m / 0.1, vh = v / 0.001;
    return th0 - 1e-2 * mh / (std::sqrt(vh) + 1e-8);
  };
  CHECK(theta[0] == doctest::Approx(expect1(1.0, 0.5)).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(expect1(-2.0, -1.5)).epsilon(1e-15));

  std::vector<double> g2 = {-0.25, 0.75};
  std::vector<double> before = theta;
  adam.step(theta, g2, 1e-2);
  auto expect2 = [&](double th, double ga, double gb) {
    double m = 0.9 * (0.1 * ga) + 0.1 * gb;
    double v = 0.999 * (0.001 * ga * ga) + 0.001 * gb * gb;
    double mh = m / (1.0 - 0.81), vh = v / (1.0 - 0.999 * 0.999);
    return th - 1e-2 * mh / (std::sqrt(vh) + 1e-8);
  };
  CHECK(theta[0] == doctest::Approx(expect2(before[0], 0.5, -0.25)).epsilon(1e-14));
  CHECK(theta[1] == doctest::Approx(expect2(before[1], -1.5, 0.75)).epsilon(1e-14));
}

TEST_CASE("config validation rejects out-of-range settings") {
  RunConfig ok = tiny_config();
  CHECK_NOTHROW(validate(ok));

  RunConfig bad = ok;
  bad.problem = "p7";
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.method = "magic";
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.n_quad = 7;  // odd
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.n_quad = 66;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.iterations = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.lr0 = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.lr_decay = 1.5;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.width_macro = 4096;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = ok;
  bad.weights.interior = -1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("batch sampling stays in range and respects the method") {
  RunConfig cfg = tiny_config();
  cfg.n_int = 200;
  cfg.n_bdy = 100;
  cfg.n_init = 100;

  ProblemSpec p3 = problem("p3");
  std::mt19937_64 rng(5);
  Batch b = sample_batch(cfg, Method::Eo, p3, rng);
  REQUIRE(b.interior.size() == 200);
  REQUIRE(b.boundary.size() == 100);
  REQUIRE(b.initial.size() == 100);
  for (const auto& s : b.interior) {
    CHECK(s.t >= 0.0);
    CHECK(s.t < p3.t_end);
    CHECK(s.x >= p3.x0);
    CHECK(s.x < p3.x1);
    CHECK(s.mu >= 0.0);  // half range for even-odd fields
    CHECK(s.mu < 1.0);
  }
  // periodic boundaries sample the full range
  bool saw_negative = false;
  for (const auto& s : b.boundary) saw_negative |= s.mu < 0.0;
  CHECK(saw_negative);

  std::mt19937_64 rng2(5);
  Batch b2 = sample_batch(cfg, Method::Eo, p3, rng2);
  CHECK(std::memcmp(b.interior.data(), b2.interior.data(),
                    b.interior.size() * sizeof(InteriorSample)) == 0);

  // full range for the other methods, positive mu at inflow boundaries
  ProblemSpec p1 = problem("p1");
  std::mt19937_64 rng3(6);
  Batch bm = sample_batch(cfg, Method::Mm, p1, rng3);
  bool full_range = false;
  for (const auto& s : bm.interior) full_range |= s.mu < 0.0;
  CHECK(full_range);
  for (const auto& s : bm.boundary) CHECK(s.mu >= 0.0);

  // stationary problems have no time or initial samples
  ProblemSpec p2 = problem("p2");
  std::mt19937_64 rng4(7);
  Batch bs = sample_batch(cfg, Method::Mm, p2, rng4);
  CHECK(bs.initial.empty());
  for (const auto& s : bs.interior) CHECK(s.t == 0.0);
}

TEST_CASE("training runs are bit-reproducible") {
  namespace fs = std::filesystem;
  RunConfig cfg = tiny_config();
  const std::string da = "/tmp/apnn_train_a", db = "/tmp/apnn_train_b";
  fs::remove_all(da);
  fs::remove_all(db);

  TrainResult ra = train(cfg, da);
  TrainResult rb = train(cfg, db);

  REQUIRE(ra.trace.size() == rb.trace.size());
  // rows at 0 and 2, plus the closing row at 4
  CHECK(ra.trace.size() == 3);
  CHECK(ra.trace.back().iteration == 4);
  CHECK(std::memcmp(ra.store.theta.data(), rb.store.theta.data(),
                    ra.store.theta.size() * sizeof(double)) == 0);
  CHECK(slurp(da + "/risk_trace.csv") == slurp(db + "/risk_trace.csv"));
  for (const char* net : {"rho", "r", "j", "T"})
    CHECK(slurp(da + "/ckpt_" + net + ".bin") ==
          slurp(db + "/ckpt_" + net + ".bin"));

  // checkpoints restore the exact parameter vector
  ParamStore st = load_run_params(cfg, da);
  CHECK(std::memcmp(st.theta.data(), ra.store.theta.data(),
                    st.theta.size() * sizeof(double)) == 0);

  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("a short optimization reduces the risk") {
  RunConfig cfg = tiny_config();
  cfg.iterations = 80;
  cfg.n_int = 16;
  cfg.n_bdy = 8;
  cfg.n_init = 8;
  cfg.width_macro = 12;
  cfg.width_micro = 12;
  cfg.trace_every = 80;
  TrainResult r = train(cfg, "");
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace.back().parts.total < r.trace.front().parts.total);
  CHECK(std::isfinite(r.trace.back().parts.total));
}

TEST_CASE("non-finite risk aborts and keeps the last finite checkpoint") {
  namespace fs = std::filesystem;
  RunConfig cfg = tiny_config();
  cfg.iterations = 50;
  cfg.lr0 = 1e25;  // blow the parameters up on the first step
  const std::string dir = "/tmp/apnn_train_abort";
  fs::remove_all(dir);
  CHECK_THROWS_AS(train(cfg, dir), NumericalError);
  // the saved parameters are the last finite ones
  ParamStore st = load_run_params(cfg, dir);
  for (double v : st.theta) CHECK(std::isfinite(v));
  fs::remove_all(dir);
}
