#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apnn/losses.hpp"

namespace apnn {

struct RunConfig {
  std::string problem = "p3";
  std::string method = "eo";
  double epsilon = -1.0;  // < 0 keeps the problem default
  std::string out_dir;    // checkpoint / trace destination ("" keeps in memory)

  uint64_t seed = 0;
  int iterations = 20000;
  int n_int = 2048;
  int n_bdy = 512;
  int n_init = 1024;
  int n_quad = 16;

  // 0 selects the per-problem catalog defaults
  uint32_t width_macro = 0;
  uint32_t width_micro = 0;
  uint32_t blocks = 0;

  double lr0 = 1e-3;
  double lr_decay = 0.96;
  int lr_period = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  RiskWeights weights;

  int trace_every = 100;
};

void validate(const RunConfig& cfg);  // throws ConfigError

// eta_t = lr0 * lr_decay^floor(t / lr_period), t = completed iterations
inline double lr_at(const RunConfig& cfg, int t) {
  return cfg.lr0 * std::pow(cfg.lr_decay, t / cfg.lr_period);
}

struct Adam {
  std::vector<double> m, v;
  double beta1, beta2, eps;
  int t = 0;
  Adam(std::size_t n, double b1, double b2, double e)
      : m(n, 0.0), v(n, 0.0), beta1(b1), beta2(b2), eps(e) {}
  void step(std::vector<double>& theta, const std::vector<double>& grad,
            double lr);
};

// Fresh uniform samples; draw order is fixed (interior, boundary, initial;
// per sample t, x, mu as applicable) so runs are bit-reproducible.
Batch sample_batch(const RunConfig& cfg, Method m, const ProblemSpec& ps,
                   std::mt19937_64& rng);

struct TraceRow {
  int iteration;
  double lr;
  RiskParts parts;
};

struct TrainResult {
  ParamStore store;
  std::vector<TraceRow> trace;
  int iterations_run = 0;
};

// Runs the optimization; writes risk_trace.csv and per-net checkpoints
// (ckpt_<name>.bin) under out_dir if non-empty. Non-finite risk raises
// NumericalError after saving the last finite parameters.
TrainResult train(const RunConfig& cfg, const std::string& out_dir);

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& rows);

// Restore a parameter store from the checkpoints written by train().
ParamStore load_run_params(const RunConfig& cfg, const std::string& dir);

}  // namespace apnn
