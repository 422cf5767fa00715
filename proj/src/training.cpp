#include "apnn/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "apnn/errors.hpp"

namespace apnn {

void validate(const RunConfig& cfg) {
  problem(cfg.problem);            // throws on unknown id
  method_from_name(cfg.method);    // throws on unknown method
  if (cfg.epsilon == 0.0 || (cfg.epsilon > 0.0 && !(cfg.epsilon <= 1.0)))
    throw ConfigError("epsilon must lie in (0, 1]");
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.n_int < 1) throw ConfigError("n_int must be >= 1");
  if (cfg.n_bdy < 1) throw ConfigError("n_bdy must be >= 1");
  if (cfg.n_init < 0) throw ConfigError("n_init must be >= 0");
  if (cfg.n_quad < 2 || cfg.n_quad > 64 || cfg.n_quad % 2 != 0)
    throw ConfigError("n_quad must be even and in [2, 64]");
  if (cfg.width_macro > 512 || cfg.width_micro > 512)
    throw ConfigError("network width must be <= 512");
  if (cfg.blocks > 16) throw ConfigError("blocks must be <= 16");
  if (!(cfg.lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0))
    throw ConfigError("lr_decay must lie in (0, 1]");
  if (cfg.lr_period < 1) throw ConfigError("lr_period must be >= 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (cfg.trace_every < 1) throw ConfigError("trace_every must be >= 1");
  if (cfg.weights.interior < 0.0 || cfg.weights.constraint < 0.0 ||
      cfg.weights.boundary < 0.0 || cfg.weights.initial < 0.0)
    throw ConfigError("risk weights must be non-negative");
}

void Adam::step(std::vector<double>& theta, const std::vector<double>& grad,
                double lr) {
  ++t;
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

Batch sample_batch(const RunConfig& cfg, Method m, const ProblemSpec& ps,
                   std::mt19937_64& rng) {
  const bool stationary = ps.kind == ProblemKind::Stationary;
  Batch b;
  b.interior.resize(cfg.n_int);
  for (auto& s : b.interior) {
    s.t = stationary ? 0.0 : uniform_bits(rng, 0.0, ps.t_end);
    s.x = uniform_bits(rng, ps.x0, ps.x1);
    // even-odd fields live on the half range
    s.mu = m == Method::Eo ? uniform_bits(rng, 0.0, 1.0)
                           : uniform_bits(rng, -1.0, 1.0);
  }
  b.boundary.resize(cfg.n_bdy);
  for (auto& s : b.boundary) {
    s.t = stationary ? 0.0 : uniform_bits(rng, 0.0, ps.t_end);
    // inflow and reflection conditions are parameterized by mu > 0 (each
    // residual pairs the two ends); periodic matching uses the full range
    s.mu = ps.bc == BoundaryKind::Periodic ? uniform_bits(rng, -1.0, 1.0)
                                           : uniform_bits(rng, 0.0, 1.0);
  }
  if (!stationary) {
    b.initial.resize(cfg.n_init);
    for (auto& s : b.initial) {
      s.x = uniform_bits(rng, ps.x0, ps.x1);
      s.mu = uniform_bits(rng, -1.0, 1.0);
    }
  }
  return b;
}

namespace {

void save_params(const std::string& dir, const ParamStore& store,
                 uint64_t seed, uint64_t iters) {
  for (const auto& f : store.nets) {
    Checkpoint ck;
    ck.name = f.name;
    ck.shape = f.net.shape;
    ck.wrap = f.wrap;
    ck.seed = seed;
    ck.iters = iters;
    const double* p = store.theta.data() + f.net.offset;
    ck.values.assign(p, p + param_count(f.net.shape));
    save_checkpoint(dir + "/ckpt_" + f.name + ".bin", ck);
  }
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& rows) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw ConfigError("cannot write risk trace: " + path);
  std::fprintf(fp,
               "iteration,lr,risk_total,risk_interior,risk_constraint,"
               "risk_boundary,risk_initial\n");
  for (const auto& r : rows)
    std::fprintf(fp, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                 r.lr, r.parts.total, r.parts.interior, r.parts.constraint,
                 r.parts.boundary, r.parts.initial);
  std::fclose(fp);
}

TrainResult train(const RunConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  const ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  const Method m = method_from_name(cfg.method);

  uint32_t wm = cfg.width_macro, wi = cfg.width_micro, nb = cfg.blocks;
  uint32_t dm, di, db;
  default_net_sizes(cfg.problem, dm, di, db);
  if (wm == 0) wm = dm;
  if (wi == 0) wi = di;
  if (nb == 0) nb = db;

  TrainResult out;
  out.store = build_nets(m, ps, wm, wi, nb);
  ParamStore& store = out.store;

  // One RNG stream drives everything in a fixed order: net initialization
  // (nets in build order), then one batch per iteration, then the batch for
  // the final trace row. Identical configs give bit-identical runs.
  std::mt19937_64 rng(cfg.seed);
  for (const auto& f : store.nets) init_xavier(f.net, store.theta, rng);

  const QuadSet q = make_quad_set(cfg.n_quad);
  Adam adam(store.theta.size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::vector<double> grad(store.theta.size(), 0.0);
  std::vector<double> last_good = store.theta;
  Tape tp;

  const bool save = !out_dir.empty();
  if (save) std::filesystem::create_directories(out_dir);

  for (int it = 0; it < cfg.iterations; ++it) {
    const Batch batch = sample_batch(cfg, m, ps, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    const RiskParts parts =
        risk_and_grad(tp, store, m, ps, q, batch, cfg.weights, &grad);
    if (!std::isfinite(parts.total)) {
      store.theta = last_good;
      if (save) {
        save_params(out_dir, store, cfg.seed, (uint64_t)it);
        write_trace_csv(out_dir + "/risk_trace.csv", out.trace);
      }
      out.iterations_run = it;
      throw NumericalError("non-finite risk at iteration " +
                           std::to_string(it));
    }
    if (it % cfg.trace_every == 0) {
      out.trace.push_back({it, lr_at(cfg, it), parts});
      std::fprintf(stderr, "iter %6d  lr %.3e  risk %.6e\n", it,
                   lr_at(cfg, it), parts.total);
      if (save) {
        save_params(out_dir, store, cfg.seed, (uint64_t)it);
        write_trace_csv(out_dir + "/risk_trace.csv", out.trace);
      }
    }
    last_good = store.theta;
    adam.step(store.theta, grad, lr_at(cfg, it));
  }

  // closing row: risk of the final parameters on a fresh batch
  const Batch batch = sample_batch(cfg, m, ps, rng);
  const RiskParts parts =
      risk_and_grad(tp, store, m, ps, q, batch, cfg.weights, nullptr);
  out.trace.push_back({cfg.iterations, lr_at(cfg, cfg.iterations), parts});
  std::fprintf(stderr, "iter %6d  lr %.3e  risk %.6e (final)\n",
               cfg.iterations, lr_at(cfg, cfg.iterations), parts.total);
  out.iterations_run = cfg.iterations;

  if (save) {
    save_params(out_dir, store, cfg.seed, (uint64_t)cfg.iterations);
    write_trace_csv(out_dir + "/risk_trace.csv", out.trace);
  }
  return out;
}

ParamStore load_run_params(const RunConfig& cfg, const std::string& dir) {
  const ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  const Method m = method_from_name(cfg.method);
  uint32_t wm = cfg.width_macro, wi = cfg.width_micro, nb = cfg.blocks;
  uint32_t dm, di, db;
  default_net_sizes(cfg.problem, dm, di, db);
  if (wm == 0) wm = dm;
  if (wi == 0) wi = di;
  if (nb == 0) nb = db;

  ParamStore store = build_nets(m, ps, wm, wi, nb);
  for (const auto& f : store.nets) {
    const Checkpoint ck = load_checkpoint(dir + "/ckpt_" + f.name + ".bin");
    if (ck.shape.in_dim != f.net.shape.in_dim ||
        ck.shape.width != f.net.shape.width ||
        ck.shape.blocks != f.net.shape.blocks || ck.wrap != f.wrap)
      throw ConfigError("checkpoint " + f.name +
                        " does not match the run configuration");
    std::copy(ck.values.begin(), ck.values.end(),
              store.theta.begin() + f.net.offset);
  }
  return store;
}

}  // namespace apnn
