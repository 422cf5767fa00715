#include "apnn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "apnn/errors.hpp"
#include "json.hpp"

namespace apnn {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) {
  throw ConfigError("config: " + msg);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known) bad("unknown key '" + item.key() + "' in " + where);
  }
}

double as_num(const json& v, const char* key) {
  if (!v.is_number()) bad(std::string(key) + " must be a number");
  return v.get<double>();
}

int as_int(const json& v, const char* key) {
  if (!v.is_number_integer()) bad(std::string(key) + " must be an integer");
  return static_cast<int>(v.get<long long>());
}

std::string as_str(const json& v, const char* key) {
  if (!v.is_string()) bad(std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("parse failure: ") + e.what());
  }
  if (!j.is_object()) bad("top level must be an object");
  check_keys(j,
             {"problem", "method", "epsilon", "out_dir", "seed", "iterations",
              "trace_every", "sampler", "network", "lr", "weights"},
             "top level");
  RunConfig cfg;
  if (j.contains("problem")) cfg.problem = as_str(j["problem"], "problem");
  if (j.contains("method")) cfg.method = as_str(j["method"], "method");
  if (j.contains("epsilon")) cfg.epsilon = as_num(j["epsilon"], "epsilon");
  if (j.contains("out_dir")) cfg.out_dir = as_str(j["out_dir"], "out_dir");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) bad("seed must be an integer");
    cfg.seed = j["seed"].get<uint64_t>();
  }
  if (j.contains("iterations"))
    cfg.iterations = as_int(j["iterations"], "iterations");
  if (j.contains("trace_every"))
    cfg.trace_every = as_int(j["trace_every"], "trace_every");
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    if (!s.is_object()) bad("sampler must be an object");
    check_keys(s, {"n_int", "n_bdy", "n_init", "n_quad"}, "sampler");
    if (s.contains("n_int")) cfg.n_int = as_int(s["n_int"], "n_int");
    if (s.contains("n_bdy")) cfg.n_bdy = as_int(s["n_bdy"], "n_bdy");
    if (s.contains("n_init")) cfg.n_init = as_int(s["n_init"], "n_init");
    if (s.contains("n_quad")) cfg.n_quad = as_int(s["n_quad"], "n_quad");
  }
  if (j.contains("network")) {
    const json& s = j["network"];
    if (!s.is_object()) bad("network must be an object");
    check_keys(s, {"width_macro", "width_micro", "blocks"}, "network");
    if (s.contains("width_macro"))
      cfg.width_macro = as_int(s["width_macro"], "width_macro");
    if (s.contains("width_micro"))
      cfg.width_micro = as_int(s["width_micro"], "width_micro");
    if (s.contains("blocks")) cfg.blocks = as_int(s["blocks"], "blocks");
  }
  if (j.contains("lr")) {
    const json& s = j["lr"];
    if (!s.is_object()) bad("lr must be an object");
    check_keys(s, {"lr0", "decay", "period", "beta1", "beta2", "adam_eps"},
               "lr");
    if (s.contains("lr0")) cfg.lr0 = as_num(s["lr0"], "lr0");
    if (s.contains("decay")) cfg.lr_decay = as_num(s["decay"], "decay");
    if (s.contains("period")) cfg.lr_period = as_int(s["period"], "period");
    if (s.contains("beta1")) cfg.beta1 = as_num(s["beta1"], "beta1");
    if (s.contains("beta2")) cfg.beta2 = as_num(s["beta2"], "beta2");
    if (s.contains("adam_eps"))
      cfg.adam_eps = as_num(s["adam_eps"], "adam_eps");
  }
  if (j.contains("weights")) {
    const json& s = j["weights"];
    if (!s.is_object()) bad("weights must be an object");
    check_keys(s, {"interior", "constraint", "boundary", "initial"},
               "weights");
    if (s.contains("interior"))
      cfg.weights.interior = as_num(s["interior"], "interior");
    if (s.contains("constraint"))
      cfg.weights.constraint = as_num(s["constraint"], "constraint");
    if (s.contains("boundary"))
      cfg.weights.boundary = as_num(s["boundary"], "boundary");
    if (s.contains("initial"))
      cfg.weights.initial = as_num(s["initial"], "initial");
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["problem"] = cfg.problem;
  j["method"] = cfg.method;
  j["epsilon"] = cfg.epsilon;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["iterations"] = cfg.iterations;
  j["trace_every"] = cfg.trace_every;
  j["sampler"] = {{"n_int", cfg.n_int},
                  {"n_bdy", cfg.n_bdy},
                  {"n_init", cfg.n_init},
                  {"n_quad", cfg.n_quad}};
  j["network"] = {{"width_macro", cfg.width_macro},
                  {"width_micro", cfg.width_micro},
                  {"blocks", cfg.blocks}};
  j["lr"] = {{"lr0", cfg.lr0},       {"decay", cfg.lr_decay},
             {"period", cfg.lr_period}, {"beta1", cfg.beta1},
             {"beta2", cfg.beta2},   {"adam_eps", cfg.adam_eps}};
  j["weights"] = {{"interior", cfg.weights.interior},
                  {"constraint", cfg.weights.constraint},
                  {"boundary", cfg.weights.boundary},
                  {"initial", cfg.weights.initial}};
  return j.dump(2);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << config_to_json(cfg) << "\n";
  if (!out) throw ConfigError("failed writing " + path);
}

// ------------------------------------------------------------- evaluation --

std::vector<ErrorRow> evaluate_fields(const FieldSampler& fields,
                                      const ProblemSpec& ps,
                                      const std::string& method_label,
                                      const GridSolution& ref) {
  if (ref.x.empty() || ref.times.empty())
    throw ConfigError("empty reference solution");
  std::vector<ErrorRow> rows;
  std::vector<std::string> quantities = {"rho"};
  if (!ref.T.empty()) quantities.emplace_back("T");
  quantities.emplace_back("Tr");
  for (std::size_t i = 0; i < ref.times.size(); ++i) {
    double t = ref.times[i];
    for (const auto& q : quantities) {
      std::vector<double> nn(ref.x.size());
      for (std::size_t k = 0; k < ref.x.size(); ++k)
        nn[k] = fields(q, t, ref.x[k]);
      const auto& rv =
          q == "rho" ? ref.rho[i] : (q == "T" ? ref.T[i] : ref.Tr[i]);
      rows.push_back(
          {ps.id, method_label, ps.epsilon, q, t, relative_l2(nn, rv)});
    }
  }
  if (!ref.te_t.empty()) {
    std::vector<double> nn(ref.te_t.size());
    for (std::size_t i = 0; i < ref.te_t.size(); ++i)
      nn[i] = fields("T", ref.te_t[i], ref.te_x);
    rows.push_back({ps.id, method_label, ps.epsilon, "Te", -1.0,
                    relative_l2(nn, ref.te_v)});
  }
  return rows;
}

FieldSampler net_sampler(const RunConfig& cfg, const ParamStore& store) {
  ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  QuadSet q = make_quad_set(cfg.n_quad);
  Method m = method_from_name(cfg.method);
  bool stationary = ps.kind == ProblemKind::Stationary;
  return [ps, q, m, stationary, store](const std::string& quantity, double t,
                                       double x) -> double {
    const double* th = store.theta.data();
    if (quantity == "rho" || quantity == "Tr") {
      double rho = 0.0;
      if (m == Method::Mm) {
        rho = field_value(th, store.net("rho"), q, t, x, 0.0, stationary);
      } else if (m == Method::Eo) {
        const FieldNet& r = store.net("r");
        for (std::size_t i = 0; i < q.half_mu.size(); ++i)
          rho += q.half_int[i] *
                 field_value(th, r, q, t, x, q.half_mu[i], stationary);
      } else {
        const FieldNet& in = store.net("I");
        for (std::size_t i = 0; i < q.full_mu.size(); ++i)
          rho += q.full_avg[i] *
                 field_value(th, in, q, t, x, q.full_mu[i], stationary);
      }
      if (quantity == "rho") return rho;
      return radiation_temperature(ps, 2.0 * rho);
    }
    if (quantity == "T") {
      const FieldNet* tn = store.find("T");
      if (!tn)
        throw ConfigError("run has no temperature net but T was requested");
      return field_value(th, *tn, q, t, x, 0.0, stationary);
    }
    throw ConfigError("unknown quantity '" + quantity + "'");
  };
}

std::vector<ErrorRow> evaluate_run(const RunConfig& cfg,
                                   const ParamStore& store,
                                   const GridSolution& ref) {
  ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  return evaluate_fields(net_sampler(cfg, store), ps, cfg.method, ref);
}

// -------------------------------------------------------------- error csv --

void write_error_csv(const std::string& path,
                     const std::vector<ErrorRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "problem,method,epsilon,quantity,time,error\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%s,%.17g,%.17g\n",
                  r.problem.c_str(), r.method.c_str(), r.epsilon,
                  r.quantity.c_str(), r.time, r.error);
    out << buf;
  }
  if (!out) throw ConfigError("failed writing " + path);
}

std::vector<ErrorRow> read_error_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "problem,method,epsilon,quantity,time,error")
    throw ConfigError(path + ": not an error report");
  std::vector<ErrorRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ErrorRow r;
    std::string eps, t, err;
    if (!std::getline(ss, r.problem, ',') ||
        !std::getline(ss, r.method, ',') || !std::getline(ss, eps, ',') ||
        !std::getline(ss, r.quantity, ',') || !std::getline(ss, t, ',') ||
        !std::getline(ss, err))
      throw ConfigError(path + ": malformed row '" + line + "'");
    r.epsilon = std::stod(eps);
    r.time = std::stod(t);
    r.error = std::stod(err);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ------------------------------------------------------------ report table --

std::string report_table(const std::vector<ErrorRow>& rows) {
  struct Group {
    std::string problem, method;
    double epsilon;
  };
  struct Col {
    std::string quantity;
    double time;
  };
  auto col_rank = [](const std::string& q) {
    if (q == "Te") return 0;
    if (q == "T") return 1;
    if (q == "Tr") return 2;
    return 3;
  };
  std::vector<Group> groups;
  std::vector<Col> cols;
  auto group_of = [&](const ErrorRow& r) {
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i].problem == r.problem && groups[i].method == r.method &&
          groups[i].epsilon == r.epsilon)
        return i;
    groups.push_back({r.problem, r.method, r.epsilon});
    return groups.size() - 1;
  };
  auto col_of = [&](const ErrorRow& r) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].quantity == r.quantity && cols[i].time == r.time) return i;
    cols.push_back({r.quantity, r.time});
    return cols.size() - 1;
  };
  std::vector<std::pair<std::size_t, std::size_t>> where;
  std::vector<double> vals;
  for (const auto& r : rows) {
    where.emplace_back(group_of(r), col_of(r));
    vals.push_back(r.error);
  }
  std::vector<std::size_t> order(cols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    int ra = col_rank(cols[a].quantity), rb = col_rank(cols[b].quantity);
    if (ra != rb) return ra < rb;
    return cols[a].time < cols[b].time;
  });
  std::vector<std::size_t> place(cols.size());
  for (std::size_t i = 0; i < order.size(); ++i) place[order[i]] = i;

  std::vector<std::vector<std::string>> cells(
      groups.size() + 1, std::vector<std::string>(cols.size() + 3, ""));
  cells[0][0] = "problem";
  cells[0][1] = "method";
  cells[0][2] = "epsilon";
  char buf[64];
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const Col& c = cols[order[i]];
    if (c.quantity == "Te")
      cells[0][3 + i] = "Te";
    else {
      std::snprintf(buf, sizeof buf, "%s(t=%g)", c.quantity.c_str(), c.time);
      cells[0][3 + i] = buf;
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    cells[g + 1][0] = groups[g].problem;
    cells[g + 1][1] = groups[g].method;
    std::snprintf(buf, sizeof buf, "%g", groups[g].epsilon);
    cells[g + 1][2] = buf;
    for (std::size_t i = 0; i < cols.size(); ++i) cells[g + 1][3 + i] = "-";
  }
  for (std::size_t i = 0; i < where.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.3e", vals[i]);
    cells[where[i].first + 1][3 + place[where[i].second]] = buf;
  }
  std::vector<std::size_t> width(cols.size() + 3, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size())
        out.append(width[c] - row[c].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

// -------------------------------------------------------------------- svg --

namespace {

struct Mapper {
  double x0, x1, y0, y1;
  double px0, px1, py0, py1;
  double sx(double x) const {
    return px0 + (x - x0) / (x1 - x0) * (px1 - px0);
  }
  double sy(double y) const {
    return py0 + (y - y0) / (y1 - y0) * (py1 - py0);
  }
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_profile_svg(const std::string& path, const std::string& title,
                       const GridSolution& ref, const std::string& quantity,
                       const std::vector<std::vector<double>>& nn) {
  const std::vector<double>* axis = &ref.x;
  std::vector<const std::vector<double>*> series;
  std::vector<std::string> labels;
  char lbuf[48];
  if (quantity == "Te") {
    if (ref.te_t.empty()) throw ConfigError("reference has no Te series");
    axis = &ref.te_t;
    series = {&ref.te_v};
    labels = {"Te"};
  } else {
    const std::vector<std::vector<double>>& f =
        quantity == "rho" ? ref.rho : (quantity == "T" ? ref.T : ref.Tr);
    if (f.empty()) throw ConfigError("reference has no " + quantity);
    for (std::size_t i = 0; i < f.size(); ++i) {
      series.push_back(&f[i]);
      std::snprintf(lbuf, sizeof lbuf, "t=%g", ref.times[i]);
      labels.emplace_back(lbuf);
    }
  }
  if (nn.size() != series.size())
    throw ConfigError("svg: network series count mismatch");
  for (const auto& v : nn)
    if (v.size() != axis->size())
      throw ConfigError("svg: network series length mismatch");

  double ymin = 1e300, ymax = -1e300;
  for (std::size_t s = 0; s < series.size(); ++s)
    for (std::size_t i = 0; i < axis->size(); ++i) {
      ymin = std::min({ymin, (*series[s])[i], nn[s][i]});
      ymax = std::max({ymax, (*series[s])[i], nn[s][i]});
    }
  if (ymin == ymax) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  double pad = 0.06 * (ymax - ymin);
  Mapper mp{axis->front(), axis->back(), ymin - pad, ymax + pad,
            70.0,          700.0,        440.0,      40.0};

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
         "height=\"480\" viewBox=\"0 0 720 480\">\n"
         "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<text x=\"360\" y=\"24\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\" font-size=\"15\">%s</text>\n",
                title.c_str());
  out << buf;
  out << "<rect x=\"70\" y=\"40\" width=\"630\" height=\"400\" fill=\"none\" "
         "stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = axis->front() + i * (axis->back() - axis->front()) / 5.0;
    double fy = (ymin - pad) + i * ((ymax + pad) - (ymin - pad)) / 5.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"440\" x2=\"%.1f\" y2=\"446\" "
                  "stroke=\"black\"/>\n"
                  "<text x=\"%.1f\" y=\"462\" text-anchor=\"middle\" "
                  "font-family=\"sans-serif\" font-size=\"12\">%.4g</text>\n",
                  mp.sx(fx), mp.sx(fx), mp.sx(fx), fx);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"64\" y1=\"%.1f\" x2=\"70\" y2=\"%.1f\" "
                  "stroke=\"black\"/>\n"
                  "<text x=\"60\" y=\"%.1f\" text-anchor=\"end\" "
                  "font-family=\"sans-serif\" font-size=\"12\">%.4g</text>\n",
                  mp.sy(fy), mp.sy(fy), mp.sy(fy) + 4.0, fy);
    out << buf;
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < axis->size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", mp.sx((*axis)[i]),
                    mp.sy((*series[s])[i]));
      out << buf;
    }
    out << "\"/>\n";
    std::size_t stride = std::max<std::size_t>(1, axis->size() / 40);
    for (std::size_t i = 0; i < axis->size(); i += stride) {
      std::snprintf(buf, sizeof buf,
                    "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"none\" "
                    "stroke=\"%s\" stroke-width=\"1.2\"/>\n",
                    mp.sx((*axis)[i]), mp.sy(nn[s][i]), color);
      out << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"695\" y=\"%.1f\" text-anchor=\"end\" "
                  "font-family=\"sans-serif\" font-size=\"12\" "
                  "fill=\"%s\">%s</text>\n",
                  58.0 + 16.0 * s, color, labels[s].c_str());
    out << buf;
  }
  out << "<text x=\"695\" y=\"46\" text-anchor=\"end\" "
         "font-family=\"sans-serif\" font-size=\"12\">line = reference, "
         "circle = network</text>\n</svg>\n";
  if (!out) throw ConfigError("failed writing " + path);
}

// --------------------------------------------------------------- selftest --

namespace {

double softplus_inv(double y) { return y + std::log1p(-std::exp(-y)); }

// nets that represent the global radiative equilibrium exactly: zero weights
// everywhere, exit biases chosen so each wrapped output is constant
ParamStore equilibrium_store(Method m, const ProblemSpec& ps, double t_star) {
  ParamStore store = build_nets(m, ps, 8, 8, 1);
  std::fill(store.theta.begin(), store.theta.end(), 0.0);
  double b = planck_emission(ps, t_star);
  auto set_exit_bias = [&](const char* name, double raw) {
    const FieldNet* f = store.find(name);
    if (f) store.theta[f->net.offset + param_count(f->net.shape) - 1] = raw;
  };
  set_exit_bias("rho", softplus_inv(b));
  set_exit_bias("I", softplus_inv(b));
  set_exit_bias("r", 0.5 * softplus_inv(b));
  set_exit_bias("T", softplus_inv(t_star));
  return store;
}

bool st_check(bool ok, const char* name, const std::string& detail) {
  if (ok)
    std::printf("[ok]   %s\n", name);
  else
    std::printf("[FAIL] %s: %s\n", name, detail.c_str());
  return ok;
}

bool st_quadrature() {
  QuadRule q = gauss_legendre(16);
  double worst = 0.0;
  for (int k = 0; k <= 31; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.x.size(); ++i)
      s += q.w[i] * std::pow(q.x[i], k);
    double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
    worst = std::max(worst, std::abs(s - exact));
  }
  return st_check(worst < 1e-12, "quadrature exactness to degree 31",
                  "worst deviation " + std::to_string(worst));
}

bool st_gradient() {
  RunConfig cfg;
  cfg.problem = "p3";
  cfg.method = "eo";
  cfg.width_macro = 6;
  cfg.width_micro = 6;
  cfg.blocks = 1;
  cfg.n_int = 3;
  cfg.n_bdy = 2;
  cfg.n_init = 2;
  cfg.n_quad = 4;
  cfg.seed = 7;
  ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  ParamStore store =
      build_nets(method_from_name(cfg.method), ps, cfg.width_macro,
                 cfg.width_micro, cfg.blocks);
  std::mt19937_64 rng(cfg.seed);
  for (const auto& f : store.nets) init_xavier(f.net, store.theta, rng);
  Batch batch = sample_batch(cfg, Method::Eo, ps, rng);
  QuadSet q = make_quad_set(cfg.n_quad);

  Tape tp;
  std::vector<double> grad(store.theta.size(), 0.0);
  risk_and_grad(tp, store, Method::Eo, ps, q, batch, cfg.weights, &grad);
  ParamStore probe = store;
  auto risk_at = [&](const double* th) {
    std::copy(th, th + probe.theta.size(), probe.theta.begin());
    Tape t2;
    return risk_and_grad(t2, probe, Method::Eo, ps, q, batch, cfg.weights,
                         nullptr)
        .total;
  };
  GradCheck gc = check_gradient(risk_at, store.theta, grad, 1e-4);
  return st_check(gc.max_rel_err < 1e-5, "risk gradient vs finite differences",
                  "max rel err " + std::to_string(gc.max_rel_err));
}

bool st_equilibrium_risk() {
  ProblemSpec ps = problem("p4");
  ps.planck_T = 1.0;
  double worst = 0.0;
  for (Method m : {Method::Pinn, Method::Mm, Method::Eo}) {
    ParamStore store = equilibrium_store(m, ps, 1.0);
    RunConfig cfg;
    cfg.problem = "p4";
    cfg.method = method_name(m);
    cfg.n_int = 8;
    cfg.n_bdy = 4;
    cfg.n_init = 4;
    cfg.n_quad = 8;
    cfg.seed = 3;
    std::mt19937_64 rng(11);
    Batch batch = sample_batch(cfg, m, ps, rng);
    QuadSet q = make_quad_set(cfg.n_quad);
    Tape tp;
    RiskParts parts =
        risk_and_grad(tp, store, m, ps, q, batch, cfg.weights, nullptr);
    worst = std::max(worst, parts.total);
  }
  return st_check(worst < 1e-12, "losses vanish at radiative equilibrium",
                  "max method risk " + std::to_string(worst));
}

bool st_reference_equilibrium() {
  ProblemSpec ps = problem("p4");
  ps.planck_T = 1.0;
  GridSolution sol = solve_kinetic(ps, 32, 5, 4, 1e-12);
  double worst = 0.0;
  for (const auto& prof : sol.T)
    for (double t : prof) worst = std::max(worst, std::abs(t - 1.0));
  return st_check(worst < 1e-10, "kinetic solver holds equilibrium",
                  "max temperature drift " + std::to_string(worst));
}

bool st_config_roundtrip() {
  RunConfig cfg;
  cfg.problem = "p2";
  cfg.method = "mm";
  cfg.epsilon = 0.5;
  cfg.out_dir = "runs/x";
  cfg.seed = 42;
  cfg.iterations = 17;
  cfg.weights.boundary = 2.5;
  std::string a = config_to_json(cfg);
  std::string b = config_to_json(config_from_json(a));
  return st_check(a == b, "config json round-trip", "serialization differs");
}

bool st_train_determinism() {
  RunConfig cfg;
  cfg.problem = "p3";
  cfg.method = "eo";
  cfg.width_macro = 6;
  cfg.width_micro = 6;
  cfg.blocks = 1;
  cfg.n_int = 4;
  cfg.n_bdy = 2;
  cfg.n_init = 2;
  cfg.n_quad = 4;
  cfg.iterations = 3;
  cfg.trace_every = 1;
  cfg.seed = 5;
  TrainResult a = train(cfg, "");
  TrainResult b = train(cfg, "");
  bool same = a.store.theta == b.store.theta;
  return st_check(same, "training is bit-reproducible", "parameters differ");
}

int selftest() {
  bool ok = true;
  ok &= st_quadrature();
  ok &= st_gradient();
  ok &= st_equilibrium_risk();
  ok &= st_reference_equilibrium();
  ok &= st_config_roundtrip();
  ok &= st_train_determinism();
  std::printf(ok ? "selftest: all checks passed\n"
                 : "selftest: FAILURES above\n");
  return ok ? 0 : 1;
}

// -------------------------------------------------------------------- cli --

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty())
    throw ConfigError("no output directory (out_dir in config or --out)");
  std::filesystem::create_directories(cfg.out_dir);
  save_config(cfg.out_dir + "/config.json", cfg);
  TrainResult res = train(cfg, cfg.out_dir);
  const TraceRow& last = res.trace.back();
  std::printf("trained %s %s for %d iterations, final risk %.6e -> %s\n",
              cfg.problem.c_str(), cfg.method.c_str(), res.iterations_run,
              last.parts.total, cfg.out_dir.c_str());
  return 0;
}

int cmd_reference(const std::string& problem_id, double epsilon,
                  std::string solver, int n_x, int n_t, int n_mu, double tol,
                  double x_electron, const std::string& out_path) {
  ProblemSpec ps = problem(problem_id, epsilon);
  if (x_electron >= 0.0) ps.x_electron = x_electron;
  if (solver == "auto")
    solver = ps.kind == ProblemKind::Stationary ? "stationary" : "kinetic";
  GridSolution sol;
  if (solver == "kinetic")
    sol = solve_kinetic(ps, n_x, n_t, n_mu, tol);
  else if (solver == "stationary")
    sol = solve_stationary(ps, n_x, n_mu, tol);
  else if (solver == "diffusion")
    sol = solve_diffusion_limit(ps, n_x, n_t);
  else
    throw ConfigError("unknown solver '" + solver + "'");
  write_reference_csv(out_path, ps, sol, solver, n_x, n_t, n_mu, tol);
  std::printf("%s reference for %s (eps=%g) on %d cells -> %s\n",
              solver.c_str(), ps.id.c_str(), ps.epsilon, n_x,
              out_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& run_dir, std::string config_path,
                 const std::string& ref_path, std::string out_path,
                 std::string plot_dir, bool no_plots) {
  if (config_path.empty()) config_path = run_dir + "/config.json";
  if (out_path.empty()) out_path = run_dir + "/error_report.csv";
  if (plot_dir.empty()) plot_dir = run_dir;
  RunConfig cfg = load_config(config_path);
  ParamStore store = load_run_params(cfg, run_dir);
  GridSolution ref = read_reference_csv(ref_path);
  ProblemSpec ps = problem(cfg.problem, cfg.epsilon);
  FieldSampler fields = net_sampler(cfg, store);
  std::vector<ErrorRow> rows = evaluate_fields(fields, ps, cfg.method, ref);
  write_error_csv(out_path, rows);
  std::fputs(report_table(rows).c_str(), stdout);
  if (!no_plots) {
    std::filesystem::create_directories(plot_dir);
    char title[160];
    std::vector<std::string> quantities = {"rho"};
    if (!ref.T.empty()) quantities.emplace_back("T");
    quantities.emplace_back("Tr");
    for (const auto& q : quantities) {
      std::vector<std::vector<double>> nn(ref.times.size());
      for (std::size_t i = 0; i < ref.times.size(); ++i) {
        nn[i].resize(ref.x.size());
        for (std::size_t k = 0; k < ref.x.size(); ++k)
          nn[i][k] = fields(q, ref.times[i], ref.x[k]);
      }
      std::snprintf(title, sizeof title, "%s %s eps=%g: %s", ps.id.c_str(),
                    cfg.method.c_str(), ps.epsilon, q.c_str());
      write_profile_svg(plot_dir + "/plot_" + q + ".svg", title, ref, q, nn);
    }
    if (!ref.te_t.empty()) {
      std::vector<std::vector<double>> nn(1);
      nn[0].resize(ref.te_t.size());
      for (std::size_t i = 0; i < ref.te_t.size(); ++i)
        nn[0][i] = fields("T", ref.te_t[i], ref.te_x);
      std::snprintf(title, sizeof title, "%s %s eps=%g: Te at x=%g",
                    ps.id.c_str(), cfg.method.c_str(), ps.epsilon, ref.te_x);
      write_profile_svg(plot_dir + "/plot_Te.svg", title, ref, "Te", nn);
    }
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  std::vector<ErrorRow> rows;
  for (const auto& f : files) {
    std::vector<ErrorRow> part = read_error_csv(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw ConfigError("no error rows in the given files");
  std::fputs(report_table(rows).c_str(), stdout);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"asymptotic-preserving neural networks for 1d gray radiative "
               "transfer: training, grid references, and evaluation"};
  app.require_subcommand(1);

  auto* tr = app.add_subcommand("train", "optimize a run from a json config");
  std::string tr_config, tr_out;
  tr->add_option("--config", tr_config, "run configuration json")->required();
  tr->add_option("--out", tr_out, "override the output directory");

  auto* rf = app.add_subcommand("reference", "solve on a grid and store csv");
  std::string rf_problem, rf_solver = "auto", rf_out;
  double rf_eps = -1.0, rf_tol = 1e-12, rf_xe = -1.0;
  int rf_nx = 400, rf_nt = 2000, rf_nmu = 16;
  rf->add_option("--problem", rf_problem, "problem id (p1..p4)")->required();
  rf->add_option("--epsilon", rf_eps, "epsilon override");
  rf->add_option("--solver", rf_solver,
                 "kinetic | stationary | diffusion | auto");
  rf->add_option("--nx", rf_nx, "spatial cells");
  rf->add_option("--nt", rf_nt, "time steps");
  rf->add_option("--nmu", rf_nmu, "half-range ordinates");
  rf->add_option("--tol", rf_tol, "nonlinear solve tolerance");
  rf->add_option("--x-electron", rf_xe, "Te probe location override");
  rf->add_option("--out", rf_out, "output csv path")->required();

  auto* ev = app.add_subcommand("evaluate",
                                "error report + plots for a trained run");
  std::string ev_run, ev_config, ev_ref, ev_out, ev_plots;
  bool ev_noplots = false;
  ev->add_option("--run", ev_run, "run directory with checkpoints")
      ->required();
  ev->add_option("--config", ev_config,
                 "run config (default <run>/config.json)");
  ev->add_option("--reference", ev_ref, "reference csv")->required();
  ev->add_option("--out", ev_out,
                 "error report csv (default <run>/error_report.csv)");
  ev->add_option("--plots", ev_plots, "plot directory (default <run>)");
  ev->add_flag("--no-plots", ev_noplots, "skip svg output");

  auto* rp = app.add_subcommand("report", "aggregate error reports");
  std::vector<std::string> rp_files;
  rp->add_option("files", rp_files, "error report csv files")->required();

  auto* st = app.add_subcommand("selftest", "run built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (tr->parsed()) return cmd_train(tr_config, tr_out);
    if (rf->parsed())
      return cmd_reference(rf_problem, rf_eps, rf_solver, rf_nx, rf_nt,
                           rf_nmu, rf_tol, rf_xe, rf_out);
    if (ev->parsed())
      return cmd_evaluate(ev_run, ev_config, ev_ref, ev_out, ev_plots,
                          ev_noplots);
    if (rp->parsed()) return cmd_report(rp_files);
    if (st->parsed()) return selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace apnn
