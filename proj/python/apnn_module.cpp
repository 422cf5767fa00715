// Python bindings for the core operations: problem catalog, quadrature,
// training, grid reference solvers, and field evaluation of trained runs.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "apnn/errors.hpp"
#include "apnn/harness.hpp"

namespace py = pybind11;
using namespace apnn;

namespace {

py::dict spec_dict(const ProblemSpec& ps) {
  py::dict d;
  d["id"] = ps.id;
  d["epsilon"] = ps.epsilon;
  d["sigma"] = ps.sigma;
  d["a"] = ps.a;
  d["c"] = ps.c;
  d["Cv"] = ps.Cv;
  d["x0"] = ps.x0;
  d["x1"] = ps.x1;
  d["t_end"] = ps.t_end;
  d["eval_times"] = ps.eval_times;
  d["stationary"] = ps.kind == ProblemKind::Stationary;
  return d;
}

py::dict solution_dict(const GridSolution& sol) {
  py::dict d;
  d["x"] = sol.x;
  d["times"] = sol.times;
  d["rho"] = sol.rho;
  d["T"] = sol.T;
  d["Tr"] = sol.Tr;
  d["te_t"] = sol.te_t;
  d["te_v"] = sol.te_v;
  d["te_x"] = sol.te_x;
  return d;
}

}  // namespace

PYBIND11_MODULE(_apnn, m) {
  m.doc() =
      "asymptotic-preserving neural networks for 1d gray radiative transfer";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);

  m.def("problem_ids", &problem_ids, "list the built-in problem ids");
  m.def(
      "problem_spec",
      [](const std::string& id, double epsilon) {
        return spec_dict(problem(id, epsilon));
      },
      py::arg("id"), py::arg("epsilon") = -1.0,
      "catalog constants for a problem, with an optional epsilon override");

  m.def(
      "gauss_legendre",
      [](int n) {
        QuadRule q = gauss_legendre(n);
        return py::make_tuple(q.x, q.w);
      },
      py::arg("n"), "nodes and weights on [-1, 1]");

  m.def("relative_l2", &relative_l2, py::arg("a"), py::arg("b"),
        "relative l2 distance between two sampled profiles");

  m.def(
      "config_from_json",
      [](const std::string& text) {
        return config_to_json(config_from_json(text));
      },
      py::arg("text"), "parse a run config and return its canonical form");

  m.def(
      "train",
      [](const std::string& config_json, const std::string& out_dir) {
        RunConfig cfg = config_from_json(config_json);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        TrainResult res = train(cfg, cfg.out_dir);
        py::list trace;
        for (const auto& row : res.trace) {
          py::dict r;
          r["iteration"] = row.iteration;
          r["lr"] = row.lr;
          r["risk"] = row.parts.total;
          r["interior"] = row.parts.interior;
          r["constraint"] = row.parts.constraint;
          r["boundary"] = row.parts.boundary;
          r["initial"] = row.parts.initial;
          trace.append(r);
        }
        return trace;
      },
      py::arg("config_json"), py::arg("out_dir") = "",
      "optimize a run from a config json string; returns the risk trace");

  m.def(
      "solve_reference",
      [](const std::string& problem_id, double epsilon,
         const std::string& solver, int n_x, int n_t, int n_mu, double tol) {
        ProblemSpec ps = problem(problem_id, epsilon);
        std::string kind = solver;
        if (kind == "auto")
          kind = ps.kind == ProblemKind::Stationary ? "stationary" : "kinetic";
        GridSolution sol;
        if (kind == "kinetic")
          sol = solve_kinetic(ps, n_x, n_t, n_mu, tol);
        else if (kind == "stationary")
          sol = solve_stationary(ps, n_x, n_mu, tol);
        else if (kind == "diffusion")
          sol = solve_diffusion_limit(ps, n_x, n_t);
        else
          throw ConfigError("unknown solver '" + solver + "'");
        return solution_dict(sol);
      },
      py::arg("problem"), py::arg("epsilon") = -1.0,
      py::arg("solver") = "auto", py::arg("n_x") = 200, py::arg("n_t") = 400,
      py::arg("n_mu") = 8, py::arg("tol") = 1e-12,
      "solve a problem on a grid; returns profiles keyed by quantity");

  m.def(
      "evaluate_run",
      [](const std::string& run_dir, const std::string& reference_csv) {
        RunConfig cfg = load_config(run_dir + "/config.json");
        ParamStore store = load_run_params(cfg, run_dir);
        GridSolution ref = read_reference_csv(reference_csv);
        py::list out;
        for (const auto& r : evaluate_run(cfg, store, ref)) {
          py::dict d;
          d["problem"] = r.problem;
          d["method"] = r.method;
          d["epsilon"] = r.epsilon;
          d["quantity"] = r.quantity;
          d["time"] = r.time;
          d["error"] = r.error;
          out.append(d);
        }
        return out;
      },
      py::arg("run_dir"), py::arg("reference_csv"),
      "relative l2 errors of a trained run against a stored reference");

  m.def(
      "sample_run",
      [](const std::string& run_dir, const std::string& quantity, double t,
         const std::vector<double>& xs) {
        RunConfig cfg = load_config(run_dir + "/config.json");
        ParamStore store = load_run_params(cfg, run_dir);
        FieldSampler fields = net_sampler(cfg, store);
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
          out[i] = fields(quantity, t, xs[i]);
        return out;
      },
      py::arg("run_dir"), py::arg("quantity"), py::arg("t"), py::arg("xs"),
      "evaluate a trained run's field on given points");
}
