#pragma once

#include <functional>
#include <string>
#include <vector>

#include "apnn/reference.hpp"
#include "apnn/training.hpp"

namespace apnn {

// JSON run configuration. Parsing is strict: unknown keys are rejected so
// typos fail loudly; missing keys keep the RunConfig defaults. Serialization
// is canonical (fixed key order, all fields), so parse -> serialize -> parse
// is the identity.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

// One relative-l2 comparison against the reference. time is the profile
// time for rho / T / Tr rows and -1 for the Te series row, which spans the
// whole time line at the probe location.
struct ErrorRow {
  std::string problem;
  std::string method;
  double epsilon = 0.0;
  std::string quantity;
  double time = 0.0;
  double error = 0.0;
};

// Point view of a trained (or synthetic) solution: quantity is one of
// rho, T, Tr.
using FieldSampler =
    std::function<double(const std::string& quantity, double t, double x)>;

// Compare sampled fields against every stored reference profile and, when
// present, the Te series at the probe location stored with the reference.
std::vector<ErrorRow> evaluate_fields(const FieldSampler& fields,
                                      const ProblemSpec& ps,
                                      const std::string& method_label,
                                      const GridSolution& ref);

// Method-appropriate reconstruction from trained nets:
//   pinn  rho = <I> (full-range average)
//   mm    rho net
//   eo    rho = integral over [0,1] of r
// T from the temperature net, Tr from rho.
FieldSampler net_sampler(const RunConfig& cfg, const ParamStore& store);

std::vector<ErrorRow> evaluate_run(const RunConfig& cfg,
                                   const ParamStore& store,
                                   const GridSolution& ref);

// CSV columns: problem,method,epsilon,quantity,time,error
void write_error_csv(const std::string& path,
                     const std::vector<ErrorRow>& rows);
std::vector<ErrorRow> read_error_csv(const std::string& path);

// Aggregate rows into a fixed-width table: one line per
// (problem, method, epsilon), one column per quantity/time.
std::string report_table(const std::vector<ErrorRow>& rows);

// Line chart of reference profiles (lines) with network values (markers).
// quantity "Te" plots the time series; otherwise one polyline per stored
// profile time. nn values align with the reference grid.
void write_profile_svg(const std::string& path, const std::string& title,
                       const GridSolution& ref, const std::string& quantity,
                       const std::vector<std::vector<double>>& nn);

// Entry point behind the apnn binary: subcommands train, reference,
// evaluate, report, selftest. Returns 0 on success, 1 on configuration
// errors, 2 on numerical aborts.
int run_cli(int argc, char** argv);

}  // namespace apnn
