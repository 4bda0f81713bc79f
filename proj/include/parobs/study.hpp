#pragma once

// Convergence studies: seed-mesh construction, the refine-solve-record loop,
// CSV output with exact round-trip, and rate fitting.
//
// CSV schema (fixed; doubles in %.16e, empty cell = not available):
//   level,n_elements,n_dofs,rho_r,rho_p,rho_c,rho_total,err_total,err_grad,
//   err_u0,err_uT,err_sigma,err_div,newton_iterations,wall_seconds

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adaptive.hpp"
#include "core.hpp"
#include "estimator.hpp"
#include "fespace.hpp"
#include "mesh.hpp"
#include "problem.hpp"

namespace parobs {

inline const char* kCsvHeader =
    "level,n_elements,n_dofs,rho_r,rho_p,rho_c,rho_total,err_total,err_grad,"
    "err_u0,err_uT,err_sigma,err_div,newton_iterations,wall_seconds";

struct StudyConfig {
  std::string problem = "stefan";  // stefan | pyramid | american | heat2d
  Family family = Family::simplicial;
  bool adaptive = false;
  double theta = 0.5;
  std::optional<EstimatorVariant> variant;  // unset: problem default
  int levels = 100;
  long long max_elements = 100000;
  int quad_degree = 4;
  // Seed resolution: nt x nx for d = 1 (both families), n per axis for d = 2.
  int seed_nt = 2, seed_nx = 2, seed_n = 2;
  std::optional<double> lambda_weight;  // overrides the problem's default
  double c_a = 1.0;
  int pdas_max_iter = 500;
  SolveOpts linear;
  bool deterministic = false;  // writes wall_seconds as zero
  std::string csv_path;        // empty: no CSV written
  std::string vtk_path;        // empty: no VTK written (finest level)
  bool quiet = false;          // suppress per-level stdout lines
};

struct StudyResult {
  std::vector<ConvergenceRecord> records;
  Mesh final_mesh;
  Spaces final_spaces;
  DiscreteSolution final_solution;
  EstimatorReport final_report;
};

inline ProblemSpec make_problem(const std::string& name) {
  if (name == "stefan") return stefan_problem();
  if (name == "pyramid") return pyramid_problem();
  if (name == "american") return american_option_problem();
  if (name == "heat2d") return heat2d_problem();
  throw data_error("unknown problem '" + name +
                   "' (expected stefan, pyramid, american or heat2d)");
}

inline Mesh make_seed_mesh(const ProblemSpec& prob, const StudyConfig& cfg) {
  if (prob.d == 2) {
    if (cfg.family == Family::tensor)
      throw unsupported_error("tensor-product meshes cover one space dimension only");
    return make_cube_mesh(cfg.seed_n);
  }
  if (cfg.family == Family::tensor)
    return make_tensor_mesh(cfg.seed_nt, cfg.seed_nx, prob.t_end, prob.xlo[0],
                            prob.xhi[0]);
  return make_square_mesh(cfg.seed_nt, cfg.seed_nx, prob.t_end, prob.xlo[0],
                          prob.xhi[0]);
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

}  // namespace detail

inline void write_csv(const std::string& path,
                      const std::vector<ConvergenceRecord>& records) {
  std::ofstream os(path);
  if (!os) throw data_error("write_csv: cannot open " + path);
  os << kCsvHeader << "\n";
  for (const auto& r : records) {
    os << r.level << "," << r.n_elements << "," << r.n_dofs;
    for (double v : {r.rho_r, r.rho_p, r.rho_c, r.rho_total, r.err_total,
                     r.err_grad, r.err_u0, r.err_uT, r.err_sigma, r.err_div})
      os << "," << detail::format_double(v);
    os << "," << r.newton_iterations << ","
       << detail::format_double(r.wall_seconds) << "\n";
  }
}

inline std::vector<ConvergenceRecord> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw data_error("read_csv: unexpected header in " + path);
  std::vector<ConvergenceRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 15) cells.push_back("");
    if (cells.size() != 15)
      throw data_error("read_csv: malformed row in " + path);
    auto num = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : std::strtod(s.c_str(), nullptr);
    };
    ConvergenceRecord r;
    r.level = std::atoi(cells[0].c_str());
    r.n_elements = std::atoll(cells[1].c_str());
    r.n_dofs = std::atoll(cells[2].c_str());
    r.rho_r = num(cells[3]);
    r.rho_p = num(cells[4]);
    r.rho_c = num(cells[5]);
    r.rho_total = num(cells[6]);
    r.err_total = num(cells[7]);
    r.err_grad = num(cells[8]);
    r.err_u0 = num(cells[9]);
    r.err_uT = num(cells[10]);
    r.err_sigma = num(cells[11]);
    r.err_div = num(cells[12]);
    r.newton_iterations = std::atoi(cells[13].c_str());
    r.wall_seconds = num(cells[14]);
    out.push_back(r);
  }
  return out;
}

inline double record_column(const ConvergenceRecord& r, const std::string& col) {
  if (col == "n_elements") return static_cast<double>(r.n_elements);
  if (col == "n_dofs") return static_cast<double>(r.n_dofs);
  if (col == "rho_r") return r.rho_r;
  if (col == "rho_p") return r.rho_p;
  if (col == "rho_c") return r.rho_c;
  if (col == "rho_total") return r.rho_total;
  if (col == "err_total") return r.err_total;
  if (col == "err_grad") return r.err_grad;
  if (col == "err_u0") return r.err_u0;
  if (col == "err_uT") return r.err_uT;
  if (col == "err_sigma") return r.err_sigma;
  if (col == "err_div") return r.err_div;
  throw std::invalid_argument("unknown rate column '" + col + "'");
}

// Least-squares slope of log(y) against log(x).
inline double fit_rate(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_rate: need at least two (x, y) pairs");
  const int n = static_cast<int>(xs.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(ys[i]))
      throw std::invalid_argument("fit_rate: values must be positive and finite");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += sqr(lx[i] - mx);
  }
  if (!(den > 0.0)) throw std::invalid_argument("fit_rate: x values coincide");
  return num / den;
}

// Slope of the given column against n_elements over the last `window` records.
inline double fit_rate(const std::vector<ConvergenceRecord>& records,
                       const std::string& column, int window = 4) {
  if (static_cast<int>(records.size()) < 2)
    throw std::invalid_argument("fit_rate: need at least two records");
  const int n = static_cast<int>(records.size());
  const int first = std::max(0, n - std::max(window, 2));
  std::vector<double> xs, ys;
  for (int i = first; i < n; ++i) {
    xs.push_back(static_cast<double>(records[i].n_elements));
    ys.push_back(record_column(records[i], column));
  }
  return fit_rate(xs, ys);
}

// Canonical benchmark studies: both mesh families on the melting benchmark,
// three pyramid runs (uniform/adaptive/tensor), uniform and adaptive option
// pricing, and the two-space-dimensional heat benchmark.
inline std::vector<StudyConfig> benchmark_suite() {
  auto make = [](const std::string& prob, Family fam, bool adaptive,
                 long long max_el, int nt, int nx, int n) {
    StudyConfig c;
    c.problem = prob;
    c.family = fam;
    c.adaptive = adaptive;
    c.theta = 0.5;
    c.max_elements = max_el;
    c.seed_nt = nt;
    c.seed_nx = nx;
    c.seed_n = n;
    // The direct factorization handles every level of these budgets: the
    // one-dimensional problems have planar sparsity, and the heat2d volumes
    // stay tractable for the supernodal backend. The iterative path cannot
    // reach the solver's stationarity tolerance on the finest systems.
    c.linear.direct_nnz_threshold = 500'000'000;
    return c;
  };
  std::vector<StudyConfig> suite = {
      make("stefan", Family::simplicial, false, 32768, 2, 2, 2),
      make("stefan", Family::tensor, false, 16384, 2, 2, 2),
      make("pyramid", Family::simplicial, false, 32768, 2, 2, 2),
      make("pyramid", Family::simplicial, true, 30000, 2, 2, 2),
      make("pyramid", Family::tensor, false, 16384, 2, 2, 2),
      make("american", Family::simplicial, false, 65536, 2, 16, 2),
      make("american", Family::simplicial, true, 40000, 2, 16, 2),
      make("heat2d", Family::simplicial, false, 100000, 2, 2, 2),
  };
  // On the option-pricing interval (-1, 7) the default residual weight
  // diam^2 = 64 is so heavy that the weighted residual part of the estimator
  // hides the gradient part at every reachable resolution. Any weight at or
  // above the squared Friedrich constant ((R-L)/pi)^2 keeps the functional
  // norm-equivalent; use that sharp value so the part decomposition shows the
  // gradient-driven convergence this benchmark is meant to exercise.
  for (StudyConfig& c : suite)
    if (c.problem == "american") c.lambda_weight = 64.0 / (M_PI * M_PI);
  return suite;
}

inline std::string study_tag(const StudyConfig& cfg) {
  return cfg.problem + "_" +
         (cfg.family == Family::tensor ? "tensor" : "simplicial") + "_" +
         (cfg.adaptive ? "adaptive" : "uniform");
}

inline StudyResult run_study(const StudyConfig& cfg) {
  ProblemSpec prob = make_problem(cfg.problem);
  if (cfg.lambda_weight) {
    if (!(*cfg.lambda_weight > 0.0))
      throw data_error("lambda weight override must be positive");
    prob.lambda_weight = *cfg.lambda_weight;
  }
  validate_problem(prob, 2000);

  AdaptOptions opt;
  opt.adaptive = cfg.adaptive;
  opt.theta = cfg.theta;
  opt.max_levels = cfg.levels;
  opt.max_elements = cfg.max_elements;
  opt.variant = cfg.variant;
  opt.quad_degree = cfg.quad_degree;
  opt.c_a = cfg.c_a;
  opt.pdas_max_iter = cfg.pdas_max_iter;
  opt.linear = cfg.linear;
  opt.measure_time = !cfg.deterministic;

  if (cfg.adaptive && cfg.family == Family::tensor)
    throw unsupported_error(
        "adaptive refinement is not available on tensor-product meshes");

  StudyResult result;
  result.final_mesh = make_seed_mesh(prob, cfg);

  const char* mode = cfg.adaptive ? "adaptive" : "uniform";
  const char* fam = cfg.family == Family::tensor ? "tensor" : "simplicial";

  LevelObserver observe = [&](int level, const Mesh& mesh, const Spaces& sp,
                              const DiscreteSolution& sol,
                              const EstimatorReport& rep, const PdasResult&) {
    result.final_mesh = mesh;
    result.final_spaces = sp;
    result.final_solution = sol;
    result.final_report = rep;
    if (!cfg.quiet) {
      std::printf("[%s %s %s] level %d: %d elements, %d dofs, rho_r=%.3e "
                  "rho_p=%.3e rho_c=%.3e rho=%.3e\n",
                  cfg.problem.c_str(), fam, mode, level, n_elements(mesh),
                  sp.n_total(), rep.rho_r(), rep.rho_p(), rep.rho_c(),
                  rep.total());
      std::fflush(stdout);
    }
  };

  result.records = adaptive_loop(prob, result.final_mesh, opt, observe);

  if (!cfg.csv_path.empty()) write_csv(cfg.csv_path, result.records);
  if (!cfg.vtk_path.empty()) {
    const std::vector<double> uvals =
        vertex_values_u(result.final_spaces, result.final_solution);
    std::visit(
        [&](const auto& mm) { write_vtk(mm, cfg.vtk_path, uvals, "u"); },
        result.final_mesh);
  }
  return result;
}

}  // namespace parobs
