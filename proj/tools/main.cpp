// Command-line front end: single convergence studies, the canonical
// benchmark suite, and rate fitting on previously written CSV files.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "parobs/parobs.hpp"

namespace {

using nlohmann::json;

struct RunArgs {
  std::string problem = "stefan";
  std::string family = "simplicial";
  std::string refine = "uniform";
  double theta = 0.5;
  std::string estimator = "default";
  int levels = 100;
  long long max_elems = 100000;
  int quad_degree = 4;
  std::vector<int> seed_mesh;  // nt,nx (d = 1) or n (d = 2)
  double lambda_weight = 0.0;  // 0: problem default
  std::string out, vtk, config;
  bool single_thread = false;
  bool quiet = false;
};

parobs::StudyConfig to_config(const RunArgs& a) {
  parobs::StudyConfig cfg;
  cfg.problem = a.problem;
  if (a.family == "simplicial")
    cfg.family = parobs::Family::simplicial;
  else if (a.family == "tensor")
    cfg.family = parobs::Family::tensor;
  else
    throw CLI::ValidationError("--family must be simplicial or tensor");
  if (a.refine == "adaptive")
    cfg.adaptive = true;
  else if (a.refine != "uniform")
    throw CLI::ValidationError("--refine must be uniform or adaptive");
  cfg.theta = a.theta;
  if (a.estimator == "tilde")
    cfg.variant = parobs::EstimatorVariant::tilde;
  else if (a.estimator == "hat")
    cfg.variant = parobs::EstimatorVariant::hat;
  else if (a.estimator != "default")
    throw CLI::ValidationError("--estimator must be tilde, hat or default");
  cfg.levels = a.levels;
  cfg.max_elements = a.max_elems;
  cfg.quad_degree = a.quad_degree;
  if (!a.seed_mesh.empty()) {
    if (a.seed_mesh.size() == 1) {
      cfg.seed_n = a.seed_mesh[0];
    } else if (a.seed_mesh.size() == 2) {
      cfg.seed_nt = a.seed_mesh[0];
      cfg.seed_nx = a.seed_mesh[1];
    } else {
      throw CLI::ValidationError("--seed-mesh takes nt,nx or a single n");
    }
  }
  if (a.lambda_weight != 0.0) cfg.lambda_weight = a.lambda_weight;
  cfg.csv_path = a.out;
  cfg.vtk_path = a.vtk;
  cfg.deterministic = a.single_thread;
  cfg.quiet = a.quiet;
  return cfg;
}

// Config-file values fill in every option the command line left untouched.
void apply_config_file(const CLI::App& app, RunArgs& a) {
  if (a.config.empty()) return;
  std::ifstream is(a.config);
  if (!is) throw CLI::ValidationError("cannot open config file " + a.config);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw CLI::ValidationError(std::string("config file: ") + e.what());
  }
  auto untouched = [&](const std::string& flag) {
    const CLI::Option* o = app.get_option_no_throw("--" + flag);
    return o != nullptr && o->count() == 0 && j.contains(flag);
  };
  if (untouched("problem")) a.problem = j["problem"].get<std::string>();
  if (untouched("family")) a.family = j["family"].get<std::string>();
  if (untouched("refine")) a.refine = j["refine"].get<std::string>();
  if (untouched("theta")) a.theta = j["theta"].get<double>();
  if (untouched("estimator")) a.estimator = j["estimator"].get<std::string>();
  if (untouched("levels")) a.levels = j["levels"].get<int>();
  if (untouched("max-elems")) a.max_elems = j["max-elems"].get<long long>();
  if (untouched("quad-degree")) a.quad_degree = j["quad-degree"].get<int>();
  if (untouched("seed-mesh")) a.seed_mesh = j["seed-mesh"].get<std::vector<int>>();
  if (untouched("lambda-weight")) a.lambda_weight = j["lambda-weight"].get<double>();
  if (untouched("out")) a.out = j["out"].get<std::string>();
  if (untouched("vtk")) a.vtk = j["vtk"].get<std::string>();
  if (untouched("single-thread")) a.single_thread = j["single-thread"].get<bool>();
  if (untouched("quiet")) a.quiet = j["quiet"].get<bool>();
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--problem", a.problem,
                  "Benchmark problem: stefan, pyramid, american, heat2d")
      ->check(CLI::IsMember({"stefan", "pyramid", "american", "heat2d"}));
  cmd->add_option("--family", a.family, "Mesh family: simplicial or tensor")
      ->check(CLI::IsMember({"simplicial", "tensor"}));
  cmd->add_option("--refine", a.refine, "Refinement mode: uniform or adaptive")
      ->check(CLI::IsMember({"uniform", "adaptive"}));
  cmd->add_option("--theta", a.theta, "Bulk marking parameter in (0,1]");
  cmd->add_option("--estimator", a.estimator,
                  "Penetration variant: tilde, hat or default")
      ->check(CLI::IsMember({"tilde", "hat", "default"}));
  cmd->add_option("--levels", a.levels, "Maximum number of mesh levels");
  cmd->add_option("--max-elems", a.max_elems,
                  "Stop after recording a level with at least this many elements");
  cmd->add_option("--quad-degree", a.quad_degree, "Quadrature degree (2 or 4)")
      ->check(CLI::IsMember({2, 4}));
  cmd->add_option("--seed-mesh", a.seed_mesh,
                  "Initial mesh: nt,nx (one space dimension) or n (two)")
      ->delimiter(',');
  cmd->add_option("--lambda-weight", a.lambda_weight,
                  "Residual weight override (> 0; 0 keeps the default)");
  cmd->add_option("--out", a.out, "CSV output path");
  cmd->add_option("--vtk", a.vtk, "VTK output path for the finest level");
  cmd->add_flag("--single-thread", a.single_thread,
                "Deterministic output (wall_seconds written as 0)");
  cmd->add_flag("--quiet", a.quiet, "Suppress per-level progress lines");
  cmd->add_option("--config", a.config,
                  "JSON config file; explicit flags take precedence");
}

int run_one(const CLI::App& cmd, RunArgs& args) {
  apply_config_file(cmd, args);
  const parobs::StudyConfig cfg = to_config(args);
  const parobs::StudyResult res = parobs::run_study(cfg);
  if (!cfg.csv_path.empty())
    std::printf("wrote %s (%zu levels)\n", cfg.csv_path.c_str(),
                res.records.size());
  if (!cfg.vtk_path.empty()) std::printf("wrote %s\n", cfg.vtk_path.c_str());
  return 0;
}

int run_suite(const std::string& out_dir, const std::string& only,
              bool single_thread, bool quiet) {
  std::filesystem::create_directories(out_dir);
  int ran = 0;
  for (parobs::StudyConfig cfg : parobs::benchmark_suite()) {
    if (!only.empty() && cfg.problem != only) continue;
    cfg.deterministic = single_thread;
    cfg.quiet = quiet;
    cfg.csv_path = out_dir + "/" + parobs::study_tag(cfg) + ".csv";
    std::printf("== %s ==\n", parobs::study_tag(cfg).c_str());
    std::fflush(stdout);
    parobs::run_study(cfg);
    std::printf("wrote %s\n", cfg.csv_path.c_str());
    ++ran;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no suite entry matches problem '%s'\n", only.c_str());
    return 1;
  }
  return 0;
}

int run_rates(const std::string& csv, const std::vector<std::string>& columns,
              int window) {
  const std::vector<parobs::ConvergenceRecord> recs = parobs::read_csv(csv);
  std::vector<std::string> cols = columns;
  if (cols.empty()) cols = {"rho_total", "err_total"};
  for (const auto& c : cols) {
    try {
      std::printf("%s: %+.4f\n", c.c_str(), parobs::fit_rate(recs, c, window));
    } catch (const std::invalid_argument& e) {
      std::printf("%s: n/a (%s)\n", c.c_str(), e.what());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time least-squares solver for parabolic obstacle problems"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one convergence study");
  add_run_options(run_cmd, run_args);

  std::string suite_dir = "results", suite_only;
  bool suite_single = false, suite_quiet = false;
  CLI::App* suite_cmd =
      app.add_subcommand("suite", "Run the canonical benchmark studies");
  suite_cmd->add_option("--out-dir", suite_dir, "Directory for CSV output");
  suite_cmd->add_option("--problem", suite_only, "Restrict to one problem")
      ->check(CLI::IsMember({"stefan", "pyramid", "american", "heat2d"}));
  suite_cmd->add_flag("--single-thread", suite_single,
                      "Deterministic output (wall_seconds written as 0)");
  suite_cmd->add_flag("--quiet", suite_quiet, "Suppress per-level lines");

  std::string rates_csv;
  std::vector<std::string> rates_cols;
  int rates_window = 4;
  CLI::App* rates_cmd =
      app.add_subcommand("rates", "Fit convergence rates from a CSV file");
  rates_cmd->add_option("--csv", rates_csv, "CSV file written by run/suite")
      ->required();
  rates_cmd->add_option("--column", rates_cols,
                        "Columns to fit (default: rho_total err_total)");
  rates_cmd->add_option("--window", rates_window,
                        "Number of finest levels in the fit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_one(*run_cmd, run_args);
    if (suite_cmd->parsed())
      return run_suite(suite_dir, suite_only, suite_single, suite_quiet);
    if (rates_cmd->parsed()) return run_rates(rates_csv, rates_cols, rates_window);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
