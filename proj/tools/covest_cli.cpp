// covest: command-line front end for codebooks, robustness constants,
// estimators, bound tables and the simulation experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "covest/bounds.hpp"
#include "covest/codebook.hpp"
#include "covest/csv.hpp"
#include "covest/errors.hpp"
#include "covest/estimators.hpp"
#include "covest/experiments.hpp"
#include "covest/skc.hpp"

namespace fs = std::filesystem;
using namespace covest;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool assert_mode = false;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig() : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Globals& g) {
  fs::path dir = g.out.empty() ? fs::path("out") : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  return f;
}

TauMethod parse_method(const std::string& s) {
  if (s == "exact") return TauMethod::ExactEnumeration;
  if (s == "heuristic") return TauMethod::Heuristic;
  throw Error(ErrorCode::InvalidInput, "method must be exact or heuristic");
}

int report_checks(const std::vector<CheckResult>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance-based activity detection: codebooks, estimators and experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "Experiment config file (key = value)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--assert", g.assert_mode, "Exit with code 2 when a check fails");

  // codebook build | check
  auto* codebook = app.add_subcommand("codebook", "Build or check a pilot codebook");
  codebook->require_subcommand(1);
  std::string kind = "gaussian";
  int cb_m = 4, cb_n = 17;
  auto* build = codebook->add_subcommand("build", "Write a codebook CSV");
  build->add_option("--kind", kind, "gaussian | deterministic | verified")
      ->check(CLI::IsMember({"gaussian", "deterministic", "verified"}));
  build->add_option("-M", cb_m, "Pilot length");
  build->add_option("-N", cb_n, "Number of users");
  std::string cb_path;
  int check_order = 7;
  std::string method_name = "exact";
  auto* check = codebook->add_subcommand("check", "Test the signed kernel condition");
  check->add_option("--codebook", cb_path, "Codebook CSV")->required();
  check->add_option("-S", check_order, "Order");
  double check_tol = 1e-6;
  check->add_option("--threshold", check_tol, "tau' must exceed this");

  // tau
  auto* tau = app.add_subcommand("tau", "Compute tau' and the witness pair");
  tau->add_option("--codebook", cb_path, "Codebook CSV")->required();
  int tau_order = 7;
  tau->add_option("-S", tau_order, "Order")->required();
  tau->add_option("--method", method_name, "exact | heuristic")
      ->check(CLI::IsMember({"exact", "heuristic"}));

  // estimate nnls | ml
  auto* estimate = app.add_subcommand("estimate", "Estimate fading coefficients from W");
  estimate->require_subcommand(1);
  std::string w_path;
  double sigma_scale = 1e-4;
  std::string init = "zero";
  auto* est_nnls = estimate->add_subcommand("nnls", "Non-negative least squares");
  auto* est_ml = estimate->add_subcommand("ml", "Relaxed ML by coordinate descent");
  for (auto* sub : {est_nnls, est_ml}) {
    sub->add_option("--codebook", cb_path, "Codebook CSV")->required();
    sub->add_option("--w", w_path, "Observation W as `row,col,re,im` CSV")->required();
    sub->add_option("--sigma-scale", sigma_scale, "Sigma = scale * I");
  }
  est_ml->add_option("--init", init, "zero | nnls")->check(CLI::IsMember({"zero", "nnls"}));
  int sweeps = 100;
  est_ml->add_option("--sweeps", sweeps, "Maximum sweeps");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Tabulate robustness radii and antenna counts");

  // experiment a|b|c|d
  auto* experiment = app.add_subcommand("experiment", "Run a simulation experiment");
  experiment->require_subcommand(1);
  std::vector<CLI::App*> figures;
  for (const char* name : {"a", "b", "c", "d"}) {
    figures.push_back(experiment->add_subcommand(name, std::string("Experiment ") + name));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      const fs::path dir = out_dir(g);
      std::optional<Codebook> cb;
      if (kind == "gaussian") {
        cb = build_gaussian_codebook(cb_m, cb_n, g.seed.value_or(1));
      } else if (kind == "deterministic") {
        cb = build_deterministic_codebook(cb_m, cb_n);
      } else {
        ExperimentConfig cfg = resolve_config(g);
        cfg.m = cb_m;
        cfg.n = cb_n;
        VerifiedCodebook v = find_verified_codebook(cfg);
        std::cout << "seed " << v.seed << " after " << v.draws << " draws, tau'(S0) = "
                  << csv::format_double(v.tau_s0) << '\n';
        cb = std::move(v.codebook);
      }
      save_codebook((dir / "codebook.csv").string(), *cb);
      std::cout << (dir / "codebook.csv").string() << '\n';
      return 0;
    }
    if (check->parsed()) {
      const MeasurementOperator op(load_codebook(cb_path));
      const SkcReport r = tau_prime(op.vectorize_real(), check_order, TauMethod::ExactEnumeration);
      const bool holds = r.tau_prime > check_tol;
      std::cout << "tau_prime = " << csv::format_double(r.tau_prime) << '\n'
                << "skc_holds = " << (holds ? "true" : "false") << '\n';
      return g.assert_mode && !holds ? 2 : 0;
    }
    if (tau->parsed()) {
      const MeasurementOperator op(load_codebook(cb_path));
      HeuristicOptions h;
      h.seed = g.seed.value_or(0);
      const SkcReport r = tau_prime(op.vectorize_real(), tau_order, parse_method(method_name), h);
      write_skc_report(std::cout, r);
      if (!g.out.empty()) {
        auto f = open_out(out_dir(g) / ("tau_S" + std::to_string(tau_order) + ".txt"));
        write_skc_report(f, r);
      }
      return 0;
    }
    if (est_nnls->parsed() || est_ml->parsed()) {
      const MeasurementOperator op(load_codebook(cb_path));
      std::ifstream wf(w_path);
      if (!wf) throw Error(ErrorCode::IoError, "cannot open '" + w_path + "'");
      const HermitianMatrix w(csv::read_complex_matrix(wf));
      const HpdMatrix sigma(HermitianMatrix::scaled_identity(op.pilot_length(), sigma_scale));
      const fs::path dir = out_dir(g);
      if (est_nnls->parsed()) {
        const NnlsResult r = nnls_estimate(op, sigma, w);
        auto f = open_out(dir / "estimate_nnls.csv");
        write_estimate_csv(f, r.z);
        write_estimate_csv(std::cout, r.z);
        return 0;
      }
      MlOptions opts;
      opts.while_iterations = sweeps;
      if (init == "nnls") opts.z0 = nnls_estimate(op, sigma, w).z;
      const MlTrace t = ml_coordinate_descent(op, sigma, w, opts);
      auto f = open_out(dir / "estimate_ml.csv");
      write_estimate_csv(f, t.z);
      auto tf = open_out(dir / "trace_ml.csv");
      write_trace_csv(tf, t);
      write_estimate_csv(std::cout, t.z);
      return 0;
    }
    if (bounds->parsed()) {
      const ExperimentConfig cfg = resolve_config(g);
      const VerifiedCodebook cb = obtain_codebook(cfg);
      const ExperimentOutput r = run_bounds_table(cfg, cb);
      save_experiment(cfg, cb, r);
      write_summary_csv(std::cout, r);
      return g.assert_mode ? report_checks(check_experiment(cfg, r)) : 0;
    }
    for (std::size_t i = 0; i < figures.size(); ++i) {
      if (!figures[i]->parsed()) continue;
      const ExperimentConfig cfg = resolve_config(g);
      const VerifiedCodebook cb = obtain_codebook(cfg);
      using Runner = ExperimentOutput (*)(const ExperimentConfig&, const VerifiedCodebook&);
      constexpr Runner runners[] = {run_figure_a, run_figure_b, run_figure_c, run_figure_d};
      const ExperimentOutput r = runners[i](cfg, cb);
      save_experiment(cfg, cb, r);
      write_summary_csv(std::cout, r);
      return g.assert_mode ? report_checks(check_experiment(cfg, r)) : 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
