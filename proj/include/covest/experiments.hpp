#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "covest/codebook.hpp"
#include "covest/skc.hpp"

namespace covest {

enum class Estimator { Nnls, Ml, MlWithNnls };

const char* to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct ExperimentConfig {
  int m = 4;
  int n = 17;
  int s0 = 7;
  /// Sparsity levels for figures a and b; empty means 1..s0+1.
  std::vector<int> s_values;
  std::vector<int> k_grid{250, 500, 1000, 2000, 4000, 8000};
  std::vector<double> rho_grid;  // default 10^linspace(-4, -1, 7)
  std::vector<double> eps_grid;  // default 10^linspace(-4, -1, 7)
  int trials_b = 100;
  int trials_c = 100;
  int trials_d = 50;
  std::uint64_t seed = 1;
  double sigma_scale = 1e-4;
  std::vector<Estimator> estimators{Estimator::Nnls, Estimator::Ml, Estimator::MlWithNnls};
  std::string out_dir = "out";
  int ml_sweeps = 100;
  int max_codebook_draws = 100;
  double tau_min = 1e-3;   // required tau'(S) for S <= s0
  double tau_zero = 1e-6;  // required upper bound on tau'(s0 + 1)
  double detect_eps = 1e-4;
  double p = 0.9;
  double c = 1.0;
  int threads = 0;  // 0: hardware concurrency
  std::string codebook_path;  // skip the search and load this codebook
  TauMethod tau_method = TauMethod::ExactEnumeration;

  ExperimentConfig();
  /// Throws InvalidInput when an invariant fails.
  void validate() const;
  std::vector<int> sparsities() const;
  bool uses(Estimator e) const;
};

/// `key = value` lines; `#` starts a comment. Lists are comma separated.
/// Keys not present keep their defaults.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

struct VerifiedCodebook {
  Codebook codebook;
  std::uint64_t seed = 0;  // seed the codebook was drawn with
  int draws = 0;           // candidates drawn, including the accepted one
  double tau_s0 = 0.0;
  double tau_s0_plus_one = 0.0;
};

/// Draws Gaussian codebooks with seeds cfg.seed, cfg.seed + 1, ... until
/// tau'(s0) > tau_min and tau'(s0 + 1) < tau_zero. Throws SetupFailed after
/// max_codebook_draws candidates.
VerifiedCodebook find_verified_codebook(const ExperimentConfig& cfg);
/// Loads cfg.codebook_path when set, otherwise searches.
VerifiedCodebook obtain_codebook(const ExperimentConfig& cfg);

struct TrialRecord {
  std::string experiment;
  double parameter = 0.0;  // S, rho or K
  int trial = 0;
  /// Indexed by Estimator; NaN when the estimator was not run.
  std::array<double, 3> error{};
  std::array<bool, 3> detect_threshold{};  // T == T1
  std::array<bool, 3> detect_top_k{};      // T == T2
  double runtime_ms = 0.0;
};

struct ExperimentOutput {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<TrialRecord> trials;
};

/// Errors of each configured estimator on one instance.
struct EstimateErrors {
  std::array<double, 3> error{};
  std::array<bool, 3> detect_threshold{};
  std::array<bool, 3> detect_top_k{};
};
EstimateErrors run_estimators(const ExperimentConfig& cfg, const MeasurementOperator& op,
                              const HpdMatrix& sigma, const HermitianMatrix& w,
                              const RVector& x, std::uint64_t trial_seed, bool require_psd_w);

/// `S,tau_prime,err_nnls,err_ml,err_ml_nnls`
ExperimentOutput run_figure_a(const ExperimentConfig& cfg, const VerifiedCodebook& cb);
/// `S,err_nnls,err_ml,err_ml_nnls` (means over trials)
ExperimentOutput run_figure_b(const ExperimentConfig& cfg, const VerifiedCodebook& cb);
/// `rho,err_nnls,err_ml_nnls`
ExperimentOutput run_figure_c(const ExperimentConfig& cfg, const VerifiedCodebook& cb);
/// `K,inv_sq_err_nnls,inv_sq_err_ml_nnls` (means of ||x - z||^-2)
ExperimentOutput run_figure_d(const ExperimentConfig& cfg, const VerifiedCodebook& cb);
/// Radii and antenna counts for X = A(x) + Sigma with an s0-sparse random x
/// and tau = tau'(s0).
ExperimentOutput run_bounds_table(const ExperimentConfig& cfg, const VerifiedCodebook& cb);

void write_summary_csv(std::ostream& out, const ExperimentOutput& result);
/// One row per trial, without timings so that reruns compare byte for byte.
void write_trials_csv(std::ostream& out, const ExperimentOutput& result);
void write_timings_csv(std::ostream& out, const ExperimentOutput& result);
/// Config, codebook provenance and the defaults this harness chose itself.
void write_metadata(std::ostream& out, const ExperimentConfig& cfg, const VerifiedCodebook& cb);

/// Writes <name>.csv, <name>_trials.csv, <name>_timing.csv and metadata.txt
/// into cfg.out_dir, plus codebook.csv.
void save_experiment(const ExperimentConfig& cfg, const VerifiedCodebook& cb,
                     const ExperimentOutput& result);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
/// Coefficient of determination of the least-squares line y ~ a + b x.
double r_squared(const std::vector<double>& x, const std::vector<double>& y);
/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Expected qualitative outcomes of each experiment, evaluated on its
/// summary rows. Used by `--assert`.
std::vector<CheckResult> check_experiment(const ExperimentConfig& cfg,
                                          const ExperimentOutput& result);

}  // namespace covest
