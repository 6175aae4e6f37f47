#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "covest/errors.hpp"
#include "covest/experiments.hpp"

using namespace covest;
namespace fs = std::filesystem;

namespace {

const VerifiedCodebook& default_codebook() {
  static const VerifiedCodebook cb = find_verified_codebook(ExperimentConfig());
  return cb;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string summary_of(const ExperimentOutput& r) {
  std::ostringstream s;
  write_summary_csv(s, r);
  write_trials_csv(s, r);
  return s.str();
}

const CheckResult* find_check(const std::vector<CheckResult>& checks, const std::string& name) {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void require_all_pass(const std::vector<CheckResult>& checks) {
  REQUIRE_FALSE(checks.empty());
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig cfg;
  CHECK(cfg.m == 4);
  CHECK(cfg.n == 17);
  CHECK(cfg.s0 == 7);
  REQUIRE(cfg.rho_grid.size() == 7);
  CHECK(cfg.rho_grid.front() == doctest::Approx(1e-4));
  CHECK(cfg.rho_grid[2] == doctest::Approx(1e-3));
  CHECK(cfg.rho_grid.back() == doctest::Approx(1e-1));
  CHECK(cfg.sparsities() == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(cfg.uses(Estimator::MlWithNnls));
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse(
      "# comment\n"
      "M = 3\n"
      "N = 9   # trailing comment\n"
      "S0 = 2\n"
      "K = 100, 200\n"
      "rho = 0, 0.5\n"
      "estimators = nnls,ml-with-nnls\n"
      "seed = 42\n"
      "tau_method = heuristic\n");
  CHECK(cfg.m == 3);
  CHECK(cfg.n == 9);
  CHECK(cfg.s0 == 2);
  CHECK(cfg.k_grid == std::vector<int>{100, 200});
  CHECK(cfg.rho_grid == std::vector<double>{0.0, 0.5});
  CHECK(cfg.seed == 42);
  CHECK(cfg.uses(Estimator::Nnls));
  CHECK_FALSE(cfg.uses(Estimator::Ml));
  CHECK(cfg.tau_method == TauMethod::Heuristic);
  CHECK(cfg.sparsities() == std::vector<int>{1, 2, 3});

  SUBCASE("round trip") {
    std::ostringstream out;
    write_config(out, cfg);
    const ExperimentConfig back = parse(out.str());
    std::ostringstream again;
    write_config(again, back);
    CHECK(out.str() == again.str());
    CHECK(back.rho_grid == cfg.rho_grid);
  }
  SUBCASE("default round trip") {
    std::ostringstream out;
    write_config(out, ExperimentConfig());
    const ExperimentConfig back = parse(out.str());
    CHECK(back.eps_grid == ExperimentConfig().eps_grid);
  }
}

TEST_CASE("config rejects bad input") {
  auto code_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code_of("bogus = 1\n") == ErrorCode::InvalidInput);
  CHECK(code_of("M 4\n") == ErrorCode::InvalidInput);
  CHECK(code_of("M = four\n") == ErrorCode::InvalidInput);
  CHECK(code_of("S0 = 17\n") == ErrorCode::InvalidInput);
  CHECK(code_of("K = 0\n") == ErrorCode::InvalidInput);
  CHECK(code_of("rho = -1\n") == ErrorCode::InvalidInput);
  CHECK(code_of("eps = 0\n") == ErrorCode::InvalidInput);
  CHECK(code_of("sigma_scale = 0\n") == ErrorCode::InvalidInput);
  CHECK(code_of("p = 1\n") == ErrorCode::InvalidInput);
  CHECK(code_of("estimators = lasso\n") == ErrorCode::InvalidInput);
  CHECK(code_of("tau_method = guess\n") == ErrorCode::InvalidInput);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.txt"), Error);
  CHECK(parse_estimator("ml") == Estimator::Ml);
  CHECK_THROWS_AS(parse_estimator("ML"), Error);
}

TEST_CASE("verified codebook search") {
  const VerifiedCodebook& cb = default_codebook();
  CHECK(cb.seed == 1);
  CHECK(cb.draws == 1);
  CHECK(cb.tau_s0 > 1e-3);
  CHECK(cb.tau_s0_plus_one < 1e-6);
  CHECK(cb.codebook.pilot_length() == 4);
  CHECK(cb.codebook.users() == 17);

  // Real scalars |a_i|^2 > 0 always admit a signed kernel vector with two
  // entries of each sign, so no codebook can pass.
  ExperimentConfig bad;
  bad.m = 1;
  bad.n = 4;
  bad.s0 = 2;
  bad.max_codebook_draws = 3;
  try {
    find_verified_codebook(bad);
    FAIL("expected SetupFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SetupFailed);
  }
}

TEST_CASE("figure a") {
  ExperimentConfig cfg;
  const ExperimentOutput r = run_figure_a(cfg, default_codebook());
  CHECK(r.header == std::vector<std::string>{"S", "tau_prime", "err_nnls", "err_ml", "err_ml_nnls"});
  REQUIRE(r.rows.size() == 8);
  for (std::size_t i = 0; i < r.rows.size(); ++i) CHECK(r.rows[i][0] == i + 1);
  // tau' is nonincreasing in S.
  for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i][1] <= r.rows[i - 1][1] + 1e-12);
  require_all_pass(check_experiment(cfg, r));
  CHECK(find_check(check_experiment(cfg, r), "tau_vanishes_above_S0") != nullptr);
}

TEST_CASE("figure b") {
  ExperimentConfig cfg;
  cfg.trials_b = 10;
  const ExperimentOutput r = run_figure_b(cfg, default_codebook());
  REQUIRE(r.rows.size() == 8);
  CHECK(r.trials.size() == 80);
  const auto checks = check_experiment(cfg, r);
  require_all_pass(checks);
  CHECK(find_check(checks, "ml_degrades") != nullptr);
  // Warm-started ML refines NNLS; it must not lose accuracy by orders of magnitude.
  for (const auto& row : r.rows) {
    if (row[0] <= cfg.s0) CHECK(row[3] <= 10.0 * std::max(row[1], 1e-12));
  }
}

TEST_CASE("experiments are reproducible across thread counts") {
  ExperimentConfig cfg;
  cfg.trials_b = 3;
  cfg.s_values = {2, 5};
  cfg.threads = 1;
  const std::string one = summary_of(run_figure_b(cfg, default_codebook()));
  cfg.threads = 4;
  const std::string four = summary_of(run_figure_b(cfg, default_codebook()));
  CHECK(one == four);
  const std::string again = summary_of(run_figure_b(cfg, default_codebook()));
  CHECK(four == again);
  cfg.seed = 2;
  CHECK(summary_of(run_figure_b(cfg, default_codebook())) != one);
}

TEST_CASE("figure c") {
  ExperimentConfig cfg;
  cfg.trials_c = 20;
  const ExperimentOutput r = run_figure_c(cfg, default_codebook());
  REQUIRE(r.rows.size() == 7);
  require_all_pass(check_experiment(cfg, r));

  cfg.rho_grid = {0.0};
  cfg.trials_c = 5;
  const ExperimentOutput exact = run_figure_c(cfg, default_codebook());
  CHECK(exact.rows[0][1] <= 1e-3);
  CHECK(exact.rows[0][2] <= 1e-3);
}

TEST_CASE("figure d") {
  ExperimentConfig cfg;
  const ExperimentOutput r = run_figure_d(cfg, default_codebook());
  REQUIRE(r.rows.size() == 6);
  CHECK(r.trials.size() == 6 * 50);
  const auto checks = check_experiment(cfg, r);
  require_all_pass(checks);
  CHECK(find_check(checks, "nnls_doubles_with_K") != nullptr);
}

TEST_CASE("bounds table") {
  ExperimentConfig cfg;
  const ExperimentOutput r = run_bounds_table(cfg, default_codebook());
  REQUIRE(r.rows.size() == cfg.eps_grid.size());
  require_all_pass(check_experiment(cfg, r));
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    for (std::size_t c = 1; c <= 4; ++c) CHECK(row[c] > 0.0);
    CHECK(row[2] <= row[1] * (1.0 + 1e-12));  // delta_c <= delta_nice
    CHECK(row[3] == doctest::Approx(row[2]).epsilon(1e-12));
    if (i > 0) {
      for (std::size_t c = 1; c <= 4; ++c) CHECK(row[c] >= r.rows[i - 1][c]);
    }
  }
  // Small eps is in the linear regime: one decade in eps is one decade in delta_skc.
  CHECK(r.rows[2][4] / r.rows[0][4] == doctest::Approx(10.0).epsilon(1e-3));
}

TEST_CASE("save_experiment writes all artifacts") {
  const fs::path dir = fs::temp_directory_path() / "covest_save_test";
  fs::remove_all(dir);
  ExperimentConfig cfg;
  cfg.out_dir = dir.string();
  cfg.trials_b = 2;
  cfg.s_values = {3};
  const ExperimentOutput r = run_figure_b(cfg, default_codebook());
  save_experiment(cfg, default_codebook(), r);
  for (const char* f : {"figure_b.csv", "figure_b_trials.csv", "figure_b_timing.csv",
                        "metadata.txt", "codebook.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  const std::string meta = slurp(dir / "metadata.txt");
  CHECK(meta.find("codebook_seed = 1") != std::string::npos);
  CHECK(meta.find("choice.K_grid") != std::string::npos);
  CHECK(slurp(dir / "figure_b.csv").rfind("S,err_nnls,err_ml,err_ml_nnls\n", 0) == 0);
  const Codebook back = load_codebook((dir / "codebook.csv").string());
  CHECK((back.matrix() - default_codebook().codebook.matrix()).norm() == 0.0);

  ExperimentConfig reuse;
  reuse.codebook_path = (dir / "codebook.csv").string();
  const VerifiedCodebook loaded = obtain_codebook(reuse);
  CHECK(loaded.tau_s0 == doctest::Approx(default_codebook().tau_s0).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("fit statistics") {
  const std::vector<double> x{1, 2, 4, 8};
  CHECK(loglog_slope(x, {3, 6, 12, 24}) == doctest::Approx(1.0));
  CHECK(loglog_slope(x, {1, 0.5, 0.25, 0.125}) == doctest::Approx(-1.0));
  CHECK(r_squared(x, {1, 3, 7, 15}) == doctest::Approx(1.0));
  CHECK(r_squared({1, 2, 3, 4}, {1, -1, 1, -1}) == doctest::Approx(0.2));
  CHECK(spearman(x, {1, 10, 100, 1000}) == doctest::Approx(1.0));
  CHECK(spearman(x, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3}, {1, 1, 2}) == doctest::Approx(std::sqrt(0.75)));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), Error);
}
