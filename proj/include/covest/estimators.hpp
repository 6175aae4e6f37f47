#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "covest/codebook.hpp"
#include "covest/errors.hpp"
#include "covest/hermitian.hpp"

namespace covest {

// ---------------------------------------------------------------------------
// Non-negative least squares: min_{z >= 0} ||A(z) + Sigma - W||_F
// ---------------------------------------------------------------------------

enum class NnlsMethod { ActiveSet, ProjectedGradient };

struct NnlsOptions {
  int max_iterations = 10000;
  double kkt_tol = 1e-9;
  NnlsMethod method = NnlsMethod::ActiveSet;
};

struct NnlsResult {
  RVector z;
  /// ||A(z) + Sigma - W||_F.
  double residual = 0.0;
  /// Largest violation of the nonnegativity KKT conditions of the
  /// vectorized least-squares problem.
  double kkt_violation = 0.0;
  int iterations = 0;
};

/// Thrown when the iteration budget is exhausted; carries the best iterate.
class NnlsNotConverged : public Error {
 public:
  NnlsNotConverged(NnlsResult best, const std::string& what)
      : Error(ErrorCode::NotConverged, what), best_(std::move(best)) {}
  const NnlsResult& best() const { return best_; }

 private:
  NnlsResult best_;
};

/// Solves min_{z >= 0} ||B z - w||_2 directly on a real system.
NnlsResult nnls_solve(const RMatrix& b, const RVector& w, const NnlsOptions& opts = {});

NnlsResult nnls_estimate(const MeasurementOperator& op, const HpdMatrix& sigma,
                         const HermitianMatrix& w, const NnlsOptions& opts = {});

/// Worst KKT violation of z for min_{z>=0} 1/2 ||B z - w||^2.
double nnls_kkt_violation(const RMatrix& b, const RVector& w, const RVector& z);

// ---------------------------------------------------------------------------
// Relaxed maximum likelihood: min_{z >= 0} tr((A(z)+Sigma)^{-1} W) + ln det(A(z)+Sigma)
// ---------------------------------------------------------------------------

struct MlOptions {
  /// Coordinate visiting order; empty means 0, 1, ..., N-1.
  std::vector<Eigen::Index> permutation;
  /// Starting point; empty means the zero vector.
  RVector z0;
  int while_iterations = 100;
  double objective_tol = 1e-10;
  /// Recompute the tracked inverse from scratch every this many sweeps.
  int refresh_every = 25;
  /// Reject W with an eigenvalue below -1e-10.
  bool require_psd_w = true;
  /// Record the objective after every single coordinate update.
  bool record_updates = false;
};

struct MlTrace {
  /// Objective before the first sweep followed by one value per sweep.
  std::vector<double> sweep_objectives;
  /// KKT residual matching each entry of sweep_objectives.
  std::vector<double> sweep_kkt;
  /// Objective after each coordinate update (only with record_updates).
  std::vector<double> update_objectives;
  /// Step t taken by each coordinate update (only with record_updates).
  std::vector<double> update_steps;
  RVector z;
  /// Tracked (Sigma + A(z))^{-1} at exit.
  HermitianMatrix sigma_prime;
  /// ||Sigma' (Sigma + A(z)) - I||_F at exit.
  double inverse_drift = 0.0;
  double kkt_residual = 0.0;
  int sweeps = 0;
};

double ml_objective(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z);

/// Optimal exact coordinate step t = max{-x_n, (a^H S W S a - a^H S a) / (a^H S a)^2}.
double coordinate_step(const CVector& a_n, const HermitianMatrix& sigma_prime,
                       const HermitianMatrix& w, double x_n);

/// (Sigma'^{-1} + t a a^H)^{-1} via Sherman-Morrison.
HermitianMatrix sherman_morrison_update(const HermitianMatrix& sigma_prime, const CVector& a_n,
                                        double t);

MlTrace ml_coordinate_descent(const MeasurementOperator& op, const HpdMatrix& sigma,
                              const HermitianMatrix& w, const MlOptions& opts = {});

/// Partial derivatives a_n^H S a_n - a_n^H S W S a_n with S = (A(z)+Sigma)^{-1}.
RVector ml_gradient(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z);

double kkt_residual(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z);

// ---------------------------------------------------------------------------
// Activity detection
// ---------------------------------------------------------------------------

struct DetectionResult {
  std::vector<Eigen::Index> truth;      // T
  std::vector<Eigen::Index> threshold;  // T1 = {n : z_n > eps}
  std::vector<Eigen::Index> top_k;      // T2 = |T| largest entries
  bool truth_equals_threshold() const { return truth == threshold; }
  bool truth_equals_top_k() const { return truth == top_k; }
};

/// Index sets are 0-based and sorted. Ties in T2 go to the lowest index.
DetectionResult threshold_detect(const RVector& z, double eps,
                                 std::vector<Eigen::Index> true_support);

std::vector<Eigen::Index> support_of(const RVector& x);

// CSV emitters: `n,z_n` and `sweep,objective,kkt_residual`.
void write_estimate_csv(std::ostream& out, const RVector& z);
void write_trace_csv(std::ostream& out, const MlTrace& trace);

}  // namespace covest
