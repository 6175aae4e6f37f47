#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "covest/gtuple.hpp"
#include "covest/hermitian.hpp"

namespace covest {

/// Everything the closed-form radii and antenna counts depend on.
struct BoundInputs {
  double lambda_min = 0.0;  // lambda_1(X), X = A(x) + Sigma
  double lambda_max = 0.0;  // lambda_M(X)
  double beta = 0.0;        // 0 < beta < lambda_min
  double eta = 1.0;
  double tau = 0.0;         // robustness constant
  int dim = 1;              // M
  double p = 0.9;           // target success probability
  double c = 1.0;           // concentration constant; not fixed by theory
  double sup_diag = 0.0;    // max_m X_{m,m}
};

/// Fills the spectral fields from X; beta defaults to lambda_1(X)/2.
BoundInputs make_bound_inputs(const HpdMatrix& x, double tau, double p = 0.9, double c = 1.0,
                              std::optional<double> beta = std::nullopt, double eta = 1.0);

enum class RadiusKind {
  Nice,     // generic sufficiently-nice tuple radius
  Convex,   // sufficiently-convex tuple radius
  TraceLogDet,
  Skc,      // radius for the relaxed ML estimator under the signed kernel condition
  ObjCont,  // objective-continuity radius
};

const char* to_string(RadiusKind kind);

/// Perturbation budget on W (operator norm) that keeps the estimate within
/// eps. TraceLogDet and Skc are evaluated from Lambert W directly and ignore
/// `t`; the other kinds use the tuple.
double delta_radius(RadiusKind kind, double eps, const BoundInputs& in, const GTuple& t);

enum class EstimatorKind { Nnls, Ml };

/// Sufficient antenna count for error <= eps with probability >= in.p.
double k0_antennas(EstimatorKind estimator, double eps, const BoundInputs& in, const GTuple& t);

struct BoundsRow {
  double eps;
  double delta_nice, delta_c, delta_tld, delta_skc;
  double k0_nnls, k0_ml;
};

std::vector<BoundsRow> bounds_table(const std::vector<double>& eps_grid, const BoundInputs& in,
                                    const GTuple& t);
/// `eps,delta_nice,delta_c,delta_tld,delta_skc,k0_nnls,k0_ml`
void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows);

/// Fraction of trials with ||(1/K) Y Y^H - Sigma'||_F <= xi for Y with
/// i.i.d. CN(0, Sigma') columns.
double empirical_concentration(const HpdMatrix& sigma_prime, Eigen::Index k, double xi, int trials,
                               std::uint64_t seed);

}  // namespace covest
