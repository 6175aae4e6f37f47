#include "covest/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "covest/channel.hpp"
#include "covest/csv.hpp"
#include "covest/errors.hpp"
#include "covest/lambert_w.hpp"
#include "covest/rng.hpp"

namespace covest {

BoundInputs make_bound_inputs(const HpdMatrix& x, double tau, double p, double c,
                              std::optional<double> beta, double eta) {
  BoundInputs in;
  in.lambda_min = x.lambda_min();
  in.lambda_max = x.lambda_max();
  in.beta = beta.value_or(0.5 * in.lambda_min);
  in.eta = eta;
  in.tau = tau;
  in.dim = static_cast<int>(x.dim());
  in.p = p;
  in.c = c;
  in.sup_diag = x.matrix().diagonal().real().maxCoeff();
  return in;
}

const char* to_string(RadiusKind kind) {
  switch (kind) {
    case RadiusKind::Nice: return "nice";
    case RadiusKind::Convex: return "convex";
    case RadiusKind::TraceLogDet: return "tld";
    case RadiusKind::Skc: return "skc";
    case RadiusKind::ObjCont: return "obj_cont";
  }
  return "unknown";
}

namespace {

void validate(const BoundInputs& in, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidInput, "eps must be positive");
  if (in.dim < 1) throw Error(ErrorCode::InvalidInput, "dimension must be >= 1");
  if (!(in.lambda_min > 0.0) || in.lambda_max < in.lambda_min) {
    throw Error(ErrorCode::InvalidInput, "eigenvalue bounds must satisfy 0 < l1 <= lM");
  }
  if (!(in.beta > 0.0) || !(in.beta < in.lambda_min)) {
    throw Error(ErrorCode::InvalidInput, "beta must lie in (0, lambda_1(X))");
  }
  if (!(in.eta > 0.0)) throw Error(ErrorCode::InvalidInput, "eta must be positive");
}

// sqrt((l1 - beta) / (lM + beta)): eigenvalue spread of the beta-ball around X.
double spread(const BoundInputs& in) {
  return std::sqrt((in.lambda_min - in.beta) / (in.lambda_max + in.beta));
}

double radius_nice(double eps, const BoundInputs& in, const GTuple& t) {
  const double m = in.dim;
  const double r = spread(in);
  const double y = t.g_at_one() + in.eta;
  const double q = t.g1(y) / t.g2(y);
  const double inner = r * q * eps / (2.0 * in.lambda_max);
  return std::min({in.lambda_min * r * t.delta1(t.delta2(inner) / m), 0.5 * eps,
                   in.lambda_min * r * t.delta1(in.eta / m), in.beta});
}

double radius_convex(double eps, const BoundInputs& in, const GTuple& t) {
  const double m = in.dim;
  const double r = spread(in);
  const double g1v = t.g_at_one();
  const double q = t.g1(g1v + in.eta) / t.g2(g1v + in.eta);
  return std::min({t.nu / (2.0 * m) * (in.lambda_min / in.lambda_max) * r * r * q * eps,
                   0.5 * eps,
                   t.eps0 * m * in.lambda_max / q / r,
                   in.lambda_min * r * (1.0 - t.g1(g1v + in.eta / m)),
                   in.lambda_min * r * (1.0 - t.g1(t.g(1.0 + t.eps0))),
                   in.beta});
}

double radius_tld(double eps, const BoundInputs& in) {
  using std::numbers::ln2;
  const double m = in.dim;
  const double r = spread(in);
  const double arg = -std::exp(-(1.0 + in.eta));
  const double w0 = lambert_w(LambertBranch::Principal, arg);
  const double wm1 = lambert_w(LambertBranch::Lower, arg);
  const double w0_small = lambert_w(LambertBranch::Principal, -std::exp(-(1.0 + in.eta / m)));
  return std::min({(1.0 - ln2) / (2.0 * ln2 * m) * (in.lambda_min / in.lambda_max) * r * r *
                       (w0 / wm1) * eps,
                   0.5 * eps,
                   (2.0 * ln2 - 1.0) * m * in.lambda_max / r * (wm1 / w0),
                   in.lambda_min * r * (1.0 + w0_small),
                   (1.0 - ln2) * in.lambda_min * r,
                   in.beta});
}

double radius_obj_cont(double eps, const BoundInputs& in, const GTuple& t) {
  const double m = in.dim;
  return std::min(in.lambda_min * spread(in) * t.delta1(eps / m), in.beta);
}

double log_term(const BoundInputs& in) {
  if (!(in.p > 0.0 && in.p < 1.0)) throw Error(ErrorCode::InvalidInput, "p must lie in (0, 1)");
  if (!(in.c > 0.0)) throw Error(ErrorCode::InvalidInput, "concentration constant must be > 0");
  const double m = in.dim;
  return -std::log((1.0 - in.p) / (m * (m + 1.0))) / in.c;
}

}  // namespace

double delta_radius(RadiusKind kind, double eps, const BoundInputs& in, const GTuple& t) {
  validate(in, eps);
  switch (kind) {
    case RadiusKind::Nice: return radius_nice(eps, in, t);
    case RadiusKind::Convex: return radius_convex(eps, in, t);
    case RadiusKind::TraceLogDet: return radius_tld(eps, in);
    case RadiusKind::Skc:
      if (!(in.tau > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "robustness constant must be positive");
      }
      // The estimate must land within tau*eps/2 of X in operator norm for the
      // NNLS-type stability bound 2/tau to give error eps.
      return radius_tld(0.5 * in.tau * eps, in);
    case RadiusKind::ObjCont: return radius_obj_cont(eps, in, t);
  }
  throw Error(ErrorCode::InvalidInput, "unknown radius kind");
}

double k0_antennas(EstimatorKind estimator, double eps, const BoundInputs& in, const GTuple& t) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidInput, "eps must be positive");
  const double m = in.dim;
  const double s = in.sup_diag;
  const double lead = log_term(in);
  if (estimator == EstimatorKind::Nnls) {
    if (!(in.tau > 0.0)) throw Error(ErrorCode::InvalidInput, "robustness constant must be positive");
    const double te = in.tau * eps;
    return lead * std::max(512.0 * m * m * s * s / (9.0 * te * te),
                           16.0 * std::numbers::sqrt2 * m * s / (3.0 * te));
  }
  const double d = delta_radius(RadiusKind::Skc, eps, in, t);
  return std::max(m, lead * std::max(128.0 * m * m * s * s / (9.0 * d * d),
                                     8.0 * std::numbers::sqrt2 * m * s / (3.0 * d)));
}

std::vector<BoundsRow> bounds_table(const std::vector<double>& eps_grid, const BoundInputs& in,
                                    const GTuple& t) {
  std::vector<BoundsRow> rows;
  rows.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    rows.push_back({eps, delta_radius(RadiusKind::Nice, eps, in, t),
                    delta_radius(RadiusKind::Convex, eps, in, t),
                    delta_radius(RadiusKind::TraceLogDet, eps, in, t),
                    delta_radius(RadiusKind::Skc, eps, in, t),
                    k0_antennas(EstimatorKind::Nnls, eps, in, t),
                    k0_antennas(EstimatorKind::Ml, eps, in, t)});
  }
  return rows;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows) {
  csv::write_row(out, {"eps", "delta_nice", "delta_c", "delta_tld", "delta_skc", "k0_nnls", "k0_ml"});
  for (const auto& r : rows) {
    csv::write_row(out, {csv::format_double(r.eps), csv::format_double(r.delta_nice),
                         csv::format_double(r.delta_c), csv::format_double(r.delta_tld),
                         csv::format_double(r.delta_skc), csv::format_double(r.k0_nnls),
                         csv::format_double(r.k0_ml)});
  }
}

double empirical_concentration(const HpdMatrix& sigma_prime, Eigen::Index k, double xi, int trials,
                               std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::InvalidInput, "need at least one trial");
  int hits = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const CMatrix y = sample_complex_gaussian(
        sigma_prime, k, stream_seed(seed, "concentration", static_cast<std::uint64_t>(trial)));
    const double dev = frobenius_norm(sample_covariance(y) - sigma_prime.hermitian());
    if (dev <= xi) ++hits;
  }
  return static_cast<double>(hits) / trials;
}

}  // namespace covest
