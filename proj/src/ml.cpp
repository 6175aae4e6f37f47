#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "covest/csv.hpp"
#include "covest/estimators.hpp"

namespace covest {

namespace {

constexpr double kZeroTol = 1e-12;

struct Fit {
  Eigen::LLT<CMatrix> llt;
  double log_det = 0.0;
};

Fit factor_fit(const MeasurementOperator& op, const HpdMatrix& sigma, const RVector& z) {
  const HermitianMatrix model = op.apply(z) + sigma.hermitian();
  Fit fit{Eigen::LLT<CMatrix>(model.matrix()), 0.0};
  if (fit.llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "A(z) + Sigma is not positive definite");
  }
  for (Eigen::Index i = 0; i < model.dim(); ++i) {
    const double d = fit.llt.matrixL()(i, i).real();
    if (!(d > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "A(z) + Sigma is singular");
    fit.log_det += 2.0 * std::log(d);
  }
  return fit;
}

HermitianMatrix fresh_inverse(const MeasurementOperator& op, const HpdMatrix& sigma,
                              const RVector& z) {
  const Fit fit = factor_fit(op, sigma, z);
  const Eigen::Index m = sigma.dim();
  return HermitianMatrix(fit.llt.solve(CMatrix::Identity(m, m)));
}

void check_shapes(const MeasurementOperator& op, const HpdMatrix& sigma, const HermitianMatrix& w) {
  if (sigma.dim() != op.pilot_length() || w.dim() != op.pilot_length()) {
    throw Error(ErrorCode::InvalidInput, "dimension mismatch between operator, Sigma and W");
  }
}

}  // namespace

double ml_objective(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z) {
  check_shapes(op, sigma, w);
  const Fit fit = factor_fit(op, sigma, z);
  return fit.llt.solve(w.matrix()).trace().real() + fit.log_det;
}

double coordinate_step(const CVector& a_n, const HermitianMatrix& sigma_prime,
                       const HermitianMatrix& w, double x_n) {
  const CVector sa = sigma_prime.matrix() * a_n;
  const double q = a_n.dot(sa).real();
  if (!(q > 0.0)) {
    throw Error(ErrorCode::StepRejected, "a_n^H Sigma' a_n is not positive; Sigma' is corrupted");
  }
  const double p = sa.dot(w.matrix() * sa).real();
  return std::max(-x_n, (p - q) / (q * q));
}

HermitianMatrix sherman_morrison_update(const HermitianMatrix& sigma_prime, const CVector& a_n,
                                        double t) {
  if (t == 0.0) return sigma_prime;
  const CVector sa = sigma_prime.matrix() * a_n;
  const double denom = 1.0 + t * a_n.dot(sa).real();
  if (!(denom > 1e-12)) {
    throw Error(ErrorCode::StepRejected, "rank-one update denominator " + std::to_string(denom) +
                                             " would destroy positive definiteness");
  }
  return HermitianMatrix(sigma_prime.matrix() - (t / denom) * sa * sa.adjoint());
}

RVector ml_gradient(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z) {
  check_shapes(op, sigma, w);
  const HermitianMatrix sp = fresh_inverse(op, sigma, z);
  const CMatrix& a = op.codebook().matrix();
  const CMatrix sa = sp.matrix() * a;
  const CMatrix wsa = w.matrix() * sa;
  RVector g(op.users());
  for (Eigen::Index n = 0; n < op.users(); ++n) {
    g(n) = a.col(n).dot(sa.col(n)).real() - sa.col(n).dot(wsa.col(n)).real();
  }
  return g;
}

double kkt_residual(const MeasurementOperator& op, const HpdMatrix& sigma,
                    const HermitianMatrix& w, const RVector& z) {
  const RVector g = ml_gradient(op, sigma, w, z);
  double worst = 0.0;
  for (Eigen::Index n = 0; n < z.size(); ++n) {
    const double v = z(n) <= kZeroTol ? std::max(0.0, -g(n)) : std::abs(g(n));
    worst = std::max(worst, v);
  }
  return worst;
}

MlTrace ml_coordinate_descent(const MeasurementOperator& op, const HpdMatrix& sigma,
                              const HermitianMatrix& w, const MlOptions& opts) {
  check_shapes(op, sigma, w);
  const Eigen::Index n_users = op.users();
  const Eigen::Index m = op.pilot_length();

  std::vector<Eigen::Index> order = opts.permutation;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(n_users));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
  }
  {
    std::vector<Eigen::Index> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    bool bijection = static_cast<Eigen::Index>(sorted.size()) == n_users;
    for (std::size_t i = 0; bijection && i < sorted.size(); ++i) {
      bijection = sorted[i] == static_cast<Eigen::Index>(i);
    }
    if (!bijection) throw Error(ErrorCode::InvalidInput, "visiting order is not a permutation");
  }

  RVector z = opts.z0.size() == 0 ? RVector::Zero(n_users) : opts.z0;
  if (z.size() != n_users) throw Error(ErrorCode::InvalidInput, "z0 length does not match N");
  if (!z.allFinite() || (z.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, "z0 must be finite and nonnegative");
  }
  if (opts.require_psd_w) {
    const double lmin = eigenvalues(w)(0);
    if (lmin < -1e-10) {
      throw Error(ErrorCode::InvalidInput,
                  "W has negative eigenvalue " + std::to_string(lmin));
    }
  }

  MlTrace trace;
  HermitianMatrix sp = fresh_inverse(op, sigma, z);
  const double f0 = ml_objective(op, sigma, w, z);
  trace.sweep_objectives.push_back(f0);
  trace.sweep_kkt.push_back(kkt_residual(op, sigma, w, z));

  const CMatrix& a = op.codebook().matrix();
  for (int sweep = 1; sweep <= opts.while_iterations; ++sweep) {
    // Sum of the exact per-update decreases t p / (1 + t q) - log(1 + t q),
    // which stays accurate long after a difference of objective values is lost to rounding.
    double improvement = 0.0;
    bool moved = false;
    for (const Eigen::Index n : order) {
      const CVector a_n = a.col(n);
      const double t = coordinate_step(a_n, sp, w, z(n));
      if (t != 0.0) {
        moved = true;
        const CVector sa = sp.matrix() * a_n;
        const double q = a_n.dot(sa).real();
        const double p = sa.dot(w.matrix() * sa).real();
        improvement += t * p / (1.0 + t * q) - std::log1p(t * q);
        try {
          sp = sherman_morrison_update(sp, a_n, t);
        } catch (const Error& e) {
          throw Error(ErrorCode::StepRejected, std::string(e.what()) + " at sweep " +
                                                   std::to_string(sweep) + ", coordinate " +
                                                   std::to_string(n + 1));
        }
        z(n) = std::max(0.0, z(n) + t);
      }
      if (opts.record_updates) {
        trace.update_steps.push_back(t);
        trace.update_objectives.push_back(ml_objective(op, sigma, w, z));
      }
    }
    if (opts.refresh_every > 0 && sweep % opts.refresh_every == 0) sp = fresh_inverse(op, sigma, z);
    const double f = ml_objective(op, sigma, w, z);
    trace.sweep_objectives.push_back(f);
    trace.sweep_kkt.push_back(kkt_residual(op, sigma, w, z));
    trace.sweeps = sweep;
    if (!moved || improvement < opts.objective_tol) break;
  }

  const HermitianMatrix model = op.apply(z) + sigma.hermitian();
  trace.inverse_drift = (sp.matrix() * model.matrix() - CMatrix::Identity(m, m)).norm();
  trace.kkt_residual = trace.sweep_kkt.back();
  trace.sigma_prime = std::move(sp);
  trace.z = std::move(z);
  return trace;
}

std::vector<Eigen::Index> support_of(const RVector& x) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0.0) s.push_back(i);
  }
  return s;
}

DetectionResult threshold_detect(const RVector& z, double eps,
                                 std::vector<Eigen::Index> true_support) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidInput, "threshold must be positive");
  DetectionResult r;
  std::sort(true_support.begin(), true_support.end());
  r.truth = std::move(true_support);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) > eps) r.threshold.push_back(i);
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(z.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index l, Eigen::Index r2) { return z(l) > z(r2); });
  const auto k = std::min(r.truth.size(), idx.size());
  r.top_k.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(r.top_k.begin(), r.top_k.end());
  return r;
}

void write_estimate_csv(std::ostream& out, const RVector& z) {
  csv::write_row(out, {"n", "z_n"});
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    csv::write_row(out, {std::to_string(i + 1), csv::format_double(z(i))});
  }
}

void write_trace_csv(std::ostream& out, const MlTrace& trace) {
  csv::write_row(out, {"sweep", "objective", "kkt_residual"});
  for (std::size_t i = 0; i < trace.sweep_objectives.size(); ++i) {
    csv::write_row(out, {std::to_string(i), csv::format_double(trace.sweep_objectives[i]),
                         csv::format_double(trace.sweep_kkt[i])});
  }
}

}  // namespace covest
