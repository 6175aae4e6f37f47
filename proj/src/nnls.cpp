#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "covest/estimators.hpp"

namespace covest {

namespace {

constexpr double kZeroTol = 1e-12;

RVector least_squares_on(const RMatrix& b, const RVector& w, const std::vector<Eigen::Index>& set) {
  RMatrix sub(b.rows(), static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = b.col(set[k]);
  return sub.colPivHouseholderQr().solve(w);
}

NnlsResult finish(const RMatrix& b, const RVector& w, RVector z, int iterations) {
  NnlsResult r;
  r.residual = (b * z - w).norm();
  r.kkt_violation = nnls_kkt_violation(b, w, z);
  r.iterations = iterations;
  r.z = std::move(z);
  return r;
}

// Lawson-Hanson active set.
NnlsResult active_set(const RMatrix& b, const RVector& w, const NnlsOptions& opts) {
  const Eigen::Index n = b.cols();
  RVector z = RVector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  const double grad_tol = 0.1 * opts.kkt_tol;
  int iter = 0;

  while (true) {
    const RVector neg_grad = b.transpose() * (w - b * z);
    Eigen::Index enter = -1;
    double best = grad_tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (!passive[ju] && !blocked[ju] && neg_grad(j) > best) {
        best = neg_grad(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    if (++iter > opts.max_iterations) {
      NnlsResult best_iterate = finish(b, w, z, iter);
      throw NnlsNotConverged(best_iterate, "active-set NNLS exceeded iteration budget");
    }
    passive[static_cast<std::size_t>(enter)] = true;

    bool rejected = false;
    for (bool first = true;; first = false) {
      std::vector<Eigen::Index> set;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)]) set.push_back(j);
      }
      const RVector s_sub = least_squares_on(b, w, set);
      RVector s = RVector::Zero(n);
      for (std::size_t k = 0; k < set.size(); ++k) s(set[k]) = s_sub(static_cast<Eigen::Index>(k));

      bool feasible = true;
      for (Eigen::Index j : set) feasible = feasible && s(j) > kZeroTol;
      if (feasible) {
        z = s;
        break;
      }
      // A freshly entered column that is immediately infeasible signals
      // round-off cycling; lock it out until the passive set changes.
      if (first && s(enter) <= kZeroTol) {
        passive[static_cast<std::size_t>(enter)] = false;
        blocked[static_cast<std::size_t>(enter)] = true;
        rejected = true;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j : set) {
        if (s(j) <= kZeroTol) {
          const double denom = z(j) - s(j);
          if (denom > 0.0) alpha = std::min(alpha, z(j) / denom);
        }
      }
      z += alpha * (s - z);
      bool removed = false;
      for (Eigen::Index j : set) {
        if (z(j) <= kZeroTol) {
          z(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
          removed = true;
        }
      }
      if (!removed) {
        // alpha hit a coordinate that was already at zero; drop the most
        // negative candidate so the inner loop always shrinks the set.
        Eigen::Index worst = set.front();
        for (Eigen::Index j : set) worst = s(j) < s(worst) ? j : worst;
        z(worst) = 0.0;
        passive[static_cast<std::size_t>(worst)] = false;
      }
      if (++iter > opts.max_iterations) {
        NnlsResult best_iterate = finish(b, w, z, iter);
        throw NnlsNotConverged(best_iterate, "active-set NNLS exceeded iteration budget");
      }
    }
    if (!rejected) std::fill(blocked.begin(), blocked.end(), false);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)]) z(j) = 0.0;
    }
  }
  return finish(b, w, std::move(z), iter);
}

// Projected gradient with Barzilai-Borwein steps and a monotone safeguard.
NnlsResult projected_gradient(const RMatrix& b, const RVector& w, const NnlsOptions& opts,
                              RVector z) {
  const Eigen::Index n = b.cols();
  const RMatrix gram = b.transpose() * b;
  const RVector btw = b.transpose() * w;
  const double lipschitz = std::max(gram.operatorNorm(), std::numeric_limits<double>::min());

  auto objective = [&](const RVector& z) { return 0.5 * (b * z - w).squaredNorm(); };
  if (z.size() != n) z = RVector::Zero(n);
  RVector grad = gram * z - btw;
  double step = 1.0 / lipschitz;
  double f = objective(z);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    if (nnls_kkt_violation(b, w, z) <= opts.kkt_tol) return finish(b, w, z, iter);
    RVector trial = (z - step * grad).cwiseMax(0.0);
    double f_trial = objective(trial);
    while (f_trial > f + 1e-14 * std::abs(f) && step > 1.0 / lipschitz) {
      step = std::max(0.5 * step, 1.0 / lipschitz);
      trial = (z - step * grad).cwiseMax(0.0);
      f_trial = objective(trial);
    }
    const RVector grad_next = gram * trial - btw;
    const RVector dz = trial - z;
    const RVector dg = grad_next - grad;
    const double curvature = dz.dot(dg);
    step = curvature > 0.0 ? dz.squaredNorm() / curvature : 1.0 / lipschitz;
    step = std::clamp(step, 1.0 / lipschitz, 1e6 / lipschitz);
    z = std::move(trial);
    grad = grad_next;
    f = f_trial;
  }
  NnlsResult best = finish(b, w, z, opts.max_iterations);
  if (best.kkt_violation <= opts.kkt_tol) return best;
  throw NnlsNotConverged(best, "projected-gradient NNLS exceeded iteration budget");
}

}  // namespace

double nnls_kkt_violation(const RMatrix& b, const RVector& w, const RVector& z) {
  const RVector grad = b.transpose() * (b * z - w);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double v = z(j) <= kZeroTol ? std::max(0.0, -grad(j)) : std::abs(grad(j));
    worst = std::max(worst, v);
  }
  return worst;
}

NnlsResult nnls_solve(const RMatrix& b, const RVector& w, const NnlsOptions& opts) {
  if (b.rows() != w.size()) throw Error(ErrorCode::InvalidInput, "NNLS dimension mismatch");
  if (!(opts.kkt_tol > 0.0)) throw Error(ErrorCode::InvalidInput, "kkt_tol must be positive");
  if (opts.method == NnlsMethod::ProjectedGradient) return projected_gradient(b, w, opts, {});
  NnlsResult r = active_set(b, w, opts);
  if (r.kkt_violation > opts.kkt_tol) {
    // Ill-conditioned passive sets can leave a small residual gradient;
    // polish from the active-set point with projected gradient steps.
    NnlsOptions pg = opts;
    pg.method = NnlsMethod::ProjectedGradient;
    try {
      NnlsResult polished = projected_gradient(b, w, pg, r.z);
      if (polished.kkt_violation < r.kkt_violation) r = std::move(polished);
    } catch (const NnlsNotConverged& e) {
      if (e.best().kkt_violation < r.kkt_violation) r = e.best();
    }
    if (r.kkt_violation > opts.kkt_tol) {
      throw NnlsNotConverged(r, "NNLS could not reach the KKT tolerance");
    }
  }
  return r;
}

NnlsResult nnls_estimate(const MeasurementOperator& op, const HpdMatrix& sigma,
                         const HermitianMatrix& w, const NnlsOptions& opts) {
  if (sigma.dim() != op.pilot_length() || w.dim() != op.pilot_length()) {
    throw Error(ErrorCode::InvalidInput, "NNLS dimension mismatch");
  }
  NnlsOptions effective = opts;
  if (op.users() > 64 && opts.method == NnlsMethod::ActiveSet) {
    effective.method = NnlsMethod::ProjectedGradient;
  }
  const StackedRealMatrix b = op.vectorize_real();
  const RVector target = vectorize_hermitian(w - sigma.hermitian());
  return nnls_solve(b.entries, target, effective);
}

}  // namespace covest
