#pragma once

#include <functional>
#include <string>
#include <vector>

#include "covest/hermitian.hpp"

namespace covest {

/// Spectral penalty g on (0, inf) with inverse branches g1 on (0, 1] and g2
/// on [1, inf), plus the constants nu and eps0 that drive the linear
/// robustness radius.
struct GTuple {
  std::function<double(double)> g;
  std::function<double(double)> g1;
  std::function<double(double)> g2;
  double nu = 0.0;
  double eps0 = 0.0;

  /// Optional cancellation-free forms of delta1 and delta2. When empty the
  /// definitions below are evaluated directly, which loses all precision
  /// once eps is near machine epsilon relative to g(1).
  std::function<double(double)> delta1_stable;
  std::function<double(double)> delta2_stable;

  double g_at_one() const { return g(1.0); }
  /// 1 - g1(g(1) + eps)
  double delta1(double eps) const {
    return delta1_stable ? delta1_stable(eps) : 1.0 - g1(g(1.0) + eps);
  }
  /// g(1 + eps) - g(1)
  double delta2(double eps) const {
    return delta2_stable ? delta2_stable(eps) : g(1.0 + eps) - g(1.0);
  }
};

/// g(x) = x - ln x, g1(y) = -W_0(-e^{-y}), g2(y) = -W_{-1}(-e^{-y}),
/// nu = (1 - ln 2) / ln 2, eps0 = ln 4 - 1.
GTuple trace_logdet_tuple();

struct PropertyViolation {
  std::string property;
  double x = 0.0;
  std::string detail;
};

struct ConvexityReport {
  std::vector<PropertyViolation> violations;
  bool passed() const { return violations.empty(); }
  bool violates(const std::string& property) const;
};

/// Grid-based check of every sufficiently-convex property: growth at both
/// ends, continuity, strict monotonicity on each side of 1, the reflection
/// inequality g(1+e) <= g(1-e), convexity on [1, inf), the derivative-ratio
/// bound with nu, and that g1/g2 invert g. The grid must be sorted in (0, inf).
ConvexityReport check_sufficiently_convex(const GTuple& t, const std::vector<double>& grid);

/// sum_m g(lambda_m(W^{1/2} Z^{-1} W^{1/2})).
double gsum_objective(const HpdMatrix& z, const HpdMatrix& w, const GTuple& t);

enum class LevelSetSide {
  /// Bounds on the eigenvalues of Z given W.
  Estimate,
  /// Bounds on the eigenvalues of W given Z.
  Observation,
};

/// Eigenvalue sandwich for members of {Z : gsum_objective(Z, W) <= gamma}.
/// Throws EmptyLevelSet for gamma < M g(1).
bool level_set_bound_check(const HpdMatrix& z, const HpdMatrix& w, double gamma, const GTuple& t,
                           LevelSetSide side = LevelSetSide::Estimate);

}  // namespace covest
