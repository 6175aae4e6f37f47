#include "covest/gtuple.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "covest/errors.hpp"
#include "covest/lambert_w.hpp"

namespace covest {

GTuple trace_logdet_tuple() {
  GTuple t;
  t.g = [](double x) { return x - std::log(x); };
  t.g1 = [](double y) { return -lambert_w(LambertBranch::Principal, -std::exp(-y)); };
  t.g2 = [](double y) { return -lambert_w(LambertBranch::Lower, -std::exp(-y)); };
  t.nu = (1.0 - std::numbers::ln2) / std::numbers::ln2;
  t.eps0 = 2.0 * std::numbers::ln2 - 1.0;
  t.delta2_stable = [](double e) { return e - std::log1p(e); };
  // u = 1 - g1(1 + e) solves h(u) = -u - log1p(-u) = e on [0, 1).
  t.delta1_stable = [g1 = t.g1](double e) {
    if (!(e > 0.0)) return 0.0;
    if (e > 0.5) return 1.0 - g1(1.0 + e);
    double u = std::min(std::sqrt(2.0 * e), 0.9);
    for (int i = 0; i < 60; ++i) {
      const double h = -u - std::log1p(-u) - e;
      const double step = h * (1.0 - u) / u;
      u = std::clamp(u - step, 0.5 * u, 0.5 * (u + 1.0));
      if (std::abs(step) <= 1e-16 * u) break;
    }
    return u;
  };
  return t;
}

bool ConvexityReport::violates(const std::string& property) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const PropertyViolation& v) { return v.property == property; });
}

namespace {

// Unbounded growth leaves per-decade increments roughly constant (log-like)
// or growing; a function with a finite limit has increments that shrink by
// about a decade per decade.
bool grows_toward(const std::function<double(double)>& g, double edge, double factor) {
  const double inner = edge * factor;
  const double innermost = inner * factor;
  const double last = g(edge) - g(inner);
  const double previous = g(inner) - g(innermost);
  return last > 0.0 && last >= 0.5 * previous;
}

}  // namespace

ConvexityReport check_sufficiently_convex(const GTuple& t, const std::vector<double>& grid) {
  ConvexityReport report;
  auto fail = [&](const char* property, double x, std::string detail) {
    report.violations.push_back({property, x, std::move(detail)});
  };
  if (grid.size() < 3 || !std::is_sorted(grid.begin(), grid.end()) || grid.front() <= 0.0) {
    throw Error(ErrorCode::InvalidInput, "grid must be sorted, inside (0, inf), with >= 3 points");
  }
  const double g1v = t.g(1.0);
  const double scale = std::max(1.0, std::abs(g1v));
  const double slack = 1e-12 * scale;

  if (!grows_toward(t.g, grid.front(), 10.0)) fail("growth", grid.front(), "g stays bounded as x -> 0");
  if (!grows_toward(t.g, grid.back(), 0.1)) fail("growth", grid.back(), "g stays bounded as x -> inf");

  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = t.g(grid[i]);
    if (!std::isfinite(values[i])) fail("continuity", grid[i], "g is not finite");
  }

  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    if (b <= 1.0 && !(values[i] > values[i + 1])) {
      fail("decreasing", a, "g is not strictly decreasing on (0, 1]");
    }
    if (a >= 1.0 && !(values[i + 1] > values[i])) {
      fail("increasing", a, "g is not strictly increasing on [1, inf)");
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (x < 1.0 && x > 0.0) {
      const double eps = 1.0 - x;
      if (t.g(1.0 + eps) > t.g(1.0 - eps) + slack) {
        fail("reflection", x, "g(1 + eps) > g(1 - eps)");
      }
    }
  }
  {
    std::vector<double> right;
    for (double x : grid) {
      if (x >= 1.0) right.push_back(x);
    }
    for (std::size_t i = 0; i + 2 < right.size(); ++i) {
      const double s0 = (t.g(right[i + 1]) - t.g(right[i])) / (right[i + 1] - right[i]);
      const double s1 = (t.g(right[i + 2]) - t.g(right[i + 1])) / (right[i + 2] - right[i + 1]);
      if (s1 < s0 - 1e-9 * std::max(1.0, std::abs(s0))) {
        fail("convexity", right[i + 1], "secant slopes decrease on [1, inf)");
      }
    }
  }
  {
    constexpr double h = 1e-6;
    auto deriv = [&](double x) { return (t.g(x + h) - t.g(x - h)) / (2.0 * h); };
    for (double x : grid) {
      if (std::abs(x - 1.0) > 1e-3 && x > h && deriv(x) == 0.0) {
        fail("derivative", x, "g' vanishes away from 1");
      }
      if (x < 1.0 && 1.0 - x <= t.eps0 && 1.0 - x > 1e-4) {
        const double eps = 1.0 - x;
        const double ratio = -deriv(1.0 + eps) / deriv(1.0 - eps);
        if (ratio < t.nu * (1.0 - 1e-6)) {
          fail("derivative", x, "-g'(1+eps)/g'(1-eps) = " + std::to_string(ratio) + " < nu");
        }
      }
    }
  }
  for (double x : grid) {
    const double y = t.g(x);
    if (!std::isfinite(y) || y > g1v + 700.0) continue;
    const double inv = x <= 1.0 ? t.g1(y) : t.g2(y);
    if (std::abs(t.g(inv) - y) > 1e-9 * std::max(1.0, std::abs(y))) {
      fail("inverse", x, "g1/g2 do not invert g");
    }
  }
  return report;
}

double gsum_objective(const HpdMatrix& z, const HpdMatrix& w, const GTuple& t) {
  if (z.dim() != w.dim()) throw Error(ErrorCode::InvalidInput, "dimension mismatch");
  const HpdMatrix root = hpd_sqrt(w);
  const HpdMatrix zinv = hpd_inverse(z);
  const HermitianMatrix inner(root.matrix() * zinv.matrix() * root.matrix());
  const RVector ev = eigenvalues(inner);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) acc += t.g(ev(i));
  return acc;
}

bool level_set_bound_check(const HpdMatrix& z, const HpdMatrix& w, double gamma, const GTuple& t,
                           LevelSetSide side) {
  if (z.dim() != w.dim()) throw Error(ErrorCode::InvalidInput, "dimension mismatch");
  const auto m = static_cast<double>(z.dim());
  const double g1v = t.g(1.0);
  if (gamma < m * g1v - 1e-12 * std::max(1.0, std::abs(m * g1v))) {
    throw Error(ErrorCode::EmptyLevelSet, "gamma is below M g(1)");
  }
  const double y = std::max(gamma - (m - 1.0) * g1v, g1v);
  const double lo_inv = t.g1(y);
  const double hi_inv = t.g2(y);
  const RVector ev_z = eigenvalues(z.hermitian());
  const RVector ev_w = eigenvalues(w.hermitian());
  constexpr double rel = 1e-10;

  double lower, upper;
  const RVector* bounded;
  if (side == LevelSetSide::Estimate) {
    lower = ev_w(0) / hi_inv;
    upper = ev_w(ev_w.size() - 1) / lo_inv;
    bounded = &ev_z;
  } else {
    lower = ev_z(0) * lo_inv;
    upper = ev_z(ev_z.size() - 1) * hi_inv;
    bounded = &ev_w;
  }
  for (Eigen::Index i = 0; i < bounded->size(); ++i) {
    const double l = (*bounded)(i);
    if (l < lower * (1.0 - rel) || l > upper * (1.0 + rel)) return false;
  }
  return true;
}

}  // namespace covest
