#include "covest/lambert_w.hpp"

#include <cmath>
#include <numbers>

#include "covest/errors.hpp"

namespace covest {

namespace {

constexpr double kInvE = 0.36787944117144232159552377016146;  // 1/e
constexpr int kMaxIterations = 50;

// Series about the branch point in p = +-sqrt(2 (e y + 1)).
double branch_point_seed(double p) {
  return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
}

double halley(double w, double y) {
  for (int i = 0; i < kMaxIterations; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - y;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    if (denom == 0.0 || !std::isfinite(denom)) break;
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace

double lambert_w(LambertBranch branch, double y) {
  if (std::isnan(y)) throw Error(ErrorCode::DomainError, "Lambert W of NaN");
  const double shifted = std::numbers::e * y + 1.0;
  if (shifted < 0.0 && shifted > -1e-15) {
    // Round-off at the branch point itself.
    return -1.0;
  }
  if (y < -kInvE && shifted < 0.0) {
    throw Error(ErrorCode::DomainError, "Lambert W needs y >= -1/e");
  }
  if (shifted == 0.0) return -1.0;

  if (branch == LambertBranch::Principal) {
    if (y == 0.0) return 0.0;
    double w;
    if (shifted < 0.3) {
      w = branch_point_seed(std::sqrt(2.0 * shifted));
    } else if (y < 3.0) {
      w = std::log1p(y);
      if (y > 0.0) w *= 0.8;
    } else {
      const double l1 = std::log(y);
      const double l2 = std::log(l1);
      w = l1 - l2 + l2 / l1;
    }
    return halley(w, y);
  }

  if (!(y < 0.0)) throw Error(ErrorCode::DomainError, "lower Lambert W branch needs y < 0");
  double w;
  if (shifted < 0.3) {
    w = branch_point_seed(-std::sqrt(2.0 * shifted));
  } else {
    const double l1 = std::log(-y);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  }
  return halley(w, y);
}

}  // namespace covest
