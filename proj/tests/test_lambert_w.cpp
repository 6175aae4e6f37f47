#include <doctest.h>

#include <cmath>
#include <numbers>

#include "covest/errors.hpp"
#include "covest/lambert_w.hpp"

using namespace covest;

namespace {

constexpr double kInvE = 0.36787944117144233;  // 1/e

double residual(double w, double y) {
  return std::abs(w * std::exp(w) - y) / std::max(1.0, std::abs(y));
}

}  // namespace

TEST_CASE("Lambert W special values") {
  CHECK(std::abs(lambert_w(LambertBranch::Principal, 0.0)) <= 1e-12);
  CHECK(std::abs(lambert_w(LambertBranch::Principal, -std::log(4.0) / 4.0) + std::numbers::ln2) <= 1e-12);
  CHECK(std::abs(lambert_w(LambertBranch::Lower, -kInvE) + 1.0) <= 1e-12);
  CHECK(std::abs(lambert_w(LambertBranch::Principal, -kInvE) + 1.0) <= 1e-12);
  CHECK(std::abs(lambert_w(LambertBranch::Principal, std::numbers::e) - 1.0) <= 1e-13);
  // -ln4/4 = -2 ln2 e^{-2 ln2}: the lower branch gives -2 ln2.
  CHECK(std::abs(lambert_w(LambertBranch::Lower, -std::log(4.0) / 4.0) + 2.0 * std::numbers::ln2) <= 1e-12);
}

TEST_CASE("Lambert W defining identity across both branches") {
  for (int i = 0; i < 1000; ++i) {
    const double u = (i + 0.5) / 1000.0;
    // Principal: -1/e .. 1e6 on a warped grid.
    const double y0 = -kInvE + (std::pow(10.0, 7.0 * u) - 1.0) * kInvE / 2.0;
    const double w0 = lambert_w(LambertBranch::Principal, y0);
    CHECK(residual(w0, y0) <= 1e-13);
    CHECK(w0 >= -1.0);
    // Lower: -1/e .. -1e-300.
    const double y1 = -kInvE * std::pow(10.0, -300.0 * u * u);
    const double w1 = lambert_w(LambertBranch::Lower, y1);
    CHECK(residual(w1, y1) <= 1e-13);
    CHECK(w1 <= -1.0);
  }
}

TEST_CASE("Lambert W near the branch point") {
  for (double d : {1e-16, 1e-12, 1e-8, 1e-4}) {
    const double y = -kInvE + d;
    CHECK(residual(lambert_w(LambertBranch::Principal, y), y) <= 1e-13);
    CHECK(residual(lambert_w(LambertBranch::Lower, y), y) <= 1e-13);
  }
}

TEST_CASE("Lambert W domain errors") {
  auto code_of = [](LambertBranch b, double y) {
    try {
      lambert_w(b, y);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidInput;
  };
  CHECK(code_of(LambertBranch::Principal, -0.5) == ErrorCode::DomainError);
  CHECK(code_of(LambertBranch::Lower, -0.5) == ErrorCode::DomainError);
  CHECK(code_of(LambertBranch::Lower, 0.0) == ErrorCode::DomainError);
  CHECK(code_of(LambertBranch::Lower, 1.0) == ErrorCode::DomainError);
  CHECK(code_of(LambertBranch::Principal, std::nan("")) == ErrorCode::DomainError);
}
