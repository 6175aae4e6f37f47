#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "covest/bounds.hpp"
#include "covest/errors.hpp"
#include "test_util.hpp"

using namespace covest;

namespace {

BoundInputs sample_inputs() {
  BoundInputs in;
  in.lambda_min = 0.02;
  in.lambda_max = 1.7;
  in.beta = 0.01;
  in.eta = 1.0;
  in.tau = 0.004;
  in.dim = 4;
  in.p = 0.9;
  in.c = 1.0;
  in.sup_diag = 0.6;
  return in;
}

// Inverse branches of x - ln x by bisection, independent of Lambert W.
double g(double x) { return x - std::log(x); }
double g1_bisect(double y) {
  double lo = 1e-300, hi = 1.0;
  for (int i = 0; i < 2000 && hi - lo > 1e-17; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}
double g2_bisect(double y) {
  double lo = 1.0, hi = 2.0 * y + 10.0;
  for (int i = 0; i < 2000 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double convex_radius_oracle(double eps, const BoundInputs& in) {
  const double m = in.dim;
  const double r = std::sqrt((in.lambda_min - in.beta) / (in.lambda_max + in.beta));
  const double q = g1_bisect(1.0 + in.eta) / g2_bisect(1.0 + in.eta);
  const double nu = (1.0 - std::numbers::ln2) / std::numbers::ln2;
  const double eps0 = std::log(4.0) - 1.0;
  const double terms[] = {nu / (2.0 * m) * (in.lambda_min / in.lambda_max) * r * r * q * eps,
                          eps / 2.0,
                          eps0 * m * in.lambda_max / (q * r),
                          in.lambda_min * r * (1.0 - g1_bisect(1.0 + in.eta / m)),
                          in.lambda_min * r * (1.0 - g1_bisect(g(1.0 + eps0))),
                          in.beta};
  return *std::min_element(std::begin(terms), std::end(terms));
}

double nice_radius_oracle(double eps, const BoundInputs& in) {
  const double m = in.dim;
  const double r = std::sqrt((in.lambda_min - in.beta) / (in.lambda_max + in.beta));
  const double q = g1_bisect(1.0 + in.eta) / g2_bisect(1.0 + in.eta);
  // 1 - g1(1 + e) by bisection on -u - log1p(-u) = e, free of cancellation.
  auto d1 = [](double e) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (-mid - std::log1p(-mid) < e ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto d2 = [](double e) { return e - std::log1p(e); };
  const double terms[] = {in.lambda_min * r * d1(d2(r * q * eps / (2.0 * in.lambda_max)) / m),
                          eps / 2.0, in.lambda_min * r * d1(in.eta / m), in.beta};
  return *std::min_element(std::begin(terms), std::end(terms));
}

// Second coding of the antenna counts, written out term by term.
double k0_nnls_oracle(double m, double p, double c, double tau, double eps, double s) {
  const double log_factor = std::log(m * (m + 1.0) / (1.0 - p)) / c;
  const double quad = 512.0 * std::pow(m * s / (tau * eps), 2) / 9.0;
  const double lin = 16.0 * std::sqrt(2.0) * m * s / (3.0 * tau * eps);
  return log_factor * (quad > lin ? quad : lin);
}

std::vector<double> eps_grid() {
  std::vector<double> e;
  for (int i = 0; i <= 40; ++i) e.push_back(std::pow(10.0, -6.0 + 6.0 * i / 40.0));
  return e;
}

}  // namespace

TEST_CASE("make_bound_inputs") {
  CMatrix x = CMatrix::Zero(3, 3);
  x(0, 0) = 2.0;
  x(1, 1) = 0.5;
  x(2, 2) = 1.0;
  const BoundInputs in = make_bound_inputs(HpdMatrix(HermitianMatrix(x)), 0.3);
  CHECK(in.lambda_min == doctest::Approx(0.5));
  CHECK(in.lambda_max == doctest::Approx(2.0));
  CHECK(in.beta == doctest::Approx(0.25));
  CHECK(in.eta == 1.0);
  CHECK(in.dim == 3);
  CHECK(in.sup_diag == doctest::Approx(2.0));
  CHECK(in.tau == 0.3);
}

TEST_CASE("radii match independent codings") {
  const GTuple t = trace_logdet_tuple();
  const BoundInputs in = sample_inputs();
  for (double eps : eps_grid()) {
    CHECK(delta_radius(RadiusKind::Convex, eps, in, t) ==
          doctest::Approx(convex_radius_oracle(eps, in)).epsilon(1e-9));
    CHECK(delta_radius(RadiusKind::Nice, eps, in, t) ==
          doctest::Approx(nice_radius_oracle(eps, in)).epsilon(1e-7));
    // The Lambert W closed form equals the convex radius of the tuple.
    CHECK(delta_radius(RadiusKind::TraceLogDet, eps, in, t) ==
          doctest::Approx(delta_radius(RadiusKind::Convex, eps, in, t)).epsilon(1e-12));
    const double oc = std::min(in.lambda_min * std::sqrt((in.lambda_min - in.beta) / (in.lambda_max + in.beta)) *
                                   (1.0 - g1_bisect(1.0 + eps / in.dim)),
                               in.beta);
    CHECK(delta_radius(RadiusKind::ObjCont, eps, in, t) == doctest::Approx(oc).epsilon(1e-9));
  }
}

TEST_CASE("skc radius is the trace-log-det radius at tau eps / 2") {
  const GTuple t = trace_logdet_tuple();
  const BoundInputs in = sample_inputs();
  for (double eps : eps_grid()) {
    const double lhs = delta_radius(RadiusKind::Skc, eps, in, t);
    const double rhs = delta_radius(RadiusKind::TraceLogDet, in.tau * eps / 2.0, in, t);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * rhs);
    CHECK(lhs <= in.tau * eps / 4.0 * (1.0 + 1e-12));
  }
}

TEST_CASE("convex radius never exceeds the nice radius") {
  const GTuple t = trace_logdet_tuple();
  for (double lmin : {0.01, 0.3, 1.0}) {
    for (int m : {1, 4, 16}) {
      BoundInputs in = sample_inputs();
      in.lambda_min = lmin;
      in.lambda_max = 3.0;
      in.beta = lmin / 2.0;
      in.dim = m;
      for (double eps : eps_grid()) {
        CHECK(delta_radius(RadiusKind::Convex, eps, in, t) <=
              delta_radius(RadiusKind::Nice, eps, in, t) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("radii are nondecreasing, positive and capped at beta") {
  const GTuple t = trace_logdet_tuple();
  const BoundInputs in = sample_inputs();
  for (RadiusKind kind : {RadiusKind::Nice, RadiusKind::Convex, RadiusKind::TraceLogDet,
                          RadiusKind::Skc, RadiusKind::ObjCont}) {
    double prev = 0.0;
    for (double eps : eps_grid()) {
      const double d = delta_radius(kind, eps, in, t);
      CHECK(d > 0.0);
      CHECK(d <= in.beta);
      CHECK(d >= prev);
      prev = d;
    }
    // Beyond the linear regime the radius is flat.
    CHECK(delta_radius(kind, 1e14, in, t) == doctest::Approx(delta_radius(kind, 1e16, in, t)));
  }
  BoundInputs tight = in;
  tight.beta = 1e-6;
  for (RadiusKind kind : {RadiusKind::Nice, RadiusKind::Convex, RadiusKind::TraceLogDet,
                          RadiusKind::Skc, RadiusKind::ObjCont}) {
    CHECK(delta_radius(kind, 1e14, tight, t) == doctest::Approx(tight.beta));
  }
}

TEST_CASE("convex radius is linear near zero") {
  const GTuple t = trace_logdet_tuple();
  const BoundInputs in = sample_inputs();
  const double a = delta_radius(RadiusKind::Convex, 1e-8, in, t) / 1e-8;
  const double b = delta_radius(RadiusKind::Convex, 1e-6, in, t) / 1e-6;
  CHECK(std::abs(a - b) <= 1e-10 * a);
  const double s1 = delta_radius(RadiusKind::Skc, 2e-6, in, t);
  const double s2 = delta_radius(RadiusKind::Skc, 1e-6, in, t);
  CHECK(s2 / s1 == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("radius input validation") {
  const GTuple t = trace_logdet_tuple();
  BoundInputs in = sample_inputs();
  CHECK_THROWS_AS(delta_radius(RadiusKind::Nice, 0.0, in, t), Error);
  in.beta = in.lambda_min;
  try {
    delta_radius(RadiusKind::Convex, 0.1, in, t);
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
  }
  in = sample_inputs();
  in.tau = 0.0;
  CHECK_THROWS_AS(delta_radius(RadiusKind::Skc, 0.1, in, t), Error);
  CHECK_NOTHROW(delta_radius(RadiusKind::Convex, 0.1, in, t));
}

TEST_CASE("antenna counts") {
  const GTuple t = trace_logdet_tuple();
  SUBCASE("reference value with two codings") {
    BoundInputs in = sample_inputs();
    in.dim = 4;
    in.p = 0.9;
    in.c = 1.0;
    in.tau = 0.5;
    in.sup_diag = 1.0;
    const double k0 = k0_antennas(EstimatorKind::Nnls, 0.1, in, t);
    const double oracle = k0_nnls_oracle(4, 0.9, 1.0, 0.5, 0.1, 1.0);
    CHECK(std::abs(k0 - oracle) <= 1e-9 * oracle);
    CHECK(k0 == doctest::Approx(1.929e6).epsilon(1e-3));
  }
  SUBCASE("structure") {
    const BoundInputs in = sample_inputs();
    double prev = INFINITY;
    for (double eps : eps_grid()) {
      const double nnls = k0_antennas(EstimatorKind::Nnls, eps, in, t);
      const double ml = k0_antennas(EstimatorKind::Ml, eps, in, t);
      CHECK(nnls < prev);
      prev = nnls;
      CHECK(ml >= in.dim);
      CHECK(ml >= nnls);
    }
  }
  SUBCASE("ml floor at M") {
    BoundInputs in = sample_inputs();
    in.sup_diag = 1e-30;
    CHECK(k0_antennas(EstimatorKind::Ml, 0.1, in, t) == doctest::Approx(in.dim));
  }
  SUBCASE("invalid probability") {
    BoundInputs in = sample_inputs();
    in.p = 1.0;
    CHECK_THROWS_AS(k0_antennas(EstimatorKind::Nnls, 0.1, in, t), Error);
    in = sample_inputs();
    in.c = 0.0;
    CHECK_THROWS_AS(k0_antennas(EstimatorKind::Nnls, 0.1, in, t), Error);
  }
}

TEST_CASE("bounds table CSV") {
  const GTuple t = trace_logdet_tuple();
  const auto rows = bounds_table({0.01, 0.1}, sample_inputs(), t);
  REQUIRE(rows.size() == 2);
  std::stringstream ss;
  write_bounds_csv(ss, rows);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "eps,delta_nice,delta_c,delta_tld,delta_skc,k0_nnls,k0_ml");
  int lines = 0;
  for (std::string line; std::getline(ss, line);) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("empirical concentration") {
  const HpdMatrix id(HermitianMatrix::identity(2));
  CHECK(empirical_concentration(id, 50, 1e6, 20, 1) == 1.0);
  CHECK(empirical_concentration(id, 50, 0.0, 20, 1) == 0.0);
  CHECK(empirical_concentration(id, 10000, 0.1, 200, 3) >= 0.95);
  CHECK_THROWS_AS(empirical_concentration(id, 10, 1.0, 0, 1), Error);
}
