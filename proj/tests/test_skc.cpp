#include <doctest.h>

#include <cmath>
#include <sstream>

#include "covest/bounds.hpp"
#include "covest/channel.hpp"
#include "covest/errors.hpp"
#include "covest/estimators.hpp"
#include "covest/skc.hpp"
#include "test_util.hpp"

using namespace covest;

namespace {

// Minimum-norm point of a convex hull by checking every face: the affine
// minimizer on each subset, kept when its weights are nonnegative.
double min_norm_oracle(const RMatrix& points) {
  const auto n = static_cast<int>(points.cols());
  double best = INFINITY;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<Eigen::Index> idx;
    for (int j = 0; j < n; ++j) {
      if (mask & (1 << j)) idx.push_back(j);
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    RMatrix kkt = RMatrix::Zero(k + 1, k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = points.col(idx[a]).dot(points.col(idx[b]));
      kkt(a, k) = kkt(k, a) = 1.0;
    }
    RVector rhs = RVector::Zero(k + 1);
    rhs(k) = 1.0;
    const RVector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((sol.head(k).array() < -1e-12).any() || std::abs(sol.head(k).sum() - 1.0) > 1e-9) continue;
    RVector p = RVector::Zero(points.rows());
    for (Eigen::Index a = 0; a < k; ++a) p += sol(a) * points.col(idx[a]);
    best = std::min(best, p.squaredNorm());
  }
  return best;
}

StackedRealMatrix stacked(const Codebook& cb) { return MeasurementOperator(cb).vectorize_real(); }

}  // namespace

TEST_CASE("min_norm_point") {
  RMatrix pts(2, 2);
  pts << 1, 0, 0, 1;
  RVector w;
  CHECK(min_norm_point(pts.transpose() * pts, w) == doctest::Approx(0.5));
  CHECK(w(0) == doctest::Approx(0.5));
  CHECK(w(1) == doctest::Approx(0.5));

  Rng rng = make_rng(1, "mnp");
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index dim = 2 + trial % 5;
    const Eigen::Index n = 1 + trial % 7;
    RMatrix p(dim, n);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = standard_normal(rng) + (trial % 3 == 0 ? 1.5 : 0.0);
    const double got = min_norm_point(p.transpose() * p, w);
    CHECK(std::abs(got - min_norm_oracle(p)) <= 1e-10 * std::max(1.0, p.squaredNorm()));
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    CHECK((w.array() >= 0.0).all());
    CHECK(std::abs((p * w).squaredNorm() - got) <= 1e-10 * std::max(1.0, got));
  }
  CHECK_THROWS_AS(min_norm_point(RMatrix(2, 3), w), Error);
}

TEST_CASE("tau' of a single column is its squared norm") {
  CMatrix a(3, 1);
  a << Complex(1, 1), 2.0, Complex(0, -0.5);
  const StackedRealMatrix b = stacked(Codebook(a));
  for (int s : {0, 1}) {
    const SkcReport r = tau_prime(b, s, TauMethod::ExactEnumeration);
    CHECK(r.tau_prime == doctest::Approx(a.col(0).squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("duplicated columns violate the signed kernel condition") {
  CMatrix a(2, 3);
  a << 1.0, 1.0, Complex(0, 1), Complex(0.5, 0.5), Complex(0.5, 0.5), 2.0;
  const StackedRealMatrix b = stacked(Codebook(a));
  const SkcReport r = tau_prime(b, 1, TauMethod::ExactEnumeration);
  CHECK(r.tau_prime <= 1e-10);
  CHECK_FALSE(skc_holds(b, 1, 1e-6));
  // The witness pair sits on the two copies, one on each side.
  CHECK((r.witness_z.array() > 0.0).count() == 1);
  CHECK((r.witness_x.array() > 0.0).count() == 1);
  CHECK(r.witness_z(2) == 0.0);
  CHECK(r.witness_x(2) == 0.0);
  CHECK(r.witness_z.dot(r.witness_x) == 0.0);
  CHECK(r.witness_z.sum() == doctest::Approx(r.witness_x.sum()));
}

TEST_CASE("deterministic codebook M = 2, N = 4 has the condition of order 1") {
  const StackedRealMatrix b = stacked(build_deterministic_codebook(2, 4));
  CHECK(skc_holds(b, 1, 1e-6));
}

TEST_CASE("verified Gaussian codebook M = 4, N = 17 has threshold S0 = 7") {
  const StackedRealMatrix b = stacked(build_gaussian_codebook(4, 17, 1));
  double prev = INFINITY;
  for (int s = 1; s <= 7; ++s) {
    const SkcReport r = tau_prime(b, s, TauMethod::ExactEnumeration);
    CHECK(r.tau_prime > 1e-3);
    CHECK(r.tau_prime <= prev * (1.0 + 1e-9));
    prev = r.tau_prime;
    // Witness ratio reproduces tau'.
    const RVector v = r.witness_z - r.witness_x;
    CHECK((b.entries * v).norm() / v.lpNorm<1>() == doctest::Approx(r.tau_prime).epsilon(1e-6));
    CHECK((r.witness_x.array() > 0.0).count() <= s);
    CHECK((r.witness_z.array() >= 0.0).all());

    // The adversarial vector is still recovered from exact observations.
    const FadingVector x = adversarial_fading(r);
    CHECK(x.values().norm() == doctest::Approx(1.0));
    CHECK(x.sparsity() == s);
    const MeasurementOperator op(build_gaussian_codebook(4, 17, 1));
    const HpdMatrix sigma(HermitianMatrix::scaled_identity(4, 1e-4));
    const NnlsResult est = nnls_estimate(op, sigma, op.apply(x.values()) + sigma.hermitian());
    CHECK((est.z - x.values()).norm() <= 1e-3);
  }
  CHECK(tau_prime(b, 8, TauMethod::ExactEnumeration).tau_prime < 1e-6);
  CHECK(skc_holds(b, 7, 1e-6));
  CHECK_FALSE(skc_holds(b, 8, 1e-6));
}

TEST_CASE("exact enumeration and heuristic agree on small instances") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int n = 5 + static_cast<int>(seed % 4);  // 5..8 users, 8 real dimensions
    const StackedRealMatrix b = stacked(build_gaussian_codebook(2, n, 500 + seed));
    for (int s = 1; s <= 3; ++s) {
      HeuristicOptions h;
      h.seed = seed;
      const double exact = tau_prime(b, s, TauMethod::ExactEnumeration).tau_prime;
      const double heur = tau_prime(b, s, TauMethod::Heuristic, h).tau_prime;
      CHECK(std::abs(exact - heur) <= 1e-4 * std::max(exact, 1e-4));
    }
  }
}

TEST_CASE("tau' input validation") {
  const StackedRealMatrix b = stacked(build_gaussian_codebook(6, 40, 1));
  try {
    tau_prime(b, 10, TauMethod::ExactEnumeration);
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
  CHECK_THROWS_AS(tau_prime(b, -1, TauMethod::ExactEnumeration), Error);
  CHECK_THROWS_AS(tau_prime(b, 41, TauMethod::ExactEnumeration), Error);
}

TEST_CASE("adversarial_fading") {
  SkcReport r;
  r.order = 1;
  r.witness_x = RVector::Unit(3, 0);
  r.witness_z = RVector::Unit(3, 1);
  CHECK(adversarial_fading(r).values() == RVector::Unit(3, 0));
  r.witness_x = RVector::Zero(3);
  try {
    adversarial_fading(r);
    FAIL("expected NoAdversary");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoAdversary);
  }
}

TEST_CASE("SKC report round trip") {
  const SkcReport r = tau_prime(stacked(build_gaussian_codebook(2, 6, 3)), 2, TauMethod::ExactEnumeration);
  std::stringstream ss;
  write_skc_report(ss, r);
  const SkcReport back = read_skc_report(ss);
  CHECK(back.order == r.order);
  CHECK(back.tau_prime == r.tau_prime);
  CHECK(back.method == r.method);
  CHECK(back.witness_x == r.witness_x);
  CHECK(back.witness_z == r.witness_z);
}

TEST_CASE("robustness guarantees with the computed tau'") {
  const Codebook cb = build_gaussian_codebook(4, 17, 1);
  const MeasurementOperator op(cb);
  const HpdMatrix sigma(HermitianMatrix::scaled_identity(4, 1e-4));
  const double tau = tau_prime(op.vectorize_real(), 7, TauMethod::ExactEnumeration).tau_prime;
  const GTuple t = trace_logdet_tuple();
  for (int trial = 0; trial < 20; ++trial) {
    const RVector x = draw_sparse_fading(17, 7, 900 + static_cast<std::uint64_t>(trial)).values();
    const HermitianMatrix w0 = op.apply(x) + sigma.hermitian();

    // NNLS stability: ||x - z|| <= (2 / tau') ||W - A(x) - Sigma||_F.
    const HermitianMatrix w = perturb_hermitian(w0, 1e-3 * (1 + trial), static_cast<std::uint64_t>(trial)).w;
    const RVector z = nnls_estimate(op, sigma, w).z;
    CHECK((x - z).norm() <= 2.0 / tau * frobenius_norm(w - w0));

    // Relaxed ML inside the skc radius stays within eps.
    const double eps = 0.1;
    const BoundInputs in = make_bound_inputs(HpdMatrix(w0), tau);
    const double delta = delta_radius(RadiusKind::Skc, eps, in, t);
    const HermitianMatrix wd = perturb_hermitian(w0, delta, 50 + static_cast<std::uint64_t>(trial)).w;
    MlOptions opts;
    opts.z0 = nnls_estimate(op, sigma, wd).z;
    opts.while_iterations = 1000;
    opts.objective_tol = 0.0;
    const MlTrace ml = ml_coordinate_descent(op, sigma, wd, opts);
    CHECK(ml.kkt_residual <= 1e-8);
    CHECK((x - ml.z).norm() <= eps);
  }
}
