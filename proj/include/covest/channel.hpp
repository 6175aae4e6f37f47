#pragma once

#include <cstdint>
#include <string>

#include "covest/codebook.hpp"
#include "covest/hermitian.hpp"

namespace covest {

/// Nonnegative large-scale fading coefficients with at most `sparsity`
/// nonzero entries.
class FadingVector {
 public:
  FadingVector(RVector values, Eigen::Index sparsity);

  const RVector& values() const { return x_; }
  Eigen::Index sparsity() const { return s_; }
  Eigen::Index size() const { return x_.size(); }

 private:
  RVector x_;
  Eigen::Index s_;
};

/// Y = A sqrt(diag(x)) H + E with the stored factors.
struct ChannelRealization {
  CMatrix y;
  CMatrix h;
  CMatrix e;
  Eigen::Index antennas() const { return y.cols(); }
};

struct PerturbedObservation {
  HermitianMatrix w;
  double rho = 0.0;
};

/// M x K matrix with i.i.d. CN(0, sigma) columns: Re and Im parts carry
/// covariance sigma/2 each, so E[y y^H] = sigma.
CMatrix sample_complex_gaussian(const HpdMatrix& sigma, Eigen::Index k, std::uint64_t seed,
                                const std::string& stream = "gaussian");

ChannelRealization simulate_measurements(const Codebook& a, const FadingVector& x,
                                         const HpdMatrix& sigma, Eigen::Index k,
                                         std::uint64_t seed);

/// (1/K) Y Y^H.
HermitianMatrix sample_covariance(const CMatrix& y);

/// W0 + rho * N', N' = (N + N^H) / ||N + N^H||_{2->2}, N standard complex Gaussian.
PerturbedObservation perturb_hermitian(const HermitianMatrix& w0, double rho, std::uint64_t seed);

/// Uniform size-S support, entries |g| for standard normal g, unit l2 norm.
FadingVector draw_sparse_fading(Eigen::Index n, Eigen::Index s, std::uint64_t seed);

void save_realization_csv(const std::string& dir, const std::string& stem,
                          const ChannelRealization& r);

}  // namespace covest
