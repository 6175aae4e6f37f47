#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "covest/hermitian.hpp"

namespace covest {

/// k-th prime, 1-based (nth_prime(1) == 2). Valid for 1 <= k <= 10^4.
std::uint64_t nth_prime(int k);

/// Pilot codebook: M x N complex matrix whose columns a_n are the user pilots.
class Codebook {
 public:
  /// Throws InvalidInput on empty shape, non-finite entries or a zero column.
  explicit Codebook(CMatrix columns);

  Eigen::Index pilot_length() const { return a_.rows(); }
  Eigen::Index users() const { return a_.cols(); }
  const CMatrix& matrix() const { return a_; }
  auto column(Eigen::Index n) const { return a_.col(n); }

 private:
  CMatrix a_;
};

/// Deterministic construction with entries m^{-1/2} exp(i * phase(m, n)),
/// phases driven by ratios of primes.
Codebook build_deterministic_codebook(int m, int n);

/// i.i.d. circularly-symmetric complex Gaussian entries with E|a|^2 = 1.
Codebook build_gaussian_codebook(int m, int n, std::uint64_t seed);

/// Real 2M^2 x N matrix: rows (Re B; Im B) where column n of B is the
/// column-major flattening of a_n a_n^H.
struct StackedRealMatrix {
  RMatrix entries;
};

/// Column-major real flattening (Re vec; Im vec) of a Hermitian matrix,
/// matching the row layout of StackedRealMatrix.
RVector vectorize_hermitian(const HermitianMatrix& h);

/// z -> sum_n z_n a_n a_n^H.
class MeasurementOperator {
 public:
  explicit MeasurementOperator(Codebook codebook) : codebook_(std::move(codebook)) {}

  const Codebook& codebook() const { return codebook_; }
  Eigen::Index pilot_length() const { return codebook_.pilot_length(); }
  Eigen::Index users() const { return codebook_.users(); }

  HermitianMatrix apply(const RVector& z) const;
  /// Component n is Re(a_n^H H a_n).
  RVector adjoint_apply(const HermitianMatrix& h) const;
  StackedRealMatrix vectorize_real() const;

 private:
  Codebook codebook_;
};

// CSV with header `m,n,re,im` (1-based indices, 17 significant digits).
void write_codebook_csv(std::ostream& out, const Codebook& codebook);
Codebook read_codebook_csv(std::istream& in);
void save_codebook(const std::string& path, const Codebook& codebook);
Codebook load_codebook(const std::string& path);

}  // namespace covest
