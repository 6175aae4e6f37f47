#pragma once

#include <complex>

#include <Eigen/Dense>

namespace covest {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Complex M x M matrix that is exactly Hermitian. Construction symmetrizes
/// (H + H^H)/2 and zeroes the imaginary part of the diagonal, so all
/// downstream spectral formulas can rely on exact Hermitianity.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const CMatrix& entries);

  static HermitianMatrix identity(Eigen::Index dim);
  static HermitianMatrix zero(Eigen::Index dim);
  static HermitianMatrix scaled_identity(Eigen::Index dim, double scale);

  Eigen::Index dim() const { return entries_.rows(); }
  const CMatrix& matrix() const { return entries_; }
  Complex operator()(Eigen::Index row, Eigen::Index col) const { return entries_(row, col); }

  HermitianMatrix operator+(const HermitianMatrix& other) const;
  HermitianMatrix operator-(const HermitianMatrix& other) const;
  HermitianMatrix operator*(double scale) const;

 private:
  CMatrix entries_;
};

/// Ascending eigenvalues and the matching unitary eigenvector matrix.
struct EigenDecomposition {
  RVector eigenvalues;
  CMatrix eigenvectors;
};

EigenDecomposition eig_hermitian(const HermitianMatrix& h);
RVector eigenvalues(const HermitianMatrix& h);

double operator_norm_2to2(const HermitianMatrix& h);
double frobenius_norm(const HermitianMatrix& h);
/// Real Frobenius inner product Re tr(A^H B).
double frobenius_inner(const HermitianMatrix& a, const HermitianMatrix& b);

/// Positive-definiteness threshold used when wrapping a Hermitian matrix.
double hpd_tolerance(const HermitianMatrix& h);

/// Hermitian matrix with smallest eigenvalue above hpd_tolerance().
class HpdMatrix {
 public:
  /// Throws NotPositiveDefinite when the smallest eigenvalue is too small.
  explicit HpdMatrix(HermitianMatrix h);

  Eigen::Index dim() const { return h_.dim(); }
  const HermitianMatrix& hermitian() const { return h_; }
  const CMatrix& matrix() const { return h_.matrix(); }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

 private:
  HermitianMatrix h_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

HpdMatrix hpd_sqrt(const HpdMatrix& z);
HpdMatrix hpd_inverse(const HpdMatrix& z);
double log_det(const HpdMatrix& z);

/// Applies f to the spectrum: V diag(f(lambda)) V^H.
template <typename F>
HermitianMatrix spectral_map(const HermitianMatrix& h, F&& f) {
  const EigenDecomposition ed = eig_hermitian(h);
  RVector mapped(ed.eigenvalues.size());
  for (Eigen::Index i = 0; i < mapped.size(); ++i) mapped(i) = f(ed.eigenvalues(i));
  return HermitianMatrix(ed.eigenvectors * mapped.cast<Complex>().asDiagonal() *
                         ed.eigenvectors.adjoint());
}

}  // namespace covest
