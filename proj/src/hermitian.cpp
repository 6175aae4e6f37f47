#include "covest/hermitian.hpp"

#include <algorithm>
#include <cmath>

#include "covest/errors.hpp"

namespace covest {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NoAdversary: return "NoAdversary";
    case ErrorCode::EmptyLevelSet: return "EmptyLevelSet";
    case ErrorCode::SetupFailed: return "SetupFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

HermitianMatrix::HermitianMatrix(const CMatrix& entries) {
  if (entries.rows() != entries.cols() || entries.rows() < 1) {
    throw Error(ErrorCode::InvalidInput, "Hermitian matrix must be square with dim >= 1");
  }
  if (!entries.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "Hermitian matrix has non-finite entries");
  }
  entries_ = 0.5 * (entries + entries.adjoint());
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) entries_(i, i) = entries_(i, i).real();
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  return HermitianMatrix(CMatrix::Identity(dim, dim));
}

HermitianMatrix HermitianMatrix::zero(Eigen::Index dim) {
  return HermitianMatrix(CMatrix::Zero(dim, dim));
}

HermitianMatrix HermitianMatrix::scaled_identity(Eigen::Index dim, double scale) {
  return HermitianMatrix(CMatrix::Identity(dim, dim) * scale);
}

HermitianMatrix HermitianMatrix::operator+(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw Error(ErrorCode::InvalidInput, "dimension mismatch in +");
  return HermitianMatrix(entries_ + other.entries_);
}

HermitianMatrix HermitianMatrix::operator-(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw Error(ErrorCode::InvalidInput, "dimension mismatch in -");
  return HermitianMatrix(entries_ - other.entries_);
}

HermitianMatrix HermitianMatrix::operator*(double scale) const {
  return HermitianMatrix(entries_ * scale);
}

EigenDecomposition eig_hermitian(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "Hermitian eigensolver failed");
  }
  // Eigen returns eigenvalues in increasing order already.
  return {solver.eigenvalues(), solver.eigenvectors()};
}

RVector eigenvalues(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "Hermitian eigensolver failed");
  }
  return solver.eigenvalues();
}

double operator_norm_2to2(const HermitianMatrix& h) {
  const RVector ev = eigenvalues(h);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double frobenius_norm(const HermitianMatrix& h) { return h.matrix().norm(); }

double frobenius_inner(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::InvalidInput, "dimension mismatch in inner");
  return (a.matrix().adjoint() * b.matrix()).trace().real();
}

double hpd_tolerance(const HermitianMatrix& h) {
  return 1e-12 * std::max(1.0, operator_norm_2to2(h));
}

HpdMatrix::HpdMatrix(HermitianMatrix h) : h_(std::move(h)) {
  const RVector ev = eigenvalues(h_);
  lambda_min_ = ev(0);
  lambda_max_ = ev(ev.size() - 1);
  const double tol = 1e-12 * std::max(std::abs(lambda_min_), std::abs(lambda_max_));
  if (!(lambda_min_ > tol)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "smallest eigenvalue " + std::to_string(lambda_min_) + " is not above " +
                    std::to_string(tol));
  }
}

HpdMatrix hpd_sqrt(const HpdMatrix& z) {
  return HpdMatrix(spectral_map(z.hermitian(), [](double l) { return std::sqrt(l); }));
}

HpdMatrix hpd_inverse(const HpdMatrix& z) {
  Eigen::LLT<CMatrix> llt(z.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  const Eigen::Index m = z.dim();
  return HpdMatrix(HermitianMatrix(llt.solve(CMatrix::Identity(m, m))));
}

double log_det(const HpdMatrix& z) {
  Eigen::LLT<CMatrix> llt(z.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.dim(); ++i) acc += std::log(llt.matrixL()(i, i).real());
  return 2.0 * acc;
}

}  // namespace covest
