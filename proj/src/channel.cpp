#include "covest/channel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "covest/csv.hpp"
#include "covest/errors.hpp"
#include "covest/rng.hpp"

namespace covest {

FadingVector::FadingVector(RVector values, Eigen::Index sparsity)
    : x_(std::move(values)), s_(sparsity) {
  if (!x_.allFinite()) throw Error(ErrorCode::InvalidInput, "fading vector is not finite");
  if ((x_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidInput, "fading coefficients must be nonnegative");
  }
  const auto nnz = (x_.array() != 0.0).count();
  if (nnz > s_) {
    throw Error(ErrorCode::InvalidInput, "fading vector has " + std::to_string(nnz) +
                                             " nonzeros, sparsity is " + std::to_string(s_));
  }
}

namespace {

CMatrix standard_complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double s = std::sqrt(0.5);
  CMatrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = standard_normal(rng);
      const double im = standard_normal(rng);
      g(i, j) = Complex(s * re, s * im);
    }
  }
  return g;
}

}  // namespace

CMatrix sample_complex_gaussian(const HpdMatrix& sigma, Eigen::Index k, std::uint64_t seed,
                                const std::string& stream) {
  if (k < 1) throw Error(ErrorCode::InvalidInput, "need K >= 1 samples");
  Rng rng = make_rng(seed, stream);
  const CMatrix g = standard_complex_gaussian(sigma.dim(), k, rng);
  Eigen::LLT<CMatrix> llt(sigma.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "covariance factorization failed");
  }
  return llt.matrixL() * g;
}

ChannelRealization simulate_measurements(const Codebook& a, const FadingVector& x,
                                         const HpdMatrix& sigma, Eigen::Index k,
                                         std::uint64_t seed) {
  if (x.size() != a.users()) throw Error(ErrorCode::InvalidInput, "x length does not match N");
  if (sigma.dim() != a.pilot_length()) {
    throw Error(ErrorCode::InvalidInput, "noise covariance dimension does not match M");
  }
  if (k < 1) throw Error(ErrorCode::InvalidInput, "need K >= 1 antennas");
  ChannelRealization r;
  Rng rng = make_rng(seed, "channel");
  r.h = standard_complex_gaussian(a.users(), k, rng);
  r.e = sample_complex_gaussian(sigma, k, seed, "noise");
  const RVector amp = x.values().cwiseSqrt();
  r.y = a.matrix() * amp.cast<Complex>().asDiagonal() * r.h + r.e;
  return r;
}

HermitianMatrix sample_covariance(const CMatrix& y) {
  if (y.cols() < 1) throw Error(ErrorCode::InvalidInput, "need K >= 1 columns");
  return HermitianMatrix(y * y.adjoint() / static_cast<double>(y.cols()));
}

PerturbedObservation perturb_hermitian(const HermitianMatrix& w0, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0)) throw Error(ErrorCode::InvalidInput, "perturbation magnitude must be >= 0");
  const Eigen::Index m = w0.dim();
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = make_rng(seed, "perturbation", attempt);
    CMatrix n(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const double re = standard_normal(rng);
        const double im = standard_normal(rng);
        n(i, j) = Complex(re, im);
      }
    }
    const HermitianMatrix sym(n + n.adjoint());
    const double norm = operator_norm_2to2(sym);
    if (norm == 0.0) continue;
    return {w0 + sym * (rho / norm), rho};
  }
}

FadingVector draw_sparse_fading(Eigen::Index n, Eigen::Index s, std::uint64_t seed) {
  if (s < 1 || s > n) throw Error(ErrorCode::InvalidInput, "need 1 <= S <= N");
  Rng rng = make_rng(seed, "fading");
  // Partial Fisher-Yates on explicit uniform draws keeps the support law
  // independent of the standard library's distribution implementations.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto span = static_cast<std::uint64_t>(n - i);
    const auto j = i + static_cast<Eigen::Index>(rng() % span);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  RVector x = RVector::Zero(n);
  for (Eigen::Index i = 0; i < s; ++i) {
    double g = 0.0;
    while (g == 0.0) g = std::abs(standard_normal(rng));
    x(idx[static_cast<std::size_t>(i)]) = g;
  }
  x /= x.norm();
  return FadingVector(std::move(x), s);
}

void save_realization_csv(const std::string& dir, const std::string& stem,
                          const ChannelRealization& r) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::pair<const char*, const CMatrix*> parts[] = {{"Y", &r.y}, {"H", &r.h}, {"E", &r.e}};
  for (const auto& [name, mat] : parts) {
    const fs::path path = fs::path(dir) / (stem + "_" + name + ".csv");
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    csv::write_complex_matrix(out, *mat);
  }
}

}  // namespace covest
