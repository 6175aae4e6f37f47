#include "covest/codebook.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "covest/csv.hpp"
#include "covest/errors.hpp"
#include "covest/rng.hpp"

namespace covest {

namespace {

constexpr int kMaxPrimeIndex = 10000;

// The 10^4-th prime is 104729.
const std::vector<std::uint64_t>& prime_table() {
  static const std::vector<std::uint64_t> table = [] {
    constexpr std::size_t limit = 105000;
    std::vector<bool> composite(limit + 1, false);
    std::vector<std::uint64_t> primes;
    primes.reserve(kMaxPrimeIndex);
    for (std::size_t i = 2; i <= limit && primes.size() < kMaxPrimeIndex; ++i) {
      if (composite[i]) continue;
      primes.push_back(i);
      for (std::size_t j = i * i; j <= limit; j += i) composite[j] = true;
    }
    return primes;
  }();
  return table;
}

}  // namespace

std::uint64_t nth_prime(int k) {
  if (k < 1 || k > kMaxPrimeIndex) {
    throw Error(ErrorCode::InvalidInput, "prime index must lie in [1, 10000]");
  }
  return prime_table()[static_cast<std::size_t>(k - 1)];
}

Codebook::Codebook(CMatrix columns) : a_(std::move(columns)) {
  if (a_.rows() < 1 || a_.cols() < 1) {
    throw Error(ErrorCode::InvalidInput, "codebook needs M >= 1 and N >= 1");
  }
  if (!a_.allFinite()) throw Error(ErrorCode::InvalidInput, "codebook has non-finite entries");
  for (Eigen::Index n = 0; n < a_.cols(); ++n) {
    if (a_.col(n).squaredNorm() == 0.0) {
      throw Error(ErrorCode::InvalidInput, "codebook column " + std::to_string(n + 1) + " is zero");
    }
  }
}

Codebook build_deterministic_codebook(int m, int n) {
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidInput, "M and N must be positive");
  const long long msq = static_cast<long long>(m) * m;
  const long long n_shift = std::max(msq - n, 0LL);
  const double denom = static_cast<double>(n + n_shift + 1 - msq);
  const double top_prime = static_cast<double>(nth_prime(m + 1));
  CMatrix a(m, n);
  for (int row = 1; row <= m; ++row) {
    const double freq = std::sqrt(static_cast<double>(nth_prime(row)) / top_prime);
    const double amplitude = 1.0 / std::sqrt(static_cast<double>(row));
    for (int col = 1; col <= n; ++col) {
      const double phase = freq * std::numbers::pi / denom * static_cast<double>(col - 1 + n_shift);
      a(row - 1, col - 1) = std::polar(amplitude, phase);
    }
  }
  return Codebook(std::move(a));
}

Codebook build_gaussian_codebook(int m, int n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw Error(ErrorCode::InvalidInput, "M and N must be positive");
  Rng rng = make_rng(seed, "codebook");
  const double s = std::sqrt(0.5);
  CMatrix a(m, n);
  for (int col = 0; col < n; ++col) {
    for (int row = 0; row < m; ++row) {
      const double re = standard_normal(rng);
      const double im = standard_normal(rng);
      a(row, col) = Complex(s * re, s * im);
    }
  }
  return Codebook(std::move(a));
}

RVector vectorize_hermitian(const HermitianMatrix& h) {
  const Eigen::Index m = h.dim();
  RVector v(2 * m * m);
  for (Eigen::Index c = 0; c < m; ++c) {
    for (Eigen::Index r = 0; r < m; ++r) {
      v(c * m + r) = h(r, c).real();
      v(m * m + c * m + r) = h(r, c).imag();
    }
  }
  return v;
}

HermitianMatrix MeasurementOperator::apply(const RVector& z) const {
  if (z.size() != users()) {
    throw Error(ErrorCode::InvalidInput, "coefficient vector length does not match N");
  }
  if (!z.allFinite()) throw Error(ErrorCode::InvalidInput, "coefficient vector is not finite");
  const CMatrix& a = codebook_.matrix();
  return HermitianMatrix(a * z.cast<Complex>().asDiagonal() * a.adjoint());
}

RVector MeasurementOperator::adjoint_apply(const HermitianMatrix& h) const {
  if (h.dim() != pilot_length()) {
    throw Error(ErrorCode::InvalidInput, "matrix dimension does not match pilot length");
  }
  const CMatrix& a = codebook_.matrix();
  const CMatrix ha = h.matrix() * a;
  RVector out(users());
  for (Eigen::Index n = 0; n < users(); ++n) out(n) = a.col(n).dot(ha.col(n)).real();
  return out;
}

StackedRealMatrix MeasurementOperator::vectorize_real() const {
  const Eigen::Index m = pilot_length();
  RMatrix b(2 * m * m, users());
  for (Eigen::Index n = 0; n < users(); ++n) {
    const auto col = codebook_.column(n);
    const CMatrix outer = col * col.adjoint();
    for (Eigen::Index c = 0; c < m; ++c) {
      for (Eigen::Index r = 0; r < m; ++r) {
        b(c * m + r, n) = outer(r, c).real();
        b(m * m + c * m + r, n) = outer(r, c).imag();
      }
    }
  }
  return {std::move(b)};
}

void write_codebook_csv(std::ostream& out, const Codebook& codebook) {
  csv::write_row(out, {"m", "n", "re", "im"});
  const CMatrix& a = codebook.matrix();
  for (Eigen::Index n = 0; n < a.cols(); ++n) {
    for (Eigen::Index m = 0; m < a.rows(); ++m) {
      csv::write_row(out, {std::to_string(m + 1), std::to_string(n + 1),
                           csv::format_double(a(m, n).real()), csv::format_double(a(m, n).imag())});
    }
  }
}

Codebook read_codebook_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const std::size_t mi = t.column("m"), ni = t.column("n"), re = t.column("re"),
                    im = t.column("im");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& r : t.rows) {
    rows = std::max<Eigen::Index>(rows, csv::parse_index(r[mi]));
    cols = std::max<Eigen::Index>(cols, csv::parse_index(r[ni]));
  }
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows * cols) != t.rows.size()) {
    throw Error(ErrorCode::IoError, "codebook CSV is not a dense M x N listing");
  }
  CMatrix a(rows, cols);
  for (const auto& r : t.rows) {
    a(csv::parse_index(r[mi]) - 1, csv::parse_index(r[ni]) - 1) =
        Complex(csv::parse_double(r[re]), csv::parse_double(r[im]));
  }
  return Codebook(std::move(a));
}

void save_codebook(const std::string& path, const Codebook& codebook) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_codebook_csv(out, codebook);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_codebook_csv(in);
}

}  // namespace covest
