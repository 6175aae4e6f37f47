#pragma once

#include <cstdint>
#include <iosfwd>

#include "covest/channel.hpp"
#include "covest/codebook.hpp"

namespace covest {

enum class TauMethod { ExactEnumeration, Heuristic };

const char* to_string(TauMethod method);

/// Result of computing
///   tau' = inf ||B (z' - x')||_2 / ||z' - x'||_1
/// over z' >= 0 and S-sparse x' >= 0 with z' != x'.
struct SkcReport {
  int order = 0;
  double tau_prime = 0.0;
  RVector witness_z;
  RVector witness_x;
  TauMethod method = TauMethod::ExactEnumeration;
};

struct HeuristicOptions {
  int random_starts = 8;
  int max_pg_iterations = 20000;
  std::uint64_t seed = 0;
};

/// Exact enumeration visits every admissible negative pattern and solves the
/// simplex-constrained least-squares subproblem with a minimum-norm-point
/// method. It refuses with TooLarge when C(N, S) * 2^S exceeds 10^7.
SkcReport tau_prime(const StackedRealMatrix& b, int order, TauMethod method,
                    const HeuristicOptions& heuristic = {});

/// tau' > tol.
bool skc_holds(const StackedRealMatrix& b, int order, double tol,
               TauMethod method = TauMethod::ExactEnumeration);

/// Unit-norm fading vector from the witness x'. Throws NoAdversary if x' = 0.
FadingVector adversarial_fading(const SkcReport& report);

/// Minimum-norm point of the convex hull of the columns of `points`, given
/// through their Gram matrix. Returns the squared norm and fills the convex
/// weights.
double min_norm_point(const RMatrix& gram, RVector& weights);

/// Plain-text `key = value` serialization.
void write_skc_report(std::ostream& out, const SkcReport& report);
SkcReport read_skc_report(std::istream& in);

}  // namespace covest
