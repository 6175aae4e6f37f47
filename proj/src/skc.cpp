#include "covest/skc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "covest/csv.hpp"
#include "covest/errors.hpp"
#include "covest/rng.hpp"

namespace covest {

const char* to_string(TauMethod method) {
  return method == TauMethod::ExactEnumeration ? "exact-enumeration" : "heuristic";
}

namespace {

constexpr double kWitnessZero = 1e-10;
constexpr double kEnumerationBudget = 1e7;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Gram matrix of the columns of B D, D = diag(signs).
RMatrix signed_gram(const RMatrix& gram, const std::vector<double>& signs) {
  RMatrix g = gram;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      g(i, j) *= signs[static_cast<std::size_t>(i)] * signs[static_cast<std::size_t>(j)];
    }
  }
  return g;
}

SkcReport make_report(const RMatrix& b, int order, TauMethod method, const RVector& v) {
  SkcReport r;
  r.order = order;
  r.method = method;
  const Eigen::Index n = v.size();
  r.witness_z = RVector::Zero(n);
  r.witness_x = RVector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v(i) > kWitnessZero) r.witness_z(i) = v(i);
    if (v(i) < -kWitnessZero) r.witness_x(i) = -v(i);
  }
  const RVector diff = r.witness_z - r.witness_x;
  const double l1 = diff.lpNorm<1>();
  r.tau_prime = l1 > 0.0 ? (b * diff).norm() / l1 : 0.0;
  return r;
}

// Visits every subset of {0..n-1} with at most `max_size` elements, by size
// and then lexicographically.
template <typename F>
void for_each_subset(int n, int max_size, F&& visit) {
  std::vector<int> idx;
  for (int k = 0; k <= max_size; ++k) {
    idx.resize(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      visit(idx);
      int i = k - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

SkcReport exact(const RMatrix& b, int order) {
  const int n = static_cast<int>(b.cols());
  const RMatrix gram = b.transpose() * b;
  double best = std::numeric_limits<double>::infinity();
  RVector best_v;
  std::vector<double> signs(static_cast<std::size_t>(n));
  RVector weights;
  for_each_subset(n, order, [&](const std::vector<int>& negatives) {
    std::fill(signs.begin(), signs.end(), 1.0);
    for (int i : negatives) signs[static_cast<std::size_t>(i)] = -1.0;
    const double f = min_norm_point(signed_gram(gram, signs), weights);
    if (f < best) {
      best = f;
      best_v = weights;
      for (int i = 0; i < n; ++i) best_v(i) *= signs[static_cast<std::size_t>(i)];
    }
  });
  SkcReport r = make_report(b, order, TauMethod::ExactEnumeration, best_v);
  r.tau_prime = std::sqrt(std::max(best, 0.0));
  return r;
}

// Euclidean projection onto the probability simplex.
RVector project_simplex(const RVector& v) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

// Accelerated projected gradient with adaptive restart for
// min u^T G u over the simplex. Returns the objective.
double simplex_qp_pg(const RMatrix& g, double lipschitz, int max_iter, RVector& u) {
  const Eigen::Index n = g.rows();
  if (u.size() != n) u = RVector::Constant(n, 1.0 / static_cast<double>(n));
  RVector y = u, u_prev = u;
  double momentum = 1.0;
  const double step = 1.0 / (2.0 * lipschitz);
  double f = u.dot(g * u);
  for (int it = 0; it < max_iter; ++it) {
    const RVector grad = 2.0 * (g * y);
    RVector next = project_simplex(y - step * grad);
    const double f_next = next.dot(g * next);
    if (f_next > f) {
      // Restart momentum from the last iterate.
      momentum = 1.0;
      y = u;
      continue;
    }
    const double mom_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next + ((momentum - 1.0) / mom_next) * (next - u);
    u_prev = u;
    u = std::move(next);
    momentum = mom_next;
    f = f_next;
    if (it % 25 == 0) {
      const RVector gu = 2.0 * (g * u);
      const double gap = gu.dot(u) - gu.minCoeff();
      if (gap <= 1e-9 * f + 1e-15 * lipschitz) break;
    }
  }
  return f;
}

SkcReport heuristic(const RMatrix& b, int order, const HeuristicOptions& opts) {
  const int n = static_cast<int>(b.cols());
  const RMatrix gram = b.transpose() * b;
  const double lipschitz = std::max(gram.operatorNorm(), std::numeric_limits<double>::min());
  std::map<std::vector<int>, std::pair<double, RVector>> cache;

  auto evaluate = [&](std::vector<int> negatives) -> const std::pair<double, RVector>& {
    std::sort(negatives.begin(), negatives.end());
    auto it = cache.find(negatives);
    if (it != cache.end()) return it->second;
    std::vector<double> signs(static_cast<std::size_t>(n), 1.0);
    for (int i : negatives) signs[static_cast<std::size_t>(i)] = -1.0;
    RVector u;
    const double f = simplex_qp_pg(signed_gram(gram, signs), lipschitz, opts.max_pg_iterations, u);
    for (int i = 0; i < n; ++i) u(i) *= signs[static_cast<std::size_t>(i)];
    return cache.emplace(negatives, std::make_pair(f, std::move(u))).first->second;
  };

  auto improves = [](double candidate, double incumbent) {
    return candidate < incumbent - 1e-12 * std::max(incumbent, 1e-300);
  };

  auto local_search = [&](std::vector<int> current) {
    double f = evaluate(current).first;
    while (true) {
      std::vector<int> best_move = current;
      double best_f = f;
      std::vector<bool> in(static_cast<std::size_t>(n), false);
      for (int i : current) in[static_cast<std::size_t>(i)] = true;
      auto consider = [&](std::vector<int> cand) {
        const double fc = evaluate(cand).first;
        if (improves(fc, best_f)) {
          best_f = fc;
          best_move = std::move(cand);
        }
      };
      if (static_cast<int>(current.size()) < order) {
        for (int j = 0; j < n; ++j) {
          if (in[static_cast<std::size_t>(j)]) continue;
          auto cand = current;
          cand.push_back(j);
          consider(std::move(cand));
        }
      }
      for (std::size_t k = 0; k < current.size(); ++k) {
        auto removed = current;
        removed.erase(removed.begin() + static_cast<std::ptrdiff_t>(k));
        consider(removed);
        for (int j = 0; j < n; ++j) {
          if (in[static_cast<std::size_t>(j)]) continue;
          auto swapped = removed;
          swapped.push_back(j);
          consider(std::move(swapped));
        }
      }
      if (!improves(best_f, f)) break;
      current = std::move(best_move);
      std::sort(current.begin(), current.end());
      f = best_f;
    }
    return std::make_pair(f, current);
  };

  std::vector<std::vector<int>> starts;
  {
    // Greedy growth from the all-positive orthant.
    std::vector<int> greedy;
    double f = evaluate(greedy).first;
    while (static_cast<int>(greedy.size()) < order) {
      int pick = -1;
      double best_f = f;
      for (int j = 0; j < n; ++j) {
        if (std::find(greedy.begin(), greedy.end(), j) != greedy.end()) continue;
        auto cand = greedy;
        cand.push_back(j);
        const double fc = evaluate(cand).first;
        if (improves(fc, best_f)) {
          best_f = fc;
          pick = j;
        }
      }
      if (pick < 0) break;
      greedy.push_back(pick);
      f = best_f;
    }
    starts.push_back(greedy);
  }
  Rng rng = make_rng(opts.seed, "tau-heuristic");
  for (int s = 0; s < opts.random_starts && order > 0; ++s) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < order; ++i) {
      const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    starts.emplace_back(perm.begin(), perm.begin() + order);
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_set;
  for (const auto& start : starts) {
    auto [f, set] = local_search(start);
    if (f < best) {
      best = f;
      best_set = set;
    }
  }
  SkcReport r = make_report(b, order, TauMethod::Heuristic, evaluate(best_set).second);
  r.tau_prime = std::sqrt(std::max(best, 0.0));
  return r;
}

std::string join(const RVector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += csv::format_double(v(i));
  }
  return s;
}

RVector split_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  return Eigen::Map<RVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

double min_norm_point(const RMatrix& gram, RVector& weights) {
  const Eigen::Index n = gram.rows();
  if (n < 1 || gram.cols() != n) throw Error(ErrorCode::InvalidInput, "Gram matrix must be square");
  constexpr double kOptTol = 1e-12;
  constexpr double kWeightTol = 1e-15;
  const double scale = std::max(gram.diagonal().maxCoeff(), std::numeric_limits<double>::min());

  weights = RVector::Zero(n);
  Eigen::Index start = 0;
  gram.diagonal().minCoeff(&start);
  std::vector<Eigen::Index> active{start};
  weights(start) = 1.0;

  for (Eigen::Index major = 0; major < 50 * n + 50; ++major) {
    const RVector gw = gram * weights;
    const double xx = weights.dot(gw);
    Eigen::Index j = 0;
    gw.minCoeff(&j);
    if (xx - gw(j) <= kOptTol * scale) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);

    for (Eigen::Index minor = 0; minor < n + 1; ++minor) {
      const auto k = static_cast<Eigen::Index>(active.size());
      RMatrix kkt = RMatrix::Zero(k + 1, k + 1);
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index c = 0; c < k; ++c) kkt(a, c) = gram(active[a], active[c]);
        kkt(a, k) = 1.0;
        kkt(k, a) = 1.0;
      }
      RVector rhs = RVector::Zero(k + 1);
      rhs(k) = 1.0;
      const RVector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      const RVector alpha = sol.head(k);

      if ((alpha.array() > kWeightTol).all()) {
        for (Eigen::Index a = 0; a < k; ++a) weights(active[a]) = alpha(a);
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (alpha(a) <= kWeightTol) {
          const double lam = weights(active[a]);
          const double denom = lam - alpha(a);
          if (denom > 0.0) theta = std::min(theta, lam / denom);
        }
      }
      for (Eigen::Index a = 0; a < k; ++a) {
        weights(active[a]) = theta * alpha(a) + (1.0 - theta) * weights(active[a]);
      }
      // Drop at least the smallest weight so every minor cycle shrinks the set.
      Eigen::Index smallest = 0;
      for (Eigen::Index a = 1; a < k; ++a) {
        if (weights(active[a]) < weights(active[smallest])) smallest = a;
      }
      std::vector<Eigen::Index> kept;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (a != smallest && weights(active[a]) > kWeightTol) {
          kept.push_back(active[a]);
        } else {
          weights(active[a]) = 0.0;
        }
      }
      active = std::move(kept);
      if (active.empty()) {
        active.push_back(j);
        weights(j) = 1.0;
        break;
      }
      const double total = weights.sum();
      weights /= total;
    }
  }
  return std::max(0.0, weights.dot(gram * weights));
}

SkcReport tau_prime(const StackedRealMatrix& b, int order, TauMethod method,
                    const HeuristicOptions& heuristic_opts) {
  const int n = static_cast<int>(b.entries.cols());
  if (n < 1) throw Error(ErrorCode::InvalidInput, "operator has no columns");
  if (order < 0 || order > n) throw Error(ErrorCode::InvalidInput, "order must lie in [0, N]");
  if (method == TauMethod::ExactEnumeration) {
    if (binomial(n, order) * std::pow(2.0, order) > kEnumerationBudget) {
      throw Error(ErrorCode::TooLarge,
                  "exact enumeration exceeds the 1e7 subproblem budget; use the heuristic");
    }
    return exact(b.entries, order);
  }
  return heuristic(b.entries, order, heuristic_opts);
}

bool skc_holds(const StackedRealMatrix& b, int order, double tol, TauMethod method) {
  return tau_prime(b, order, method).tau_prime > tol;
}

FadingVector adversarial_fading(const SkcReport& report) {
  const double norm = report.witness_x.norm();
  if (report.witness_x.size() == 0 || norm == 0.0) {
    throw Error(ErrorCode::NoAdversary, "witness x' is zero");
  }
  return FadingVector(report.witness_x / norm, std::max<Eigen::Index>(report.order, 1));
}

void write_skc_report(std::ostream& out, const SkcReport& r) {
  out << "order = " << r.order << '\n'
      << "tau_prime = " << csv::format_double(r.tau_prime) << '\n'
      << "method = " << to_string(r.method) << '\n'
      << "witness_z = " << join(r.witness_z) << '\n'
      << "witness_x = " << join(r.witness_x) << '\n';
}

SkcReport read_skc_report(std::istream& in) {
  SkcReport r;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "order") r.order = std::stoi(value);
    else if (key == "tau_prime") r.tau_prime = std::stod(value);
    else if (key == "method") r.method = value == "heuristic" ? TauMethod::Heuristic : TauMethod::ExactEnumeration;
    else if (key == "witness_z") r.witness_z = split_vector(value);
    else if (key == "witness_x") r.witness_x = split_vector(value);
  }
  return r;
}

}  // namespace covest
