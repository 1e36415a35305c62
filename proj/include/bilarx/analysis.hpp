#ifndef BILARX_ANALYSIS_HPP
#define BILARX_ANALYSIS_HPP

#include "bilarx/core.hpp"
#include "bilarx/problem.hpp"
#include "bilarx/prox.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace bilarx {

/// Restricted isometry summary for a linear map on n1 x n2 matrices,
/// restricted to matrices whose row differences are supported on at most k
/// interior indices (first and last differences frozen to zero).
struct RipReport {
  int k = 0;
  double rip_epsilon = 0.0;     // smallest eps with |‖A Z‖² / ‖Z‖² - 1| <= eps at level k
  double rip_epsilon_2k = 0.0;  // same at level 2k
  long long patterns_checked = 0;
  bool certified_unique = false;  // rip_epsilon_2k < 1
  double min_gain = 0.0;          // smallest ‖A Z‖² / ‖Z‖² at level k
  double max_gain = 0.0;          // largest ‖A Z‖² / ‖Z‖² at level k
};

namespace detail {

inline long long binomial(int n, int r) {
  if (r < 0 || r > n) return 0;
  long long c = 1;
  for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

/// Calls fn(pattern) for every subset of `candidates` of size lo..hi, in
/// order of size then lexicographic.
inline void for_each_pattern(const std::vector<int>& candidates, int lo, int hi,
                             const std::function<void(const std::vector<int>&)>& fn) {
  const int n = static_cast<int>(candidates.size());
  for (int size = lo; size <= std::min(hi, n); ++size) {
    std::vector<int> idx(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      std::vector<int> pattern;
      for (int i : idx) pattern.push_back(candidates[static_cast<std::size_t>(i)]);
      fn(pattern);
      int pos = size - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - size + pos) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int i = pos + 1; i < size; ++i)
        idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
}

inline long long count_patterns(int candidates, int lo, int hi) {
  long long total = 0;
  for (int s = lo; s <= std::min(hi, candidates); ++s) total += binomial(candidates, s);
  return total;
}

/// Orthonormal basis (column-major vec of n1 x n2) of the matrices whose rows
/// are constant between consecutive entries of `breaks` (1-based difference
/// indices where a change is allowed).
inline Matrix pattern_basis(int n1, int n2, const std::vector<int>& breaks) {
  std::vector<std::pair<int, int>> segs;  // [first, last] 0-based rows
  int start = 0;
  for (int b : breaks) {
    segs.emplace_back(start, b - 1);
    start = b;
  }
  segs.emplace_back(start, n1 - 1);
  Matrix basis = Matrix::Zero(static_cast<Eigen::Index>(n1) * n2,
                              static_cast<Eigen::Index>(segs.size()) * n2);
  Eigen::Index col = 0;
  for (int c = 0; c < n2; ++c)
    for (const auto& [first, last] : segs) {
      const double v = 1.0 / std::sqrt(static_cast<double>(last - first + 1));
      for (int r = first; r <= last; ++r) basis(static_cast<Eigen::Index>(c) * n1 + r, col) = v;
      ++col;
    }
  return basis;
}

inline std::vector<int> interior_differences(int n1) {
  std::vector<int> c;
  for (int i = 2; i <= n1 - 2; ++i) c.push_back(i);
  return c;
}

struct Gains {
  double lo = 0.0, hi = 0.0;
  long long patterns = 0;
};

inline Gains extreme_gains(const Matrix& op, int n1, int n2, int k, long long budget) {
  const auto candidates = interior_differences(n1);
  const long long total = count_patterns(static_cast<int>(candidates.size()), 1, k);
  if (total > budget)
    throw BudgetExceeded("RIP enumeration needs " + std::to_string(total) +
                             " patterns, budget is " + std::to_string(budget),
                         total);
  Gains g{std::numeric_limits<double>::infinity(), 0.0, 0};
  for_each_pattern(candidates, 1, k, [&](const std::vector<int>& pattern) {
    const Matrix restricted = op * pattern_basis(n1, n2, pattern);
    const Vector s = thin_svd(restricted).singular_values;
    const double hi = s(0) * s(0);
    const double lo = restricted.cols() > restricted.rows() ? 0.0 : s(s.size() - 1) * s(s.size() - 1);
    g.hi = std::max(g.hi, hi);
    g.lo = std::min(g.lo, lo);
    ++g.patterns;
  });
  return g;
}

}  // namespace detail

inline constexpr long long kDefaultPatternBudget = 200000;

/// Smallest eps such that op is (eps, k)-RIP over n1 x n2 matrices whose
/// first and last row differences vanish and whose remaining row differences
/// have at most k nonzero rows. Each support pattern spans a subspace; the
/// extreme squared singular values of op restricted to an orthonormal basis
/// of that subspace give the exact extreme gains.
inline double rip_constant(const Matrix& op, int n1, int n2, int k,
                           long long budget = kDefaultPatternBudget) {
  detail::require(k >= 1, "rip_constant: k must be positive");
  detail::require(n1 >= 4, "rip_constant: need n1 >= 4 rows");
  detail::require(n2 >= 1, "rip_constant: need n2 >= 1");
  detail::require(op.cols() == static_cast<Eigen::Index>(n1) * n2,
                  "rip_constant: operator has " + std::to_string(op.cols()) +
                      " columns, expected n1 * n2 = " + std::to_string(n1 * n2));
  const detail::Gains g = detail::extreme_gains(op, n1, n2, k, budget);
  return std::max(g.hi - 1.0, 1.0 - g.lo);
}

inline RipReport rip_report(const Matrix& op, int n1, int n2, int k,
                            long long budget = kDefaultPatternBudget) {
  detail::require(k >= 1, "rip_report: k must be positive");
  detail::require(n1 >= 4, "rip_report: need n1 >= 4 rows");
  detail::require(op.cols() == static_cast<Eigen::Index>(n1) * n2,
                  "rip_report: operator column count does not match n1 * n2");
  RipReport r;
  r.k = k;
  const detail::Gains g = detail::extreme_gains(op, n1, n2, k, budget);
  const detail::Gains g2 = detail::extreme_gains(op, n1, n2, 2 * k, budget);
  r.rip_epsilon = std::max(g.hi - 1.0, 1.0 - g.lo);
  r.rip_epsilon_2k = std::max(g2.hi - 1.0, 1.0 - g2.lo);
  r.patterns_checked = g.patterns + g2.patterns;
  r.certified_unique = r.rip_epsilon_2k < 1.0;
  r.min_gain = g.lo;
  r.max_gain = g.hi;
  return r;
}

/// True iff op is (eps, 2k)-RIP with eps < 1, which rules out a second
/// solution of b = A(Z) with at most k interior row changes.
inline bool certify_uniqueness(const Matrix& op, int n1, int n2, int k,
                               long long budget = kDefaultPatternBudget) {
  detail::require(k >= 1, "certify_uniqueness: k must be positive");
  return rip_constant(op, n1, n2, 2 * k, budget) < 1.0;
}

struct BruteForceOptions {
  double epsilon = 0.0;
  bool freeze_boundary = true;  // only interior differences 2..n1-2 may change
  long long budget = kDefaultPatternBudget;
  double rank_tol = 1e-8;       // sigma_2 <= rank_tol * sigma_1 counts as rank one
};

struct BruteForceSolution {
  Matrix z;      // n1 x n2
  Vector extra;  // coefficients of the additional free columns (e.g. a)
  int changes = 0;
};

struct BruteForceResult {
  std::vector<BruteForceSolution> solutions;  // one per scale class, at min_changes
  int min_changes = -1;                       // -1 when nothing is feasible
  long long patterns_checked = 0;
  bool ambiguous = false;  // a minimal pattern admits a continuum of X solutions

  std::size_t scale_classes() const { return solutions.size(); }
};

namespace detail {

inline int count_changes(const Matrix& z) {
  const double scale = 1.0 + z.cwiseAbs().maxCoeff();
  int c = 0;
  for (Eigen::Index i = 0; i + 1 < z.rows(); ++i)
    if ((z.row(i) - z.row(i + 1)).norm() > 1e-9 * scale) ++c;
  return c;
}

inline BruteForceResult brute_force_core(const Matrix& op_x, const Matrix& op_extra,
                                         const Vector& rhs, int n1, int n2, int k_max,
                                         const BruteForceOptions& opt) {
  detail::require(k_max >= 0, "brute_force_solve: k_max must be non-negative");
  detail::require(n1 >= 2 && n2 >= 1, "brute_force_solve: need n1 >= 2, n2 >= 1");
  detail::require(op_x.cols() == static_cast<Eigen::Index>(n1) * n2,
                  "brute_force_solve: operator column count does not match n1 * n2");
  detail::require(op_x.rows() == rhs.size() && op_extra.rows() == rhs.size(),
                  "brute_force_solve: rhs length does not match operator rows");
  std::vector<int> candidates;
  if (opt.freeze_boundary) {
    candidates = interior_differences(n1);
  } else {
    for (int i = 1; i <= n1 - 1; ++i) candidates.push_back(i);
  }
  const long long total = count_patterns(static_cast<int>(candidates.size()), 0, k_max);
  if (total > opt.budget)
    throw BudgetExceeded("brute-force enumeration needs " + std::to_string(total) +
                             " patterns, budget is " + std::to_string(opt.budget),
                         total);

  std::vector<BruteForceSolution> found;
  std::vector<int> family_sizes;  // patterns whose slice holds a continuum of X
  BruteForceResult result;
  const double rhs_scale = 1.0 + rhs.norm();

  for_each_pattern(candidates, 0, k_max, [&](const std::vector<int>& pattern) {
    ++result.patterns_checked;
    const Matrix basis = pattern_basis(n1, n2, pattern);
    Matrix k(rhs.size(), basis.cols() + op_extra.cols());
    k << op_x * basis, op_extra;

    Vector c;
    bool feasible = false;
    if (opt.epsilon > 0.0 && rhs.cwiseAbs().maxCoeff() <= opt.epsilon) {
      c = Vector::Zero(k.cols());
      feasible = true;
    } else {
      const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(k);
      c = cod.solve(rhs);
      const Vector r = k * c - rhs;
      feasible = opt.epsilon > 0.0 ? r.cwiseAbs().maxCoeff() <= opt.epsilon * (1.0 + 1e-12)
                                   : r.norm() <= 1e-9 * rhs_scale;
    }
    if (!feasible) return;

    bool family = false;
    if (opt.epsilon == 0.0) {
      const Eigen::FullPivLU<Matrix> lu(k);
      const Matrix kernel = lu.kernel();
      if (lu.rank() < k.cols()) {
        const Matrix kx = basis * kernel.topRows(basis.cols());
        family = kx.norm() > 1e-9 * kernel.norm();
      }
    }

    if (family) family_sizes.push_back(static_cast<int>(pattern.size()));
    const Vector zvec = basis * c.head(basis.cols());
    const Matrix z = Eigen::Map<const Matrix>(zvec.data(), n1, n2);
    if (n2 > 1 && z.cwiseAbs().maxCoeff() > 0.0) {
      const Vector s = thin_svd(z).singular_values;
      if (s(1) > opt.rank_tol * s(0)) return;
    }
    found.push_back({z, c.tail(op_extra.cols()), count_changes(z)});
  });

  if (found.empty()) {
    result.ambiguous = !family_sizes.empty();
    return result;
  }
  int best = found.front().changes;
  for (const auto& f : found) best = std::min(best, f.changes);
  result.min_changes = best;
  for (int size : family_sizes)
    if (size <= best) result.ambiguous = true;
  for (const auto& f : found) {
    if (f.changes != best) continue;
    const Vector v = Eigen::Map<const Vector>(f.z.data(), f.z.size());
    bool duplicate = false;
    for (const auto& s : result.solutions) {
      const Vector w = Eigen::Map<const Vector>(s.z.data(), s.z.size());
      const double nv = v.norm(), nw = w.norm();
      if (nv == 0.0 && nw == 0.0) {
        duplicate = true;
      } else if (nv > 0.0 && nw > 0.0 && std::abs(v.dot(w)) >= (1.0 - 1e-9) * nv * nw) {
        duplicate = true;
      }
      if (duplicate) break;
    }
    if (!duplicate) result.solutions.push_back(f);
  }
  return result;
}

}  // namespace detail

/// Exhaustive search for rank-one Z with at most k_max row changes and
/// b = A(Z) (epsilon = 0) or |A(Z) - b| <= epsilon. For epsilon > 0 each
/// pattern is tested with the zero point and the least-squares point, which
/// is sufficient but not necessary for feasibility of the slice.
inline BruteForceResult brute_force_solve(const Matrix& op, const Vector& rhs, int n1, int n2,
                                          int k_max, const BruteForceOptions& options = {}) {
  return detail::brute_force_core(op, Matrix(op.rows(), 0), rhs, n1, n2, k_max, options);
}

/// Brute-force solve of the combinatorial lifted program for a single-sequence
/// problem: X and a free, row changes of X anywhere in 1..N-1.
inline BruteForceResult brute_force_solve(const ProblemSpec& spec, int k_max,
                                          BruteForceOptions options = {}) {
  detail::require(spec.num_sequences() == 1, "brute_force_solve: single-sequence problems only");
  const int n1 = spec.length(0);
  const int n2 = spec.orders().n_b;
  detail::require(n1 <= 14 && n2 <= 2 && k_max <= 3,
                  "brute_force_solve: instance exceeds the combinatorial limits (N <= 14, n_b <= 2, k <= 3)");
  const LiftedOperator op = build_lifted_operator(spec);
  options.freeze_boundary = false;
  options.epsilon = spec.epsilon();
  return detail::brute_force_core(op.x_part(0), op.matrix.rightCols(spec.orders().n_a), op.rhs,
                                  n1, n2, k_max, options);
}

}  // namespace bilarx

#endif  // BILARX_ANALYSIS_HPP
