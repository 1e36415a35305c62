#ifndef BILARX_EXTRACT_HPP
#define BILARX_EXTRACT_HPP

#include "bilarx/core.hpp"
#include "bilarx/prox.hpp"

#include <string>
#include <vector>

namespace bilarx {

/// Best rank-1 factorization of a (possibly multi-block) lifted matrix.
/// The pair (u, b) is only determined up to a common scalar; the convention
/// ||b||_2 = 1 with positive largest-magnitude entry puts all magnitude in u.
struct Rank1Factors {
  std::vector<Vector> u;   // one per block
  Vector b;                // unit norm
  Vector singular_values;  // of the row-stacked matrix
  double rank_gap = 0.0;   // sigma_2 / sigma_1
};

/// Input estimates, coefficient estimates and the rank-1 certificate.
struct FactoredModel {
  std::vector<Vector> u_est;
  Vector b_est;
  Vector a_est;
  double rank_gap = 0.0;
  bool scale_note = true;  // (u, b) known only up to a multiplicative scalar
};

inline Rank1Factors factor_rank1(const std::vector<Matrix>& x_blocks) {
  detail::require(!x_blocks.empty(), "factor_rank1: no blocks");
  const Eigen::Index cols = x_blocks.front().cols();
  Eigen::Index rows = 0;
  for (const auto& b : x_blocks) {
    detail::require(b.cols() == cols, "factor_rank1: blocks differ in column count");
    rows += b.rows();
  }
  Matrix stacked(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : x_blocks) {
    stacked.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  if (stacked.cwiseAbs().maxCoeff() == 0.0)
    throw NoIdentifiableComponent(
        "lifted matrix is identically zero; no rank-1 component (lambda or epsilon too large)");

  const ThinSvd d = thin_svd(stacked);
  Rank1Factors f;
  f.singular_values = d.singular_values;
  f.b = d.right_vectors.col(0);
  f.rank_gap = d.singular_values.size() > 1 ? d.singular_values(1) / d.singular_values(0) : 0.0;
  for (const auto& block : x_blocks) f.u.push_back(block * f.b);
  return f;
}

/// Ascending 1-based indices i with |u(i) - u(i+1)| > gamma.
inline std::vector<int> change_points(const Vector& u, double gamma) {
  detail::require(u.size() >= 2, "change_points: need at least 2 samples");
  detail::require(gamma >= 0.0, "change_points: gamma must be non-negative");
  std::vector<int> out;
  for (Eigen::Index i = 0; i + 1 < u.size(); ++i)
    if (std::abs(u(i) - u(i + 1)) > gamma) out.push_back(static_cast<int>(i + 1));
  return out;
}

/// Delta u(i) = u(i) - u(i+1), i = 1..N-1.
inline Vector input_differences(const Vector& u) {
  detail::require(u.size() >= 2, "input_differences: need at least 2 samples");
  return u.head(u.size() - 1) - u.tail(u.size() - 1);
}

}  // namespace bilarx

#endif  // BILARX_EXTRACT_HPP
