#ifndef BILARX_PROX_HPP
#define BILARX_PROX_HPP

#include "bilarx/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace bilarx {

/// Thin singular value decomposition M = U diag(s) V^T with r = min(rows, cols).
struct ThinSvd {
  Matrix left_vectors;     // rows x r, orthonormal columns
  Vector singular_values;  // non-increasing, non-negative
  Matrix right_vectors;    // cols x r, orthonormal columns

  Matrix reconstruct() const {
    return left_vectors * singular_values.asDiagonal() * right_vectors.transpose();
  }
};

namespace detail {

/// Fills the columns listed in `slots` so that all columns of `basis` are
/// orthonormal, by Gram-Schmidt over the coordinate axes.
inline void complete_orthonormal(Matrix& basis, const std::vector<Eigen::Index>& slots) {
  std::vector<Eigen::Index> have;
  for (Eigen::Index j = 0; j < basis.cols(); ++j)
    if (std::find(slots.begin(), slots.end(), j) == slots.end()) have.push_back(j);
  const Eigen::Index n = basis.rows();
  for (Eigen::Index slot : slots) {
    Vector best;
    double best_norm = -1.0;
    for (Eigen::Index e = 0; e < n; ++e) {
      Vector v = Vector::Unit(n, e);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j : have) v -= basis.col(j).dot(v) * basis.col(j);
      const double nv = v.norm();
      if (nv > best_norm + 1e-12) {
        best_norm = nv;
        best = v;
      }
    }
    basis.col(slot) = best / best_norm;
    have.push_back(slot);
  }
}

}  // namespace detail

/// Thin SVD by one-sided (Hestenes) Jacobi rotations. The rotations are the
/// cyclic Jacobi eigen-rotations of the Gram matrix M^T M applied implicitly
/// to the columns of M, so small singular values keep full relative accuracy.
///
/// Sign convention: the largest-magnitude entry of every right singular vector
/// is positive. Left vectors of zero singular values are an orthonormal
/// completion.
inline ThinSvd thin_svd(const Matrix& m) {
  detail::require(m.rows() >= 1 && m.cols() >= 1, "thin_svd: empty matrix");
  detail::require(m.allFinite(), "thin_svd: matrix has non-finite entries");
  if (m.rows() < m.cols()) {
    ThinSvd t = thin_svd(m.transpose());
    // M^T = U S V^T  =>  M = V S U^T; re-impose the sign convention on the new right vectors.
    ThinSvd out{std::move(t.right_vectors), std::move(t.singular_values),
                std::move(t.left_vectors)};
    for (Eigen::Index j = 0; j < out.right_vectors.cols(); ++j) {
      Eigen::Index idx = 0;
      out.right_vectors.col(j).cwiseAbs().maxCoeff(&idx);
      if (out.right_vectors(idx, j) < 0) {
        out.right_vectors.col(j) *= -1.0;
        out.left_vectors.col(j) *= -1.0;
      }
    }
    return out;
  }

  const Eigen::Index rows = m.rows();
  const Eigen::Index n = m.cols();
  Matrix w = m;
  Matrix v = Matrix::Identity(n, n);
  constexpr int kMaxSweeps = 50;
  constexpr double kTol = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = w.col(p).squaredNorm();
        const double beta = w.col(q).squaredNorm();
        const double gamma = w.col(p).dot(w.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < rows; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (Eigen::Index j = 0; j < n; ++j) sigma(j) = w.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sigma(a) > sigma(b); });

  ThinSvd out;
  out.left_vectors = Matrix::Zero(rows, n);
  out.singular_values = Vector::Zero(n);
  out.right_vectors = Matrix::Zero(n, n);
  const double floor =
      static_cast<double>(rows) * std::numeric_limits<double>::epsilon() * sigma(order[0]);
  std::vector<Eigen::Index> missing;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.singular_values(j) = sigma(src);
    out.right_vectors.col(j) = v.col(src);
    if (sigma(src) > floor && sigma(src) > 0.0)
      out.left_vectors.col(j) = w.col(src) / sigma(src);
    else
      missing.push_back(j);
  }
  if (!missing.empty()) detail::complete_orthonormal(out.left_vectors, missing);

  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index idx = 0;
    out.right_vectors.col(j).cwiseAbs().maxCoeff(&idx);
    if (out.right_vectors(idx, j) < 0) {
      out.right_vectors.col(j) *= -1.0;
      out.left_vectors.col(j) *= -1.0;
    }
  }
  return out;
}

inline double nuclear_norm(const Matrix& m) { return thin_svd(m).singular_values.sum(); }

/// Singular value thresholding: the proximal map of tau * ||.||_*.
inline Matrix svt(const Matrix& m, double tau) {
  detail::require(tau >= 0.0, "svt: tau must be non-negative");
  const ThinSvd d = thin_svd(m);
  const Vector shrunk = (d.singular_values.array() - tau).cwiseMax(0.0).matrix();
  return d.left_vectors * shrunk.asDiagonal() * d.right_vectors.transpose();
}

/// Row-wise block soft thresholding: the proximal map of kappa * ||.||_{2,1}.
inline Matrix row_group_shrink(const Matrix& m, double kappa) {
  detail::require(kappa >= 0.0, "row_group_shrink: kappa must be non-negative");
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    const double scale = norm > 0.0 ? std::max(1.0 - kappa / norm, 0.0) : 0.0;
    out.row(i) *= scale;
  }
  return out;
}

/// Sum over rows of the row 2-norms.
inline double group_norm_21(const Matrix& m) { return m.rowwise().norm().sum(); }

/// Componentwise projection onto [-bound, bound].
inline Vector box_clip(const Vector& v, double bound) {
  detail::require(bound >= 0.0, "box_clip: bound must be non-negative");
  return v.cwiseMax(-bound).cwiseMin(bound);
}

/// Consecutive row differences D(i,:) = M(i,:) - M(i+1,:).
inline Matrix row_diff(const Matrix& m) {
  detail::require(m.rows() >= 2, "row_diff: need at least 2 rows, got " + std::to_string(m.rows()));
  return m.topRows(m.rows() - 1) - m.bottomRows(m.rows() - 1);
}

/// Adjoint of row_diff: maps (N-1) x n_b to N x n_b.
inline Matrix row_diff_adjoint(const Matrix& d) {
  Matrix out = Matrix::Zero(d.rows() + 1, d.cols());
  out.topRows(d.rows()) += d;
  out.bottomRows(d.rows()) -= d;
  return out;
}

}  // namespace bilarx

#endif  // BILARX_PROX_HPP
