#ifndef BILARX_SOLVER_HPP
#define BILARX_SOLVER_HPP

#include "bilarx/core.hpp"
#include "bilarx/extract.hpp"
#include "bilarx/problem.hpp"
#include "bilarx/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace bilarx {

struct SolverOptions {
  double rho = 1.0;               // initial augmented-Lagrangian penalty
  int max_iters = 5000;
  double tol_primal = 1e-7;       // relative
  double tol_dual = 1e-7;         // relative
  double over_relaxation = 1.6;   // in [1, 1.9]
  bool adaptive_rho = true;       // residual balancing

  void validate() const {
    detail::require(rho > 0.0, "rho must be positive");
    detail::require(max_iters > 0, "max_iters must be positive");
    detail::require(tol_primal > 0.0 && tol_dual > 0.0, "tolerances must be positive");
    detail::require(over_relaxation >= 1.0 && over_relaxation <= 1.9,
                    "over_relaxation must lie in [1, 1.9]");
  }
};

struct SolverDiagnostics {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
  double final_rho = 0.0;
};

struct BilSolution {
  LiftedVariables vars;
  double lambda = 0.0;
  double objective = 0.0;   // ||X||_* + lambda * sum_j ||row_diff X_j||_{2,1}
  Vector singular_values;   // of the row-stacked X
  std::vector<Vector> u_est;
  std::optional<Vector> b_est;  // absent when X = 0
  Vector a_est;
  double rank_gap = 0.0;
  SolverDiagnostics diagnostics;

  FactoredModel model() const {
    return {u_est, b_est.value_or(Vector()), a_est, rank_gap, true};
  }
};

/// Feasibility slack granted on top of epsilon: 1e-6 * (1 + max |y|).
inline double feasibility_tolerance(const ProblemSpec& spec) {
  return 1e-6 * (1.0 + spec.max_abs_output());
}

/// ||X||_* of the row-stacked blocks plus lambda times the per-block
/// row-difference (2,1)-norms.
inline double bil_objective(const std::vector<Matrix>& x_blocks, double lambda) {
  LiftedVariables tmp;
  tmp.x_blocks = x_blocks;
  double obj = nuclear_norm(tmp.stacked_x());
  if (lambda > 0.0)
    for (const auto& x : x_blocks)
      if (x.rows() >= 2) obj += lambda * group_norm_21(row_diff(x));
  return obj;
}

namespace detail {

/// Runs of rows of one X block that are forced equal.
struct Segment {
  Eigen::Index start = 0;  // 0-based first row
  Eigen::Index length = 1;
};

inline std::vector<Segment> segments_from_freeze(int rows, const std::set<int>& frozen) {
  std::vector<Segment> segs;
  Segment cur{0, 1};
  for (int i = 1; i < rows; ++i) {  // boundary between 1-based rows i and i+1
    if (frozen.count(i) != 0) {
      ++cur.length;
    } else {
      segs.push_back(cur);
      cur = Segment{i, 1};
    }
  }
  segs.push_back(cur);
  return segs;
}

/// Two-block ADMM for
///   min (1/s) (||X||_* + lambda sum_j ||D X_j||_{2,1})
///   s.t. A(X, a) + w = y,  |w| <= epsilon,  X rows equal within each segment,
/// with s = max(1, lambda). X is parametrized by one value per (segment,
/// column), which removes the row-equality constraints. The first block is
/// theta = (segment values, a); the second is (Z1 = X, Z2 = segment
/// differences, w), updated by svt, row_group_shrink and box_clip.
class AdmmCore {
 public:
  AdmmCore(const ProblemSpec& spec, std::vector<std::vector<Segment>> segments, double lambda)
      : spec_(spec), segments_(std::move(segments)), lambda_(lambda) {
    const auto& o = spec.orders();
    nb_ = o.n_b;
    na_ = o.n_a;
    const LiftedOperator op = build_lifted_operator(spec);
    rhs_ = op.rhs;

    Eigen::Index off = 0;
    Eigen::Index xrow = 0;
    Eigen::Index brow = 0;
    for (std::size_t j = 0; j < segments_.size(); ++j) {
      theta_offset_.push_back(off);
      xrow_offset_.push_back(xrow);
      boundary_offset_.push_back(brow);
      const auto ns = static_cast<Eigen::Index>(segments_[j].size());
      off += ns * nb_;
      xrow += spec.length(j);
      brow += ns - 1;
    }
    a_offset_ = off;
    dim_ = off + na_;
    total_rows_ = xrow;
    boundary_rows_ = brow;

    // A restricted to the segment parametrization: sum of the X columns of each segment.
    reduced_ = Matrix::Zero(op.matrix.rows(), dim_);
    for (std::size_t j = 0; j < segments_.size(); ++j) {
      const Eigen::Index nj = spec.length(j);
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s < segments_[j].size(); ++s) {
          const auto& seg = segments_[j][s];
          auto dst = reduced_.col(theta_index(j, k, static_cast<Eigen::Index>(s)));
          for (Eigen::Index r = seg.start; r < seg.start + seg.length; ++r)
            dst += op.matrix.col(op.block_offset[j] + k * nj + r);
        }
    }
    if (na_ > 0) reduced_.rightCols(na_) = op.matrix.rightCols(na_);

    const double scale = std::max(1.0, lambda_);
    w_nuc_ = 1.0 / scale;
    w_grp_ = lambda_ / scale;
    // Each consensus block is penalized in proportion to its objective weight,
    // so both prox thresholds equal 1/rho regardless of lambda.
    k1_ = w_nuc_;
    k2_ = use_group() ? w_grp_ : 1.0;
    // Normal matrix T^T T + G^T G + A~^T A~ + delta I_a; independent of rho.
    Matrix normal = reduced_.transpose() * reduced_;
    for (std::size_t j = 0; j < segments_.size(); ++j)
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s < segments_[j].size(); ++s) {
          const Eigen::Index i = theta_index(j, k, static_cast<Eigen::Index>(s));
          normal(i, i) += k1_ * static_cast<double>(segments_[j][s].length);
          if (use_group() && s + 1 < segments_[j].size()) {
            const Eigen::Index i2 = i + 1;
            normal(i, i) += k2_;
            normal(i2, i2) += k2_;
            normal(i, i2) -= k2_;
            normal(i2, i) -= k2_;
          }
        }
    // Proximal term on a keeps the system definite when the lagged outputs are degenerate.
    delta_ = na_ > 0 ? 1e-10 * std::max(1.0, normal.diagonal().maxCoeff()) : 0.0;
    for (Eigen::Index k = 0; k < na_; ++k) normal(a_offset_ + k, a_offset_ + k) += delta_;
    factor_.compute(normal);
  }

  BilSolution run(const SolverOptions& options) {
    options.validate();
    const double eps = spec_.epsilon();
    const double alpha = options.over_relaxation;
    const Eigen::Index m = rhs_.size();

    Vector theta = Vector::Zero(dim_);
    Matrix z1 = Matrix::Zero(total_rows_, nb_), u1 = z1;
    Matrix z2 = Matrix::Zero(use_group() ? boundary_rows_ : 0, nb_), u2 = z2;
    // Slack starts at its projection of y, so X = 0, a = 0 is a fixed point when |y| <= epsilon.
    Vector w = box_clip(rhs_, eps), u3 = Vector::Zero(m);
    double rho = options.rho;

    SolverDiagnostics diag;
    int last_adapt = 0;
    constexpr int kAdaptEvery = 25;
    constexpr int kAdaptUntil = 4000;
    constexpr double kBalance = 10.0;
    constexpr double kFactor = 2.0;
    constexpr double kRhoRange = 1e6;

    for (int it = 1; it <= options.max_iters; ++it) {
      // theta-update.
      Vector rhs_theta = k1_ * expand_adjoint(z1 - u1) + reduced_.transpose() * (rhs_ - w - u3);
      if (use_group()) rhs_theta += k2_ * diff_adjoint(z2 - u2);
      if (na_ > 0) rhs_theta.tail(na_) += delta_ * theta.tail(na_);
      theta = factor_.solve(rhs_theta);

      const Matrix x = expand(theta);
      const Matrix gx = use_group() ? diff(theta) : Matrix(0, nb_);
      const Vector ax = reduced_ * theta;

      const Matrix h1 = alpha * x + (1.0 - alpha) * z1;
      const Matrix h2 = use_group() ? Matrix(alpha * gx + (1.0 - alpha) * z2) : Matrix(0, nb_);
      const Vector h3 = alpha * ax + (1.0 - alpha) * (rhs_ - w);

      // z-update.
      const Matrix z1_old = z1, z2_old = z2;
      const Vector w_old = w;
      z1 = svt(h1 + u1, w_nuc_ / (rho * k1_));
      if (use_group()) z2 = row_group_shrink(h2 + u2, w_grp_ / (rho * k2_));
      w = box_clip(rhs_ - h3 - u3, eps);

      // Dual update.
      u1 += h1 - z1;
      if (use_group()) u2 += h2 - z2;
      u3 += h3 + w - rhs_;

      // Residuals.
      const double r_norm = std::sqrt((x - z1).squaredNorm() + (gx - z2).squaredNorm() +
                                      (ax + w - rhs_).squaredNorm());
      Vector dual = k1_ * expand_adjoint(z1 - z1_old) - reduced_.transpose() * (w - w_old);
      if (use_group()) dual += k2_ * diff_adjoint(z2 - z2_old);
      const double s_norm = rho * dual.norm();

      const double ax_norm = std::sqrt(x.squaredNorm() + gx.squaredNorm() + ax.squaredNorm());
      const double bz_norm = std::sqrt(z1.squaredNorm() + z2.squaredNorm() + w.squaredNorm());
      const double eps_pri = options.tol_primal * std::max({ax_norm, bz_norm, rhs_.norm()});
      // The theta-block carries no objective, so A^T y -> 0 at the optimum;
      // scale by the largest individual dual term instead.
      double dual_scale = std::max(k1_ * expand_adjoint(u1).norm(), (reduced_.transpose() * u3).norm());
      if (use_group()) dual_scale = std::max(dual_scale, k2_ * diff_adjoint(u2).norm());
      const double eps_dual = options.tol_dual * rho * dual_scale;

      diag.iterations = it;
      diag.primal_residual = r_norm;
      diag.dual_residual = s_norm;
      if (r_norm <= eps_pri && s_norm <= eps_dual) {
        diag.converged = true;
        break;
      }

      if (options.adaptive_rho && it - last_adapt >= kAdaptEvery && it <= kAdaptUntil) {
        const double rel_r = r_norm / std::max(eps_pri, std::numeric_limits<double>::min());
        const double rel_s = s_norm / std::max(eps_dual, std::numeric_limits<double>::min());
        double factor = 1.0;
        if (rel_r > kBalance * rel_s)
          factor = kFactor;
        else if (rel_s > kBalance * rel_r)
          factor = 1.0 / kFactor;
        if (rho * factor > kRhoRange * options.rho || rho * factor < options.rho / kRhoRange)
          factor = 1.0;
        if (factor != 1.0) {
          rho *= factor;
          u1 /= factor;
          u2 /= factor;
          u3 /= factor;
          last_adapt = it;
        }
      }
    }
    diag.final_rho = rho;

    BilSolution sol;
    sol.lambda = lambda_;
    sol.diagnostics = diag;
    const Matrix x = expand(theta);
    Eigen::Index wrow = 0;
    for (std::size_t j = 0; j < segments_.size(); ++j) {
      sol.vars.x_blocks.push_back(x.middleRows(xrow_offset_[j], spec_.length(j)));
      const Eigen::Index mj = spec_.num_constraints(j);
      sol.vars.w_blocks.push_back(w.segment(wrow, mj));
      wrow += mj;
    }
    sol.vars.a = theta.tail(na_);
    sol.objective = bil_objective(sol.vars.x_blocks, lambda_);
    sol.a_est = sol.vars.a;
    try {
      Rank1Factors f = factor_rank1(sol.vars.x_blocks);
      sol.singular_values = f.singular_values;
      sol.u_est = std::move(f.u);
      sol.b_est = f.b;
      sol.rank_gap = f.rank_gap;
    } catch (const NoIdentifiableComponent&) {
      sol.singular_values = Vector::Zero(nb_);
      for (std::size_t j = 0; j < segments_.size(); ++j)
        sol.u_est.push_back(Vector::Zero(spec_.length(j)));
      sol.rank_gap = 0.0;
    }
    return sol;
  }

 private:
  bool use_group() const { return lambda_ > 0.0 && boundary_rows_ > 0; }

  Eigen::Index theta_index(std::size_t j, Eigen::Index k, Eigen::Index s) const {
    return theta_offset_[j] + k * static_cast<Eigen::Index>(segments_[j].size()) + s;
  }

  /// theta -> row-stacked X.
  Matrix expand(const Vector& theta) const {
    Matrix x(total_rows_, nb_);
    for (std::size_t j = 0; j < segments_.size(); ++j)
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s < segments_[j].size(); ++s) {
          const auto& seg = segments_[j][s];
          x.block(xrow_offset_[j] + seg.start, k, seg.length, 1).setConstant(
              theta(theta_index(j, k, static_cast<Eigen::Index>(s))));
        }
    return x;
  }

  /// Adjoint of expand (segment row sums); a-part zero.
  Vector expand_adjoint(const Matrix& x) const {
    Vector out = Vector::Zero(dim_);
    for (std::size_t j = 0; j < segments_.size(); ++j)
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s < segments_[j].size(); ++s) {
          const auto& seg = segments_[j][s];
          out(theta_index(j, k, static_cast<Eigen::Index>(s))) =
              x.block(xrow_offset_[j] + seg.start, k, seg.length, 1).sum();
        }
    return out;
  }

  /// theta -> differences of consecutive segment values (the only nonzero
  /// rows of row_diff X), stacked over blocks.
  Matrix diff(const Vector& theta) const {
    Matrix d(boundary_rows_, nb_);
    for (std::size_t j = 0; j < segments_.size(); ++j)
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s + 1 < segments_[j].size(); ++s) {
          const Eigen::Index i = theta_index(j, k, static_cast<Eigen::Index>(s));
          d(boundary_offset_[j] + static_cast<Eigen::Index>(s), k) = theta(i) - theta(i + 1);
        }
    return d;
  }

  Vector diff_adjoint(const Matrix& d) const {
    Vector out = Vector::Zero(dim_);
    for (std::size_t j = 0; j < segments_.size(); ++j)
      for (Eigen::Index k = 0; k < nb_; ++k)
        for (std::size_t s = 0; s + 1 < segments_[j].size(); ++s) {
          const Eigen::Index i = theta_index(j, k, static_cast<Eigen::Index>(s));
          const double v = d(boundary_offset_[j] + static_cast<Eigen::Index>(s), k);
          out(i) += v;
          out(i + 1) -= v;
        }
    return out;
  }

  const ProblemSpec& spec_;
  std::vector<std::vector<Segment>> segments_;
  double lambda_ = 0.0;
  Eigen::Index nb_ = 1;
  Eigen::Index na_ = 0;
  Eigen::Index dim_ = 0;
  Eigen::Index a_offset_ = 0;
  Eigen::Index total_rows_ = 0;
  Eigen::Index boundary_rows_ = 0;
  std::vector<Eigen::Index> theta_offset_;
  std::vector<Eigen::Index> xrow_offset_;
  std::vector<Eigen::Index> boundary_offset_;
  Vector rhs_;
  Matrix reduced_;
  double delta_ = 0.0;
  double w_nuc_ = 1.0, w_grp_ = 0.0;  // normalized objective weights
  double k1_ = 1.0, k2_ = 1.0;        // per-block penalty factors
  Eigen::LLT<Matrix> factor_;
};

}  // namespace detail

/// Solves the lifted convex program
///   min ||X||_* + lambda sum_j ||X_j(1:N-1,:) - X_j(2:N,:)||_{2,1}
///   s.t. |y_j(t) - sum_k X_j(t-n_k-k, k) - sum_k a_k y_j(t-k)| <= epsilon
/// by ADMM from a zero start.
inline BilSolution solve_bil(const ProblemSpec& spec, double lambda,
                             const SolverOptions& options = {}) {
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be non-negative");
  std::vector<std::vector<detail::Segment>> segs;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j)
    segs.push_back(detail::segments_from_freeze(spec.length(j), {}));
  detail::AdmmCore core(spec, std::move(segs), lambda);
  return core.run(options);
}

/// Bias-removal re-solve: lambda = 0 with X_j(i,:) = X_j(i+1,:) enforced for
/// every 1-based i in freeze[j].
inline BilSolution solve_refined(const ProblemSpec& spec,
                                 const std::vector<std::vector<int>>& freeze,
                                 const SolverOptions& options = {}) {
  detail::require(freeze.size() == spec.num_sequences(),
                  "freeze sets must be given for each of the " +
                      std::to_string(spec.num_sequences()) + " sequences");
  std::vector<std::vector<detail::Segment>> segs;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    std::set<int> frozen;
    for (int i : freeze[j]) {
      detail::require(i >= 1 && i <= spec.length(j) - 1,
                      "freeze index " + std::to_string(i) + " outside [1, " +
                          std::to_string(spec.length(j) - 1) + "] for sequence '" +
                          spec.sequence(j).label + "'");
      frozen.insert(i);
    }
    segs.push_back(detail::segments_from_freeze(spec.length(j), frozen));
  }
  detail::AdmmCore core(spec, std::move(segs), 0.0);
  return core.run(options);
}

/// Freeze sets {i : |Delta u(i)| <= gamma} per sequence.
inline std::vector<std::vector<int>> freeze_sets(const std::vector<Vector>& u_est, double gamma) {
  detail::require(gamma >= 0.0, "gamma must be non-negative");
  std::vector<std::vector<int>> out;
  for (const auto& u : u_est) {
    std::vector<int> f;
    const Vector du = input_differences(u);
    for (Eigen::Index i = 0; i < du.size(); ++i)
      if (std::abs(du(i)) <= gamma) f.push_back(static_cast<int>(i + 1));
    out.push_back(std::move(f));
  }
  return out;
}

/// Refinement from explicit per-sequence input estimates.
inline BilSolution refine_pipeline(const ProblemSpec& spec, const std::vector<Vector>& u_est,
                                   double gamma, const SolverOptions& options = {}) {
  return solve_refined(spec, freeze_sets(u_est, gamma), options);
}

inline BilSolution refine_pipeline(const ProblemSpec& spec, const BilSolution& bil, double gamma,
                                   const SolverOptions& options = {}) {
  return refine_pipeline(spec, bil.u_est, gamma, options);
}

struct LambdaSweep {
  double lambda = 0.0;
  BilSolution solution;
  bool qualified = false;            // false: no grid point met the gap target
  std::vector<double> lambdas;       // evaluated, in scan order
  std::vector<double> rank_gaps;
};

/// Scans the grid in ascending order and returns the first lambda whose
/// solution has rank_gap <= gap_target. If none qualifies, returns the grid
/// point with the smallest rank_gap and qualified = false.
inline LambdaSweep sweep_lambda(const ProblemSpec& spec, std::vector<double> grid,
                                double gap_target, const SolverOptions& options = {}) {
  detail::require(!grid.empty(), "sweep_lambda: empty lambda grid");
  detail::require(gap_target > 0.0 && gap_target < 1.0, "sweep_lambda: gap_target must lie in (0, 1)");
  for (double l : grid) detail::require(l > 0.0 && std::isfinite(l), "sweep_lambda: grid values must be positive");
  std::sort(grid.begin(), grid.end());
  LambdaSweep out;
  std::optional<BilSolution> best;
  for (double l : grid) {
    BilSolution s = solve_bil(spec, l, options);
    out.lambdas.push_back(l);
    out.rank_gaps.push_back(s.rank_gap);
    const bool nonzero = s.b_est.has_value();
    if (nonzero && s.rank_gap <= gap_target) {
      out.lambda = l;
      out.solution = std::move(s);
      out.qualified = true;
      return out;
    }
    if (nonzero && (!best || s.rank_gap < best->rank_gap)) best = std::move(s);
  }
  if (best) {
    out.lambda = best->lambda;
    out.solution = std::move(*best);
  } else {
    out.lambda = grid.front();
    out.solution = solve_bil(spec, grid.front(), options);
  }
  return out;
}

}  // namespace bilarx

#endif  // BILARX_SOLVER_HPP
