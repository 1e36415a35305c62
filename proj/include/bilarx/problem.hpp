#ifndef BILARX_PROBLEM_HPP
#define BILARX_PROBLEM_HPP

#include "bilarx/core.hpp"

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace bilarx {

/// ARX orders. The model is
///   y(t) - a_1 y(t-1) - ... - a_{n_a} y(t-n_a) = b_1 u(t-n_k-1) + ... + b_{n_b} u(t-n_k-n_b) + w(t).
struct ArxOrders {
  int n_a = 0;
  int n_b = 1;
  int n_k = 0;

  /// First time index (1-based) at which the model equation is imposed.
  int first_index() const { return std::max(n_a, n_k + n_b) + 1; }

  void validate() const {
    detail::require(n_a >= 0, "n_a must be non-negative, got " + std::to_string(n_a));
    detail::require(n_b >= 1, "n_b must be at least 1, got " + std::to_string(n_b));
    detail::require(n_k >= 0, "n_k must be non-negative, got " + std::to_string(n_k));
  }
};

struct OutputSeries {
  std::vector<double> samples;
  std::string label;

  std::size_t size() const { return samples.size(); }
  /// 1-based access.
  double at(int t) const { return samples[static_cast<std::size_t>(t - 1)]; }
};

/// A validated identification instance: one or more output sequences sharing
/// one ARX model, and a bound on the per-sample equation error.
class ProblemSpec {
 public:
  const std::vector<OutputSeries>& sequences() const { return sequences_; }
  const OutputSeries& sequence(std::size_t j) const { return sequences_.at(j); }
  std::size_t num_sequences() const { return sequences_.size(); }
  const ArxOrders& orders() const { return orders_; }
  double epsilon() const { return epsilon_; }
  int first_index() const { return first_index_; }

  int length(std::size_t j) const { return static_cast<int>(sequences_.at(j).size()); }
  /// Number of constrained time indices t = n..N_j of sequence j.
  int num_constraints(std::size_t j) const { return length(j) - first_index_ + 1; }
  int total_constraints() const {
    int m = 0;
    for (std::size_t j = 0; j < num_sequences(); ++j) m += num_constraints(j);
    return m;
  }
  int total_rows() const {
    int r = 0;
    for (std::size_t j = 0; j < num_sequences(); ++j) r += length(j);
    return r;
  }
  double max_abs_output() const {
    double m = 0.0;
    for (const auto& s : sequences_)
      for (double v : s.samples) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  friend ProblemSpec build_problem(std::vector<OutputSeries>, ArxOrders, double);
  ProblemSpec(std::vector<OutputSeries> sequences, ArxOrders orders, double epsilon)
      : sequences_(std::move(sequences)),
        orders_(orders),
        epsilon_(epsilon),
        first_index_(orders.first_index()) {}

  std::vector<OutputSeries> sequences_;
  ArxOrders orders_;
  double epsilon_ = 0.0;
  int first_index_ = 1;
};

inline ProblemSpec build_problem(std::vector<OutputSeries> sequences, ArxOrders orders,
                                 double epsilon) {
  orders.validate();
  detail::require(!sequences.empty(), "at least one output sequence is required");
  detail::require(std::isfinite(epsilon) && epsilon >= 0.0,
                  "epsilon must be a non-negative finite number");
  const int n = orders.first_index();
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    auto& s = sequences[j];
    if (s.label.empty()) s.label = "series" + std::to_string(j + 1);
    detail::require(static_cast<int>(s.size()) >= n,
                    "sequence '" + s.label + "' has " + std::to_string(s.size()) +
                        " samples; at least n = " + std::to_string(n) + " are required");
    detail::require(detail::all_finite(s.samples),
                    "sequence '" + s.label + "' contains non-finite samples");
  }
  return ProblemSpec(std::move(sequences), orders, epsilon);
}

/// Decision variables of the lifted program: one N_j x n_b block X_j per
/// sequence (X = u b^T), the shared autoregressive coefficients a, and the
/// per-sequence equation errors w_j(n..N_j).
struct LiftedVariables {
  std::vector<Matrix> x_blocks;
  Vector a;
  std::vector<Vector> w_blocks;

  static LiftedVariables zeros(const ProblemSpec& spec) {
    LiftedVariables v;
    const int nb = spec.orders().n_b;
    for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
      v.x_blocks.push_back(Matrix::Zero(spec.length(j), nb));
      v.w_blocks.push_back(Vector::Zero(spec.num_constraints(j)));
    }
    v.a = Vector::Zero(spec.orders().n_a);
    return v;
  }

  /// Row-wise stack of all X blocks.
  Matrix stacked_x() const {
    Eigen::Index rows = 0;
    const Eigen::Index cols = x_blocks.empty() ? 0 : x_blocks.front().cols();
    for (const auto& b : x_blocks) rows += b.rows();
    Matrix s(rows, cols);
    Eigen::Index r = 0;
    for (const auto& b : x_blocks) {
      s.middleRows(r, b.rows()) = b;
      r += b.rows();
    }
    return s;
  }
};

inline void check_dimensions(const ProblemSpec& spec, const LiftedVariables& vars) {
  const auto& o = spec.orders();
  detail::require(vars.x_blocks.size() == spec.num_sequences(),
                  "expected " + std::to_string(spec.num_sequences()) + " X blocks, got " +
                      std::to_string(vars.x_blocks.size()));
  detail::require(vars.a.size() == o.n_a, "a must have length n_a = " + std::to_string(o.n_a));
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    const auto& x = vars.x_blocks[j];
    detail::require(x.rows() == spec.length(j) && x.cols() == o.n_b,
                    "X block " + std::to_string(j + 1) + " must be " +
                        std::to_string(spec.length(j)) + " x " + std::to_string(o.n_b));
  }
}

/// Equation residuals r_j(t) = y_j(t) - sum_k X_j(t-n_k-k, k) - sum_k a_k y_j(t-k)
/// for t = n..N_j, one vector per sequence. Feasibility means max |r| <= epsilon.
inline std::vector<Vector> residual(const ProblemSpec& spec, const LiftedVariables& vars) {
  check_dimensions(spec, vars);
  const auto& o = spec.orders();
  const int n = spec.first_index();
  std::vector<Vector> out;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    const auto& y = spec.sequence(j);
    const auto& x = vars.x_blocks[j];
    Vector r(spec.num_constraints(j));
    for (int t = n; t <= spec.length(j); ++t) {
      double v = y.at(t);
      for (int k = 1; k <= o.n_b; ++k) v -= x(t - o.n_k - k - 1, k - 1);
      for (int k = 1; k <= o.n_a; ++k) v -= vars.a(k - 1) * y.at(t - k);
      r(t - n) = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline double max_abs(const std::vector<Vector>& blocks) {
  double m = 0.0;
  for (const auto& b : blocks)
    if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

/// Constraint row identity: sequence index (0-based) and time t (1-based).
struct ConstraintKey {
  std::size_t sequence = 0;
  int t = 0;
};

/// Column identity. X columns carry (sequence, row, col) in 1-based matrix
/// coordinates; a columns carry the lag (1-based).
struct VariableKey {
  enum class Kind { X, A };
  Kind kind = Kind::X;
  std::size_t sequence = 0;
  int row = 0;
  int col = 0;
  int lag = 0;
};

struct OperatorEntry {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

/// The linear map (X_1, ..., X_J, a) -> stacked model predictions, as an
/// explicit dense matrix over the variable vector
///   [vec(X_1); ...; vec(X_J); a]
/// where vec is column-major. rhs holds the matching y_j(t).
struct LiftedOperator {
  Matrix matrix;
  Vector rhs;
  std::vector<ConstraintKey> rows;
  std::vector<VariableKey> columns;
  std::vector<Eigen::Index> block_offset;  // first column of each X block
  std::vector<Eigen::Index> row_offset;    // first constraint row of each sequence
  std::vector<Eigen::Index> block_rows;    // N_j
  Eigen::Index a_offset = 0;
  ArxOrders orders;

  Eigen::Index num_variables() const { return matrix.cols(); }

  /// Stacks LiftedVariables into the column ordering of `matrix`.
  Vector pack(const LiftedVariables& vars) const {
    Vector v(matrix.cols());
    for (std::size_t j = 0; j < vars.x_blocks.size(); ++j) {
      const auto& x = vars.x_blocks[j];
      v.segment(block_offset[j], x.size()) = Eigen::Map<const Vector>(x.data(), x.size());
    }
    v.tail(matrix.cols() - a_offset) = vars.a;
    return v;
  }

  /// Inverse of pack for the X and a parts; w blocks are left zero-sized.
  LiftedVariables unpack(const Vector& v) const {
    LiftedVariables out;
    const std::size_t blocks = block_offset.size();
    for (std::size_t j = 0; j < blocks; ++j) {
      const Eigen::Index end = (j + 1 < blocks) ? block_offset[j + 1] : a_offset;
      const Eigen::Index rows_j = (end - block_offset[j]) / orders.n_b;
      out.x_blocks.push_back(
          Eigen::Map<const Matrix>(v.data() + block_offset[j], rows_j, orders.n_b));
    }
    out.a = v.tail(matrix.cols() - a_offset);
    return out;
  }

  Vector apply(const LiftedVariables& vars) const { return matrix * pack(vars); }

  /// Adjoint map z -> (X blocks, a).
  LiftedVariables adjoint(const Vector& z) const { return unpack(matrix.transpose() * z); }

  /// Structural nonzeros derived from the index map: n_b X taps and n_a
  /// lags per constraint row. Entries whose coefficient y(t-k) happens to be
  /// zero are still listed.
  std::vector<OperatorEntry> entries() const {
    std::vector<OperatorEntry> e;
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(rows.size()); ++r) {
      const auto& key = rows[static_cast<std::size_t>(r)];
      const Eigen::Index nj = block_rows[key.sequence];
      for (int k = 1; k <= orders.n_b; ++k)
        e.push_back({r, block_offset[key.sequence] + (k - 1) * nj + (key.t - orders.n_k - k - 1)});
      for (int k = 1; k <= orders.n_a; ++k) e.push_back({r, a_offset + k - 1});
    }
    return e;
  }

  /// Columns of `matrix` belonging to X block j.
  Matrix x_part(std::size_t j) const {
    const Eigen::Index end = (j + 1 < block_offset.size()) ? block_offset[j + 1] : a_offset;
    return matrix.middleCols(block_offset[j], end - block_offset[j]);
  }
};

inline LiftedOperator build_lifted_operator(const ProblemSpec& spec) {
  const auto& o = spec.orders();
  const int n = spec.first_index();
  LiftedOperator op;
  op.orders = o;

  Eigen::Index col = 0;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    op.block_offset.push_back(col);
    const int nj = spec.length(j);
    op.block_rows.push_back(nj);
    for (int c = 1; c <= o.n_b; ++c)
      for (int r = 1; r <= nj; ++r)
        op.columns.push_back({VariableKey::Kind::X, j, r, c, 0});
    col += static_cast<Eigen::Index>(nj) * o.n_b;
  }
  op.a_offset = col;
  for (int k = 1; k <= o.n_a; ++k) op.columns.push_back({VariableKey::Kind::A, 0, 0, 0, k});

  const Eigen::Index m = spec.total_constraints();
  op.matrix = Matrix::Zero(m, col + o.n_a);
  op.rhs = Vector::Zero(m);
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) {
    op.row_offset.push_back(row);
    const auto& y = spec.sequence(j);
    const int nj = spec.length(j);
    for (int t = n; t <= nj; ++t, ++row) {
      op.rows.push_back({j, t});
      op.rhs(row) = y.at(t);
      for (int k = 1; k <= o.n_b; ++k) {
        const int xr = t - o.n_k - k;  // 1-based row of X_j
        op.matrix(row, op.block_offset[j] + static_cast<Eigen::Index>(k - 1) * nj + (xr - 1)) = 1.0;
      }
      for (int k = 1; k <= o.n_a; ++k) op.matrix(row, op.a_offset + k - 1) = y.at(t - k);
    }
  }
  return op;
}

}  // namespace bilarx

#endif  // BILARX_PROBLEM_HPP
