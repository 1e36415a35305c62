#ifndef BILARX_BASELINE_HPP
#define BILARX_BASELINE_HPP

#include "bilarx/core.hpp"
#include "bilarx/problem.hpp"

#include <Eigen/QR>

#include <limits>
#include <string>
#include <vector>

namespace bilarx {

struct PiecewiseFit {
  Vector u_hat;
  std::vector<int> change_points;  // 1-based i with u_hat(i) != u_hat(i+1)
  double cost = 0.0;               // sum of squared deviations
};

/// Least-squares piecewise-constant fit with at most max_segments segments,
/// solved exactly by dynamic programming over segment end points. Among
/// optimal fits the one with the fewest segments is returned.
inline PiecewiseFit fit_piecewise_constant(const Vector& y, int max_segments) {
  const int n = static_cast<int>(y.size());
  detail::require(max_segments >= 1, "fit_piecewise_constant: max_segments must be at least 1");
  detail::require(n >= 1, "fit_piecewise_constant: empty signal");
  detail::require(max_segments <= n, "fit_piecewise_constant: max_segments (" +
                                         std::to_string(max_segments) +
                                         ") exceeds the signal length (" + std::to_string(n) + ")");
  detail::require(y.allFinite(), "fit_piecewise_constant: signal has non-finite samples");

  // sse(i, j): cost of one segment covering samples i..j (0-based), by Welford updates.
  Matrix sse = Matrix::Zero(n, n);
  Matrix mean = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double m = 0.0, s = 0.0;
    for (int j = i; j < n; ++j) {
      const double x = y(j);
      const double delta = x - m;
      m += delta / (j - i + 1);
      s += delta * (x - m);
      sse(i, j) = s;
      mean(i, j) = m;
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  // best(m, j): optimal cost of samples 0..j with exactly m + 1 segments.
  Matrix best = Matrix::Constant(max_segments, n, inf);
  Eigen::MatrixXi from = Eigen::MatrixXi::Constant(max_segments, n, -1);
  for (int j = 0; j < n; ++j) best(0, j) = sse(0, j);
  for (int m = 1; m < max_segments; ++m)
    for (int j = m; j < n; ++j)
      for (int s = m; s <= j; ++s) {  // last segment starts at s
        const double c = best(m - 1, s - 1) + sse(s, j);
        if (c < best(m, j)) {
          best(m, j) = c;
          from(m, j) = s;
        }
      }

  double optimum = inf;
  for (int m = 0; m < max_segments; ++m) optimum = std::min(optimum, best(m, n - 1));
  const double slack = 1e-12 * (1.0 + y.squaredNorm());
  int segments = 0;
  while (best(segments, n - 1) > optimum + slack) ++segments;

  PiecewiseFit fit;
  fit.u_hat = Vector(n);
  fit.cost = best(segments, n - 1);
  int end = n - 1;
  std::vector<int> starts;
  for (int m = segments; m >= 0; --m) {
    const int start = m == 0 ? 0 : from(m, end);
    fit.u_hat.segment(start, end - start + 1).setConstant(mean(start, end));
    starts.push_back(start);
    end = start - 1;
  }
  for (auto it = starts.rbegin(); it != starts.rend(); ++it)
    if (*it > 0) fit.change_points.push_back(*it);  // 0-based start s == 1-based change after s
  return fit;
}

struct ArxFit {
  Vector a;
  Vector b;
  double residual_sum = 0.0;
};

namespace detail {

inline void arx_regressors(const Vector& y, const Vector& u, const ArxOrders& o, Matrix& phi,
                           Vector& target, Eigen::Index row0) {
  const int n = o.first_index();
  for (int t = n; t <= y.size(); ++t) {
    const Eigen::Index r = row0 + (t - n);
    for (int k = 1; k <= o.n_a; ++k) phi(r, k - 1) = y(t - k - 1);
    for (int k = 1; k <= o.n_b; ++k) phi(r, o.n_a + k - 1) = u(t - o.n_k - k - 1);
    target(r) = y(t - 1);
  }
}

}  // namespace detail

/// Least-squares ARX estimate from several (y, u) records sharing one model:
/// minimizes sum_j sum_{t=n}^{N_j} (y(t) - sum a_k y(t-k) - sum b_k u(t-n_k-k))^2.
inline ArxFit least_squares_arx(const std::vector<Vector>& ys, const std::vector<Vector>& us,
                                const ArxOrders& orders) {
  orders.validate();
  detail::require(!ys.empty() && ys.size() == us.size(),
                  "least_squares_arx: need matching, non-empty lists of outputs and inputs");
  const int n = orders.first_index();
  Eigen::Index rows = 0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    detail::require(ys[j].size() == us[j].size(), "least_squares_arx: output and input lengths differ");
    detail::require(ys[j].size() >= n, "least_squares_arx: record shorter than the first usable index " +
                                           std::to_string(n));
    detail::require(ys[j].allFinite() && us[j].allFinite(), "least_squares_arx: non-finite samples");
    rows += ys[j].size() - n + 1;
  }
  const Eigen::Index cols = orders.n_a + orders.n_b;
  Matrix phi(rows, cols);
  Vector target(rows);
  Eigen::Index r = 0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    detail::arx_regressors(ys[j], us[j], orders, phi, target, r);
    r += ys[j].size() - n + 1;
  }

  bool input_zero = true;
  for (const auto& u : us) input_zero = input_zero && u.cwiseAbs().maxCoeff() == 0.0;
  if (input_zero) throw RankDeficient("least_squares_arx: input is identically zero, b is not identifiable");

  Eigen::ColPivHouseholderQR<Matrix> qr(phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols)
    throw RankDeficient("least_squares_arx: regressor matrix has rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(cols) + " (" + std::to_string(rows) +
                        " equations); the input is not rich enough for these orders");
  const Vector theta = qr.solve(target);
  ArxFit fit;
  fit.a = theta.head(orders.n_a);
  fit.b = theta.tail(orders.n_b);
  fit.residual_sum = (phi * theta - target).squaredNorm();
  return fit;
}

inline ArxFit least_squares_arx(const Vector& y, const Vector& u, const ArxOrders& orders) {
  return least_squares_arx(std::vector<Vector>{y}, std::vector<Vector>{u}, orders);
}

struct NaiveResult {
  Vector a_est;
  Vector b_est;
  std::vector<Vector> u_hat;
  std::vector<std::vector<int>> change_points;
  double residual_sum = 0.0;
};

/// Two-step identification: segment each output into at most max_segments
/// constant pieces, use the fit directly as the input estimate, then fit a
/// shared ARX model by least squares.
inline NaiveResult naive_identify(const ProblemSpec& spec, int max_segments) {
  NaiveResult res;
  std::vector<Vector> ys;
  for (const auto& s : spec.sequences()) {
    const Vector y = detail::to_vector(s.samples);
    PiecewiseFit fit = fit_piecewise_constant(y, max_segments);
    ys.push_back(y);
    res.u_hat.push_back(fit.u_hat);
    res.change_points.push_back(std::move(fit.change_points));
  }
  const ArxFit arx = least_squares_arx(ys, res.u_hat, spec.orders());
  res.a_est = arx.a;
  res.b_est = arx.b;
  res.residual_sum = arx.residual_sum;
  return res;
}

}  // namespace bilarx

#endif  // BILARX_BASELINE_HPP
