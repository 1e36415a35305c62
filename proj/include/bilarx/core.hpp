#ifndef BILARX_CORE_HPP
#define BILARX_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

/// Blind identification of ARX models with piecewise constant inputs.
namespace bilarx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when inputs violate a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an exhaustive enumeration would exceed its configured budget.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, long long patterns)
      : std::runtime_error(what), patterns_(patterns) {}
  long long patterns() const noexcept { return patterns_; }

 private:
  long long patterns_;
};

/// Raised by least-squares estimation when the regressors lack full column rank.
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a lifted matrix is identically zero and carries no rank-1 factor.
class NoIdentifiableComponent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail
}  // namespace bilarx

#endif  // BILARX_CORE_HPP
