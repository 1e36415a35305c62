#ifndef BILARX_DATAGEN_HPP
#define BILARX_DATAGEN_HPP

#include "bilarx/core.hpp"
#include "bilarx/problem.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <string>
#include <vector>

namespace bilarx {

/// xorshift64* generator seeded through one splitmix64 step. Portable and
/// bit-reproducible: state' = xorshift(12, 25, 27), output = state' * 0x2545F4914F6CDD1D,
/// uniform doubles from the top 53 bits.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    state_ = z ^ (z >> 31);
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_ = 0;
};

/// Piecewise constant input of length N. change_points are ascending 1-based
/// indices i at which u(i) != u(i+1); levels has one entry per segment.
inline Vector gen_piecewise_input(int n, const std::vector<int>& change_points,
                                  const std::vector<double>& levels) {
  detail::require(n >= 1, "input length must be positive");
  detail::require(levels.size() == change_points.size() + 1,
                  "need exactly one level per segment (" + std::to_string(change_points.size() + 1) +
                      "), got " + std::to_string(levels.size()));
  for (std::size_t i = 0; i < change_points.size(); ++i) {
    detail::require(change_points[i] >= 1 && change_points[i] <= n - 1,
                    "change point " + std::to_string(change_points[i]) + " outside [1, " +
                        std::to_string(n - 1) + "]");
    detail::require(i == 0 || change_points[i] > change_points[i - 1],
                    "change points must be strictly ascending");
  }
  for (std::size_t i = 0; i + 1 < levels.size(); ++i)
    detail::require(levels[i] != levels[i + 1],
                    "adjacent segments " + std::to_string(i + 1) + " and " + std::to_string(i + 2) +
                        " have equal levels");
  Vector u(n);
  std::size_t seg = 0;
  for (int t = 1; t <= n; ++t) {
    u(t - 1) = levels[seg];
    if (seg < change_points.size() && t == change_points[seg]) ++seg;
  }
  return u;
}

/// Noise-free ARX response z(1..N) of
///   z(t) = sum_k a_k z(t-k) + sum_k b_k u(t-n_k-k).
/// Lagged outputs before t = 1 come from y_init (y_init(0) = z(0),
/// y_init(1) = z(-1), ...; zeros when empty); lagged inputs before t = 1 are zero.
inline Vector simulate_arx(const Vector& a, const Vector& b, const ArxOrders& orders,
                           const Vector& u, const Vector& y_init = Vector()) {
  orders.validate();
  detail::require(a.size() == orders.n_a, "a must have length n_a");
  detail::require(b.size() == orders.n_b, "b must have length n_b");
  detail::require(y_init.size() == 0 || y_init.size() == orders.n_a,
                  "y_init must hold n_a presample values");
  const Eigen::Index n = u.size();
  Vector z = Vector::Zero(n);
  auto past_output = [&](Eigen::Index t) -> double {  // t is 1-based
    if (t >= 1) return z(t - 1);
    const Eigen::Index back = -t;  // z(0) -> 0, z(-1) -> 1
    return y_init.size() > 0 ? y_init(back) : 0.0;
  };
  for (Eigen::Index t = 1; t <= n; ++t) {
    double v = 0.0;
    for (int k = 1; k <= orders.n_a; ++k) v += a(k - 1) * past_output(t - k);
    for (int k = 1; k <= orders.n_b; ++k) {
      const Eigen::Index s = t - orders.n_k - k;
      if (s >= 1) v += b(k - 1) * u(s - 1);
    }
    z(t - 1) = v;
  }
  return z;
}

/// Largest pole modulus of 1 - a_1 q^-1 - ... - a_{n_a} q^-{n_a}; >= 1 flags
/// an unstable (or marginally stable) autoregression.
inline double max_pole_modulus(const Vector& a) {
  if (a.size() == 0) return 0.0;
  const Eigen::Index n = a.size();
  Matrix companion = Matrix::Zero(n, n);
  companion.row(0) = a.transpose();
  for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(companion, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// y(t) = z(t) + e(t), e ~ U(-bound, bound) drawn from Xorshift64Star(seed).
inline Vector add_uniform_noise(const Vector& z, double bound, std::uint64_t seed) {
  detail::require(bound >= 0.0, "noise bound must be non-negative");
  if (bound == 0.0) return z;
  Xorshift64Star rng(seed);
  Vector y = z;
  for (Eigen::Index t = 0; t < y.size(); ++t) y(t) += rng.uniform(-bound, bound);
  return y;
}

/// Planted ground truth of a synthetic scenario.
struct ScenarioTruth {
  std::vector<Vector> inputs;
  std::vector<std::vector<int>> change_points;
  std::vector<Vector> noise_free;
  Vector a;
  Vector b;
};

struct Scenario {
  std::string name;
  ProblemSpec spec;
  ScenarioTruth truth;
  double noise_bound = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kDefaultScenarioSeed = 1;

inline std::vector<std::string> scenario_names() {
  return {"scenario_fir_noisefree", "scenario_arx_noisy", "scenario_two_sequences"};
}

/// Named presets.
///  scenario_fir_noisefree: N = 30, FIR with n_b = 3, b = (-7.4111, -5.0782, -3.2058),
///    input levels (0, 10, 4, 12) changing after t = 8, 15, 23; epsilon = 0.
///  scenario_arx_noisy: same input, a = (0.2), b = (-4.9594, 6.1774, 3.3930),
///    output noise U(-2, 2), epsilon = 2.
///  scenario_two_sequences: two 40-sample sequences sharing the ARX model of
///    scenario_arx_noisy, inputs levels (-4, 6, -3, 5) changing after t = 9, 20, 31
///    and (3, -6, 4) changing after t = 12, 27; output noise U(-0.04, 0.04),
///    epsilon = 0.04. Sequence j draws its noise from seed + j.
inline Scenario scenario(const std::string& name, std::uint64_t seed = kDefaultScenarioSeed) {
  struct Plan {
    int n;
    std::vector<int> cps;
    std::vector<double> levels;
  };
  std::vector<Plan> plans;
  ArxOrders orders;
  Vector a, b;
  double noise = 0.0, eps = 0.0;

  const Plan base{30, {8, 15, 23}, {0.0, 10.0, 4.0, 12.0}};
  if (name == "scenario_fir_noisefree") {
    plans = {base};
    orders = {0, 3, 0};
    a = Vector(0);
    b = (Vector(3) << -7.4111, -5.0782, -3.2058).finished();
  } else if (name == "scenario_arx_noisy") {
    plans = {base};
    orders = {1, 3, 0};
    a = (Vector(1) << 0.2).finished();
    b = (Vector(3) << -4.9594, 6.1774, 3.3930).finished();
    noise = 2.0;
    eps = 2.0;
  } else if (name == "scenario_two_sequences") {
    plans = {{40, {9, 20, 31}, {-4.0, 6.0, -3.0, 5.0}}, {40, {12, 27}, {3.0, -6.0, 4.0}}};
    orders = {1, 3, 0};
    a = (Vector(1) << 0.2).finished();
    b = (Vector(3) << -4.9594, 6.1774, 3.3930).finished();
    noise = 0.04;
    eps = 0.04;
  } else {
    throw InvalidInput("unknown scenario '" + name + "'");
  }

  ScenarioTruth truth;
  truth.a = a;
  truth.b = b;
  std::vector<OutputSeries> series;
  for (std::size_t j = 0; j < plans.size(); ++j) {
    const Vector u = gen_piecewise_input(plans[j].n, plans[j].cps, plans[j].levels);
    const Vector z = simulate_arx(a, b, orders, u);
    const Vector y = add_uniform_noise(z, noise, seed + j);
    truth.inputs.push_back(u);
    truth.change_points.push_back(plans[j].cps);
    truth.noise_free.push_back(z);
    series.push_back({detail::to_std(y), "series" + std::to_string(j + 1)});
  }
  return Scenario{name, build_problem(std::move(series), orders, eps), std::move(truth), noise, seed};
}

}  // namespace bilarx

#endif  // BILARX_DATAGEN_HPP
