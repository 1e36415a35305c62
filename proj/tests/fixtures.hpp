#ifndef BILARX_TESTS_FIXTURES_HPP
#define BILARX_TESTS_FIXTURES_HPP

#include "bilarx/bilarx.hpp"

#include <random>
#include <vector>

namespace fixtures {

using bilarx::Matrix;
using bilarx::Vector;

/// Random piecewise constant vector with the given number of level changes,
/// placed anywhere in 1..n-1.
inline Vector random_piecewise(int n, int changes, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_int_distribution<int> pos(1, n - 1);
  std::uniform_real_distribution<double> lvl(lo, hi);
  std::vector<int> cps;
  while (static_cast<int>(cps.size()) < changes) {
    const int c = pos(rng);
    if (std::find(cps.begin(), cps.end(), c) == cps.end()) cps.push_back(c);
  }
  std::sort(cps.begin(), cps.end());
  std::vector<double> levels;
  for (int i = 0; i <= changes; ++i) {
    double v = lvl(rng);
    while (!levels.empty() && std::abs(v - levels.back()) < 0.3) v = lvl(rng);
    levels.push_back(v);
  }
  return bilarx::gen_piecewise_input(n, cps, levels);
}

struct RandomInstance {
  bilarx::ProblemSpec spec;
  Vector u;
  Vector a;
  Vector b;
  double lambda;
};

/// Small single-sequence problem: N <= 15, n_a <= 1, n_b <= 2.
inline RandomInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(8, 15), na(0, 1), nb(1, 2), nk(0, 1), ch(1, 2);
  std::uniform_real_distribution<double> coef(-2.0, 2.0), pole(-0.5, 0.5), unit(0.0, 1.0);
  const bilarx::ArxOrders o{na(rng), nb(rng), nk(rng)};
  const int n = len(rng);
  const Vector u = random_piecewise(n, ch(rng), rng);
  Vector a(o.n_a), b(o.n_b);
  for (int i = 0; i < o.n_a; ++i) a(i) = pole(rng);
  for (int i = 0; i < o.n_b; ++i) b(i) = coef(rng);
  const double eps = unit(rng) < 0.5 ? 0.0 : 0.05;
  const Vector z = bilarx::simulate_arx(a, b, o, u);
  const Vector y = bilarx::add_uniform_noise(z, eps / (1.0 + a.cwiseAbs().sum()), rng());
  const double lambdas[] = {0.5, 1.0, 2.0};
  const double lambda = lambdas[std::uniform_int_distribution<int>(0, 2)(rng)];
  return {bilarx::build_problem({{bilarx::detail::to_std(y), ""}}, o, eps), u, a, b, lambda};
}

}  // namespace fixtures

#endif  // BILARX_TESTS_FIXTURES_HPP
