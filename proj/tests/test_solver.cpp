#include "bilarx/bilarx.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bilarx;

namespace {

double abs_cosine(const Vector& a, const Vector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

double max_residual(const ProblemSpec& spec, const BilSolution& s) {
  double m = 0.0;
  for (const auto& r : residual(spec, s.vars)) m = std::max(m, r.cwiseAbs().maxCoeff());
  return m;
}

double reference_objective(const ProblemSpec& spec, double lambda) {
  const LiftedOperator op = build_lifted_operator(spec);
  std::vector<Eigen::Index> rows;
  for (std::size_t j = 0; j < spec.num_sequences(); ++j) rows.push_back(spec.length(j));
  const oracle::SmoothedReference ref{op.matrix, op.rhs, spec.epsilon(), lambda, rows,
                                      spec.orders().n_b, spec.orders().n_a};
  return ref.objective(ref.solve(50000));
}

void expect_unit_b(const BilSolution& s) {
  ASSERT_TRUE(s.b_est.has_value());
  EXPECT_NEAR(s.b_est->norm(), 1.0, 1e-12);
  Eigen::Index idx = 0;
  s.b_est->cwiseAbs().maxCoeff(&idx);
  EXPECT_GT((*s.b_est)(idx), 0.0);
}

ProblemSpec scaled(const ProblemSpec& spec, double c) {
  std::vector<OutputSeries> s;
  for (const auto& q : spec.sequences()) {
    OutputSeries t = q;
    for (auto& v : t.samples) v *= c;
    s.push_back(t);
  }
  return build_problem(s, spec.orders(), spec.epsilon() * c);
}

}  // namespace

TEST(SolverOptions, Validation) {
  SolverOptions o;
  EXPECT_EQ(o.rho, 1.0);
  EXPECT_EQ(o.max_iters, 5000);
  EXPECT_EQ(o.tol_primal, 1e-7);
  EXPECT_EQ(o.tol_dual, 1e-7);
  EXPECT_EQ(o.over_relaxation, 1.6);
  o.rho = 0.0;
  EXPECT_THROW(o.validate(), InvalidInput);
  o = SolverOptions{};
  o.over_relaxation = 2.0;
  EXPECT_THROW(o.validate(), InvalidInput);
  o = SolverOptions{};
  o.max_iters = 0;
  EXPECT_THROW(o.validate(), InvalidInput);
}

TEST(SolveBil, SlackCoversData) {
  const Scenario sc = scenario("scenario_arx_noisy");
  const ProblemSpec spec = build_problem(sc.spec.sequences(), sc.spec.orders(), sc.spec.max_abs_output());
  const BilSolution s = solve_bil(spec, 10.0);
  EXPECT_EQ(s.objective, 0.0);
  EXPECT_EQ(s.vars.stacked_x().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.a_est.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_FALSE(s.b_est.has_value());
  EXPECT_EQ(s.rank_gap, 0.0);
}

TEST(SolveBil, FirNoiseFreeIsRankOne) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  const BilSolution s = solve_bil(sc.spec, 1e4);
  EXPECT_TRUE(s.diagnostics.converged);
  EXPECT_LE(s.rank_gap, 1e-4);
  expect_unit_b(s);
  EXPECT_GE(abs_cosine(*s.b_est, sc.truth.b), 0.999);
  EXPECT_LE(max_residual(sc.spec, s), feasibility_tolerance(sc.spec));
}

TEST(SolveBil, TinyInstanceMatchesReference) {
  std::mt19937_64 rng(51);
  const Vector u = fixtures::random_piecewise(12, 2, rng);
  const Vector a = (Vector(1) << 0.3).finished(), b = (Vector(2) << 1.2, -0.7).finished();
  const ArxOrders o{1, 2, 0};
  const Vector y = add_uniform_noise(simulate_arx(a, b, o, u), 0.02, 5);
  const ProblemSpec spec = build_problem({{detail::to_std(y), ""}}, o, 0.03);
  SolverOptions opt;
  opt.max_iters = 20000;
  const BilSolution s = solve_bil(spec, 10.0, opt);
  const double ref = reference_objective(spec, 10.0);
  EXPECT_LE(std::abs(s.objective - ref), 1e-3 * ref);
  EXPECT_LE(max_residual(spec, s), spec.epsilon() + feasibility_tolerance(spec));
}

TEST(SolveBil, FeasibleAndNormalisedOnRandomInstances) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 8; ++trial) {
    const auto inst = fixtures::random_instance(rng);
    const BilSolution s = solve_bil(inst.spec, inst.lambda);
    EXPECT_LE(max_residual(inst.spec, s), inst.spec.epsilon() + feasibility_tolerance(inst.spec));
    if (s.b_est) expect_unit_b(s);
    EXPECT_NEAR(s.objective, bil_objective(s.vars.x_blocks, inst.lambda), 1e-9 * (1.0 + s.objective));
  }
}

TEST(SolveBil, Deterministic) {
  const Scenario sc = scenario("scenario_arx_noisy");
  const BilSolution a = solve_bil(sc.spec, 1e3), b = solve_bil(sc.spec, 1e3);
  EXPECT_EQ(a.vars.x_blocks[0], b.vars.x_blocks[0]);
  EXPECT_EQ(a.a_est, b.a_est);
  EXPECT_EQ(a.diagnostics.iterations, b.diagnostics.iterations);
}

TEST(SolveBil, ReportsNonConvergence) {
  const Scenario sc = scenario("scenario_arx_noisy");
  SolverOptions o;
  o.max_iters = 3;
  const BilSolution s = solve_bil(sc.spec, 1e7, o);
  EXPECT_FALSE(s.diagnostics.converged);
  EXPECT_EQ(s.diagnostics.iterations, 3);
  EXPECT_GT(s.diagnostics.primal_residual + s.diagnostics.dual_residual, 0.0);
}

TEST(SolveBil, RejectsNegativeLambda) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  EXPECT_THROW(solve_bil(sc.spec, -1.0), InvalidInput);
}

TEST(SolveBil, ScaleCovariance) {
  const Scenario sc = scenario("scenario_two_sequences");
  SolverOptions o;
  o.max_iters = 20000;
  const BilSolution s1 = solve_bil(sc.spec, 100.0, o);
  const BilSolution s3 = solve_bil(scaled(sc.spec, 3.0), 100.0, o);
  EXPECT_NEAR(s3.objective, 3.0 * s1.objective, 1e-4 * s3.objective);
  EXPECT_LT((s3.a_est - s1.a_est).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((*s3.b_est - *s1.b_est).norm(), 1e-4);
  EXPECT_LT((s3.u_est[0] - 3.0 * s1.u_est[0]).norm(), 1e-4 * s3.u_est[0].norm());
}

TEST(SolveBil, StackedSingularValuesForTwoSequences) {
  const Scenario sc = scenario("scenario_two_sequences");
  SolverOptions o;
  o.max_iters = 20000;
  const BilSolution s = solve_bil(sc.spec, 100.0, o);
  EXPECT_EQ(s.singular_values.size(), 3);
  const Vector expect = thin_svd(s.vars.stacked_x()).singular_values;
  EXPECT_LT((s.singular_values - expect).norm(), 1e-12 * expect(0));
  EXPECT_LE(s.rank_gap, 5e-2);
  EXPECT_EQ(s.u_est.size(), 2u);
}

TEST(SolveRefined, FullyFrozenGivesConstantInput) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  std::vector<int> all;
  for (int i = 1; i < 30; ++i) all.push_back(i);
  // A constant input fits the constrained outputs within half their range.
  const LiftedOperator op = build_lifted_operator(sc.spec);
  const double half_range = 0.5 * (op.rhs.maxCoeff() - op.rhs.minCoeff());
  const ProblemSpec spec = build_problem(sc.spec.sequences(), sc.spec.orders(), half_range);
  SolverOptions o;
  o.max_iters = 20000;
  const BilSolution s = solve_refined(spec, {all}, o);
  const Matrix& x = s.vars.x_blocks[0];
  for (Eigen::Index i = 1; i < x.rows(); ++i) EXPECT_EQ(x.row(i), x.row(0));
  EXPECT_LE(max_residual(spec, s), spec.epsilon() + feasibility_tolerance(spec));
}

TEST(SolveRefined, SlackCoversData) {
  const Scenario sc = scenario("scenario_arx_noisy");
  const ProblemSpec spec = build_problem(sc.spec.sequences(), sc.spec.orders(), sc.spec.max_abs_output());
  const BilSolution s = solve_refined(spec, {{}});
  EXPECT_EQ(s.vars.stacked_x().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s.objective, 0.0);
}

TEST(SolveRefined, RejectsBadIndices) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  EXPECT_THROW(solve_refined(sc.spec, {{0}}), InvalidInput);
  EXPECT_THROW(solve_refined(sc.spec, {{30}}), InvalidInput);
  EXPECT_THROW(solve_refined(sc.spec, {{1}, {2}}), InvalidInput);
}

TEST(FreezeSets, Threshold) {
  const Vector u = (Vector(5) << 1, 1, 1.3, 4, 4).finished();
  EXPECT_EQ(freeze_sets({u}, 0.0), (std::vector<std::vector<int>>{{1, 4}}));
  EXPECT_EQ(freeze_sets({u}, 0.5), (std::vector<std::vector<int>>{{1, 2, 4}}));
  EXPECT_EQ(freeze_sets({u}, 10.0), (std::vector<std::vector<int>>{{1, 2, 3, 4}}));
  EXPECT_THROW(freeze_sets({u}, -1.0), InvalidInput);
}

TEST(RefinePipeline, LargeGammaFreezesEverything) {
  const Scenario sc = scenario("scenario_arx_noisy");
  const BilSolution bil = solve_bil(sc.spec, 1e3);
  const double gmax = input_differences(bil.u_est[0]).cwiseAbs().maxCoeff();
  const BilSolution r = refine_pipeline(sc.spec, bil, gmax + 1.0);
  const Vector& u = r.u_est[0];
  EXPECT_LT((u.array() - u(0)).abs().maxCoeff(), 1e-9 * (1.0 + std::abs(u(0))));
}

TEST(RefinePipeline, NoisyArxRecoversChangePoints) {
  const Scenario sc = scenario("scenario_arx_noisy");
  SolverOptions o;
  o.max_iters = 50000;
  const BilSolution bil = solve_bil(sc.spec, 1e7, o);
  const BilSolution r = refine_pipeline(sc.spec, bil, 0.5, o);
  EXPECT_EQ(change_points(r.u_est[0], 0.5), sc.truth.change_points[0]);
  EXPECT_LT(r.rank_gap, bil.rank_gap);
  EXPECT_LE(max_residual(sc.spec, r), sc.spec.epsilon() + feasibility_tolerance(sc.spec));
}

TEST(SweepLambda, FirQualifies) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  const LambdaSweep sw = sweep_lambda(sc.spec, {1e6, 1e2, 1e4}, 1e-3);
  EXPECT_TRUE(sw.qualified);
  EXPECT_EQ(sw.lambdas.front(), 1e2);
  EXPECT_LE(sw.solution.rank_gap, 1e-3);
  EXPECT_GE(abs_cosine(*sw.solution.b_est, sc.truth.b), 0.999);
}

TEST(SweepLambda, SingletonAndLooseTarget) {
  const Scenario sc = scenario("scenario_arx_noisy");
  const LambdaSweep one = sweep_lambda(sc.spec, {1e3}, 1e-6);
  const BilSolution direct = solve_bil(sc.spec, 1e3);
  EXPECT_EQ(one.lambda, 1e3);
  EXPECT_FALSE(one.qualified);
  EXPECT_EQ(one.solution.rank_gap, direct.rank_gap);
  const LambdaSweep loose = sweep_lambda(sc.spec, {1e5, 1e3, 1e4}, 0.99);
  EXPECT_TRUE(loose.qualified);
  EXPECT_EQ(loose.lambda, 1e3);
  EXPECT_EQ(loose.lambdas.size(), 1u);
}

TEST(SweepLambda, RejectsBadArguments) {
  const Scenario sc = scenario("scenario_fir_noisefree");
  EXPECT_THROW(sweep_lambda(sc.spec, {}, 0.1), InvalidInput);
  EXPECT_THROW(sweep_lambda(sc.spec, {1.0}, 0.0), InvalidInput);
  EXPECT_THROW(sweep_lambda(sc.spec, {1.0}, 1.0), InvalidInput);
  EXPECT_THROW(sweep_lambda(sc.spec, {-1.0}, 0.5), InvalidInput);
}
