#include "bilarx/extract.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bilarx;

namespace {

double abs_cosine(const Vector& a, const Vector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

}  // namespace

TEST(FactorRank1, PlantedExactRankOne) {
  const Vector u = (Vector(6) << 0, 0, 4, 4, 4, -1).finished();
  const Vector b = (Vector(3) << -7.4111, -5.0782, -3.2058).finished();
  const Rank1Factors f = factor_rank1({u * b.transpose()});
  EXPECT_NEAR(abs_cosine(f.b, b), 1.0, 1e-10);
  EXPECT_LT(f.rank_gap, 1e-12);
  EXPECT_NEAR(f.b.norm(), 1.0, 1e-14);
  Eigen::Index idx = 0;
  f.b.cwiseAbs().maxCoeff(&idx);
  EXPECT_GT(f.b(idx), 0.0);
  EXPECT_LT((f.u[0] * f.b.transpose() - u * b.transpose()).norm(), 1e-10 * u.norm() * b.norm());
}

TEST(FactorRank1, Diagonal) {
  Matrix x = Matrix::Zero(2, 2);
  x(0, 0) = 2.0;
  x(1, 1) = 1.0;
  const Rank1Factors f = factor_rank1({x});
  EXPECT_DOUBLE_EQ(f.rank_gap, 0.5);
  EXPECT_NEAR(f.b(0), 1.0, 1e-15);
  EXPECT_NEAR(f.b(1), 0.0, 1e-15);
}

TEST(FactorRank1, TwoBlocksShareB) {
  const Vector b = (Vector(2) << 0.6, -0.8).finished();
  const Vector u1 = (Vector(5) << 1, 1, 3, 3, 3).finished();
  const Vector u2 = (Vector(4) << -2, -2, 5, 5).finished();
  const Rank1Factors f = factor_rank1({u1 * b.transpose(), u2 * b.transpose()});
  EXPECT_NEAR(abs_cosine(f.b, b), 1.0, 1e-12);
  const double c = f.u[0].dot(u1) / u1.squaredNorm();
  EXPECT_LT((f.u[0] - c * u1).norm(), 1e-12 * u1.norm());
  EXPECT_LT((f.u[1] - c * u2).norm(), 1e-12 * u2.norm());
}

TEST(FactorRank1, ZeroMatrixIsNotIdentifiable) {
  EXPECT_THROW(factor_rank1({Matrix::Zero(4, 2)}), NoIdentifiableComponent);
  EXPECT_THROW(factor_rank1({}), InvalidInput);
}

TEST(FactorRank1, ReconstructionWithinSecondSingularValue) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(10, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
    const Rank1Factors f = factor_rank1({x});
    const double s2 = f.singular_values(1);
    EXPECT_LE((x - f.u[0] * f.b.transpose()).norm(), s2 * std::sqrt(3.0) + 1e-12);
  }
}

TEST(FactorRank1, ScaleInvariance) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  Matrix x(8, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
  const Rank1Factors a = factor_rank1({x}), b = factor_rank1({3.5 * x});
  EXPECT_LT((a.b - b.b).norm(), 1e-12);
  EXPECT_NEAR(a.rank_gap, b.rank_gap, 1e-12);
  EXPECT_LT((3.5 * a.u[0] - b.u[0]).norm(), 1e-12 * b.u[0].norm());
}

TEST(FactorRank1, RowPermutationCovariance) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> nd;
  Matrix x(7, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nd(rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(7);
  p.setIdentity();
  std::shuffle(p.indices().data(), p.indices().data() + 7, rng);
  const Rank1Factors a = factor_rank1({x}), b = factor_rank1({p * x});
  EXPECT_LT((p * a.u[0] - b.u[0]).norm(), 1e-10 * a.u[0].norm());
}

TEST(ChangePoints, Examples) {
  EXPECT_TRUE(change_points(Vector::Constant(5, 2.0), 0.0).empty());
  EXPECT_TRUE(change_points(Vector::Constant(5, 2.0), 3.0).empty());
  EXPECT_EQ(change_points((Vector(4) << 0, 0, 5, 5).finished(), 1.0), std::vector<int>{2});
  EXPECT_THROW(change_points(Vector::Zero(1), 0.0), InvalidInput);
  EXPECT_THROW(change_points(Vector::Zero(3), -1.0), InvalidInput);
}

TEST(ChangePoints, PlantedFourSegmentInput) {
  Vector u(30);
  u.segment(0, 8).setConstant(0.0);
  u.segment(8, 7).setConstant(10.0);
  u.segment(15, 8).setConstant(4.0);
  u.segment(23, 7).setConstant(12.0);
  EXPECT_EQ(change_points(u, 2.0), (std::vector<int>{8, 15, 23}));
}

TEST(ChangePoints, MonotoneInThreshold) {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> nd;
  Vector u(20);
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = nd(rng);
  const auto all = change_points(u, 0.0);
  for (double g : {0.1, 0.5, 1.0, 2.0}) {
    const auto sub = change_points(u, g);
    for (int i : sub) EXPECT_NE(std::find(all.begin(), all.end(), i), all.end());
  }
}

TEST(InputDifferences, Definition) {
  const Vector u = (Vector(4) << 1, 3, 3, 0).finished();
  EXPECT_EQ(input_differences(u), (Vector(3) << -2, 0, 3).finished());
}
