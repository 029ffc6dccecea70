#include <gtest/gtest.h>

#include "latentlin/l1solver.hpp"

using namespace latentlin;

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

}  // namespace

TEST(SolveL1, UnitConstraint) {
  const L1Solution s = solve_l1(Matrix::Identity(3, 3), Vector::Unit(3, 0));
  EXPECT_LT((s.w - Vector::Unit(3, 0)).norm(), 1e-9);
  EXPECT_NEAR(s.objective, 1.0, 1e-9);
}

TEST(SolveL1, WeightedDiagonal) {
  Matrix l(2, 2);
  l << 1, 0, 0, 2;
  const L1Solution s = solve_l1(l, Vector::Ones(2));
  EXPECT_NEAR(s.objective, 1.0, 1e-9);
  EXPECT_LT((s.w - Vector::Unit(2, 0)).norm(), 1e-8);
  EXPECT_NEAR(oracle_l1_vertex(l, Vector::Ones(2)).objective, 1.0, 1e-12);
}

TEST(SolveL1, ZeroConstraintIsInfeasible) {
  try {
    solve_l1(Matrix::Identity(2, 2), Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
  }
}

TEST(SolveL1, ExhaustedBudgetCarriesBestIterate) {
  Rng rng = make_rng(17);
  const Matrix l = gaussian(40, 6, rng);
  const Vector c = gaussian(6, 1, rng);
  L1Options opts;
  opts.max_iterations = 1;
  opts.polish_every = 1000000;
  try {
    const L1Solution s = solve_l1(l, c, opts);
    // A lucky certificate on the first pass is also acceptable.
    EXPECT_TRUE(s.certified);
  } catch (const NotConvergedError<L1Solution>& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotConverged);
    EXPECT_NEAR(c.dot(e.best().w), 1.0, 1e-10);
  }
}

TEST(SolveL1, MatchesVertexOracleOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_rng(seed, 1);
    const Index k = 2 + static_cast<Index>(seed % 3);
    const Index n = k + 1 + static_cast<Index>(seed % 3);
    const Matrix l = gaussian(n, k, rng);
    const Vector c = gaussian(k, 1, rng);
    const L1Solution s = solve_l1(l, c);
    const L1Solution o = oracle_l1_vertex(l, c);
    EXPECT_NEAR(s.objective, o.objective, 1e-8 * std::max(1.0, o.objective)) << "seed " << seed;
    EXPECT_NEAR(c.dot(s.w), 1.0, 1e-10);
  }
}

TEST(SolveL1, FiveByThreeInstances) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_rng(seed, 2);
    const Matrix l = gaussian(5, 3, rng);
    const Vector c = gaussian(3, 1, rng);
    EXPECT_NEAR(solve_l1(l, c).objective, oracle_l1_vertex(l, c).objective, 1e-8);
  }
}

TEST(SolveL1, HomogeneousAndRestartStable) {
  Rng rng = make_rng(4);
  const Matrix l = gaussian(12, 4, rng);
  const Vector c = gaussian(4, 1, rng);
  const L1Solution a = solve_l1(l, c);
  const L1Solution b = solve_l1(7.5 * l, c);
  EXPECT_NEAR(b.objective, 7.5 * a.objective, 1e-8 * b.objective);
  EXPECT_LT((a.w - b.w).norm(), 1e-7);
  const L1Solution again = solve_l1(l, c);
  EXPECT_EQ(a.w, again.w);
}

TEST(Oracle, TieGoesToFirstCoordinate) {
  const L1Solution o = oracle_l1_vertex(Matrix::Identity(2, 2), Vector::Ones(2));
  EXPECT_NEAR(o.objective, 1.0, 1e-15);
  EXPECT_LT((o.w - Vector::Unit(2, 0)).norm(), 1e-15);
}

TEST(Oracle, ScalingScalesObjective) {
  Rng rng = make_rng(8);
  const Matrix l = gaussian(6, 3, rng);
  const Vector c = gaussian(3, 1, rng);
  const L1Solution a = oracle_l1_vertex(l, c);
  const L1Solution b = oracle_l1_vertex(3.0 * l, c);
  EXPECT_NEAR(b.objective, 3.0 * a.objective, 1e-12);
  EXPECT_LT((a.w - b.w).norm(), 1e-12);
}

TEST(Oracle, SizeLimit) {
  try {
    oracle_l1_vertex(Matrix::Identity(13, 3), Vector::Ones(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooLarge);
  }
}
