#include <gtest/gtest.h>

#include "planted.hpp"

using namespace latentlin;

namespace {

double max_column_error(const Matrix& a, const Matrix& a_hat) {
  const Matrix truth = canonicalize(a);
  const Matrix est = aligned_estimate(a_hat, align_columns(truth, a_hat));
  return (truth - est).colwise().norm().maxCoeff();
}

Matrix small_planted() {
  return planted::first_accepted(9, 3, 0.4, 0.5, 21, planted::meets_conditions);
}

}  // namespace

TEST(Alg1, IdentityModel) {
  const RecoveryResult r = alg1(Matrix::Identity(3, 3), 3);
  EXPECT_LT(max_column_error(Matrix::Identity(3, 3), r.a_hat), 1e-9);
}

TEST(Alg1, PlantedModelWithIdentityCovariance) {
  const Matrix a = small_planted();
  const RecoveryResult r = alg1(a * a.transpose(), 3);
  EXPECT_LT(max_column_error(a, r.a_hat), 1e-6);
  EXPECT_EQ(numerical_rank(r.a_hat, 1e-6), 3);
  for (Index j = 0; j < 3; ++j) EXPECT_NEAR(r.a_hat.col(j).norm(), 1.0, 1e-12);
}

TEST(Alg1, RankDeficientInputFails) {
  const Vector v = Vector::LinSpaced(5, 1.0, 2.0);
  try {
    alg1(v * v.transpose(), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RecoveryFailed);
  }
}

TEST(Alg1, ScaleInvariant) {
  const Matrix a = small_planted();
  const Matrix p = a * a.transpose();
  const Matrix x = alg1(p, 3).a_hat;
  const Matrix y = alg1(250.0 * p, 3).a_hat;
  EXPECT_LT(max_column_error(x, y), 1e-8);
}

// Every candidate from exact moments is a multiple of a true column; the
// brute-force sparsest vectors of Col(A) are those same columns.
TEST(Alg1, CandidatesAreSparsestVectors) {
  const Matrix a = small_planted();
  const Matrix oracle = sparsest_in_span_oracle(a);
  EXPECT_LT(dist(a, oracle), 1e-10);
  const RecoveryResult r = alg1(a * a.transpose(), 3);
  for (const auto& c : r.candidate_pool) {
    const Vector s = c.s / c.s.norm();
    double best = 1.0;
    for (Index j = 0; j < oracle.cols(); ++j) best = std::min(best, 1.0 - std::abs(s.dot(oracle.col(j))));
    EXPECT_LT(best, 1e-6) << "row " << c.row;
    Index support = 0;
    for (Index j = 0; j < 3; ++j)
      if (1.0 - std::abs(s.dot(a.col(j).normalized())) < 1e-6) support = (a.col(j).array() != 0.0).count();
    EXPECT_EQ(c.sparsity, support);
  }
}

TEST(Alg1, CorrelatedHiddenCovariance) {
  const LatentLinearModel m = planted::certified_bn(30, 5, 0.3, 0.5, 5, planted::skewed());
  const Matrix low = m.a.matrix() * hidden_covariance(m) * m.a.matrix().transpose();
  EXPECT_LT(dist(m.a.matrix(), alg1(low, 5).a_hat), 1e-10);
}

TEST(Alg1Proj, IdentityModel) {
  EXPECT_LT(max_column_error(Matrix::Identity(3, 3), alg1_proj(Matrix::Identity(3, 3), 3).a_hat), 1e-9);
}

TEST(Alg1Proj, AgreesWithAlg1) {
  const Matrix a = small_planted();
  const Matrix p = a * a.transpose();
  const RecoveryResult x = alg1(p, 3);
  const RecoveryResult y = alg1_proj(p, 3);
  EXPECT_LT(max_column_error(a, y.a_hat), 1e-6);
  EXPECT_LT(max_column_error(x.a_hat, y.a_hat), 1e-6);
}

TEST(Alg1Proj, RoundsUseOrthogonalConstraints) {
  const Matrix a = small_planted();
  const RecoveryResult r = alg1_proj(a * a.transpose(), 3);
  ASSERT_EQ(r.candidate_pool.size(), 3u);
  Matrix w(3, 3);
  for (Index j = 0; j < 3; ++j) w.col(j) = r.candidate_pool[static_cast<std::size_t>(j)].w;
  // Each new w is independent of the earlier ones.
  EXPECT_EQ(numerical_rank(w, 1e-8), 3);
  const Matrix q = orthonormalize(w.leftCols(2));
  const Matrix proj = Matrix::Identity(3, 3) - q * q.transpose();
  EXPECT_LT((proj * proj - proj).norm(), 1e-12);
}

TEST(SparsityCount, Examples) {
  Vector v(3);
  v << 1, 1e-12, 0;
  EXPECT_EQ(sparsity_count(v, 1e-6), 1);
  EXPECT_EQ(sparsity_count(Vector::Ones(3), 1e-6), 3);
  EXPECT_EQ(sparsity_count(Vector::Zero(3), 1e-6), 0);
}
