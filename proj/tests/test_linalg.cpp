#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "latentlin/linalg.hpp"
#include "latentlin/error.hpp"

using namespace latentlin;

TEST(Linalg, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(Linalg, PinvOfFullRankMatchesInverse) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> g;
  Matrix a(4, 4);
  for (Index i = 0; i < 16; ++i) a(i) = g(rng);
  EXPECT_LT((pinv(a) * a - Matrix::Identity(4, 4)).norm(), 1e-10);
}

TEST(Linalg, PinvSatisfiesPenroseOnRankDeficient) {
  Matrix a(3, 2);
  a << 1, 2, 2, 4, 3, 6;
  const Matrix p = pinv(a);
  EXPECT_LT((a * p * a - a).norm(), 1e-12);
  EXPECT_LT((p * a * p - p).norm(), 1e-12);
}

TEST(Linalg, SymEigenIsDescending) {
  Matrix p(3, 3);
  p << 2, 0, 0, 0, 5, 0, 0, 0, 1;
  const SymEigen es = sym_eigen_desc(p);
  EXPECT_DOUBLE_EQ(es.values(0), 5.0);
  EXPECT_DOUBLE_EQ(es.values(2), 1.0);
}

TEST(Linalg, NullSpaceAndComplement) {
  Matrix a(1, 3);
  a << 1, 1, 0;
  const Matrix z = null_space(a, 1e-12);
  ASSERT_EQ(z.cols(), 2);
  EXPECT_LT((a * z).norm(), 1e-12);
  const Vector c = Vector::Ones(3);
  const Matrix q = orthogonal_complement(c);
  EXPECT_LT((c.transpose() * q).norm(), 1e-12);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(Linalg, OrthonormalizeKeepsDirections) {
  Matrix m(3, 2);
  m << 2, 1, 0, 1, 0, 0;
  const Matrix q = orthonormalize(m);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_NEAR(q(0, 0), 1.0, 1e-12);
  EXPECT_GT(q(1, 1), 0.0);
}

TEST(Linalg, ParallelForVisitsAllAndRethrows) {
  std::vector<int> seen(100, 0);
  parallel_for(seen.size(), [&](std::size_t i) { seen[i] = 1; });
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 3) fail(ErrorKind::InvalidModel, "boom");
               }),
               Error);
}

TEST(Linalg, PermuteSelectsEntries) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const Matrix p = permute(m, {1, 0}, {1, 0});
  EXPECT_EQ(p(0, 0), 4);
  EXPECT_EQ(p(1, 1), 1);
}
