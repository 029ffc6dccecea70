#include <gtest/gtest.h>

#include <cmath>

#include "planted.hpp"

using namespace latentlin;

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = g(rng);
  return m;
}

Partition3 thirds(Index n) {
  Partition3 p;
  for (Index i = 0; i < n; ++i) p.blocks[static_cast<std::size_t>(3 * i / n)].push_back(i);
  return p;
}

}  // namespace

TEST(Decompose, ScalarPivot) {
  Vector d(3);
  d << 2, 3, 4;
  const Matrix c = Matrix::Ones(3, 3) + Matrix(d.asDiagonal());
  const DecompResult r = diag_lowrank_decompose(c, thirds(3), 1);
  EXPECT_LT((r.lowrank - Matrix::Ones(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((r.diag - d).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Decompose, RandomPlantedFactors) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, 3);
    const Matrix a = gaussian(30, 5, rng), b = gaussian(30, 5, rng);
    const Vector d = gaussian(30, 1, rng).cwiseAbs();
    const Matrix c = a * b.transpose() + Matrix(d.asDiagonal());
    const DecompResult r = diag_lowrank_decompose(c, thirds(30), 5);
    EXPECT_LT((r.diag - d).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((r.lowrank - a * b.transpose()).cwiseAbs().maxCoeff(), 1e-8 * c.cwiseAbs().maxCoeff());
    // lowrank + diag reproduces C exactly, by construction.
    EXPECT_EQ(r.lowrank + Matrix(r.diag.asDiagonal()), c);
  }
}

TEST(Decompose, RankTooLargeIsIllConditioned) {
  Rng rng = make_rng(5);
  const Matrix a = gaussian(12, 2, rng);
  const Matrix c = a * a.transpose() + Matrix::Identity(12, 12);
  try {
    diag_lowrank_decompose(c, thirds(12), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IllConditionedPartition);
  }
}

TEST(Decompose, PartitionValidation) {
  Partition3 p = thirds(6);
  p.blocks[0].push_back(3);
  EXPECT_THROW(p.labels(6), Error);
  EXPECT_THROW(thirds(5).labels(6), Error);
}

TEST(FindPartition, PlantedModelWins) {
  Rng rng = make_rng(9);
  const Matrix a = gaussian(30, 5, rng);
  const Vector d = gaussian(30, 1, rng).cwiseAbs();
  const Matrix c = a * a.transpose() + Matrix(d.asDiagonal());
  const PartitionSearch s = find_partition(c, 5, 100, 2);
  EXPECT_LE(s.score, 1e-8);
  EXPECT_LT((s.decomposition.diag - d).cwiseAbs().maxCoeff(), 1e-8);
  for (const auto& b : s.partition.blocks) EXPECT_GE(static_cast<Index>(b.size()), 5);
}

TEST(FindPartition, DeterministicForSeed) {
  Rng rng = make_rng(10);
  const Matrix a = gaussian(15, 2, rng);
  const Matrix c = a * a.transpose() + Matrix::Identity(15, 15);
  const PartitionSearch x = find_partition(c, 2, 1, 77);
  const PartitionSearch y = find_partition(c, 2, 1, 77);
  EXPECT_EQ(x.partition.blocks, y.partition.blocks);
  EXPECT_EQ(x.score, y.score);
  const PartitionSearch many = find_partition(c, 2, 16, 77);
  EXPECT_EQ(many.partition.blocks, find_partition(c, 2, 16, 77).partition.blocks);
}

TEST(FindPartition, EveryTrialIllConditioned) {
  try {
    find_partition(Matrix::Identity(9, 9), 2, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoValidPartition);
  }
}

TEST(OffDiagonalRatio, Examples) {
  EXPECT_EQ(off_diagonal_ratio(Matrix(Vector::LinSpaced(4, 1, 4).asDiagonal())), 0.0);
  Matrix hollow = Matrix::Ones(3, 3);
  hollow.diagonal().setZero();
  EXPECT_EQ(off_diagonal_ratio(hollow), 1.0);
  EXPECT_DOUBLE_EQ(off_diagonal_ratio(Matrix::Ones(2, 2)), 0.5);
  EXPECT_EQ(off_diagonal_ratio(Matrix::Zero(3, 3)), 0.0);
}

TEST(Incoherence, Examples) {
  Matrix a = Matrix::Zero(4, 2);
  a(0, 0) = a(1, 1) = 1;
  EXPECT_NEAR(incoherence_number(a), 2.0, 1e-12);
  Matrix h(4, 2);
  h << 1, 1, 1, -1, 1, 1, 1, -1;
  EXPECT_NEAR(incoherence_number(h), 1.0, 1e-12);
  Rng rng = make_rng(1);
  for (int t = 0; t < 10; ++t) EXPECT_GE(incoherence_number(gaussian(20, 4, rng)), 1.0 - 1e-12);
  try {
    incoherence_number(Matrix::Ones(4, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
  }
}

TEST(PartitionBound, ThreeWaySpecialization) {
  for (double n : {60.0, 180.0, 500.0})
    for (double k : {2.0, 5.0, 30.0}) {
      const double three_way = 3.0 / 32.0 * n / (k * std::log(3.0 * k / 0.1));
      EXPECT_NEAR(partition_success_bound(n, k, 3, 0.1), three_way, 1e-12 * three_way);
    }
  EXPECT_LT(partition_success_bound(100, 5, 3, 0.1), partition_success_bound(200, 5, 3, 0.1));
  EXPECT_NEAR(partition_success_bound(180, 30, 3, 0.1), 9.0 / 32.0 * 180 / (90 * std::log(900.0)), 1e-12);
}
