#include <gtest/gtest.h>

#include <cmath>

#include "latentlin/model.hpp"
#include "latentlin/synth.hpp"

using namespace latentlin;

TEST(Canonicalize, DiagonalScaling) {
  Matrix a(2, 2);
  a << 2, 0, 0, 3;
  EXPECT_LT((canonicalize(a) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Canonicalize, SignFlip) {
  Matrix a(2, 2);
  a << -1, 0, 0, 1;
  EXPECT_LT((canonicalize(a) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Canonicalize, HandComputedNorms) {
  Matrix a(3, 2);
  a << 1, 1, 1, 0, 0, 1;
  Matrix expect = a / std::sqrt(2.0);
  EXPECT_LT((canonicalize(a) - expect).norm(), 1e-15);
}

TEST(Canonicalize, IsIdempotent) {
  const Matrix a = gen_bernoulli_gaussian(10, 3, 0.5, 4);
  const Matrix c = canonicalize(a);
  EXPECT_LT((canonicalize(c) - c).norm(), 1e-15);
}

TEST(CoefficientMatrix, RejectsZeroColumn) {
  Matrix a = Matrix::Zero(3, 2);
  a(0, 0) = 1;
  EXPECT_THROW(CoefficientMatrix{a}, Error);
  try {
    CoefficientMatrix c(a);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateColumn);
  }
}

TEST(DagMatrix, RejectsCycleAndBadOrdering) {
  Matrix cyc(2, 2);
  cyc << 0, 1, 1, 0;
  EXPECT_THROW(DagMatrix{cyc}, Error);
  Matrix lam(2, 2);
  lam << 0, 0, 0.5, 0;
  EXPECT_NO_THROW(DagMatrix(lam, std::vector<Index>{0, 1}));
  EXPECT_THROW(DagMatrix(lam, std::vector<Index>{1, 0}), Error);
}

TEST(DagMatrix, OrderedIsStrictlyLower) {
  const Matrix lam = gen_lower_triangular_dag(6, 0.5, 3);
  std::vector<Index> perm{3, 1, 5, 0, 2, 4};
  const Matrix shuffled = permute(lam, perm, perm);
  const DagMatrix d(shuffled);
  const Matrix o = d.ordered();
  EXPECT_EQ(Matrix(o.triangularView<Eigen::Upper>()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(HiddenCovariance, IndependentCase) {
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(2, 2)), DagMatrix(2),
                            {{NoiseFamily::Gaussian, 1.0}, {NoiseFamily::Gaussian, 1.0}}, {});
  EXPECT_LT((hidden_covariance(m) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(HiddenCovariance, TwoNodeChain) {
  Matrix lam(2, 2);
  lam << 0, 0, 0.5, 0;
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(2, 2)), DagMatrix(lam),
                            {{NoiseFamily::Gaussian, 1.0}, {NoiseFamily::Gaussian, 1.0}}, {});
  Matrix expect(2, 2);
  expect << 1, 0.5, 0.5, 1.25;
  EXPECT_LT((hidden_covariance(m) - expect).norm(), 1e-15);
}

TEST(HiddenCovariance, MatchesMonteCarlo) {
  Matrix lam(3, 3);
  lam << 0, 0, 0, 0.8, 0, 0, -0.4, 0.6, 0;
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(3, 3)), DagMatrix(lam),
                            gen_noise(3, {NoiseFamily::Exponential}, 1), gen_noise(3, {NoiseFamily::Gaussian}, 2, 1e-12, 2e-12));
  const Matrix x = sample_single_view(m, 200000, 5);
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix emp = xc.transpose() * xc / static_cast<double>(x.rows());
  EXPECT_LT((emp - hidden_covariance(m)).norm() / hidden_covariance(m).norm(), 0.03);
}

TEST(NoiseSpec, ThirdMomentsAgainstSampling) {
  // Third central moments checked against Monte Carlo draws of each family.
  for (auto fam : {NoiseFamily::Exponential, NoiseFamily::Poisson, NoiseFamily::ChiSquared}) {
    const NoiseSpec s{fam, 0.7};
    Rng rng = make_rng(42, static_cast<std::uint64_t>(fam));
    const int n = 400000;
    std::vector<double> v(n);
    double mean = 0;
    for (auto& x : v) mean += (x = draw_noise(s, rng));
    mean /= n;
    double m2 = 0, m3 = 0;
    for (double x : v) {
      m2 += (x - mean) * (x - mean);
      m3 += std::pow(x - mean, 3);
    }
    EXPECT_NEAR(m2 / n, s.variance, 0.02) << to_string(fam);
    EXPECT_NEAR(m3 / n, s.third_moment(), 0.1 * std::abs(s.third_moment())) << to_string(fam);
  }
  EXPECT_EQ((NoiseSpec{NoiseFamily::Gaussian, 2.0}.third_moment()), 0.0);
}

TEST(HierarchicalModel, ValidatesShapes) {
  HierarchicalModel h;
  h.level_sizes = {2, 6};
  h.matrices = {Matrix::Ones(6, 2)};
  h.noise = {gen_noise(2, {NoiseFamily::Gaussian}, 0), gen_noise(6, {NoiseFamily::Gaussian}, 1)};
  EXPECT_NO_THROW(h.validate());
  h.matrices = {Matrix::Ones(5, 2)};
  EXPECT_THROW(h.validate(), Error);
}
