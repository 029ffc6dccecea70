#include <gtest/gtest.h>

#include <cmath>

#include "latentlin/moments.hpp"
#include "latentlin/synth.hpp"

using namespace latentlin;

TEST(BernoulliGaussian, DensityConcentrates) {
  double total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) total += (gen_bernoulli_gaussian(30, 5, 0.3, s).array() != 0.0).cast<double>().mean();
  const double mean = total / 100;
  EXPECT_GE(mean, 0.2);
  EXPECT_LE(mean, 0.4);
  // Redrawing empty rows conditions each row on being nonzero.
  EXPECT_NEAR(mean, 0.3 / (1.0 - std::pow(0.7, 5)), 0.01);
}

TEST(BernoulliGaussian, HighDensityAndDeterminism) {
  const Matrix a = gen_bernoulli_gaussian(30, 5, 0.999, 1);
  EXPECT_GT((a.array() != 0.0).cast<double>().mean(), 0.97);
  EXPECT_EQ(gen_bernoulli_gaussian(10, 3, 0.3, 9), gen_bernoulli_gaussian(10, 3, 0.3, 9));
}

TEST(RowGap, BoundaryUnchanged) {
  Matrix a(1, 2);
  a << 2, 1;
  EXPECT_EQ(enforce_row_gap(a, 0.5), a);
}

TEST(RowGap, RaisesMaximum) {
  Matrix a(1, 2);
  a << 1.2, 1;
  const Matrix b = enforce_row_gap(a, 0.5);
  EXPECT_DOUBLE_EQ(b(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(b(0, 1), 1.0);
}

TEST(RowGap, KeepsSignAndSingleEntryRows) {
  Matrix a(2, 3);
  a << 0, 3, 0, -1.0, 0.9, 0;
  const Matrix b = enforce_row_gap(a, 0.5);
  EXPECT_EQ(b.row(0), a.row(0));
  EXPECT_DOUBLE_EQ(b(1, 0), -1.8);
}

TEST(RowGap, PredicateHoldsForEveryGamma) {
  for (double g : {0.1, 0.3, 0.5, 0.7, 0.9})
    for (std::uint64_t s = 0; s < 20; ++s) EXPECT_TRUE(satisfies_row_gap(enforce_row_gap(gen_bernoulli_gaussian(20, 4, 0.5, s), g), g));
}

TEST(Coverage, IdentityUnchanged) {
  EXPECT_EQ(ensure_column_row_max_coverage(Matrix::Identity(3, 3), 0), Matrix(Matrix::Identity(3, 3)));
}

TEST(Coverage, BoostsUncoveredColumn) {
  Matrix a(2, 2);
  a << 1, 0.5, 1, 0.5;
  EXPECT_FALSE(satisfies_row_max_coverage(a));
  EXPECT_TRUE(satisfies_row_max_coverage(ensure_column_row_max_coverage(a, 3)));
}

TEST(Coverage, PropertyOverSeeds) {
  for (std::uint64_t s = 0; s < 50; ++s)
    EXPECT_TRUE(satisfies_row_max_coverage(ensure_column_row_max_coverage(gen_bernoulli_gaussian(15, 5, 0.4, s), s)));
}

TEST(PlantedCoefficients, MeetBothPredicates) {
  for (double g : {0.3, 0.5, 0.7})
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Matrix a = gen_planted_coefficients(30, 5, 0.3, g, s);
      EXPECT_TRUE(satisfies_row_gap(a, g));
      EXPECT_TRUE(satisfies_row_max_coverage(a));
    }
}

TEST(SingleView, IdentityModelCovariance) {
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(3, 3)), DagMatrix(3),
                            gen_noise(3, {NoiseFamily::Exponential}, 4),
                            gen_noise(3, {NoiseFamily::Gaussian}, 5, 1e-12, 2e-12));
  const Matrix p = empirical_pairs(sample_single_view(m, 200000, 1));
  EXPECT_LT((p - Matrix(m.eta_variances().asDiagonal())).norm(), 0.02);
}

TEST(SingleView, MatchesPopulationPairs) {
  const LatentLinearModel m(CoefficientMatrix(gen_planted_coefficients(9, 3, 0.4, 0.5, 2)),
                            DagMatrix(gen_lower_triangular_dag(3, 0.5, 2)),
                            gen_noise(3, {NoiseFamily::Exponential, NoiseFamily::Poisson}, 3),
                            gen_noise(9, {NoiseFamily::Gaussian, NoiseFamily::ChiSquared}, 4));
  const Matrix emp = empirical_pairs(sample_single_view(m, 100000, 6));
  const Matrix pop = population_pairs(m);
  EXPECT_LT((emp - pop).norm() / pop.norm(), 0.05);
}

TEST(SingleView, Deterministic) {
  const LatentLinearModel m(CoefficientMatrix(gen_planted_coefficients(9, 3, 0.4, 0.5, 2)), DagMatrix(3),
                            gen_noise(3, {NoiseFamily::Exponential}, 3), gen_noise(9, {NoiseFamily::Gaussian}, 4));
  EXPECT_EQ(sample_single_view(m, 5000, 11), sample_single_view(m, 5000, 11));
}

TEST(Documents, SingleTopicMarginal) {
  Matrix a(4, 1);
  a << 0.1, 0.2, 0.3, 0.4;
  const WordMatrix docs = sample_documents(a, uniform_simplex_prior(1), 100000, 3, 2);
  Vector freq = Vector::Zero(4);
  for (Index d = 0; d < docs.rows(); ++d) freq(docs(d, 0)) += 1;
  freq /= static_cast<double>(docs.rows());
  // Chi-square statistic with 3 degrees of freedom; 16.27 is the 0.999 quantile.
  double chi2 = 0;
  for (Index i = 0; i < 4; ++i) chi2 += 100000 * std::pow(freq(i) - a(i, 0), 2) / a(i, 0);
  EXPECT_LT(chi2, 16.27);
}

TEST(Documents, RejectsNonStochastic) {
  Matrix a(2, 1);
  a << 0.5, 0.6;
  try {
    sample_documents(a, uniform_simplex_prior(1), 10, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotStochastic);
  }
}

TEST(Hierarchical, CovarianceMatchesSamples) {
  HierarchicalModel h;
  h.level_sizes = {2, 6};
  h.matrices = {gen_planted_coefficients(6, 2, 0.6, 0.5, 1)};
  h.noise = {gen_noise(2, {NoiseFamily::Exponential}, 1), gen_noise(6, {NoiseFamily::Poisson}, 2)};
  const Matrix emp = empirical_pairs(sample_hierarchical(h, 100000, 3));
  EXPECT_LT((emp - h.observed_covariance()).norm() / h.observed_covariance().norm(), 0.05);
}
