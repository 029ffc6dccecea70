#include <gtest/gtest.h>

#include "latentlin/moments.hpp"
#include "latentlin/synth.hpp"

using namespace latentlin;

namespace {

LatentLinearModel small_model(NoiseFamily eta, std::uint64_t seed) {
  return LatentLinearModel(CoefficientMatrix(gen_planted_coefficients(9, 3, 0.4, 0.5, seed)),
                           DagMatrix(gen_lower_triangular_dag(3, 0.6, seed)), gen_noise(3, {eta}, seed + 1),
                           gen_noise(9, {NoiseFamily::Exponential, NoiseFamily::Gaussian}, seed + 2));
}

}  // namespace

TEST(PopulationPairs, IdentityModel) {
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(3, 3)), DagMatrix(3),
                            {{NoiseFamily::Gaussian, 1}, {NoiseFamily::Gaussian, 1}, {NoiseFamily::Gaussian, 1}}, {});
  EXPECT_LT((population_pairs(m) - Matrix::Identity(3, 3)).norm(), 1e-15);
}

TEST(PopulationPairs, DiagonalExcessIsObservationNoise) {
  const LatentLinearModel m = small_model(NoiseFamily::Exponential, 1);
  const Matrix low = m.a.matrix() * hidden_covariance(m) * m.a.matrix().transpose();
  EXPECT_LT(((population_pairs(m) - low).diagonal() - m.eps_variances()).norm(), 1e-12);
}

TEST(EmpiricalPairs, HandArithmetic) {
  Matrix x(2, 2);
  x << 1, 0, -1, 0;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1;
  EXPECT_LT((empirical_pairs(x) - expect).norm(), 1e-15);
  EXPECT_LT(empirical_pairs(Matrix::Constant(5, 3, 2.0)).norm(), 1e-15);
}

TEST(Triples, ZeroDirection) {
  const MomentSet ms = population_moments(small_model(NoiseFamily::Exponential, 2));
  EXPECT_EQ(triples_project(ms, Vector::Zero(9)).norm(), 0.0);
}

TEST(Triples, IdentityMixingCoordinate) {
  const LatentLinearModel m(CoefficientMatrix(Matrix::Identity(3, 3)), DagMatrix(3),
                            gen_noise(3, {NoiseFamily::Exponential}, 1), {});
  const Matrix t = triples_project(population_moments(m), Vector::Unit(3, 0));
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = m.eta_third_moments()(0);
  EXPECT_LT((t - expect).norm(), 1e-14);
}

TEST(Triples, MissingThirdMomentsIsNotAvailable) {
  MomentSet ms;
  ms.pairs = Matrix::Identity(2, 2);
  try {
    triples_project(ms, Vector::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotAvailable);
  }
}

// The closed form is checked against brute-force tensor contraction of
// sample third moments, not against the estimator's own fast path.
TEST(Triples, ClosedFormMatchesMonteCarlo) {
  const LatentLinearModel m = small_model(NoiseFamily::Exponential, 3);
  const Matrix x = sample_single_view(m, 1000000, 9);
  const Matrix xc = x.rowwise() - x.colwise().mean();
  Rng rng = make_rng(5);
  std::normal_distribution<double> g;
  Vector zeta(9);
  for (Index i = 0; i < 9; ++i) zeta(i) = g(rng);
  Matrix brute = Matrix::Zero(9, 9);
  for (Index r = 0; r < xc.rows(); ++r) {
    const Vector v = xc.row(r).transpose();
    brute.noalias() += v.dot(zeta) * v * v.transpose();
  }
  brute /= static_cast<double>(xc.rows());
  const Matrix closed = triples_project(population_moments(m), zeta);
  EXPECT_LT((brute - closed).norm() / closed.norm(), 0.05);
  const Matrix fast = triples_project(empirical_moments(x), zeta);
  EXPECT_LT((fast - brute).norm() / brute.norm(), 1e-10);
}

TEST(Documents, PairsAndTriplesConverge) {
  const Index k = 3;
  Matrix a(6, k);
  a << 0.4, 0.0, 0.1, 0.3, 0.1, 0.0, 0.2, 0.4, 0.1, 0.1, 0.3, 0.0, 0.0, 0.2, 0.3, 0.0, 0.0, 0.5;
  const WordMatrix docs = sample_documents(a, uniform_simplex_prior(k), 200000, 4, 1);
  const MomentSet ms = document_moments(docs, 6);
  // Flat Dirichlet moments: E[h h^T] = (I + 1 1^T) / (k (k + 1)).
  const Matrix hh = (Matrix::Identity(k, k) + Matrix::Ones(k, k)) / double(k * (k + 1));
  const Matrix pairs = a * hh * a.transpose();
  EXPECT_LT((ms.pairs - pairs).norm() / pairs.norm(), 0.03);

  // E[h_a h_b h_c] = (1 + [a=b] + [b=c] + [a=c] + 2[a=b=c]) / (k (k+1) (k+2)).
  const Vector zeta = Vector::LinSpaced(6, -1.0, 1.5);
  const Vector u = a.transpose() * zeta;
  Matrix inner = Matrix::Zero(k, k);
  for (Index x = 0; x < k; ++x)
    for (Index y = 0; y < k; ++y)
      for (Index z = 0; z < k; ++z) {
        const double e = (1.0 + (x == y) + (y == z) + (x == z) + 2.0 * (x == y && y == z)) / double(k * (k + 1) * (k + 2));
        inner(x, y) += e * u(z);
      }
  const Matrix triples = a * inner * a.transpose();
  EXPECT_LT((triples_project(ms, zeta) - triples).norm() / triples.norm(), 0.05);
}

TEST(SqrtFactor, Examples) {
  const Matrix b = matrix_sqrt_factor(4.0 * Matrix::Identity(2, 2), 2);
  EXPECT_LT((b * b.transpose() - 4.0 * Matrix::Identity(2, 2)).norm(), 1e-12);
  Vector v(3);
  v << 1, -2, 2;
  const Matrix b1 = matrix_sqrt_factor(v * v.transpose(), 1);
  EXPECT_LT(std::min((b1.col(0) - v).norm(), (b1.col(0) + v).norm()), 1e-12);
  Rng rng = make_rng(3);
  std::normal_distribution<double> g;
  Matrix f(10, 4);
  for (Index i = 0; i < f.size(); ++i) f(i) = g(rng);
  const Matrix p = f * f.transpose();
  const Matrix bp = matrix_sqrt_factor(p, 4);
  EXPECT_LT((bp * bp.transpose() - p).norm(), 1e-10);
}

TEST(RankEstimate, FindsPlantedRank) {
  const LatentLinearModel m = small_model(NoiseFamily::Exponential, 4);
  const Matrix low = m.a.matrix() * hidden_covariance(m) * m.a.matrix().transpose();
  EXPECT_EQ(estimate_rank_eigengap(low + 1e-9 * Matrix::Identity(9, 9), 6), 3);
}
