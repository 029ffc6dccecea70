#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/model.hpp"

namespace latentlin {

inline constexpr int kRegenerationBudget = 100;
inline constexpr int kRepairRounds = 10;
inline constexpr Index kSampleChunk = 2048;

/// Draws one centered noise value.
inline double draw_noise(const NoiseSpec& spec, Rng& rng) {
  const double s = spec.sigma();
  switch (spec.family) {
    case NoiseFamily::Exponential: {
      std::exponential_distribution<double> d(1.0 / s);
      return d(rng) - s;
    }
    case NoiseFamily::Poisson: {
      std::poisson_distribution<long> d(spec.variance);
      return static_cast<double>(d(rng)) - spec.variance;
    }
    case NoiseFamily::ChiSquared: {
      std::normal_distribution<double> d(0.0, 1.0);
      const double z = d(rng);
      return s / std::numbers::sqrt2 * (z * z - 1.0);
    }
    case NoiseFamily::Gaussian: {
      std::normal_distribution<double> d(0.0, s);
      return d(rng);
    }
  }
  return 0.0;
}

/// Entries nonzero with probability p, standard normal where nonzero. All-zero
/// rows and columns are redrawn (at most kRegenerationBudget redraws in total).
inline Matrix gen_bernoulli_gaussian(Index n, Index k, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::InvalidModel, "p must lie in (0, 1)");
  if (n < k) fail(ErrorKind::InvalidModel, "need n >= k");
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&] { return coin(rng) ? gauss(rng) : 0.0; };

  Matrix a(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) a(i, j) = draw();

  int redraws = 0;
  for (;;) {
    bool clean = true;
    for (Index i = 0; i < n; ++i) {
      if ((a.row(i).array() == 0.0).all()) {
        clean = false;
        if (++redraws > kRegenerationBudget) fail(ErrorKind::GenerationFailed, "retry budget exhausted");
        for (Index j = 0; j < k; ++j) a(i, j) = draw();
      }
    }
    for (Index j = 0; j < k; ++j) {
      if ((a.col(j).array() == 0.0).all()) {
        clean = false;
        if (++redraws > kRegenerationBudget) fail(ErrorKind::GenerationFailed, "retry budget exhausted");
        for (Index i = 0; i < n; ++i) a(i, j) = draw();
      }
    }
    if (clean) return a;
  }
}

/// Column holding the largest magnitude in row i (ties: smallest column).
inline Index row_argmax(const Matrix& a, Index i) {
  Index best = 0;
  for (Index j = 1; j < a.cols(); ++j)
    if (std::abs(a(i, j)) > std::abs(a(i, best))) best = j;
  return best;
}

/// Allows the one-ulp rounding left by enforce_row_gap's division.
inline bool satisfies_row_gap(const Matrix& a, double gamma) {
  for (Index i = 0; i < a.rows(); ++i) {
    const Index top = row_argmax(a, i);
    double second = 0.0;
    for (Index j = 0; j < a.cols(); ++j)
      if (j != top) second = std::max(second, std::abs(a(i, j)));
    if (second > (1.0 - gamma) * std::abs(a(i, top)) * (1.0 + 1e-12)) return false;
  }
  return true;
}

/// In each row, raises the largest-magnitude entry (keeping its sign) until
/// second_max / max <= 1 - gamma. Other entries are never touched.
inline Matrix enforce_row_gap(const Matrix& a, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::InvalidModel, "gamma must lie in (0, 1)");
  Matrix out = a;
  for (Index i = 0; i < a.rows(); ++i) {
    if ((a.row(i).array() == 0.0).all()) fail(ErrorKind::DegenerateRow, "row " + std::to_string(i) + " is zero");
    const Index top = row_argmax(a, i);
    double second = 0.0;
    for (Index j = 0; j < a.cols(); ++j)
      if (j != top) second = std::max(second, std::abs(a(i, j)));
    if (second > (1.0 - gamma) * std::abs(a(i, top))) {
      const double sign = a(i, top) < 0 ? -1.0 : 1.0;
      out(i, top) = sign * second / (1.0 - gamma);
    }
  }
  return out;
}

/// True when every column is the row maximum of at least one row.
inline bool satisfies_row_max_coverage(const Matrix& a) {
  std::vector<bool> covered(static_cast<std::size_t>(a.cols()), false);
  for (Index i = 0; i < a.rows(); ++i) covered[static_cast<std::size_t>(row_argmax(a, i))] = true;
  return std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
}

/// Makes every column the row maximum of some row by boosting one entry per
/// uncovered column just above its row maximum. Rows whose current owner is
/// covered elsewhere are preferred; ties are broken by a seeded shuffle.
inline Matrix ensure_column_row_max_coverage(const Matrix& a, std::uint64_t seed) {
  const Index n = a.rows();
  const Index k = a.cols();
  if (n < k) fail(ErrorKind::InvalidModel, "need n >= k");
  for (Index j = 0; j < k; ++j)
    if ((a.col(j).array() == 0.0).all()) fail(ErrorKind::DegenerateColumn, "column " + std::to_string(j) + " is zero");

  Matrix out = a;
  Rng rng = make_rng(seed);
  for (Index round = 0; round < n * k + 1; ++round) {
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) ++count[static_cast<std::size_t>(row_argmax(out, i))];
    Index missing = -1;
    for (Index j = 0; j < k && missing < 0; ++j)
      if (count[static_cast<std::size_t>(j)] == 0) missing = j;
    if (missing < 0) return out;

    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
      if (out(i, missing) != 0.0) rows.push_back(i);
    std::shuffle(rows.begin(), rows.end(), rng);
    Index pick = -1;
    double best_ratio = -1.0;
    bool best_safe = false;
    for (Index i : rows) {
      const double rowmax = std::abs(out(i, row_argmax(out, i)));
      const double ratio = std::abs(out(i, missing)) / rowmax;
      const bool safe = count[static_cast<std::size_t>(row_argmax(out, i))] >= 2;
      if ((safe && !best_safe) || (safe == best_safe && ratio > best_ratio)) {
        pick = i;
        best_ratio = ratio;
        best_safe = safe;
      }
    }
    const double rowmax = std::abs(out(pick, row_argmax(out, pick)));
    const double sign = out(pick, missing) < 0 ? -1.0 : 1.0;
    out(pick, missing) = sign * rowmax * 1.05;
  }
  fail(ErrorKind::GenerationFailed, "row-max coverage repair did not settle");
}

/// Bernoulli-Gaussian draw followed by alternating coverage and gap repair.
inline Matrix gen_planted_coefficients(Index n, Index k, double p, double gamma, std::uint64_t seed) {
  Matrix a = gen_bernoulli_gaussian(n, k, p, seed);
  for (int round = 0; round < kRepairRounds; ++round) {
    a = ensure_column_row_max_coverage(a, mix_seed(seed, 1000 + static_cast<std::uint64_t>(round)));
    a = enforce_row_gap(a, gamma);
    if (satisfies_row_max_coverage(a) && satisfies_row_gap(a, gamma)) return a;
  }
  fail(ErrorKind::GenerationFailed, "coverage and gap repair did not converge");
}

/// Strictly lower-triangular Bernoulli(p)-Gaussian DAG in the natural order.
inline Matrix gen_lower_triangular_dag(Index k, double p, std::uint64_t seed) {
  Rng rng = make_rng(seed, 7);
  std::bernoulli_distribution coin(p);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix lambda = Matrix::Zero(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index l = 0; l < j; ++l)
      if (coin(rng)) lambda(j, l) = gauss(rng);
  return lambda;
}

/// Noise specs with variances U[lo, hi] and families drawn uniformly from `families`.
inline std::vector<NoiseSpec> gen_noise(Index count, const std::vector<NoiseFamily>& families,
                                        std::uint64_t seed, double lo = 0.5, double hi = 1.0) {
  Rng rng = make_rng(seed, 11);
  std::uniform_real_distribution<double> var(lo, hi);
  std::uniform_int_distribution<std::size_t> fam(0, families.size() - 1);
  std::vector<NoiseSpec> out(static_cast<std::size_t>(count));
  for (auto& s : out) {
    s.variance = var(rng);
    s.family = families[fam(rng)];
  }
  return out;
}

/// N rows of x = A (I - Lambda)^{-1} eta + eps. Rows are produced in chunks
/// with per-chunk substreams of the seed, so output is independent of threading.
inline Matrix sample_single_view(const LatentLinearModel& model, Index count, std::uint64_t seed) {
  if (!model.single_view()) fail(ErrorKind::InvalidModel, "single-view sampling needs eps noise specs");
  const Index n = model.n();
  const Index k = model.k();
  const Matrix mt = model.mixing().transpose();
  Matrix x(count, n);
  const Index chunks = (count + kSampleChunk - 1) / kSampleChunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    const Index begin = static_cast<Index>(c) * kSampleChunk;
    const Index rows = std::min(kSampleChunk, count - begin);
    Matrix eta(rows, k);
    Matrix eps(rows, n);
    for (Index r = 0; r < rows; ++r) {
      for (Index j = 0; j < k; ++j) eta(r, j) = draw_noise(model.eta_noise[static_cast<std::size_t>(j)], rng);
      for (Index i = 0; i < n; ++i) eps(r, i) = draw_noise(model.eps_noise[static_cast<std::size_t>(i)], rng);
    }
    x.middleRows(begin, rows) = eta * mt + eps;
  });
  return x;
}

/// N draws of the deepest level of a hierarchical model.
inline Matrix sample_hierarchical(const HierarchicalModel& model, Index count, std::uint64_t seed) {
  model.validate();
  const std::size_t m = model.levels();
  const Matrix top_t = model.top_transfer().transpose();
  Matrix x(count, model.level_sizes.back());
  const Index chunks = (count + kSampleChunk - 1) / kSampleChunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    const Index begin = static_cast<Index>(c) * kSampleChunk;
    const Index rows = std::min(kSampleChunk, count - begin);
    auto noise_block = [&](const std::vector<NoiseSpec>& specs) {
      Matrix e(rows, static_cast<Index>(specs.size()));
      for (Index r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < specs.size(); ++j) e(r, static_cast<Index>(j)) = draw_noise(specs[j], rng);
      return e;
    };
    Matrix h = noise_block(model.noise[0]) * top_t;
    for (std::size_t i = 0; i + 1 < m; ++i) h = h * model.matrices[i].transpose() + noise_block(model.noise[i + 1]);
    x.middleRows(begin, rows) = h;
  });
  return x;
}

// ---------------------------------------------------------------------------
// Multi-view documents
// ---------------------------------------------------------------------------

using WordMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using TopicPrior = std::function<Vector(Rng&)>;

/// Topic mixtures drawn uniformly from the simplex.
inline TopicPrior uniform_simplex_prior(Index k) {
  return [k](Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    Vector h(k);
    for (Index j = 0; j < k; ++j) h(j) = e(rng);
    return Vector(h / h.sum());
  };
}

inline bool is_column_stochastic(const Matrix& a, double tol = 1e-9) {
  if ((a.array() < -tol).any()) return false;
  for (Index j = 0; j < a.cols(); ++j)
    if (std::abs(a.col(j).sum() - 1.0) > tol) return false;
  return true;
}

/// One row per document: for each word, a topic is drawn from the document's
/// mixture h and the word from that topic's column of A.
inline WordMatrix sample_documents(const Matrix& topic_word, const TopicPrior& prior, Index docs,
                                   Index words_per_doc, std::uint64_t seed) {
  if (!is_column_stochastic(topic_word)) fail(ErrorKind::NotStochastic, "columns of A must be probability vectors");
  if (words_per_doc < 1) fail(ErrorKind::InvalidModel, "documents need at least one word");
  const Index n = topic_word.rows();
  const Index k = topic_word.cols();
  std::vector<std::discrete_distribution<int>> word_given_topic;
  for (Index t = 0; t < k; ++t) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::max(0.0, topic_word(i, t));
    word_given_topic.emplace_back(w.begin(), w.end());
  }
  WordMatrix out(docs, words_per_doc);
  const Index chunks = (docs + kSampleChunk - 1) / kSampleChunk;
  for (Index c = 0; c < chunks; ++c) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(c));
    auto wgt = word_given_topic;
    const Index begin = c * kSampleChunk;
    const Index rows = std::min(kSampleChunk, docs - begin);
    for (Index d = begin; d < begin + rows; ++d) {
      const Vector h = prior(rng);
      std::discrete_distribution<int> topic(h.data(), h.data() + h.size());
      for (Index w = 0; w < words_per_doc; ++w) out(d, w) = wgt[static_cast<std::size_t>(topic(rng))](rng);
    }
  }
  return out;
}

}  // namespace latentlin
