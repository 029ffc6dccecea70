#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"

namespace latentlin {

// ---------------------------------------------------------------------------
// Noise distributions
// ---------------------------------------------------------------------------

enum class NoiseFamily { Exponential, Poisson, ChiSquared, Gaussian };

inline std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::Exponential: return "exponential";
    case NoiseFamily::Poisson: return "poisson";
    case NoiseFamily::ChiSquared: return "chi-squared";
    case NoiseFamily::Gaussian: return "gaussian";
  }
  return "?";
}

inline NoiseFamily noise_family_from_string(std::string_view s) {
  if (s == "exponential" || s == "exp") return NoiseFamily::Exponential;
  if (s == "poisson") return NoiseFamily::Poisson;
  if (s == "chi-squared" || s == "chi2" || s == "chisquared") return NoiseFamily::ChiSquared;
  if (s == "gaussian" || s == "normal") return NoiseFamily::Gaussian;
  fail(ErrorKind::ParseError, "unknown noise family '" + std::string(s) + "'");
}

/// Additive noise with a given variance. Samples are always centered, so the
/// raw family mean only matters to the sampler.
///
///   exponential  Exp(rate 1/sigma)        third central moment 2 sigma^3
///   poisson      Poisson(sigma^2)          third central moment sigma^2
///   chi-squared  (sigma/sqrt 2) chi^2_1    third central moment 2 sqrt(2) sigma^3
///   gaussian     N(0, sigma^2)             third central moment 0
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::Gaussian;
  double variance = 1.0;

  double sigma() const { return std::sqrt(variance); }

  /// Mean of the uncentered family draw.
  double raw_mean() const {
    const double s = sigma();
    switch (family) {
      case NoiseFamily::Exponential: return s;
      case NoiseFamily::Poisson: return variance;
      case NoiseFamily::ChiSquared: return s / std::numbers::sqrt2;
      case NoiseFamily::Gaussian: return 0.0;
    }
    return 0.0;
  }

  double third_moment() const {
    const double s = sigma();
    switch (family) {
      case NoiseFamily::Exponential: return 2.0 * s * s * s;
      case NoiseFamily::Poisson: return variance;
      case NoiseFamily::ChiSquared: return 2.0 * std::numbers::sqrt2 * s * s * s;
      case NoiseFamily::Gaussian: return 0.0;
    }
    return 0.0;
  }

  double skewness() const { return third_moment() / (variance * sigma()); }

  bool operator==(const NoiseSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Coefficient matrices
// ---------------------------------------------------------------------------

/// n x k matrix mapping k hidden (parent) nodes to n observed (child) nodes.
/// Construction enforces n >= k and that every column has a nonzero entry.
class CoefficientMatrix {
 public:
  CoefficientMatrix() = default;
  explicit CoefficientMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < entries_.cols())
      fail(ErrorKind::InvalidModel, "coefficient matrix needs n >= k");
    for (Index j = 0; j < entries_.cols(); ++j)
      if ((entries_.col(j).array() == 0.0).all())
        fail(ErrorKind::DegenerateColumn, "column " + std::to_string(j) + " is zero");
  }

  const Matrix& matrix() const noexcept { return entries_; }
  Index n() const noexcept { return entries_.rows(); }
  Index k() const noexcept { return entries_.cols(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Scales every column to unit norm and flips its sign so the largest-magnitude
/// entry is positive (ties go to the smallest row index). Columns already of
/// unit norm up to rounding are left unscaled, which makes the map idempotent.
inline Matrix canonicalize(const Matrix& a) {
  Matrix out = a;
  for (Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (norm == 0.0) fail(ErrorKind::DegenerateColumn, "column " + std::to_string(j) + " is zero");
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < a.rows(); ++i) {
      if (std::abs(a(i, j)) > best) {
        best = std::abs(a(i, j));
        arg = i;
      }
    }
    const double sign = a(arg, j) < 0 ? -1.0 : 1.0;
    if (std::abs(norm - 1.0) <= 8 * std::numeric_limits<double>::epsilon()) {
      if (sign < 0) out.col(j) = -a.col(j);
    } else {
      out.col(j) = a.col(j) * (sign / norm);
    }
  }
  return out;
}

inline CoefficientMatrix canonicalize(const CoefficientMatrix& a) {
  return CoefficientMatrix(canonicalize(a.matrix()));
}

/// Topological order of the graph with an edge l -> j whenever m(j, l) != 0,
/// smallest available index first. Empty optional when the graph has a cycle.
inline std::optional<std::vector<Index>> topological_order(const Matrix& m) {
  const Index k = m.rows();
  std::vector<int> indeg(static_cast<std::size_t>(k), 0);
  for (Index j = 0; j < k; ++j)
    for (Index l = 0; l < k; ++l)
      if (m(j, l) != 0.0) ++indeg[static_cast<std::size_t>(j)];
  std::priority_queue<Index, std::vector<Index>, std::greater<>> ready;
  for (Index j = 0; j < k; ++j)
    if (indeg[static_cast<std::size_t>(j)] == 0) ready.push(j);
  std::vector<Index> order;
  while (!ready.empty()) {
    const Index l = ready.top();
    ready.pop();
    order.push_back(l);
    for (Index j = 0; j < k; ++j)
      if (m(j, l) != 0.0 && --indeg[static_cast<std::size_t>(j)] == 0) ready.push(j);
  }
  if (static_cast<Index>(order.size()) != k) return std::nullopt;
  return order;
}

/// Weighted DAG among hidden nodes: entry (j, l) is the weight of edge l -> j.
/// `ordering` lists nodes parents-first, so the matrix is strictly lower
/// triangular once rows and columns are permuted by it.
class DagMatrix {
 public:
  DagMatrix() = default;
  explicit DagMatrix(Index k) : entries_(Matrix::Zero(k, k)), ordering_(identity(k)) {}

  explicit DagMatrix(Matrix entries, std::optional<std::vector<Index>> ordering = std::nullopt)
      : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) fail(ErrorKind::InvalidModel, "DAG matrix must be square");
    for (Index j = 0; j < entries_.rows(); ++j)
      if (entries_(j, j) != 0.0) fail(ErrorKind::InvalidModel, "DAG matrix must have a zero diagonal");
    if (ordering) {
      validate_ordering(*ordering);
      ordering_ = std::move(*ordering);
    } else {
      auto order = topological_order(entries_);
      if (!order) fail(ErrorKind::InvalidModel, "lambda support contains a directed cycle");
      ordering_ = std::move(*order);
    }
  }

  const Matrix& matrix() const noexcept { return entries_; }
  const std::vector<Index>& ordering() const noexcept { return ordering_; }
  Index k() const noexcept { return entries_.rows(); }

  /// The matrix with rows and columns in topological order.
  Matrix ordered() const { return permute(entries_, ordering_, ordering_); }

 private:
  static std::vector<Index> identity(Index k) {
    std::vector<Index> v(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  }

  void validate_ordering(const std::vector<Index>& order) const {
    const Index k = entries_.rows();
    if (static_cast<Index>(order.size()) != k) fail(ErrorKind::InvalidModel, "ordering has wrong length");
    std::vector<Index> pos(static_cast<std::size_t>(k), -1);
    for (std::size_t p = 0; p < order.size(); ++p) {
      const Index node = order[p];
      if (node < 0 || node >= k || pos[static_cast<std::size_t>(node)] != -1)
        fail(ErrorKind::InvalidModel, "ordering is not a permutation");
      pos[static_cast<std::size_t>(node)] = static_cast<Index>(p);
    }
    for (Index j = 0; j < k; ++j)
      for (Index l = 0; l < k; ++l)
        if (entries_(j, l) != 0.0 && pos[static_cast<std::size_t>(l)] >= pos[static_cast<std::size_t>(j)])
          fail(ErrorKind::InvalidModel, "ordering is not topological for lambda");
  }

  Matrix entries_;
  std::vector<Index> ordering_;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// x = A h + eps, h = Lambda h + eta. An empty eps_noise marks the multi-view
/// (exchangeable document) flavor, whose cross moments carry no observation noise.
struct LatentLinearModel {
  CoefficientMatrix a;
  DagMatrix lambda;
  std::vector<NoiseSpec> eta_noise;
  std::vector<NoiseSpec> eps_noise;

  LatentLinearModel() = default;
  LatentLinearModel(CoefficientMatrix a_, DagMatrix lambda_, std::vector<NoiseSpec> eta,
                    std::vector<NoiseSpec> eps)
      : a(std::move(a_)), lambda(std::move(lambda_)), eta_noise(std::move(eta)), eps_noise(std::move(eps)) {
    validate();
  }

  Index n() const { return a.n(); }
  Index k() const { return a.k(); }
  bool single_view() const { return !eps_noise.empty(); }

  void validate() const {
    if (lambda.k() != a.k()) fail(ErrorKind::InvalidModel, "lambda must be k x k");
    if (static_cast<Index>(eta_noise.size()) != a.k()) fail(ErrorKind::InvalidModel, "need k eta noise specs");
    if (!eps_noise.empty() && static_cast<Index>(eps_noise.size()) != a.n())
      fail(ErrorKind::InvalidModel, "need n eps noise specs (or none)");
    for (const auto& s : eta_noise)
      if (!(s.variance > 0)) fail(ErrorKind::InvalidModel, "noise variances must be positive");
    for (const auto& s : eps_noise)
      if (!(s.variance > 0)) fail(ErrorKind::InvalidModel, "noise variances must be positive");
  }

  /// (I - Lambda)^{-1}; the map from hidden noise to hidden variables.
  Matrix hidden_transfer() const {
    const Index k = a.k();
    return (Matrix::Identity(k, k) - lambda.matrix()).fullPivLu().inverse();
  }

  /// M = A (I - Lambda)^{-1}.
  Matrix mixing() const { return a.matrix() * hidden_transfer(); }

  Vector eta_variances() const {
    Vector v(a.k());
    for (Index j = 0; j < a.k(); ++j) v(j) = eta_noise[static_cast<std::size_t>(j)].variance;
    return v;
  }
  Vector eta_third_moments() const {
    Vector v(a.k());
    for (Index j = 0; j < a.k(); ++j) v(j) = eta_noise[static_cast<std::size_t>(j)].third_moment();
    return v;
  }
  Vector eps_variances() const {
    Vector v = Vector::Zero(static_cast<Index>(eps_noise.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = eps_noise[static_cast<std::size_t>(i)].variance;
    return v;
  }
  Vector eps_third_moments() const {
    Vector v = Vector::Zero(static_cast<Index>(eps_noise.size()));
    for (Index i = 0; i < v.size(); ++i) v(i) = eps_noise[static_cast<std::size_t>(i)].third_moment();
    return v;
  }
};

/// E[h h^T] = (I - Lambda)^{-1} diag(sigma_eta^2) (I - Lambda)^{-T}.
inline Matrix hidden_covariance(const LatentLinearModel& model) {
  const Matrix g = model.hidden_transfer();
  return symmetrize(g * model.eta_variances().asDiagonal() * g.transpose());
}

/// The model re-expressed with A in canonical form: hidden node j is rescaled
/// by s_j * ||A e_j|| (s_j the canonical sign), which conjugates Lambda.
inline Matrix canonical_lambda(const LatentLinearModel& model) {
  const Matrix& a = model.a.matrix();
  const Matrix ac = canonicalize(a);
  Vector scale(a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    Index i = 0;
    a.col(j).cwiseAbs().maxCoeff(&i);
    scale(j) = a(i, j) / ac(i, j);
  }
  return scale.asDiagonal() * model.lambda.matrix() * scale.cwiseInverse().asDiagonal();
}

/// Levels L_1..L_m; matrices[i] maps level i to level i+1 (n_{i+1} x n_i).
/// noise[0] drives the top level (through top_lambda, zero for the
/// independent case); noise[i] is the additive noise of level i+1.
struct HierarchicalModel {
  std::vector<Index> level_sizes;
  std::vector<Matrix> matrices;
  std::vector<std::vector<NoiseSpec>> noise;
  Matrix top_lambda;

  std::size_t levels() const { return level_sizes.size(); }

  void validate() const {
    const std::size_t m = level_sizes.size();
    if (m < 2) fail(ErrorKind::InvalidModel, "hierarchy needs at least two levels");
    if (matrices.size() != m - 1) fail(ErrorKind::InvalidModel, "need m-1 coefficient matrices");
    if (noise.size() != m) fail(ErrorKind::InvalidModel, "need one noise list per level");
    for (std::size_t i = 0; i + 1 < m; ++i) {
      if (matrices[i].rows() != level_sizes[i + 1] || matrices[i].cols() != level_sizes[i])
        fail(ErrorKind::InvalidModel, "matrix " + std::to_string(i + 1) + " has the wrong shape");
      CoefficientMatrix check(matrices[i]);
      (void)check;
    }
    for (std::size_t i = 0; i < m; ++i)
      if (static_cast<Index>(noise[i].size()) != level_sizes[i])
        fail(ErrorKind::InvalidModel, "noise list " + std::to_string(i + 1) + " has the wrong length");
    if (top_lambda.size() != 0) DagMatrix check(top_lambda);
  }

  Matrix top_transfer() const {
    const Index n1 = level_sizes.front();
    if (top_lambda.size() == 0) return Matrix::Identity(n1, n1);
    return (Matrix::Identity(n1, n1) - top_lambda).fullPivLu().inverse();
  }

  static Vector variances(const std::vector<NoiseSpec>& specs) {
    Vector v(static_cast<Index>(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) v(static_cast<Index>(i)) = specs[i].variance;
    return v;
  }

  /// Population second moment of the variables at level `level` (0-based).
  Matrix level_covariance(std::size_t level) const {
    const Matrix g = top_transfer();
    Matrix cov = g * variances(noise[0]).asDiagonal() * g.transpose();
    for (std::size_t i = 0; i < level; ++i) {
      cov = matrices[i] * cov * matrices[i].transpose();
      cov.diagonal() += variances(noise[i + 1]);
    }
    return symmetrize(cov);
  }

  Matrix observed_covariance() const { return level_covariance(level_sizes.size() - 1); }
};

}  // namespace latentlin
