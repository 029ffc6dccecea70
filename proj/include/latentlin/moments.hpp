#pragma once

#include <optional>
#include <variant>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/model.hpp"
#include "latentlin/synth.hpp"

namespace latentlin {

/// Closed-form third moments: Triples(zeta) = M diag(mu_eta) diag(M^T zeta) M^T
/// + diag(mu_eps o zeta), the last term only for single-view models.
struct ClosedFormTriples {
  Matrix mixing;
  Vector mu_eta;
  Vector mu_eps;
};

/// Retained mean-centered samples (N x n).
struct SampleTriples {
  Matrix centered;
};

/// Retained documents; triples use three distinct word positions.
struct DocumentTriples {
  WordMatrix docs;
  Index vocabulary = 0;
};

struct MomentSet {
  Matrix pairs;
  std::variant<std::monostate, ClosedFormTriples, SampleTriples, DocumentTriples> triples;

  Index n() const { return pairs.rows(); }
  bool has_triples() const { return !std::holds_alternative<std::monostate>(triples); }
};

/// A E[hh^T] A^T, plus diag(sigma_eps^2) for single-view models.
inline Matrix population_pairs(const LatentLinearModel& model) {
  const Matrix& a = model.a.matrix();
  Matrix p = a * hidden_covariance(model) * a.transpose();
  if (model.single_view()) p.diagonal() += model.eps_variances();
  return symmetrize(p);
}

inline MomentSet population_moments(const LatentLinearModel& model) {
  MomentSet m;
  m.pairs = population_pairs(model);
  m.triples = ClosedFormTriples{model.mixing(), model.eta_third_moments(), model.eps_third_moments()};
  return m;
}

inline Matrix center_columns(const Matrix& samples) {
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  return samples.rowwise() - mean;
}

/// (1/N) sum (x - m)(x - m)^T.
inline Matrix empirical_pairs(const Matrix& samples) {
  if (samples.rows() < 2) fail(ErrorKind::InsufficientSamples, "need at least two samples");
  const Matrix xc = center_columns(samples);
  Matrix p = Matrix::Zero(samples.cols(), samples.cols());
  p.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose(), 1.0 / static_cast<double>(samples.rows()));
  return p.selfadjointView<Eigen::Lower>();
}

inline MomentSet empirical_moments(const Matrix& samples, bool retain_samples = true) {
  MomentSet m;
  m.pairs = empirical_pairs(samples);
  if (retain_samples) m.triples = SampleTriples{center_columns(samples)};
  return m;
}

inline Vector word_counts(const WordMatrix& docs, Index d, Index vocabulary) {
  Vector c = Vector::Zero(vocabulary);
  for (Index w = 0; w < docs.cols(); ++w) c(docs(d, w)) += 1.0;
  return c;
}

/// Cross-word moments E[x_1 x_2^T] averaged over ordered pairs of distinct positions.
inline Matrix document_pairs(const WordMatrix& docs, Index vocabulary) {
  const Index m = docs.cols();
  if (m < 2) fail(ErrorKind::InsufficientSamples, "documents need at least two words for pairs");
  if (docs.rows() < 1) fail(ErrorKind::InsufficientSamples, "no documents");
  Matrix p = Matrix::Zero(vocabulary, vocabulary);
  for (Index d = 0; d < docs.rows(); ++d) {
    const Vector c = word_counts(docs, d, vocabulary);
    p.noalias() += c * c.transpose();
    p.diagonal() -= c;
  }
  return p / (static_cast<double>(docs.rows()) * static_cast<double>(m) * static_cast<double>(m - 1));
}

inline MomentSet document_moments(const WordMatrix& docs, Index vocabulary) {
  MomentSet m;
  m.pairs = document_pairs(docs, vocabulary);
  m.triples = DocumentTriples{docs, vocabulary};
  return m;
}

/// Triples(zeta) = E[x_1 x_2^T <zeta, x_3>].
inline Matrix triples_project(const MomentSet& momset, const Vector& zeta) {
  if (zeta.size() != momset.n()) fail(ErrorKind::ShapeError, "zeta has the wrong length");
  if (!zeta.allFinite()) fail(ErrorKind::InvalidModel, "zeta must be finite");
  return std::visit(
      [&](const auto& src) -> Matrix {
        using T = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          fail(ErrorKind::NotAvailable, "moment set carries no third-order information");
        } else if constexpr (std::is_same_v<T, ClosedFormTriples>) {
          const Vector weights = src.mu_eta.cwiseProduct(src.mixing.transpose() * zeta);
          Matrix t = src.mixing * weights.asDiagonal() * src.mixing.transpose();
          if (src.mu_eps.size() == zeta.size()) t.diagonal() += src.mu_eps.cwiseProduct(zeta);
          return t;
        } else if constexpr (std::is_same_v<T, SampleTriples>) {
          const Vector proj = src.centered * zeta;
          const Matrix weighted = src.centered.array().colwise() * proj.array();
          return src.centered.transpose() * weighted / static_cast<double>(src.centered.rows());
        } else {
          const Index m = src.docs.cols();
          if (m < 3) fail(ErrorKind::NotAvailable, "documents need at least three words for triples");
          Matrix t = Matrix::Zero(src.vocabulary, src.vocabulary);
          for (Index d = 0; d < src.docs.rows(); ++d) {
            const Vector c = word_counts(src.docs, d, src.vocabulary);
            const Vector cz = c.cwiseProduct(zeta);
            const double s = c.dot(zeta);
            // Inclusion-exclusion over coinciding positions.
            t.noalias() += s * (c * c.transpose());
            t.diagonal() -= s * c;
            t.noalias() -= cz * c.transpose() + c * cz.transpose();
            t.diagonal() += 2.0 * cz;
          }
          const double norm = static_cast<double>(src.docs.rows()) * static_cast<double>(m) *
                              static_cast<double>(m - 1) * static_cast<double>(m - 2);
          return t / norm;
        }
      },
      momset.triples);
}

/// B = U_k diag(sqrt(lambda_1..k)) from the top-k eigenpairs, so B B^T is the
/// best rank-k PSD approximation of P.
inline Matrix matrix_sqrt_factor(const Matrix& p, Index k) {
  if (p.rows() != p.cols()) fail(ErrorKind::ShapeError, "matrix must be square");
  if (k < 1 || k > p.rows()) fail(ErrorKind::ShapeError, "k must lie in [1, n]");
  const SymEigen es = sym_eigen_desc(p);
  const double top = es.values(0);
  if (es.values(k - 1) < -1e-8 * std::abs(top)) fail(ErrorKind::NotPSD, "matrix has a negative leading eigenvalue");
  Matrix b = es.vectors.leftCols(k);
  for (Index j = 0; j < k; ++j) {
    const double lam = es.values(j) < 1e-12 * top ? 0.0 : es.values(j);
    b.col(j) *= std::sqrt(lam);
  }
  return b;
}

/// Position of the largest relative gap lambda_j / lambda_{j+1} among the top
/// max_k eigenvalues. Optional helper; nothing calls it implicitly.
inline Index estimate_rank_eigengap(const Matrix& p, Index max_k) {
  const SymEigen es = sym_eigen_desc(p);
  const Index limit = std::min<Index>(max_k, p.rows() - 1);
  Index best = 1;
  double best_ratio = 0.0;
  for (Index j = 0; j < limit; ++j) {
    const double lo = std::max(es.values(j + 1), 1e-300);
    const double ratio = es.values(j) / lo;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = j + 1;
    }
  }
  return best;
}

}  // namespace latentlin
