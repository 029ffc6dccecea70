#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"

namespace latentlin {

/// For true column i: the estimated column that best explains it and the sign
/// that makes the pair positively correlated.
struct ColumnAlignment {
  std::vector<Index> match;
  std::vector<int> sign;
};

namespace detail {

inline void check_same_rows(const Matrix& a, const Matrix& a_hat) {
  if (a.rows() != a_hat.rows()) fail(ErrorKind::ShapeError, "matrices have different row counts");
  if (a_hat.cols() == 0 && a.cols() > 0) fail(ErrorKind::ShapeError, "estimate has no columns");
}

/// ||a_i||^2 - <a_i, b>^2 / ||b||^2, the residual after projecting a_i onto b.
inline double residual_sq(const Vector& a, const Vector& b) {
  const double bb = b.squaredNorm();
  if (bb == 0.0) return a.squaredNorm();
  const double ab = a.dot(b);
  return std::max(0.0, a.squaredNorm() - ab * ab / bb);
}

}  // namespace detail

inline ColumnAlignment align_columns(const Matrix& a, const Matrix& a_hat) {
  detail::check_same_rows(a, a_hat);
  ColumnAlignment out;
  for (Index i = 0; i < a.cols(); ++i) {
    Index best = 0;
    double best_res = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < a_hat.cols(); ++j) {
      const double res = detail::residual_sq(a.col(i), a_hat.col(j));
      if (res < best_res) {
        best_res = res;
        best = j;
      }
    }
    out.match.push_back(best);
    out.sign.push_back(a.col(i).dot(a_hat.col(best)) < 0 ? -1 : 1);
  }
  return out;
}

/// Columns of a_hat rearranged (and sign-flipped) to line up with a.
inline Matrix aligned_estimate(const Matrix& a_hat, const ColumnAlignment& al) {
  Matrix out(a_hat.rows(), static_cast<Index>(al.match.size()));
  for (std::size_t i = 0; i < al.match.size(); ++i)
    out.col(static_cast<Index>(i)) = al.sign[i] * a_hat.col(al.match[i]);
  return out;
}

/// Relative squared error after matching every true column to its best
/// estimated column independently. Estimated columns need not be unit norm;
/// the projection onto each one is optimal for any scaling.
inline double dist(const Matrix& a, const Matrix& a_hat) {
  if (a.rows() != a_hat.rows() || a.cols() != a_hat.cols())
    fail(ErrorKind::ShapeError, "dist needs matrices of equal shape");
  const double total = a.squaredNorm();
  if (total == 0.0) return 0.0;
  double sum = 0.0;
  for (Index i = 0; i < a.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < a_hat.cols(); ++j) best = std::min(best, detail::residual_sq(a.col(i), a_hat.col(j)));
    sum += best;
  }
  return sum / total;
}

struct SupportScores {
  std::optional<double> precision;  // undefined when the estimate has empty support
  double recall = 1.0;
};

/// Entries counted as nonzero when |x| > eps_zero * max|m|.
inline Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support_mask(const Matrix& m, double eps_zero) {
  const double cut = eps_zero * max_abs(m);
  return m.array().abs() > cut;
}

/// Edge precision and recall of an estimate already in the true labeling.
inline SupportScores support_scores(const Matrix& a, const Matrix& a_hat, double eps_zero = 1e-6) {
  if (a.rows() != a_hat.rows() || a.cols() != a_hat.cols())
    fail(ErrorKind::ShapeError, "support comparison needs matrices of equal shape");
  const auto truth = support_mask(a, eps_zero);
  const auto est = support_mask(a_hat, eps_zero);
  const double both = (truth && est).count();
  const double n_est = est.count();
  const double n_true = truth.count();
  SupportScores s;
  if (n_est > 0) s.precision = both / n_est;
  s.recall = n_true > 0 ? both / n_true : 1.0;
  return s;
}

/// Edge precision and recall after column alignment. A zero threshold counts
/// every nonzero estimated entry as an edge.
inline SupportScores support_precision_recall(const Matrix& a, const Matrix& a_hat, double eps_zero = 1e-6) {
  if (a.rows() != a_hat.rows() || a.cols() != a_hat.cols())
    fail(ErrorKind::ShapeError, "support comparison needs matrices of equal shape");
  return support_scores(a, aligned_estimate(a_hat, align_columns(a, a_hat)), eps_zero);
}

}  // namespace latentlin
