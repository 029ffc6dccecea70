#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latentlin/decomp.hpp"
#include "latentlin/eca.hpp"
#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/metrics.hpp"
#include "latentlin/model.hpp"
#include "latentlin/moments.hpp"
#include "latentlin/recovery.hpp"

namespace latentlin {

struct Triangularization {
  Matrix c_tilde;                // c_tilde(a, b) = C(row_perm[a], col_perm[b])
  std::vector<Index> row_perm;
  std::vector<Index> col_perm;
  bool approximate = false;
};

/// Peels rows with exactly one entry above eps_zero * max|C| among the
/// remaining columns. Each such row takes the next label and its nonzero
/// column the matching column label; rows are visited by increasing index.
inline Triangularization triangularize(const Matrix& c, double eps_zero = 1e-5) {
  const Index k = c.rows();
  if (c.cols() != k) fail(ErrorKind::ShapeError, "matrix must be square");
  const double cut = eps_zero * max_abs(c);
  std::vector<bool> row_done(static_cast<std::size_t>(k), false), col_done(static_cast<std::size_t>(k), false);
  Triangularization out;
  while (static_cast<Index>(out.row_perm.size()) < k) {
    std::vector<std::pair<Index, Index>> peel;
    for (Index r = 0; r < k; ++r) {
      if (row_done[static_cast<std::size_t>(r)]) continue;
      Index count = 0, where = -1;
      for (Index j = 0; j < k; ++j)
        if (!col_done[static_cast<std::size_t>(j)] && std::abs(c(r, j)) > cut) {
          ++count;
          where = j;
        }
      if (count == 1) peel.emplace_back(r, where);
    }
    if (peel.empty()) fail(ErrorKind::NotTriangulable, "no row with a single nonzero entry remains");
    for (const auto& [r, j] : peel) {
      if (col_done[static_cast<std::size_t>(j)])
        fail(ErrorKind::NotTriangulable, "two rows share their only nonzero column");
      row_done[static_cast<std::size_t>(r)] = col_done[static_cast<std::size_t>(j)] = true;
      out.row_perm.push_back(r);
      out.col_perm.push_back(j);
    }
  }
  out.c_tilde = permute(c, out.row_perm, out.col_perm);
  return out;
}

/// Fallback ordering for matrices that are only approximately triangular:
/// repeatedly takes the remaining row whose mass outside its dominant
/// remaining column is smallest.
inline Triangularization triangularize_greedy(const Matrix& c) {
  const Index k = c.rows();
  std::vector<bool> row_done(static_cast<std::size_t>(k), false), col_done(static_cast<std::size_t>(k), false);
  Triangularization out;
  out.approximate = true;
  for (Index step = 0; step < k; ++step) {
    Index best_r = -1, best_c = -1;
    double best_mass = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < k; ++r) {
      if (row_done[static_cast<std::size_t>(r)]) continue;
      Index arg = -1;
      double top = -1.0, total = 0.0;
      for (Index j = 0; j < k; ++j) {
        if (col_done[static_cast<std::size_t>(j)]) continue;
        const double x = std::abs(c(r, j));
        total += x;
        if (x > top) {
          top = x;
          arg = j;
        }
      }
      const double mass = total - top;
      if (mass < best_mass) {
        best_mass = mass;
        best_r = r;
        best_c = arg;
      }
    }
    row_done[static_cast<std::size_t>(best_r)] = col_done[static_cast<std::size_t>(best_c)] = true;
    out.row_perm.push_back(best_r);
    out.col_perm.push_back(best_c);
  }
  out.c_tilde = permute(c, out.row_perm, out.col_perm);
  return out;
}

struct LambdaExtraction {
  /// Lambda in the labeling of A_hat's columns; ordering is topological.
  DagMatrix lambda;
  Matrix c;
  Triangularization tri;
};

/// Lambda = I - diag(C~) C~^{-1} for C = pinv(A_hat) S reordered to lower
/// triangular form. Only the lower triangle of C~ enters the inverse, so the
/// result is exactly strictly lower triangular in the recovered ordering.
inline LambdaExtraction extract_lambda(const Matrix& s, const Matrix& a_hat, double eps_zero = 1e-5) {
  const Index k = a_hat.cols();
  if (s.rows() != a_hat.rows() || s.cols() != k) fail(ErrorKind::ShapeError, "S and A_hat shapes differ");
  if (numerical_rank(a_hat, 1e-10) < k) fail(ErrorKind::RankDeficient, "A_hat must have full column rank");
  LambdaExtraction out;
  out.c = pinv(a_hat) * s;
  try {
    out.tri = triangularize(out.c, eps_zero);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotTriangulable) throw;
    out.tri = triangularize_greedy(out.c);
  }
  const Matrix lower = out.tri.c_tilde.triangularView<Eigen::Lower>();
  if ((lower.diagonal().array() == 0.0).any()) fail(ErrorKind::NotTriangulable, "triangular form has a zero pivot");
  Matrix inv = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  Matrix lam_ord = Matrix::Identity(k, k) - lower.diagonal().asDiagonal() * inv;
  lam_ord.diagonal().setZero();
  lam_ord.triangularView<Eigen::StrictlyUpper>().setZero();

  Matrix lam(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) lam(out.tri.row_perm[a], out.tri.row_perm[b]) = lam_ord(a, b);
  out.lambda = DagMatrix(lam, out.tri.row_perm);
  return out;
}

enum class EcaMethod { Svd, Power };
enum class RecoveryVariant { Alg1, Alg1Proj };

struct PipelineOptions {
  bool single_view = true;
  EcaMethod eca = EcaMethod::Power;
  RecoveryVariant recovery = RecoveryVariant::Alg1;
  Index partition_trials = 100;
  RecoveryOptions recovery_opts;
  EcaOptions eca_opts;
  double triangular_eps = 1e-5;
};

struct BnResult {
  Matrix a_hat;
  DagMatrix lambda;
  bool approximate_ordering = false;
  bool eca_converged = true;
  RecoveryResult recovery;
  EcaResult eca;
  Matrix lowrank;
  std::optional<PartitionSearch> partition;
};

namespace detail {

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

}  // namespace detail

/// Learns A and Lambda from second and third moments. Single-view inputs are
/// first split into low-rank and diagonal parts; the same partition removes
/// the observation-noise term from the third moments.
inline BnResult learn_bn_pipeline(const MomentSet& momset, Index k, std::uint64_t seed, const PipelineOptions& opts = {}) {
  BnResult res;
  Vector noise_mu;
  if (opts.single_view) {
    res.partition = detail::staged("denoise", [&] { return find_partition(momset.pairs, k, opts.partition_trials, seed); });
    res.lowrank = res.partition->decomposition.lowrank;
  } else {
    res.lowrank = momset.pairs;
  }
  const Matrix w = detail::staged("whiten", [&] { return whiten(res.lowrank, k); });

  res.eca = detail::staged("eca", [&] {
    if (!momset.has_triples()) fail(ErrorKind::NotAvailable, "moment set carries no third-order information");
    if (opts.single_view) noise_mu = estimate_triples_noise(momset, res.partition->partition, k, seed);
    const Tensor3 tw = whitened_triples(momset, w, opts.single_view ? &noise_mu : nullptr);
    if (opts.eca == EcaMethod::Svd) return eca_extract_svd(w, tw, mix_seed(seed, 1), opts.eca_opts);
    try {
      return eca_extract_power(w, tw, mix_seed(seed, 1), opts.eca_opts);
    } catch (const NotConvergedError<EcaResult>& e) {
      return e.best();
    }
  });
  res.eca_converged = res.eca.converged;

  res.recovery = detail::staged("recovery", [&] {
    return opts.recovery == RecoveryVariant::Alg1 ? alg1(res.lowrank, k, opts.recovery_opts)
                                                  : alg1_proj(res.lowrank, k, opts.recovery_opts);
  });

  const LambdaExtraction ex =
      detail::staged("lambda", [&] { return extract_lambda(res.eca.s, res.recovery.a_hat, opts.triangular_eps); });
  res.a_hat = res.recovery.a_hat;
  res.lambda = ex.lambda;
  res.approximate_ordering = ex.tri.approximate;
  return res;
}

/// pinv(A_hat) P pinv(A_hat)^T: the hidden second moment in A_hat's labeling.
inline Matrix hidden_moment(const Matrix& pairs_lowrank, const Matrix& a_hat) {
  if (numerical_rank(a_hat, 1e-10) < a_hat.cols()) fail(ErrorKind::RankDeficient, "A_hat must have full column rank");
  const Matrix b = pinv(a_hat);
  return symmetrize(b * pairs_lowrank * b.transpose());
}

/// Lambda from the hidden second moment alone, given a topological order: the
/// LQ factor L of the reordered moment's square root (positive diagonal) is
/// (I - Lambda)^{-1} diag(sigma_eta), hence Lambda = I - diag(L) L^{-1}.
inline DagMatrix learn_dag_second_order(const Matrix& hidden, const std::vector<Index>& topo_order) {
  const Index k = hidden.rows();
  if (hidden.cols() != k || static_cast<Index>(topo_order.size()) != k)
    fail(ErrorKind::ShapeError, "moment and ordering sizes differ");
  const Matrix ordered = symmetrize(permute(hidden, topo_order, topo_order));
  const SymEigen es = sym_eigen_desc(ordered);
  if (!(es.values(k - 1) > 1e-14 * std::max(1.0, std::abs(es.values(0)))))
    fail(ErrorKind::NotPD, "hidden second moment is not positive definite");
  const Matrix root = es.vectors * es.values.cwiseSqrt().asDiagonal() * es.vectors.transpose();

  // LQ of root through QR of its transpose.
  Eigen::HouseholderQR<Matrix> qr(root.transpose());
  Matrix l = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
  for (Index j = 0; j < k; ++j)
    if (l(j, j) < 0) l.col(j) = -l.col(j);

  const Matrix inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  Matrix lam_ord = Matrix::Identity(k, k) - l.diagonal().asDiagonal() * inv;
  lam_ord.diagonal().setZero();
  lam_ord.triangularView<Eigen::StrictlyUpper>().setZero();
  Matrix lam(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) lam(topo_order[a], topo_order[b]) = lam_ord(a, b);
  return DagMatrix(lam, topo_order);
}

/// Fully observed network (A = I): ECA on the raw moments, then Lambda.
inline LambdaExtraction fully_observed_bn(const MomentSet& momset, std::uint64_t seed, EcaMethod method = EcaMethod::Svd,
                                          const EcaOptions& opts = {}) {
  const Index k = momset.n();
  const Matrix w = whiten(momset.pairs, k);
  const Tensor3 tw = whitened_triples(momset, w);
  const EcaResult eca = method == EcaMethod::Svd ? eca_extract_svd(w, tw, seed, opts) : eca_extract_power(w, tw, seed, opts);
  return extract_lambda(eca.s, Matrix::Identity(k, k));
}

/// The observed third-moment tensor mapped through pinv(A_hat) in all three
/// modes, which yields E[h (x) h (x) h] in A_hat's labeling.
inline Tensor3 latent_third_moment(const MomentSet& momset, const Matrix& a_hat) {
  const Index k = a_hat.cols();
  if (numerical_rank(a_hat, 1e-10) < k) fail(ErrorKind::RankDeficient, "A_hat must have full column rank");
  const Matrix b = pinv(a_hat);
  Tensor3 t(k);
  for (Index c = 0; c < k; ++c)
    t.slices[static_cast<std::size_t>(c)] = b * triples_project(momset, b.row(c).transpose()) * b.transpose();
  return t;
}

/// Re-expresses an estimated Lambda in the true labeling, using the column
/// alignment between the true and estimated A.
inline Matrix relabel_lambda(const Matrix& lambda_hat, const ColumnAlignment& al) {
  const Index k = static_cast<Index>(al.match.size());
  Matrix out(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index l = 0; l < k; ++l) {
      const std::size_t ui = static_cast<std::size_t>(i), ul = static_cast<std::size_t>(l);
      out(i, l) = al.sign[ui] * al.sign[ul] * lambda_hat(al.match[ui], al.match[ul]);
    }
  return out;
}

}  // namespace latentlin
