#pragma once

#include <algorithm>
#include <numeric>
#include <tuple>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/l1solver.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/model.hpp"
#include "latentlin/moments.hpp"

namespace latentlin {

struct RecoveryOptions {
  /// Relative threshold for the numerical l0 count.
  double eps_zero = 1e-6;
  /// A normalized candidate joins the selection when its distance to the span
  /// of those already chosen exceeds this.
  double rank_tol = 1e-6;
  L1Options l1;
};

struct CandidateInfo {
  Index row = 0;
  Vector s;
  Vector w;
  Index sparsity = 0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool certified = false;
};

struct RecoveryDiagnostics {
  Index skipped_rows = 0;
  Index unconverged = 0;
  Index uncertified = 0;
  Index total_iterations = 0;
};

struct RecoveryResult {
  Matrix a_hat;
  std::vector<CandidateInfo> candidate_pool;
  std::vector<Index> selection;  // positions in candidate_pool
  RecoveryDiagnostics diagnostics;
};

/// Entries with |v_i| > eps_zero * max|v|.
inline Index sparsity_count(const Vector& v, double eps_zero) {
  if (v.size() == 0) return 0;
  const double top = v.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0;
  return (v.array().abs() > eps_zero * top).count();
}

namespace detail {

inline CandidateInfo solve_candidate(const Matrix& l, const Vector& c, Index row, const RecoveryOptions& opts) {
  CandidateInfo info;
  info.row = row;
  L1Solution sol;
  try {
    sol = solve_l1(l, c, opts.l1);
  } catch (const NotConvergedError<L1Solution>& e) {
    sol = e.best();
  }
  info.w = sol.w;
  info.s = l * sol.w;
  info.sparsity = sparsity_count(info.s, opts.eps_zero);
  info.objective = sol.objective;
  info.iterations = sol.iterations;
  info.converged = sol.converged;
  info.certified = sol.certified;
  return info;
}

/// Sort key: numerical l0 count, then l1/l2 ratio (a smooth sparsity proxy
/// that separates candidates whose small entries sit just above the cutoff),
/// then row index.
inline auto candidate_key(const CandidateInfo& c) {
  const double l2 = c.s.norm();
  const double ratio = l2 > 0 ? c.s.lpNorm<1>() / l2 : std::numeric_limits<double>::infinity();
  return std::make_tuple(c.sparsity, ratio, c.row);
}

inline void tally(RecoveryDiagnostics& d, const CandidateInfo& c) {
  if (!c.converged) ++d.unconverged;
  if (!c.certified) ++d.uncertified;
  d.total_iterations += c.iterations;
}

/// Largest eigenvalue index still above a relative floor; used to refuse
/// inputs whose numerical rank is below k.
inline Index pairs_rank(const Matrix& pairs, double rel_tol) {
  const SymEigen es = sym_eigen_desc(pairs);
  if (es.values.size() == 0 || es.values(0) <= 0) return 0;
  return (es.values.array() > rel_tol * es.values(0)).count();
}

}  // namespace detail

/// Recovers the columns of A from pairwise moments: one l1 problem per row of
/// the square-root factor, then a greedy rank-increasing selection of the
/// sparsest candidates.
inline RecoveryResult alg1(const Matrix& pairs, Index k, const RecoveryOptions& opts = {}) {
  if (pairs.rows() != pairs.cols()) fail(ErrorKind::ShapeError, "pairs must be square");
  if (k < 1 || k > pairs.rows()) fail(ErrorKind::ShapeError, "k must lie in [1, n]");
  const Index n = pairs.rows();
  const Index achieved = detail::pairs_rank(pairs, 1e-10);
  if (achieved < k)
    fail(ErrorKind::RecoveryFailed, "pairs have numerical rank " + std::to_string(achieved) + " < k");

  const Matrix l = matrix_sqrt_factor(pairs, k);
  const double tau_row = 1e-10 * l.norm();

  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i)
    if (l.row(i).norm() > tau_row) rows.push_back(i);

  RecoveryResult res;
  res.diagnostics.skipped_rows = n - static_cast<Index>(rows.size());
  res.candidate_pool.resize(rows.size());
  parallel_for(rows.size(), [&](std::size_t t) {
    res.candidate_pool[t] = detail::solve_candidate(l, l.row(rows[t]).transpose(), rows[t], opts);
  });
  for (const auto& c : res.candidate_pool) detail::tally(res.diagnostics, c);

  std::vector<Index> order(res.candidate_pool.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return detail::candidate_key(res.candidate_pool[a]) < detail::candidate_key(res.candidate_pool[b]);
  });

  Matrix basis(n, 0);
  Matrix chosen(n, 0);
  for (Index idx : order) {
    if (chosen.cols() == k) break;
    const Vector& s = res.candidate_pool[idx].s;
    const double sn = s.norm();
    if (!(sn > 0) || !s.allFinite()) continue;
    Vector v = s / sn;
    Vector r = v;
    if (basis.cols() > 0) {
      r -= basis * (basis.transpose() * r);
      r -= basis * (basis.transpose() * r);  // second pass for stability
    }
    if (r.norm() <= opts.rank_tol) continue;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = r / r.norm();
    chosen.conservativeResize(Eigen::NoChange, chosen.cols() + 1);
    chosen.col(chosen.cols() - 1) = v;
    res.selection.push_back(idx);
  }
  if (chosen.cols() < k)
    fail(ErrorKind::RecoveryFailed,
         "only " + std::to_string(chosen.cols()) + " independent candidates found, need " + std::to_string(k));
  res.a_hat = canonicalize(chosen);
  return res;
}

/// Variant driven by an already denoised low-rank matrix. Round i restricts
/// the constraint to the complement of the w's picked in earlier rounds and
/// keeps the sparsest solution over all rows.
inline RecoveryResult alg1_proj(const Matrix& lowrank, Index k, const RecoveryOptions& opts = {}) {
  if (lowrank.rows() != lowrank.cols()) fail(ErrorKind::ShapeError, "input must be square");
  if (k < 1 || k > lowrank.rows()) fail(ErrorKind::ShapeError, "k must lie in [1, n]");
  const Index n = lowrank.rows();
  const Index achieved = detail::pairs_rank(lowrank, 1e-10);
  if (achieved < k)
    fail(ErrorKind::RecoveryFailed, "input has numerical rank " + std::to_string(achieved) + " < k");

  const Matrix l = matrix_sqrt_factor(lowrank, k);
  double row_scale = 0.0;
  for (Index i = 0; i < n; ++i) row_scale = std::max(row_scale, l.row(i).norm());
  const double tau = 1e-8 * row_scale;

  RecoveryResult res;
  Matrix w_basis(k, 0);
  Matrix chosen(n, 0);
  for (Index round = 0; round < k; ++round) {
    Matrix proj = Matrix::Identity(k, k);
    if (w_basis.cols() > 0) proj -= w_basis * w_basis.transpose();

    std::vector<Index> rows;
    std::vector<Vector> constraints;
    for (Index j = 0; j < n; ++j) {
      Vector c = proj * l.row(j).transpose();
      if (c.norm() > tau) {
        rows.push_back(j);
        constraints.push_back(std::move(c));
      }
    }
    if (rows.empty()) fail(ErrorKind::RecoveryFailed, "every projected constraint vanished in round " + std::to_string(round));

    std::vector<CandidateInfo> round_pool(rows.size());
    parallel_for(rows.size(), [&](std::size_t t) {
      round_pool[t] = detail::solve_candidate(l, constraints[t], rows[t], opts);
    });
    std::size_t best = 0;
    for (std::size_t t = 0; t < round_pool.size(); ++t) {
      detail::tally(res.diagnostics, round_pool[t]);
      if (detail::candidate_key(round_pool[t]) < detail::candidate_key(round_pool[best])) best = t;
    }
    CandidateInfo pick = round_pool[best];

    // Orthonormal basis of the chosen w's drives the next projection.
    Vector wr = pick.w;
    if (w_basis.cols() > 0) {
      wr -= w_basis * (w_basis.transpose() * wr);
      wr -= w_basis * (w_basis.transpose() * wr);
    }
    if (!(wr.norm() > 0)) fail(ErrorKind::RecoveryFailed, "selected solution lies in the span of earlier rounds");
    w_basis.conservativeResize(Eigen::NoChange, w_basis.cols() + 1);
    w_basis.col(w_basis.cols() - 1) = wr / wr.norm();

    const double sn = pick.s.norm();
    if (!(sn > 0)) fail(ErrorKind::RecoveryFailed, "selected candidate is zero");
    chosen.conservativeResize(Eigen::NoChange, chosen.cols() + 1);
    chosen.col(chosen.cols() - 1) = pick.s / sn;
    res.selection.push_back(static_cast<Index>(res.candidate_pool.size()));
    res.candidate_pool.push_back(std::move(pick));
  }
  res.a_hat = canonicalize(chosen);
  return res;
}

}  // namespace latentlin
