#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"

namespace latentlin {

/// Three disjoint index sets covering [n].
struct Partition3 {
  std::array<std::vector<Index>, 3> blocks;

  Index size() const {
    return static_cast<Index>(blocks[0].size() + blocks[1].size() + blocks[2].size());
  }

  /// Block label for each index; throws if the sets are not a partition of [n].
  std::vector<int> labels(Index n) const {
    std::vector<int> lab(static_cast<std::size_t>(n), -1);
    for (int b = 0; b < 3; ++b) {
      for (Index i : blocks[b]) {
        if (i < 0 || i >= n) fail(ErrorKind::ShapeError, "partition index out of range");
        if (lab[static_cast<std::size_t>(i)] != -1) fail(ErrorKind::ShapeError, "partition blocks overlap");
        lab[static_cast<std::size_t>(i)] = b;
      }
    }
    for (int l : lab)
      if (l == -1) fail(ErrorKind::ShapeError, "partition does not cover every index");
    return lab;
  }
};

struct DecompResult {
  /// C minus the recovered diagonal, so lowrank + diag(diag) == C exactly.
  Matrix lowrank;
  Vector diag;
  /// Block-diagonal C_II - L_II before keeping only its diagonal.
  Matrix d_candidate;
};

inline constexpr double kPivotConditionLimit = 1e12;

namespace detail {

inline double condition_number(const Matrix& m) {
  const Vector s = singular_values(m);
  if (s.size() == 0 || s(s.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

}  // namespace detail

/// Splits C = A B^T + D (D diagonal) into its low-rank and diagonal parts. For
/// each block I the diagonal block of the low-rank part is rebuilt from
/// off-diagonal blocks only:
///   L_II = C_IJ V_J (U_K^T C_KJ V_J)^{-1} U_K^T C_KI
/// with V_J the top-k right singular vectors of C_IJ and U_K the top-k left
/// singular vectors of C_KJ.
inline DecompResult diag_lowrank_decompose(const Matrix& c, const Partition3& part, Index k) {
  if (c.rows() != c.cols()) fail(ErrorKind::ShapeError, "matrix must be square");
  const Index n = c.rows();
  part.labels(n);
  for (const auto& b : part.blocks)
    if (static_cast<Index>(b.size()) < k) fail(ErrorKind::IllConditionedPartition, "partition block smaller than k");

  DecompResult out;
  out.d_candidate = Matrix::Zero(n, n);
  out.diag = Vector::Zero(n);
  for (int bi = 0; bi < 3; ++bi) {
    const auto& ii = part.blocks[bi];
    const auto& jj = part.blocks[(bi + 1) % 3];
    const auto& kk = part.blocks[(bi + 2) % 3];
    const Matrix c_ij = block_of(c, ii, jj);
    const Matrix c_kj = block_of(c, kk, jj);
    const Matrix c_ki = block_of(c, kk, ii);

    Eigen::JacobiSVD<Matrix> svd_ij(c_ij, Eigen::ComputeThinV);
    Eigen::JacobiSVD<Matrix> svd_kj(c_kj, Eigen::ComputeThinU);
    const Matrix v_j = svd_ij.matrixV().leftCols(k);
    const Matrix u_k = svd_kj.matrixU().leftCols(k);
    const Matrix pivot = u_k.transpose() * c_kj * v_j;
    if (!(detail::condition_number(pivot) <= kPivotConditionLimit))
      fail(ErrorKind::IllConditionedPartition, "pivot block is numerically singular");

    const Matrix l_ii = (c_ij * v_j) * pivot.partialPivLu().solve(u_k.transpose() * c_ki);
    const Matrix d_ii = block_of(c, ii, ii) - l_ii;
    for (std::size_t r = 0; r < ii.size(); ++r) {
      for (std::size_t s = 0; s < ii.size(); ++s) out.d_candidate(ii[r], ii[s]) = d_ii(static_cast<Index>(r), static_cast<Index>(s));
      out.diag(ii[r]) = d_ii(static_cast<Index>(r), static_cast<Index>(r));
    }
  }
  out.lowrank = c;
  out.lowrank.diagonal() -= out.diag;
  return out;
}

/// sum_{i != j} |M_ij| / sum_{i,j} |M_ij|; 0 for the zero matrix.
inline double off_diagonal_ratio(const Matrix& m) {
  const double total = m.cwiseAbs().sum();
  if (total == 0.0) return 0.0;
  const double diag = m.diagonal().cwiseAbs().sum();
  return (total - diag) / total;
}

struct PartitionSearch {
  Partition3 partition;
  double score = 0.0;
  Index trial = 0;
  DecompResult decomposition;
  Index failed_trials = 0;
};

inline constexpr int kPartitionResampleBudget = 10000;

/// Uniform random 3-way partition, redrawn until every block has at least
/// min_block members.
inline Partition3 random_partition(Index n, Index min_block, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, 2);
  for (int attempt = 0; attempt < kPartitionResampleBudget; ++attempt) {
    Partition3 p;
    for (Index i = 0; i < n; ++i) p.blocks[pick(rng)].push_back(i);
    bool ok = true;
    for (const auto& b : p.blocks) ok = ok && static_cast<Index>(b.size()) >= min_block;
    if (ok) return p;
  }
  fail(ErrorKind::NoValidPartition, "could not draw a partition with blocks of size >= k");
}

/// Tries `trials` random partitions and keeps the one whose block-diagonal
/// residual is closest to diagonal. Each trial uses its own RNG substream, so
/// the winner does not depend on scheduling.
/// Scores one given partition; trial is reported as 0.
inline PartitionSearch evaluate_partition(const Matrix& c, const Partition3& part, Index k) {
  PartitionSearch out;
  out.partition = part;
  out.decomposition = diag_lowrank_decompose(c, part, k);
  out.score = off_diagonal_ratio(out.decomposition.d_candidate);
  return out;
}

inline PartitionSearch find_partition(const Matrix& c, Index k, Index trials, std::uint64_t seed) {
  const Index n = c.rows();
  if (c.rows() != c.cols()) fail(ErrorKind::ShapeError, "matrix must be square");
  if (n < 3 * k) fail(ErrorKind::NoValidPartition, "need n >= 3k for a three-way partition");
  if (trials < 1) fail(ErrorKind::NoValidPartition, "need at least one trial");

  struct Trial {
    bool ok = false;
    Partition3 part;
    DecompResult dec;
    double score = 0.0;
  };
  std::vector<Trial> results(static_cast<std::size_t>(trials));
  parallel_for(results.size(), [&](std::size_t t) {
    Rng rng = make_rng(seed, t);
    Trial& tr = results[t];
    tr.part = random_partition(n, k, rng);
    try {
      tr.dec = diag_lowrank_decompose(c, tr.part, k);
      tr.score = off_diagonal_ratio(tr.dec.d_candidate);
      tr.ok = std::isfinite(tr.score);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IllConditionedPartition) throw;
    }
  });

  PartitionSearch best;
  bool found = false;
  for (std::size_t t = 0; t < results.size(); ++t) {
    if (!results[t].ok) {
      ++best.failed_trials;
      continue;
    }
    if (!found || results[t].score < best.score) {
      found = true;
      best.partition = results[t].part;
      best.score = results[t].score;
      best.trial = static_cast<Index>(t);
      best.decomposition = results[t].dec;
    }
  }
  if (!found) fail(ErrorKind::NoValidPartition, "every trial partition was ill-conditioned");
  return best;
}

/// max_j (n/k) ||U^T e_j||^2 over the rows of the left singular basis of A.
inline double incoherence_number(const Matrix& a) {
  const Index n = a.rows();
  const Index k = a.cols();
  if (k == 0 || numerical_rank(a, 1e-10) < k) fail(ErrorKind::RankDeficient, "A must have full column rank");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const Matrix u = svd.matrixU();
  return static_cast<double>(n) / static_cast<double>(k) * u.rowwise().squaredNorm().maxCoeff();
}

/// Incoherence level below which a random ell-way partition keeps every block
/// well conditioned with probability at least 1 - delta.
inline double partition_success_bound(double n, double k, double ell, double delta) {
  return (9.0 / 32.0) * n / (k * ell * std::log(k * ell / delta));
}

}  // namespace latentlin
