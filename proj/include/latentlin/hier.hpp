#pragma once

#include <optional>
#include <vector>

#include "latentlin/bayesnet.hpp"
#include "latentlin/decomp.hpp"
#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/metrics.hpp"
#include "latentlin/model.hpp"
#include "latentlin/recovery.hpp"

namespace latentlin {

struct HierOptions {
  Index partition_trials = 100;
  RecoveryVariant variant = RecoveryVariant::Alg1;
  RecoveryOptions recovery_opts;
  /// Optional fixed partition per level, indexed like HierResult::a_hats.
  /// Levels without one use the random search.
  std::vector<std::optional<Partition3>> partitions;
};

struct HierResult {
  /// a_hats[i] estimates the map from level i to level i+1 (0-based levels),
  /// with rows in the estimated labeling of level i+1 when that level is hidden.
  std::vector<Matrix> a_hats;
  std::vector<PartitionSearch> partitions;  // indexed like a_hats
  /// level_moments[i]: second moment of level i in its estimated labeling.
  std::vector<Matrix> level_moments;
  /// Second moment of the top level (permuted and rescaled like a_hats[0]'s columns).
  Matrix top_moment;
};

/// Peels a hierarchy from the observed second moment: at each level the
/// moment is split into its low-rank and diagonal parts, the coefficient
/// matrix is recovered from the low-rank part, and the next level's moment is
/// pinv(A_hat) L pinv(A_hat)^T.
inline HierResult learn_hierarchy(const Matrix& pairs, const std::vector<Index>& level_sizes, std::uint64_t seed,
                                  const HierOptions& opts = {}) {
  const std::size_t m = level_sizes.size();
  if (m < 2) fail(ErrorKind::InvalidModel, "hierarchy needs at least two levels");
  if (pairs.rows() != level_sizes.back() || pairs.cols() != level_sizes.back())
    fail(ErrorKind::ShapeError, "pairs must match the deepest level size");
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (level_sizes[i + 1] < 3 * level_sizes[i])
      fail(ErrorKind::RankConditionUnmet, "level " + std::to_string(i + 2) + " has fewer than 3x the nodes of level " +
                                              std::to_string(i + 1));

  HierResult res;
  res.a_hats.resize(m - 1);
  res.partitions.resize(m - 1);
  res.level_moments.resize(m);
  res.level_moments[m - 1] = pairs;

  Matrix current = pairs;
  for (std::size_t step = m - 1; step-- > 0;) {
    const Index k = level_sizes[step];
    const std::string tag = "level " + std::to_string(step + 1);
    try {
      const bool fixed = step < opts.partitions.size() && opts.partitions[step].has_value();
      PartitionSearch ps = fixed ? evaluate_partition(current, *opts.partitions[step], k)
                                 : find_partition(current, k, opts.partition_trials, mix_seed(seed, step));
      const Matrix& lowrank = ps.decomposition.lowrank;
      RecoveryResult rec = opts.variant == RecoveryVariant::Alg1 ? alg1(lowrank, k, opts.recovery_opts)
                                                                 : alg1_proj(lowrank, k, opts.recovery_opts);
      current = hidden_moment(lowrank, rec.a_hat);
      res.a_hats[step] = rec.a_hat;
      res.partitions[step] = std::move(ps);
      res.level_moments[step] = current;
    } catch (const Error& e) {
      throw e.with_stage(tag);
    }
  }
  res.top_moment = res.level_moments[0];
  return res;
}

/// The top level's second moment from a finished peel, in the estimated
/// labeling and scaling of that level.
inline const Matrix& top_level_moment(const HierResult& res) {
  if (res.top_moment.size() == 0) fail(ErrorKind::NotAvailable, "peel did not reach the top level");
  return res.top_moment;
}

/// Writes a true lower-level matrix (rows = nodes of a hidden level) in the
/// estimated labeling and scaling of that level. Estimated column j of the
/// upper matrix is matched to its best true column i, and row j of the result
/// is row i of `lower` times the factor relating the two columns.
inline Matrix express_in_estimated_rows(const Matrix& lower, const Matrix& upper_true, const Matrix& upper_hat) {
  if (lower.rows() != upper_true.cols()) fail(ErrorKind::ShapeError, "level sizes do not chain");
  const ColumnAlignment back = align_columns(upper_hat, upper_true);
  Matrix out(upper_hat.cols(), lower.cols());
  for (Index j = 0; j < upper_hat.cols(); ++j) {
    const Index i = back.match[static_cast<std::size_t>(j)];
    // upper_hat_j ~ upper_true_i / f, so h_hat_j = f h_i.
    const double f = upper_true.col(i).dot(upper_hat.col(j)) / upper_hat.col(j).squaredNorm();
    out.row(j) = f * lower.row(i);
  }
  return out;
}

}  // namespace latentlin
