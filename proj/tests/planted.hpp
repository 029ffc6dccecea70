#pragma once

// Planted models shared by the unit and acceptance tests. Every model is
// chosen by checks that do not run the estimators under test: the l1
// column certificate, exact expansion and genericity.

#include <array>
#include <optional>
#include <vector>

#include "latentlin/latentlin.hpp"

namespace planted {

using namespace latentlin;

inline bool all_columns_certified(const Matrix& a) {
  for (bool b : l1_recoverable_columns(a))
    if (!b) return false;
  return true;
}

/// Certificate plus the structural conditions.
inline bool meets_conditions(const Matrix& a) {
  return all_columns_certified(a) && check_expansion(support_of(a)).holds && check_genericity(a).holds;
}

/// First draw in gen_planted_coefficients' seed order passing `accept`.
template <typename Accept>
inline Matrix first_accepted(Index n, Index k, double p, double gamma, std::uint64_t seed, Accept accept,
                             std::uint64_t* used = nullptr) {
  for (std::uint64_t t = 0; t < 10000; ++t) {
    Matrix a;
    try {
      a = gen_planted_coefficients(n, k, p, gamma, mix_seed(seed, t));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::GenerationFailed) throw;
      continue;
    }
    if (accept(a)) {
      if (used) *used = t;
      return a;
    }
  }
  fail(ErrorKind::GenerationFailed, "no accepted draw in 10000 attempts");
}

/// Single-view network with a planted A that is certified for l1 recovery.
inline LatentLinearModel certified_bn(Index n, Index k, double p, double gamma, std::uint64_t seed,
                                      const std::vector<NoiseFamily>& eta_families, bool with_lambda = true) {
  const Matrix a = first_accepted(n, k, p, gamma, seed, all_columns_certified);
  const Matrix lam = with_lambda ? gen_lower_triangular_dag(k, p, mix_seed(seed, 2)) : Matrix::Zero(k, k);
  return LatentLinearModel(CoefficientMatrix(a), DagMatrix(lam), gen_noise(k, eta_families, mix_seed(seed, 3)),
                           gen_noise(n, eta_families, mix_seed(seed, 4)));
}

/// Three row groups, each of rank k, if the rows of `b` can be split so.
/// Enumerates all 3^n labelings (n <= 12) and keeps the best conditioned.
inline std::optional<std::array<std::vector<Index>, 3>> rank_split(const Matrix& b) {
  const Index n = b.rows(), k = b.cols();
  if (n > 12) return std::nullopt;
  Index total = 1;
  for (Index r = 0; r < n; ++r) total *= 3;
  double best = 1e-6;
  std::optional<std::array<std::vector<Index>, 3>> out;
  for (Index code = 0; code < total; ++code) {
    std::array<std::vector<Index>, 3> groups;
    Index c = code;
    for (Index r = 0; r < n; ++r, c /= 3) groups[static_cast<std::size_t>(c % 3)].push_back(r);
    double worst = 1e300;
    for (const auto& g : groups) {
      if (static_cast<Index>(g.size()) < k) {
        worst = 0.0;
        break;
      }
      const Vector sv = singular_values(rows_of(b, g));
      worst = std::min(worst, sv(k - 1) / sv(0));
    }
    if (worst > best) {
      best = worst;
      out = groups;
    }
  }
  return out;
}

/// Three-level hierarchy (3, 12, 40). The 40 x 12 matrix is block diagonal
/// with four 10 x 3 blocks; each block meets the conditions and splits into
/// three rank-3 row groups, which gives a well-posed partition of the
/// deepest level. The whole matrix must expand. Genericity of the blocks
/// carries over: for v spread over several blocks both sides of the
/// inequality add up block by block. The 12 x 3 matrix is checked after its
/// rows are scaled by the column norms of the lower matrix, since that is
/// the scaling in which the peel sees it.
struct PlantedHierarchy {
  HierarchicalModel model;
  Partition3 deep_partition;
};

inline PlantedHierarchy certified_hierarchy(std::uint64_t seed, double block_p = 0.4) {
  constexpr Index groups = 4, rows = 10, cols = 3;
  PlantedHierarchy out;
  Matrix a2;
  std::uint64_t t = 0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    a2 = Matrix::Zero(groups * rows, groups * cols);
    out.deep_partition = Partition3{};
    for (Index g = 0; g < groups; ++g) {
      for (;; ++t) {
        const Matrix b = gen_planted_coefficients(rows, cols, block_p, 0.5, mix_seed(seed + 100, t));
        if (!meets_conditions(b)) continue;
        const auto split = rank_split(b);
        if (!split) continue;
        a2.block(g * rows, g * cols, rows, cols) = b;
        for (std::size_t q = 0; q < 3; ++q)
          for (Index r : (*split)[q]) out.deep_partition.blocks[q].push_back(g * rows + r);
        ++t;
        break;
      }
    }
    if (check_expansion(support_of(a2)).holds) break;
  }
  const Vector scale = a2.colwise().norm().transpose();
  const Matrix a1 = first_accepted(12, 3, 0.3, 0.5, seed, [&](const Matrix& a) {
    return meets_conditions(scale.asDiagonal() * a);
  });
  const std::vector<NoiseFamily> fams{NoiseFamily::Exponential, NoiseFamily::Poisson, NoiseFamily::ChiSquared,
                                      NoiseFamily::Gaussian};
  out.model.level_sizes = {3, 12, 40};
  out.model.matrices = {a1, a2};
  out.model.noise = {gen_noise(3, fams, seed + 1), gen_noise(12, fams, seed + 2), gen_noise(40, fams, seed + 3)};
  out.model.validate();
  return out;
}

/// Largest principal-angle sine between the column spaces of a and b.
inline double subspace_gap(const Matrix& a, const Matrix& b) {
  const Matrix qa = orthonormalize(a), qb = orthonormalize(b);
  const Matrix r = qa - qb * (qb.transpose() * qa);
  return r.norm();
}

inline std::vector<NoiseFamily> skewed() {
  return {NoiseFamily::Exponential, NoiseFamily::Poisson, NoiseFamily::ChiSquared};
}

}  // namespace planted
