#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"

namespace latentlin {

/// Bipartite support with rows = observed nodes, columns = hidden nodes,
/// oriented like the coefficient matrix.
using Support = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline Support support_of(const Matrix& a) { return a.array() != 0.0; }

inline Index max_hidden_degree(const Support& s) {
  Index d = 0;
  for (Index j = 0; j < s.cols(); ++j) d = std::max<Index>(d, s.col(j).count());
  return d;
}

struct ExpansionReport {
  bool holds = true;
  std::vector<Index> witness;  // violating hidden subset, minimum size
  Index neighbors = 0;         // |N(witness)|
  Index d_max = 0;
};

namespace detail {

/// Children of each hidden node as a packed bitset.
struct NeighborSets {
  Index words = 0;
  std::vector<std::vector<std::uint64_t>> cols;

  explicit NeighborSets(const Support& s) : words((s.rows() + 63) / 64), cols(static_cast<std::size_t>(s.cols())) {
    for (Index j = 0; j < s.cols(); ++j) {
      auto& c = cols[static_cast<std::size_t>(j)];
      c.assign(static_cast<std::size_t>(words), 0);
      for (Index i = 0; i < s.rows(); ++i)
        if (s(i, j)) c[static_cast<std::size_t>(i / 64)] |= std::uint64_t{1} << (i % 64);
    }
  }

  static Index count(const std::vector<std::uint64_t>& bits) {
    Index c = 0;
    for (auto w : bits) c += std::popcount(w);
    return c;
  }

  Index neighbors_of(const std::vector<Index>& subset) const {
    std::vector<std::uint64_t> acc(static_cast<std::size_t>(words), 0);
    for (Index j : subset)
      for (Index w = 0; w < words; ++w) acc[static_cast<std::size_t>(w)] |= cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(w)];
    return count(acc);
  }
};

inline std::vector<Index> mask_members(std::uint32_t mask) {
  std::vector<Index> out;
  for (Index j = 0; mask; ++j, mask >>= 1)
    if (mask & 1u) out.push_back(j);
  return out;
}

}  // namespace detail

/// Exhaustive check of |N(S)| >= |S| + d_max for every hidden subset with
/// |S| >= 2. Subsets are visited depth-first with the neighborhood built
/// incrementally; the reported witness is the violation of smallest size,
/// ties broken by smallest bitmask.
inline ExpansionReport check_expansion(const Support& s) {
  const Index k = s.cols();
  if (k > 24) fail(ErrorKind::TooLarge, "exhaustive expansion check limited to k <= 24");
  const detail::NeighborSets sets(s);
  ExpansionReport rep;
  rep.d_max = max_hidden_degree(s);

  Index best_size = k + 1;
  std::uint32_t best_mask = 0;
  Index best_neighbors = 0;
  std::vector<std::vector<std::uint64_t>> stack(static_cast<std::size_t>(k + 1),
                                                std::vector<std::uint64_t>(static_cast<std::size_t>(sets.words), 0));

  // Visit subsets whose largest member is < next, extending with members >= next.
  auto visit = [&](auto&& self, Index depth, Index next, std::uint32_t mask) -> void {
    if (depth >= 2 && depth <= best_size) {
      const Index nb = detail::NeighborSets::count(stack[static_cast<std::size_t>(depth)]);
      if (nb < depth + rep.d_max && (depth < best_size || mask < best_mask)) {
        best_size = depth;
        best_mask = mask;
        best_neighbors = nb;
      }
    }
    for (Index j = next; j < k; ++j) {
      auto& dst = stack[static_cast<std::size_t>(depth + 1)];
      const auto& src = stack[static_cast<std::size_t>(depth)];
      const auto& col = sets.cols[static_cast<std::size_t>(j)];
      for (Index w = 0; w < sets.words; ++w) dst[static_cast<std::size_t>(w)] = src[static_cast<std::size_t>(w)] | col[static_cast<std::size_t>(w)];
      self(self, depth + 1, j + 1, mask | (std::uint32_t{1} << j));
    }
  };
  visit(visit, 0, 0, 0u);

  if (best_size <= k) {
    rep.holds = false;
    rep.witness = detail::mask_members(best_mask);
    rep.neighbors = best_neighbors;
  }
  return rep;
}

struct SampledExpansionReport {
  bool falsified = false;
  std::vector<Index> witness;
  Index neighbors = 0;
};

/// Randomized search for expansion violations; can only refute. Half of the
/// trials draw a uniform subset of uniform size in [2, k]; the other half grow
/// a subset greedily from a random node, each time adding the node that adds
/// the fewest new neighbors, and test every prefix. The greedy half targets
/// the tight clusters that violate expansion, so the search is biased toward
/// them rather than uniform over subsets.
inline SampledExpansionReport check_expansion_sampled(const Support& s, Index trials, std::uint64_t seed) {
  const Index k = s.cols();
  const Index d_max = max_hidden_degree(s);
  const detail::NeighborSets sets(s);
  SampledExpansionReport rep;
  if (k < 2) return rep;
  for (Index t = 0; t < trials && !rep.falsified; ++t) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
    std::vector<Index> nodes(static_cast<std::size_t>(k));
    std::iota(nodes.begin(), nodes.end(), Index{0});
    std::shuffle(nodes.begin(), nodes.end(), rng);
    auto test = [&](std::vector<Index> subset) {
      const Index nb = sets.neighbors_of(subset);
      if (nb < static_cast<Index>(subset.size()) + d_max) {
        std::sort(subset.begin(), subset.end());
        rep.falsified = true;
        rep.witness = std::move(subset);
        rep.neighbors = nb;
      }
    };
    if (t % 2 == 0) {
      std::uniform_int_distribution<Index> size(2, k);
      test(std::vector<Index>(nodes.begin(), nodes.begin() + size(rng)));
    } else {
      std::vector<Index> subset{nodes[0]};
      std::vector<bool> used(static_cast<std::size_t>(k), false);
      used[static_cast<std::size_t>(nodes[0])] = true;
      while (static_cast<Index>(subset.size()) < k && !rep.falsified) {
        Index pick = -1, fewest = std::numeric_limits<Index>::max();
        for (Index j : nodes) {  // shuffled order breaks ties randomly
          if (used[static_cast<std::size_t>(j)]) continue;
          subset.push_back(j);
          const Index nb = sets.neighbors_of(subset);
          subset.pop_back();
          if (nb < fewest) {
            fewest = nb;
            pick = j;
          }
        }
        used[static_cast<std::size_t>(pick)] = true;
        subset.push_back(pick);
        test(subset);
      }
    }
  }
  return rep;
}

struct GenericityReport {
  bool holds = true;
  std::vector<Index> hidden;    // S
  std::vector<Index> observed;  // R, |R| = |S|
  Vector null_vector;           // fully dense v with A_{R,S} v = 0
};

namespace detail {

inline bool fully_dense(const Vector& v, double rel = 1e-8) {
  const double top = v.cwiseAbs().maxCoeff();
  return top > 0 && (v.array().abs() > rel * top).all();
}

/// Calls fn for each size-r subset of items (in lexicographic order) until fn
/// returns true.
template <typename F>
bool for_each_subset(const std::vector<Index>& items, Index r, F&& fn) {
  const Index m = static_cast<Index>(items.size());
  if (r > m) return false;
  std::vector<Index> idx(static_cast<std::size_t>(r));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::vector<Index> pick(static_cast<std::size_t>(r));
  while (true) {
    for (Index t = 0; t < r; ++t) pick[static_cast<std::size_t>(t)] = items[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])];
    if (fn(pick)) return true;
    Index t = r - 1;
    while (t >= 0 && idx[static_cast<std::size_t>(t)] == m - r + t) --t;
    if (t < 0) return false;
    ++idx[static_cast<std::size_t>(t)];
    for (Index u = t + 1; u < r; ++u) idx[static_cast<std::size_t>(u)] = idx[static_cast<std::size_t>(u - 1)] + 1;
  }
}

}  // namespace detail

/// Searches for v with |supp(v)| = |S| >= 2 and ||A v||_0 <= |N(S)| - |S|:
/// equivalently, |S| rows R of N(S) on which A_{R,S} has a fully dense null
/// vector. Nullity above one is probed with 100 random null-space
/// combinations, so a dense direction can in principle be missed there.
inline GenericityReport check_genericity(const Matrix& a, double sing_rel = 1e-10) {
  const Index n = a.rows(), k = a.cols();
  if (k > 6 || n > 30) fail(ErrorKind::TooLarge, "genericity check limited to k <= 6, n <= 30");
  GenericityReport rep;
  const Support sup = support_of(a);
  Rng rng = make_rng(0x6e6e, 0);
  std::normal_distribution<double> g;

  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << k); ++mask) {
    if (std::popcount(mask) < 2) continue;
    const std::vector<Index> hidden = detail::mask_members(mask);
    std::vector<Index> nbrs;
    for (Index i = 0; i < n; ++i) {
      bool hit = false;
      for (Index j : hidden) hit = hit || sup(i, j);
      if (hit) nbrs.push_back(i);
    }
    const Index r = static_cast<Index>(hidden.size());
    const bool found = detail::for_each_subset(nbrs, r, [&](const std::vector<Index>& rows) {
      const Matrix sub = block_of(a, rows, hidden);
      Eigen::JacobiSVD<Matrix> svd(sub, Eigen::ComputeFullV);
      const Vector& sv = svd.singularValues();
      const double cut = sing_rel * std::max(sv(0), 1e-300);
      Index nullity = 0;
      for (Index t = 0; t < r; ++t)
        if (sv(t) <= cut) ++nullity;
      if (nullity == 0) return false;
      const Matrix basis = svd.matrixV().rightCols(nullity);
      std::optional<Vector> dense;
      if (nullity == 1) {
        if (detail::fully_dense(basis.col(0))) dense = basis.col(0);
      } else {
        for (int draw = 0; draw < 100 && !dense; ++draw) {
          Vector coef(nullity);
          for (Index t = 0; t < nullity; ++t) coef(t) = g(rng);
          const Vector v = basis * coef;
          if (detail::fully_dense(v)) dense = v;
        }
      }
      if (!dense) return false;
      rep.holds = false;
      rep.hidden = hidden;
      rep.observed = rows;
      rep.null_vector = *dense;
      return true;
    });
    if (found) break;
  }
  return rep;
}

struct Thm2RowReport {
  Index row = 0;
  bool cond_i_violated = false;
  bool cond_ii_violated = false;
  Vector witness;        // v for the violated condition
  Index witness_col = -1;  // j for condition (ii)
};

/// Row gap 1 - second / max of the absolute entries (1 for single-entry rows).
inline Vector row_gaps(const Matrix& a) {
  Vector g(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    Vector r = a.row(i).cwiseAbs().transpose();
    std::sort(r.data(), r.data() + r.size(), std::greater<>());
    g(i) = (r.size() < 2 || r(0) == 0) ? 1.0 : 1.0 - r(1) / r(0);
  }
  return g;
}

namespace detail {

inline std::vector<Index> complement(const std::vector<Index>& s, Index size) {
  std::vector<bool> in(static_cast<std::size_t>(size), false);
  for (Index x : s) in[static_cast<std::size_t>(x)] = true;
  std::vector<Index> out;
  for (Index x = 0; x < size; ++x)
    if (!in[static_cast<std::size_t>(x)]) out.push_back(x);
  return out;
}

inline double block_l1(const Matrix& a, const std::vector<Index>& rows, const std::vector<Index>& cols, const Vector& v) {
  if (rows.empty() || cols.empty()) return 0.0;
  return (block_of(a, rows, cols) * v).lpNorm<1>();
}

/// Random points of the unit l1 sphere followed by all signed vertices.
inline std::vector<Vector> l1_probes(Index dim, Index trials, Rng& rng) {
  std::vector<Vector> out;
  if (dim == 0) return out;
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution coin(0.5);
  for (Index t = 0; t < trials; ++t) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = (coin(rng) ? 1.0 : -1.0) * e(rng);
    out.push_back(v / v.lpNorm<1>());
  }
  for (Index i = 0; i < dim; ++i)
    for (double sgn : {1.0, -1.0}) out.push_back(sgn * Vector::Unit(dim, i));
  return out;
}

}  // namespace detail

/// Condition (i): ||A_{(N2_i)^c, (N_i)^c} v||_1 > ||A_{N2_i, (N_i)^c} v||_1.
inline bool thm2_condition_i(const Matrix& a, Index i, const Vector& v) {
  const Support sup = support_of(a);
  std::vector<Index> ni, n2;
  for (Index j = 0; j < a.cols(); ++j)
    if (sup(i, j)) ni.push_back(j);
  for (Index l = 0; l < a.rows(); ++l) {
    bool hit = false;
    for (Index j : ni) hit = hit || sup(l, j);
    if (hit) n2.push_back(l);
  }
  const auto ni_c = detail::complement(ni, a.cols());
  if (ni_c.empty()) return true;
  return detail::block_l1(a, detail::complement(n2, a.rows()), ni_c, v) > detail::block_l1(a, n2, ni_c, v);
}

/// Condition (ii) for column j of row i's support, with the row's own gap.
inline bool thm2_condition_ii(const Matrix& a, Index i, Index j, double gamma, const Vector& v) {
  const Support sup = support_of(a);
  std::vector<Index> rest, nj;
  for (Index l = 0; l < a.cols(); ++l)
    if (sup(i, l) && l != j) rest.push_back(l);
  if (rest.empty()) return true;
  for (Index r = 0; r < a.rows(); ++r)
    if (sup(r, j)) nj.push_back(r);
  const double col_mass = detail::block_l1(a, nj, {j}, Vector::Ones(1));
  return detail::block_l1(a, detail::complement(nj, a.rows()), rest, v) >
         detail::block_l1(a, nj, rest, v) + (1.0 - gamma) * col_mass * v.lpNorm<1>();
}

/// Probes both recovery conditions row by row. A flagged row carries a
/// witness v; an unflagged row only means no violation was sampled.
inline std::vector<Thm2RowReport> falsify_thm2_conditions(const Matrix& a, const Vector& gamma, Index trials,
                                                          std::uint64_t seed) {
  if (gamma.size() != a.rows()) fail(ErrorKind::ShapeError, "need one gap per row");
  const Support sup = support_of(a);
  std::vector<Thm2RowReport> out;
  for (Index i = 0; i < a.rows(); ++i) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
    Thm2RowReport rep;
    rep.row = i;
    std::vector<Index> ni;
    for (Index j = 0; j < a.cols(); ++j)
      if (sup(i, j)) ni.push_back(j);
    const Index dim_i = a.cols() - static_cast<Index>(ni.size());
    for (const Vector& v : detail::l1_probes(dim_i, trials, rng)) {
      if (!thm2_condition_i(a, i, v)) {
        rep.cond_i_violated = true;
        rep.witness = v;
        break;
      }
    }
    if (!rep.cond_i_violated) {
      const Index dim_ii = static_cast<Index>(ni.size()) - 1;
      for (Index j : ni) {
        for (const Vector& v : detail::l1_probes(dim_ii, trials, rng)) {
          if (!thm2_condition_ii(a, i, j, gamma(i), v)) {
            rep.cond_ii_violated = true;
            rep.witness = v;
            rep.witness_col = j;
            break;
          }
        }
        if (rep.cond_ii_violated) break;
      }
    }
    out.push_back(std::move(rep));
  }
  return out;
}

/// The k sparsest linearly independent vectors of Col(A), found by scanning
/// row supports T in order of size: Col(A) has a vector vanishing off T iff
/// A restricted to the other rows loses rank. Columns are unit norm with the
/// largest-magnitude entry positive.
inline Matrix sparsest_in_span_oracle(const Matrix& a, double rel_tol = 1e-10) {
  const Index n = a.rows(), k = a.cols();
  if (k > 4 || n > 10) fail(ErrorKind::TooLarge, "sparsest-vector oracle limited to k <= 4, n <= 10");
  Matrix found(n, 0);
  Matrix basis(n, 0);
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  const double scale = std::max(max_abs(a), 1e-300);
  for (Index t = 1; t <= n && found.cols() < k; ++t) {
    detail::for_each_subset(all, t, [&](const std::vector<Index>& rows) {
      const std::vector<Index> off = detail::complement(rows, n);
      const Matrix ns = off.empty() ? Matrix(Matrix::Identity(k, k)) : null_space(rows_of(a, off), rel_tol);
      for (Index c = 0; c < ns.cols() && found.cols() < k; ++c) {
        Vector v = a * ns.col(c);
        for (Index i = 0; i < n; ++i)
          if (std::abs(v(i)) <= rel_tol * scale) v(i) = 0.0;
        if (!(v.norm() > 0)) continue;
        v /= v.norm();
        Vector r = v;
        if (basis.cols()) {
          r -= basis * (basis.transpose() * r);
          r -= basis * (basis.transpose() * r);
        }
        if (r.norm() <= 1e-8) continue;
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = r / r.norm();
        found.conservativeResize(Eigen::NoChange, found.cols() + 1);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        found.col(found.cols() - 1) = v(arg) < 0 ? Vector(-v) : v;
      }
      return found.cols() >= k;
    });
  }
  return found;
}

namespace detail {

/// Is there y with M y = rhs, |y_r| <= 1 on boxed coordinates and free
/// elsewhere? Minimum-norm solution first, then Dykstra projections.
inline bool box_affine_feasible(const Matrix& m, const Vector& rhs, const std::vector<bool>& boxed, double tol = 1e-9) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  Vector y = cod.solve(rhs);
  const double scale = 1.0 + rhs.norm() + m.norm();
  auto ok = [&](const Vector& v) {
    if ((m * v - rhs).norm() > tol * scale) return false;
    for (Index r = 0; r < v.size(); ++r)
      if (boxed[static_cast<std::size_t>(r)] && std::abs(v(r)) > 1.0 + tol) return false;
    return true;
  };
  if (ok(y)) return true;
  const Matrix pinv_m = cod.pseudoInverse();
  Vector p = Vector::Zero(y.size()), q = Vector::Zero(y.size());
  for (int it = 0; it < 2000; ++it) {
    const Vector a = y + p;
    const Vector ya = a - pinv_m * (m * a - rhs);
    p = a - ya;
    const Vector b = ya + q;
    y = b;
    for (Index r = 0; r < y.size(); ++r)
      if (boxed[static_cast<std::size_t>(r)]) y(r) = std::clamp(y(r), -1.0, 1.0);
    q = b - y;
    if (ok(y)) return true;
  }
  return false;
}

}  // namespace detail

/// KKT test: is z = e_j / A_ij optimal for min ||A z||_1 subject to
/// A_i z = 1? The row problems of the recovery step reduce to this form in
/// hidden coordinates, independent of the hidden covariance. Needs a
/// subgradient g with g_r = sign(A_rj) on column j's support, |g_r| <= 1
/// elsewhere, and A^T g parallel to row i.
inline bool column_is_l1_optimal(const Matrix& a, Index i, Index j) {
  const Index n = a.rows(), k = a.cols();
  if (a(i, j) == 0.0) return false;
  std::vector<Index> free_rows;
  Vector fixed_part = Vector::Zero(k);
  const double sgn_i = a(i, j) > 0 ? 1.0 : -1.0;
  for (Index r = 0; r < n; ++r) {
    if (a(r, j) != 0.0)
      fixed_part += (a(r, j) > 0 ? sgn_i : -sgn_i) * a.row(r).transpose();
    else
      free_rows.push_back(r);
  }
  // Unknowns (g_free, t): A_free^T g_free - t a_i = -fixed_part.
  const Index nf = static_cast<Index>(free_rows.size());
  Matrix m(k, nf + 1);
  for (Index c = 0; c < nf; ++c) m.col(c) = a.row(free_rows[static_cast<std::size_t>(c)]).transpose();
  m.col(nf) = -a.row(i).transpose();
  std::vector<bool> boxed(static_cast<std::size_t>(nf + 1), true);
  boxed.back() = false;
  return detail::box_affine_feasible(m, -fixed_part, boxed);
}

/// For each column, whether some row's l1 problem is certified to return it.
inline std::vector<bool> l1_recoverable_columns(const Matrix& a) {
  std::vector<bool> out(static_cast<std::size_t>(a.cols()), false);
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows() && !out[static_cast<std::size_t>(j)]; ++i)
      if (a(i, j) != 0.0 && column_is_l1_optimal(a, i, j)) out[static_cast<std::size_t>(j)] = true;
  return out;
}

/// Fraction of seeds whose Bernoulli(theta) n x k bipartite graph expands.
inline double random_bipartite_expansion_rate(Index n, Index k, double theta, Index seeds) {
  if (seeds < 1) return 0.0;
  Index pass = 0;
  for (Index s = 0; s < seeds; ++s) {
    Rng rng = make_rng(static_cast<std::uint64_t>(s), 0xe5);
    std::bernoulli_distribution edge(theta);
    Support sup(n, k);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < n; ++i) sup(i, j) = edge(rng);
    if (check_expansion(sup).holds) ++pass;
  }
  return static_cast<double>(pass) / static_cast<double>(seeds);
}

}  // namespace latentlin
