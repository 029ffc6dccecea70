#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "latentlin/decomp.hpp"
#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/moments.hpp"

namespace latentlin {

/// W = U (U^T P U)^{-1/2} with U the top-k eigenvectors of P, so W^T P W = I.
inline Matrix whiten(const Matrix& p, Index k) {
  if (p.rows() != p.cols()) fail(ErrorKind::ShapeError, "matrix must be square");
  if (k < 1 || k > p.rows()) fail(ErrorKind::ShapeError, "k must lie in [1, n]");
  const SymEigen es = sym_eigen_desc(p);
  if (!(es.values(0) > 0) || !(es.values(k - 1) > 1e-12 * es.values(0)))
    fail(ErrorKind::RankDeficient, "matrix has numerical rank below k");
  const Matrix u = es.vectors.leftCols(k);
  const SymEigen inner = sym_eigen_desc(u.transpose() * p * u);
  if (!(inner.values(k - 1) > 0)) fail(ErrorKind::RankDeficient, "projected matrix is not positive definite");
  const Matrix v = inner.vectors * inner.values.cwiseSqrt().cwiseInverse().asDiagonal() * inner.vectors.transpose();
  return u * v;
}

/// Symmetric k x k x k tensor stored as slices: slices[c](a, b) = T(a, b, c).
struct Tensor3 {
  std::vector<Matrix> slices;

  Tensor3() = default;
  explicit Tensor3(Index k) : slices(static_cast<std::size_t>(k), Matrix::Zero(k, k)) {}

  Index k() const { return static_cast<Index>(slices.size()); }
  double operator()(Index a, Index b, Index c) const { return slices[static_cast<std::size_t>(c)](a, b); }

  /// T(I, I, v).
  Matrix contract(const Vector& v) const {
    Matrix out = Matrix::Zero(k(), k());
    for (Index c = 0; c < k(); ++c) out += v(c) * slices[static_cast<std::size_t>(c)];
    return out;
  }

  /// Subtracts weight * u (x) u (x) u.
  void add_rank_one(const Vector& u, double weight) {
    const Matrix uu = u * u.transpose();
    for (Index c = 0; c < k(); ++c) slices[static_cast<std::size_t>(c)] += (weight * u(c)) * uu;
  }

  double max_asymmetry() const {
    double worst = 0.0;
    for (Index a = 0; a < k(); ++a)
      for (Index b = 0; b < k(); ++b)
        for (Index c = 0; c < k(); ++c) {
          const double x = (*this)(a, b, c);
          worst = std::max({worst, std::abs(x - (*this)(b, a, c)), std::abs(x - (*this)(a, c, b)),
                            std::abs(x - (*this)(c, b, a))});
        }
    return worst;
  }
};

/// Diagonal of the single-view observation-noise part of Triples, estimated
/// by splitting Triples(zeta) into low-rank and diagonal parts on the given
/// partition. zeta has entries in [0.5, 1.5], so dividing the diagonal by it
/// is stable; by linearity the noise part of Triples(z) is then diag(mu o z)
/// for every z.
inline Vector estimate_triples_noise(const MomentSet& momset, const Partition3& part, Index k, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x7a);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector zeta(momset.n());
  for (Index i = 0; i < zeta.size(); ++i) zeta(i) = u(rng);
  const DecompResult dec = diag_lowrank_decompose(triples_project(momset, zeta), part, k);
  return dec.diag.cwiseQuotient(zeta);
}

/// The whitened third moment T_w(a, b, c) with T_w(I, I, v) = W^T Triples(W v) W,
/// optionally with the observation-noise term sum_i mu_i w_i (x) w_i (x) w_i
/// removed (w_i the i-th row of W).
inline Tensor3 whitened_triples(const MomentSet& momset, const Matrix& w, const Vector* noise_mu = nullptr) {
  const Index k = w.cols();
  Tensor3 t(k);
  if (const auto* smp = std::get_if<SampleTriples>(&momset.triples)) {
    const Matrix y = smp->centered * w;
    const double inv_n = 1.0 / static_cast<double>(y.rows());
    for (Index c = 0; c < k; ++c) {
      const Matrix weighted = y.array().colwise() * y.col(c).array();
      t.slices[static_cast<std::size_t>(c)] = y.transpose() * weighted * inv_n;
    }
  } else {
    for (Index c = 0; c < k; ++c)
      t.slices[static_cast<std::size_t>(c)] = w.transpose() * triples_project(momset, w.col(c)) * w;
  }
  if (noise_mu) {
    for (Index i = 0; i < w.rows(); ++i) t.add_rank_one(w.row(i).transpose(), -(*noise_mu)(i));
  }
  for (auto& s : t.slices) s = symmetrize(s);
  return t;
}

struct EcaOptions {
  /// Eigenvalues of T_w(I, I, theta) closer than this times the largest
  /// magnitude count as repeated.
  double gap_rel = 1e-6;
  int max_retries = 10;
  double power_tol = 1e-10;
  int max_sweeps = 1000;
};

struct EcaResult {
  Matrix s;      // n x k, columns sigma_eta(i) M_i up to permutation and sign
  Matrix omega;  // k x k, whitened directions
  int retries = 0;
  int sweeps = 0;
  bool converged = true;
};

namespace detail {

/// Largest-magnitude coordinate made positive; ties go to the smallest index.
inline void fix_column_signs(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > best) {
        best = std::abs(m(i, j));
        arg = i;
      }
    if (m(arg, j) < 0) m.col(j) = -m.col(j);
  }
}

/// (W^+)^T applied to each column: W (W^T W)^{-1} omega.
inline Matrix unwhiten(const Matrix& w, const Matrix& omega) {
  return w * (w.transpose() * w).ldlt().solve(omega);
}

inline Vector random_unit(Index k, Rng& rng) {
  std::normal_distribution<double> g;
  Vector v(k);
  do {
    for (Index i = 0; i < k; ++i) v(i) = g(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace detail

/// Directions from the eigenvectors of T_w(I, I, theta) for a random unit
/// theta. The matrix is symmetric, so its eigenvectors are its singular
/// vectors; requiring distinct eigenvalues is the same as requiring distinct
/// singular values up to the sign of each value.
inline EcaResult eca_extract_svd(const Matrix& w, const Tensor3& tw, std::uint64_t seed, const EcaOptions& opts = {}) {
  const Index k = tw.k();
  EcaResult res;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    const Vector theta = detail::random_unit(k, rng);
    const SymEigen es = sym_eigen_desc(tw.contract(theta));
    const double top = es.values.cwiseAbs().maxCoeff();
    double gap = std::numeric_limits<double>::infinity();
    for (Index i = 0; i + 1 < k; ++i) gap = std::min(gap, es.values(i) - es.values(i + 1));
    if (k == 1 || gap > opts.gap_rel * top) {
      res.omega = es.vectors;
      detail::fix_column_signs(res.omega);
      res.s = detail::unwhiten(w, res.omega);
      res.retries = attempt;
      return res;
    }
  }
  fail(ErrorKind::DegenerateSpectrum, "projected third moment has repeated eigenvalues for every draw");
}

/// Orthogonal tensor power iteration: v_i <- T_w(I, v_i, v_i) for every i,
/// then re-orthonormalize, until no vector moves by more than power_tol.
inline EcaResult eca_extract_power(const Matrix& w, const Tensor3& tw, std::uint64_t seed, const EcaOptions& opts = {}) {
  const Index k = tw.k();
  Rng rng = make_rng(seed, 0x9e);
  std::normal_distribution<double> g;
  Matrix start(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) start(i, j) = g(rng);
  Matrix v = orthonormalize(start);

  EcaResult res;
  double change = std::numeric_limits<double>::infinity();
  int sweep = 0;
  for (; sweep < opts.max_sweeps && change >= opts.power_tol; ++sweep) {
    const Matrix prev = v;
    for (Index i = 0; i < k; ++i) v.col(i) = tw.contract(v.col(i)) * v.col(i);
    if (!v.allFinite() || v.colwise().norm().minCoeff() == 0.0) {
      fail(ErrorKind::DegenerateSpectrum, "power iteration collapsed to zero");
    }
    v = orthonormalize(v);
    change = 0.0;
    for (Index i = 0; i < k; ++i)
      change = std::max(change, std::min((v.col(i) - prev.col(i)).norm(), (v.col(i) + prev.col(i)).norm()));
  }
  res.sweeps = sweep;
  res.omega = v;
  detail::fix_column_signs(res.omega);
  res.s = detail::unwhiten(w, res.omega);
  res.converged = change < opts.power_tol;
  if (!res.converged) throw NotConvergedError<EcaResult>("power iteration exceeded its sweep budget", res);
  return res;
}

}  // namespace latentlin
