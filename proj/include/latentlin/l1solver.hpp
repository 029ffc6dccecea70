#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "latentlin/error.hpp"
#include "latentlin/linalg.hpp"

namespace latentlin {

struct L1Options {
  double tol = 1e-9;
  int max_iterations = 50000;
  /// How often (in iterations) the active-set polish and certificate are tried.
  int polish_every = 100;
};

struct L1Solution {
  Vector w;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Optimality proven by an explicit dual certificate.
  bool certified = false;
};

namespace detail {

inline Vector soft_threshold(const Vector& v, double t) {
  return v.array().sign() * (v.array().abs() - t).max(0.0);
}

/// Reduced problem min_u ||b + B u||_1 obtained from w = w0 + Z u.
struct ReducedL1 {
  Matrix basis;  // Z, k x (k-1)
  Vector w0;
  Matrix b_mat;  // B = L Z
  Vector b_vec;  // b = L w0
  double scale = 1.0;

  Vector w(const Vector& u) const { return w0 + basis * u; }
  Vector residual(const Vector& u) const { return b_vec + b_mat * u; }
  double objective(const Vector& u) const { return residual(u).lpNorm<1>(); }
};

/// Is u optimal? Checks for y with y_r = sign(v_r) off the zero set, |y_r| <= 1
/// on it, and B^T y = 0.
inline bool certify(const ReducedL1& p, const Vector& u) {
  const Vector v = p.residual(u);
  const double vmax = v.cwiseAbs().maxCoeff();
  if (vmax == 0.0) return true;
  const double zero_tol = 1e-9 * vmax;
  std::vector<Index> zeros;
  Vector g = Vector::Zero(p.b_mat.cols());
  for (Index r = 0; r < v.size(); ++r) {
    if (std::abs(v(r)) <= zero_tol) {
      zeros.push_back(r);
    } else {
      g += (v(r) > 0 ? 1.0 : -1.0) * p.b_mat.row(r).transpose();
    }
  }
  const double gscale = 1.0 + g.norm() + p.b_mat.norm();
  if (zeros.empty()) return g.norm() <= 1e-9 * gscale;
  const Matrix bz_t = rows_of(p.b_mat, zeros).transpose();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(bz_t);
  Vector y = cod.solve(-g);
  auto feasible = [&](const Vector& cand) {
    return (bz_t * cand + g).norm() <= 1e-8 * gscale && cand.cwiseAbs().maxCoeff() <= 1.0 + 1e-8;
  };
  if (feasible(y)) return true;
  // Dykstra alternating projections between the affine set and the unit box.
  const Matrix pinv_t = cod.pseudoInverse();
  Vector p_aff = Vector::Zero(y.size());
  Vector q_box = Vector::Zero(y.size());
  for (int it = 0; it < 500; ++it) {
    Vector a = y + p_aff;
    Vector ya = a - pinv_t * (bz_t * a + g);
    p_aff = a - ya;
    Vector bx = ya + q_box;
    y = bx.cwiseMax(-1.0).cwiseMin(1.0);
    q_box = bx - y;
    if (feasible(y)) return true;
  }
  return false;
}

/// Least-squares refit of u forcing the rows in `zero_rows` of the residual to vanish.
inline Vector refit(const ReducedL1& p, const std::vector<Index>& zero_rows) {
  const Matrix bz = rows_of(p.b_mat, zero_rows);
  Vector bz_vec(static_cast<Index>(zero_rows.size()));
  for (std::size_t i = 0; i < zero_rows.size(); ++i) bz_vec(static_cast<Index>(i)) = p.b_vec(zero_rows[i]);
  return bz.colPivHouseholderQr().solve(-bz_vec);
}

/// Tries a few active sets suggested by the current iterate and keeps any
/// refit with a lower objective.
inline void polish(const ReducedL1& p, Vector& u, double& obj) {
  const Vector v = p.residual(u);
  const Index n = v.size();
  const Index dim = p.b_mat.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(v(a)) < std::abs(v(b)); });
  const double vmax = v.cwiseAbs().maxCoeff();

  std::vector<std::vector<Index>> sets;
  for (double thr : {1e-3, 1e-5, 1e-7}) {
    std::vector<Index> s;
    for (Index r : order)
      if (std::abs(v(r)) <= thr * vmax) s.push_back(r);
    if (static_cast<Index>(s.size()) >= dim) sets.push_back(std::move(s));
  }
  if (n >= dim) sets.emplace_back(order.begin(), order.begin() + dim);

  for (const auto& s : sets) {
    const Vector cand = refit(p, s);
    if (!cand.allFinite()) continue;
    const double c_obj = p.objective(cand);
    if (c_obj <= obj * (1.0 + 1e-12)) {
      u = cand;
      obj = c_obj;
    }
  }
}

}  // namespace detail

/// min ||L w||_1 subject to c^T w = 1.
///
/// The equality is eliminated through w = w0 + Z u with Z spanning null(c^T);
/// the remaining least-absolute-deviation problem is solved by scaled ADMM
/// with residual balancing. Iterates are periodically snapped onto the
/// active set they suggest and checked against a dual certificate.
inline L1Solution solve_l1(const Matrix& l, const Vector& c, const L1Options& opts = {}) {
  const Index k = l.cols();
  if (c.size() != k) fail(ErrorKind::ShapeError, "constraint vector has the wrong length");
  const double cnorm2 = c.squaredNorm();
  if (!(cnorm2 > 0.0) || !std::isfinite(cnorm2)) fail(ErrorKind::Infeasible, "constraint vector is zero");

  detail::ReducedL1 p;
  p.w0 = c / cnorm2;
  if (k == 1) {
    L1Solution s;
    s.w = p.w0;
    s.objective = (l * s.w).lpNorm<1>();
    s.converged = s.certified = true;
    return s;
  }
  p.basis = orthogonal_complement(c);
  p.scale = std::max(max_abs(l), std::numeric_limits<double>::min());
  p.b_mat = (l * p.basis) / p.scale;
  p.b_vec = (l * p.w0) / p.scale;

  const Index n = l.rows();
  const Matrix b_pinv = p.b_mat.completeOrthogonalDecomposition().pseudoInverse();

  Vector u = -b_pinv * p.b_vec;
  Vector y = p.residual(u);
  Vector r = Vector::Zero(n);
  double rho = 1.0 / std::max(y.cwiseAbs().maxCoeff(), 1e-12);

  Vector best_u = u;
  double best_obj = p.objective(u);
  bool admm_done = false;
  bool certified = false;
  int it = 0;
  const double abs_tol = 1e-14 * std::sqrt(static_cast<double>(n));

  for (; it < opts.max_iterations; ++it) {
    u = b_pinv * (y - p.b_vec - r);
    const Vector v = p.residual(u);
    const Vector y_old = y;
    y = detail::soft_threshold(v + r, 1.0 / rho);
    r += v - y;

    const double obj = v.lpNorm<1>();
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
    }

    const double prim = (v - y).norm();
    const double dual = rho * (p.b_mat.transpose() * (y - y_old)).norm();
    const double eps_pri = abs_tol + opts.tol * std::max(v.norm(), y.norm());
    const double eps_dual = abs_tol + opts.tol * rho * (p.b_mat.transpose() * r).norm();
    if (prim <= eps_pri && dual <= eps_dual) {
      admm_done = true;
      break;
    }

    if ((it + 1) % opts.polish_every == 0) {
      Vector pu = u;
      double pobj = obj;
      detail::polish(p, pu, pobj);
      if (pobj <= best_obj) {
        best_obj = pobj;
        best_u = pu;
      }
      if (detail::certify(p, best_u)) {
        certified = true;
        break;
      }
    }

    if ((it + 1) % 10 == 0) {
      if (prim > 10.0 * dual) {
        rho *= 2.0;
        r /= 2.0;
      } else if (dual > 10.0 * prim) {
        rho /= 2.0;
        r *= 2.0;
      }
    }
  }

  if (!certified) {
    Vector pu = best_u;
    double pobj = best_obj;
    detail::polish(p, pu, pobj);
    if (pobj <= best_obj) {
      best_obj = pobj;
      best_u = pu;
    }
    certified = detail::certify(p, best_u);
  }

  L1Solution sol;
  sol.w = p.w(best_u);
  sol.objective = (l * sol.w).lpNorm<1>();
  sol.iterations = std::min(it + 1, opts.max_iterations);
  sol.certified = certified;
  sol.converged = certified || admm_done;
  if (!sol.converged) throw NotConvergedError<L1Solution>("l1 solve exceeded its iteration budget", sol);
  return sol;
}

/// Exact reference for small instances: enumerates every vertex of the LP,
/// i.e. every w with c^T w = 1 and k-1 vanishing rows of L w. Ties in the
/// objective go to the lexicographically greatest w.
inline L1Solution oracle_l1_vertex(const Matrix& l, const Vector& c) {
  const Index n = l.rows();
  const Index k = l.cols();
  if (k > 8 || n > 12) fail(ErrorKind::TooLarge, "vertex enumeration limited to k <= 8, n <= 12");
  if (c.size() != k) fail(ErrorKind::ShapeError, "constraint vector has the wrong length");
  if (!(c.squaredNorm() > 0.0)) fail(ErrorKind::Infeasible, "constraint vector is zero");

  L1Solution best;
  best.objective = std::numeric_limits<double>::infinity();
  const double scale = std::max(max_abs(l), 1e-300);

  auto consider = [&](const Vector& w) {
    const double obj = (l * w).lpNorm<1>();
    const double tie = 1e-12 * scale * std::max(1.0, w.lpNorm<1>());
    if (obj < best.objective - tie) {
      best.w = w;
      best.objective = obj;
    } else if (std::abs(obj - best.objective) <= tie) {
      if (std::lexicographical_compare(best.w.data(), best.w.data() + k, w.data(), w.data() + k)) best.w = w;
    }
  };

  if (k == 1) {
    consider(Vector::Constant(1, 1.0 / c(0)));
  } else {
    std::vector<bool> pick(static_cast<std::size_t>(n), false);
    std::fill(pick.begin(), pick.begin() + (k - 1), true);
    do {
      Matrix sys(k, k);
      Index row = 0;
      for (Index i = 0; i < n; ++i)
        if (pick[static_cast<std::size_t>(i)]) sys.row(row++) = l.row(i);
      sys.row(k - 1) = c.transpose();
      Eigen::FullPivLU<Matrix> lu(sys);
      lu.setThreshold(1e-12);
      if (!lu.isInvertible()) continue;
      Vector rhs = Vector::Zero(k);
      rhs(k - 1) = 1.0;
      consider(lu.solve(rhs));
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  if (!std::isfinite(best.objective)) fail(ErrorKind::Infeasible, "no vertex found");
  best.converged = best.certified = true;
  return best;
}

}  // namespace latentlin
