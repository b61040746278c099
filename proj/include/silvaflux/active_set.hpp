#pragma once

// Dense solvers for small nonnegative least-squares problems with linear
// equality constraints. Templated on the scalar type; everything here is
// deterministic (no randomized pivots, fixed tie-breaking by index).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace silvaflux {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// minimize ||design * x - target||^2  s.t.  eq_matrix * x = eq_rhs,  x >= 0
template <typename Scalar>
struct ConstrainedLsq {
  MatrixX<Scalar> design;
  VectorX<Scalar> target;
  MatrixX<Scalar> eq_matrix;
  VectorX<Scalar> eq_rhs;
};

enum class LsqStatus { Optimal, Infeasible, IterationLimit };

template <typename Scalar>
struct LsqSolution {
  LsqStatus status = LsqStatus::Optimal;
  VectorX<Scalar> x;
  std::size_t iterations = 0;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> select_columns(const MatrixX<Scalar>& m, const std::vector<Eigen::Index>& cols) {
  MatrixX<Scalar> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
  return out;
}

// Minimum-norm least-squares solve; exact for consistent systems.
template <typename Scalar>
VectorX<Scalar> min_norm_solve(const MatrixX<Scalar>& a, const VectorX<Scalar>& b) {
  if (a.cols() == 0) return VectorX<Scalar>(0);
  if (a.rows() == 0) return VectorX<Scalar>::Zero(a.cols());
  Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(a);
  return cod.solve(b);
}

// Orthonormal basis for the null space of `a` (columns), via QR of a^T.
template <typename Scalar>
MatrixX<Scalar> null_space(const MatrixX<Scalar>& a) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return MatrixX<Scalar>::Identity(n, n);
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(a.transpose());
  const Eigen::Index rank = qr.rank();
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(n, n);
  return q.rightCols(n - rank);
}

}  // namespace detail

/// Lawson-Hanson active-set NNLS: minimize ||a x - b|| subject to x >= 0.
template <typename Scalar>
LsqSolution<Scalar> nonnegative_least_squares(const MatrixX<Scalar>& a, const VectorX<Scalar>& b,
                                              std::size_t max_iterations = 0) {
  const Eigen::Index n = a.cols();
  LsqSolution<Scalar> out;
  out.x = VectorX<Scalar>::Zero(n);
  if (n == 0) return out;
  if (max_iterations == 0) max_iterations = 30 * static_cast<std::size_t>(n) + 30;

  const Scalar scale = std::max<Scalar>(a.cwiseAbs().maxCoeff() * std::max<Scalar>(b.cwiseAbs().maxCoeff(), 1), 1);
  const Scalar tol = 10 * std::numeric_limits<Scalar>::epsilon() * scale * static_cast<Scalar>(n + a.rows());
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  VectorX<Scalar> w = a.transpose() * (b - a * out.x);
  while (out.iterations < max_iterations) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    while (out.iterations++ < max_iterations) {
      std::vector<Eigen::Index> cols;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
      const VectorX<Scalar> sub = detail::min_norm_solve<Scalar>(detail::select_columns(a, cols), b);
      VectorX<Scalar> s = VectorX<Scalar>::Zero(n);
      for (std::size_t k = 0; k < cols.size(); ++k) s(cols[k]) = sub(static_cast<Eigen::Index>(k));

      Scalar alpha = 1;
      bool clipped = false;
      for (Eigen::Index j : cols) {
        if (s(j) <= 0) {
          const Scalar denom = out.x(j) - s(j);
          const Scalar step = denom > 0 ? out.x(j) / denom : Scalar(0);
          if (!clipped || step < alpha) alpha = step;
          clipped = true;
        }
      }
      if (!clipped) {
        out.x = s;
        break;
      }
      out.x += alpha * (s - out.x);
      for (Eigen::Index j : cols) {
        if (out.x(j) <= tol) {
          out.x(j) = 0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
    w = a.transpose() * (b - a * out.x);
  }
  if (out.iterations >= max_iterations) out.status = LsqStatus::IterationLimit;
  return out;
}

/// Primal active-set method for ConstrainedLsq. Phase one finds a feasible
/// point with NNLS on the equality system; phase two walks the working set of
/// active bounds, solving each equality-constrained subproblem by null-space
/// elimination and releasing the bound with the most negative multiplier.
template <typename Scalar>
LsqSolution<Scalar> solve_constrained_lsq(const ConstrainedLsq<Scalar>& problem,
                                          Scalar feasibility_tol,
                                          std::size_t max_iterations = 0) {
  const auto& m = problem.design;
  const auto& e = problem.eq_matrix;
  const Eigen::Index n = m.cols();
  if (max_iterations == 0) max_iterations = 50 * static_cast<std::size_t>(n) + 50;

  LsqSolution<Scalar> out;
  out.x = VectorX<Scalar>::Zero(n);
  if (n == 0) return out;

  // Phase one.
  if (e.rows() > 0 && problem.eq_rhs.cwiseAbs().maxCoeff() > 0) {
    auto start = nonnegative_least_squares<Scalar>(e, problem.eq_rhs);
    const Scalar gap = (e * start.x - problem.eq_rhs).cwiseAbs().maxCoeff();
    if (start.status != LsqStatus::Optimal || gap > feasibility_tol) {
      out.status = LsqStatus::Infeasible;
      out.x = start.x;
      return out;
    }
    out.x = start.x;
  }

  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  std::vector<bool> working(static_cast<std::size_t>(n), false);
  bool at_subspace_minimum = false;

  auto free_columns = [&] {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!working[static_cast<std::size_t>(j)]) cols.push_back(j);
    return cols;
  };

  while (out.iterations++ < max_iterations) {
    const auto cols = free_columns();
    if (!at_subspace_minimum) {
      // Target point of the subproblem with working-set bounds held at zero.
      VectorX<Scalar> target_x = VectorX<Scalar>::Zero(n);
      if (!cols.empty()) {
        const MatrixX<Scalar> m_free = detail::select_columns(m, cols);
        const MatrixX<Scalar> e_free = detail::select_columns(e, cols);
        const VectorX<Scalar> particular = detail::min_norm_solve<Scalar>(e_free, problem.eq_rhs);
        const MatrixX<Scalar> basis = detail::null_space<Scalar>(e_free);
        VectorX<Scalar> sub = particular;
        if (basis.cols() > 0) {
          const VectorX<Scalar> y =
              detail::min_norm_solve<Scalar>(MatrixX<Scalar>(m_free * basis),
                                             VectorX<Scalar>(problem.target - m_free * particular));
          sub += basis * y;
        }
        for (std::size_t k = 0; k < cols.size(); ++k) target_x(cols[k]) = sub(static_cast<Eigen::Index>(k));
      }
      const VectorX<Scalar> step = target_x - out.x;
      const Scalar size = std::max<Scalar>(out.x.cwiseAbs().maxCoeff(), 1);
      if (step.cwiseAbs().maxCoeff() > 100 * eps * size) {
        Scalar alpha = 1;
        Eigen::Index blocking = -1;
        for (Eigen::Index j : cols) {
          if (step(j) < 0) {
            const Scalar ratio = out.x(j) / -step(j);
            if (ratio < alpha) {
              alpha = ratio;
              blocking = j;
            }
          }
        }
        if (blocking < 0) {
          out.x = target_x;
        } else {
          out.x += alpha * step;
          out.x(blocking) = 0;
          working[static_cast<std::size_t>(blocking)] = true;
        }
        for (Eigen::Index j : cols)
          if (out.x(j) < 0) out.x(j) = 0;
        at_subspace_minimum = blocking < 0;
        continue;
      }
    }

    // Multipliers of the working-set bounds from stationarity.
    const VectorX<Scalar> gradient = m.transpose() * (m * out.x - problem.target);
    VectorX<Scalar> lambda = VectorX<Scalar>::Zero(e.rows());
    if (e.rows() > 0 && !cols.empty()) {
      const MatrixX<Scalar> e_free = detail::select_columns(e, cols);
      VectorX<Scalar> g_free(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) g_free(static_cast<Eigen::Index>(k)) = gradient(cols[k]);
      lambda = detail::min_norm_solve<Scalar>(MatrixX<Scalar>(e_free.transpose()), VectorX<Scalar>(-g_free));
    }
    const VectorX<Scalar> multipliers = gradient + e.transpose() * lambda;
    const Scalar mult_tol =
        1e3 * eps * std::max<Scalar>((m.transpose() * m).cwiseAbs().maxCoeff() * std::max<Scalar>(out.x.cwiseAbs().maxCoeff(), 1) +
                                         (m.transpose() * problem.target).cwiseAbs().maxCoeff(),
                                     1);
    Eigen::Index release = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!working[static_cast<std::size_t>(j)]) continue;
      if (multipliers(j) < -mult_tol && (release < 0 || multipliers(j) < multipliers(release))) release = j;
    }
    if (release < 0) return out;
    working[static_cast<std::size_t>(release)] = false;
    at_subspace_minimum = false;
  }
  out.status = LsqStatus::IterationLimit;
  return out;
}

}  // namespace silvaflux
