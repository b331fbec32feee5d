// Multidirectional conjugate gradients: PCG whose search space is enlarged
// to N subset-local preconditioned directions whenever the tau-test reports
// slow progress.
//
// Per iteration, with P_i of width 1 or N:
//   Q_i = S P_i                                   (see below)
//   Delta_i = Q_i^T P_i, gamma_i = P_i^T r_i, alpha_i = Delta_i^+ gamma_i
//   x_{i+1} = x_i + P_i alpha_i, r_{i+1} = r_i - Q_i alpha_i
//   t_i = gamma_i^T alpha_i / (r_{i+1}^T D(S)^-1 r_{i+1})
//   Z_{i+1} = block-diagonal expansion of D(S)^-1 r_{i+1} if t_i < tau,
//             else D(S)^-1 r_{i+1}
//   P_{i+1} = Z_{i+1} - sum_j P_j beta_{i,j},  beta_{i,j} = Delta_j^+ Q_j^T Z_{i+1}
//
// New directions are reorthogonalized against the full history, and Delta_i
// is pseudo-inverted since enlarged directions may be linearly dependent.
// For an enlarged step, Q_i is not formed as S P_i: the structured product
// S Z_i touches one column per stored block, and the history correction
//   Q_i = S Z_i - sum_j Q_j beta_{i-1,j}
// reuses the beta coefficients that built P_i.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mcgba/partition.hpp"
#include "mcgba/pcg.hpp"
#include "mcgba/schur_matrix.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

struct McgConfig {
  double tau = 4.0;  // enlarge the search space when t_i < tau
  Partition partition;
  double epsilon = 1e-6;
  int max_iterations = 1000;
  int threads = 1;
  // Eigenvalues of Delta_i below pinv_rank_tol_scale * width * max|eig| are
  // treated as zero.
  double pinv_rank_tol_scale = 1e-12;
  bool check_residual_drift = false;
  bool record_iterates = false;
  bool record_history = false;
};

// Moore-Penrose pseudo-inverse of a symmetric matrix via the symmetric
// eigendecomposition of (delta + delta^T)/2. Eigenvalues with magnitude at
// most rank_tol * max|eig| are treated as zero; a rank-0 input yields the
// zero matrix.
inline MatX pseudo_inverse(const MatX& delta, double rank_tol) {
  if (delta.rows() != delta.cols())
    throw std::invalid_argument("pseudo_inverse expects a square matrix");
  const int n = static_cast<int>(delta.rows());
  if (n == 1) {
    MatX out(1, 1);
    out(0, 0) = delta(0, 0) == 0.0 ? 0.0 : 1.0 / delta(0, 0);
    return out;
  }
  const MatX sym = 0.5 * (delta + delta.transpose());
  const Eigen::SelfAdjointEigenSolver<MatX> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("eigendecomposition failed in pseudo_inverse");
  const VecX evals = es.eigenvalues();
  const double threshold = rank_tol * evals.cwiseAbs().maxCoeff();
  VecX inv(n);
  for (int i = 0; i < n; ++i)
    inv[i] = std::abs(evals[i]) <= threshold || evals[i] == 0.0
                 ? 0.0
                 : 1.0 / evals[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

struct TauTestResult {
  double t = 0.0;
  VecX preconditioned_residual;  // D(S)^-1 r_next, reused for Z_{i+1}
};

// t_i = gamma_i^T alpha_i / (r_next^T D(S)^-1 r_next), clamped to >= 0.
// A denominator below 1e-30 reports the converged sentinel t = +inf (no
// enlargement). The global preconditioned solve is returned for reuse.
inline TauTestResult tau_test(const VecX& gamma, const VecX& alpha,
                              const VecX& r_next,
                              const BlockJacobiPreconditioner& m,
                              int threads = 1) {
  TauTestResult out;
  out.preconditioned_residual = m.apply(r_next, threads);
  const double denom = r_next.dot(out.preconditioned_residual);
  if (denom < 1e-30) {
    out.t = std::numeric_limits<double>::infinity();
    return out;
  }
  out.t = std::max(0.0, gamma.dot(alpha) / denom);
  return out;
}

// Solves S dx_p = -b~ with the same stopping rule as solve_pcg. Throws
// NumericalFailure on non-finite recurrences or when the direction history
// would exceed max_iterations * N columns.
inline CgResult solve_mcg(const SchurMatrix& s, const VecX& b_tilde,
                          const BlockJacobiPreconditioner& m, const VecX& x0,
                          const McgConfig& cfg) {
  if (cfg.epsilon <= 0 || cfg.max_iterations < 1 || cfg.tau < 0)
    throw std::invalid_argument("invalid MCG configuration");
  if (cfg.partition.num_poses() != s.num_blocks())
    throw std::invalid_argument("partition does not cover the pose set");
  const int num_subsets = cfg.partition.num_subsets;
  const std::int64_t column_budget =
      static_cast<std::int64_t>(cfg.max_iterations) * num_subsets;

  const detail::WallTimer timer;
  CgResult out;
  out.x = x0;

  VecX r = -b_tilde - s.multiply(out.x, cfg.threads);
  const double norm0 = r.norm();
  out.stats.residual_norm_history.push_back(norm0);
  if (norm0 == 0.0) {
    out.stats.converged = true;
    out.stats.wall_time_seconds = timer.seconds();
    return out;
  }

  struct Direction {
    MatX p;
    MatX q;
    MatX pinv_delta;
  };
  std::vector<Direction> history;

  // Pending direction for the current iteration; built from z_pending (the
  // conjugate matrix Z_i) and the reorthogonalization coefficients betas.
  MatX p = m.apply(r, cfg.threads);  // P_0 = Z_0 = D(S)^-1 r_0, width 1
  MatX z_pending = p;
  std::vector<MatX> betas;

  for (int i = 0; i < cfg.max_iterations; ++i) {
    const int width = static_cast<int>(p.cols());
    MatX q;
    if (width == 1) {
      q = s.multiply(p.col(0), cfg.threads);
    } else {
      q = s.multiply_structured(z_pending, cfg.partition, cfg.threads);
      for (std::size_t j = 0; j < history.size(); ++j)
        q.noalias() -= history[j].q * betas[j];
    }

    MatX delta = q.transpose() * p;
    if (!delta.allFinite())
      throw NumericalFailure("MCG breakdown: non-finite Delta_i");
    const MatX pinv_delta =
        pseudo_inverse(delta, cfg.pinv_rank_tol_scale * width);
    const VecX gamma = p.transpose() * r;
    const VecX alpha = pinv_delta * gamma;
    out.x.noalias() += p * alpha;
    r.noalias() -= q * alpha;

    const double rn = r.norm();
    if (!std::isfinite(rn))
      throw NumericalFailure("MCG breakdown: non-finite residual");
    out.stats.iterations = i + 1;
    out.stats.residual_norm_history.push_back(rn);
    out.stats.width_history.push_back(width);
    out.stats.direction_columns += width;
    if (cfg.record_iterates) out.stats.iterates.push_back(out.x);
    if (cfg.record_history) {
      out.stats.history_p.push_back(p);
      out.stats.history_q.push_back(q);
    }
    if (cfg.check_residual_drift && (i + 1) % 10 == 0)
      detail::update_drift(s, b_tilde, out.x, r, norm0, cfg.threads,
                           out.stats.max_residual_drift);
    history.push_back({std::move(p), std::move(q), pinv_delta});
    if (rn < cfg.epsilon * norm0) {
      out.stats.converged = true;
      break;
    }
    if (i + 1 >= cfg.max_iterations) break;

    const TauTestResult tt = tau_test(gamma, alpha, r, m, cfg.threads);
    out.stats.tau_history.push_back(tt.t);
    const int next_width = tt.t < cfg.tau ? num_subsets : 1;
    if (out.stats.direction_columns + next_width > column_budget)
      throw NumericalFailure(
          "MCG direction history exceeds the max_iterations * N column "
          "budget");

    MatX z = next_width == 1
                 ? MatX(tt.preconditioned_residual)
                 : expand_residual(tt.preconditioned_residual, cfg.partition);
    MatX p_next = z;
    betas.clear();
    betas.reserve(history.size());
    for (const Direction& dir : history) {
      const MatX phi = dir.q.transpose() * z;
      betas.push_back(dir.pinv_delta * phi);
      p_next.noalias() -= dir.p * betas.back();
    }
    p = std::move(p_next);
    z_pending = std::move(z);
  }
  out.stats.wall_time_seconds = timer.seconds();
  return out;
}

}  // namespace mcgba
