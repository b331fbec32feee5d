// Block-Jacobi preconditioned conjugate gradients on the reduced camera
// system S dx_p = -b~.
#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "mcgba/schur_matrix.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

struct CgConfig {
  double epsilon = 1e-6;     // relative residual tolerance
  int max_iterations = 1000;
  int threads = 1;
  // Every 10th iteration, compare the recurred residual against
  // -b~ - S x_i and record the worst relative drift (costs one extra
  // product; meant for tests).
  bool check_residual_drift = false;
  bool record_iterates = false;
};

struct CgStats {
  int iterations = 0;
  std::vector<double> residual_norm_history;  // |r_0| .. |r_iterations|
  bool converged = false;
  double wall_time_seconds = 0.0;

  double max_residual_drift = 0.0;
  std::vector<VecX> iterates;  // filled when record_iterates is set

  // Multidirectional extras; PCG leaves them empty.
  std::vector<int> width_history;    // columns of P_i per iteration
  std::vector<double> tau_history;   // t_i (not evaluated on the last step)
  std::int64_t direction_columns = 0;
  std::vector<MatX> history_p;  // filled when record_history is set
  std::vector<MatX> history_q;
};

struct CgResult {
  VecX x;
  CgStats stats;
};

namespace detail {

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Drift of the recurred residual, measured relative to the initial residual
// norm: near convergence the true and recurred residuals always diverge
// relative to the (tiny) current residual, so the problem scale is the
// meaningful denominator.
inline void update_drift(const SchurMatrix& s, const VecX& b_tilde,
                         const VecX& x, const VecX& r, double scale,
                         int threads, double& max_drift) {
  const VecX r_true = -b_tilde - s.multiply(x, threads);
  max_drift =
      std::max(max_drift, (r - r_true).norm() / std::max(scale, 1e-300));
}

}  // namespace detail

// Algorithm: r_0 = -b~ - S x_0, Z_0 = D(S)^-1 r_0, P_0 = Z_0, then the
// classical recurrences alpha_i = gamma_i / Delta_i, beta_i = Phi_i /
// Delta_i, stopping when |r_{i+1}| < epsilon |r_0|. Throws NumericalFailure
// on Delta_i <= 0 (S not SPD) or a non-finite recurrence.
inline CgResult solve_pcg(const SchurMatrix& s, const VecX& b_tilde,
                          const BlockJacobiPreconditioner& m, const VecX& x0,
                          const CgConfig& cfg) {
  if (cfg.epsilon <= 0 || cfg.max_iterations < 1)
    throw std::invalid_argument("invalid CG configuration");
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

  VecX z = m.apply(r, cfg.threads);
  VecX p = z;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    const VecX q = s.multiply(p, cfg.threads);
    const double delta = q.dot(p);
    if (!std::isfinite(delta) || delta <= 0.0)
      throw NumericalFailure("PCG breakdown: Delta_i <= 0 or non-finite");
    const double gamma = p.dot(r);
    const double alpha = gamma / delta;
    out.x += alpha * p;
    r -= alpha * q;

    const double rn = r.norm();
    if (!std::isfinite(rn))
      throw NumericalFailure("PCG breakdown: non-finite residual");
    out.stats.iterations = i + 1;
    out.stats.residual_norm_history.push_back(rn);
    if (cfg.record_iterates) out.stats.iterates.push_back(out.x);
    if (cfg.check_residual_drift && (i + 1) % 10 == 0)
      detail::update_drift(s, b_tilde, out.x, r, norm0, cfg.threads,
                           out.stats.max_residual_drift);
    if (rn < cfg.epsilon * norm0) {
      out.stats.converged = true;
      break;
    }
    z = m.apply(r, cfg.threads);
    const double phi = q.dot(z);
    const double beta = phi / delta;
    p = z - beta * p;
  }
  out.stats.wall_time_seconds = timer.seconds();
  return out;
}

}  // namespace mcgba
