// Levenberg-Marquardt driver: damping schedule, step acceptance on raw cost
// decrease, and full-state updates via Schur solve plus backsubstitution.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcgba/mcg.hpp"
#include "mcgba/normal_equations.hpp"
#include "mcgba/pcg.hpp"

namespace mcgba {

enum class SolverKind { kPcg, kMcg };

inline const char* to_string(SolverKind kind) {
  return kind == SolverKind::kPcg ? "pcg" : "mcg";
}

struct LmConfig {
  double lambda0 = 1e-4;
  int max_iterations = 25;
  double function_tolerance = 1e-6;
  SolverKind solver = SolverKind::kPcg;
  CgConfig inner;          // epsilon / max_iterations / threads
  double tau = 4.0;        // MCG only
  int num_subsets = 0;     // MCG only; 0 picks max(2, n_p / 10)
  Damping damping = Damping::kMarquardt;
  int threads = 1;
  int max_consecutive_failures = 10;
};

struct LmIteration {
  int index = 0;  // 1-based outer iteration
  double cost_before = 0.0;
  double cost_after = 0.0;
  double lambda = 0.0;
  bool accepted = false;
  bool inner_converged = false;
  int inner_iterations = 0;
  double solve_seconds = 0.0;       // inner solver wall time
  double cumulative_seconds = 0.0;  // since optimize() started
};

enum class LmStopReason { kFunctionTolerance, kMaxIterations, kFailureLimit };

struct LmTrace {
  std::vector<LmIteration> iterations;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  LmStopReason stop_reason = LmStopReason::kMaxIterations;
  double total_seconds = 0.0;
  double total_solve_seconds = 0.0;
  std::int64_t total_inner_iterations = 0;
  double schur_density = 0.0;
};

struct LmResult {
  StateVector state;
  LmTrace trace;
};

// Accepted steps divide lambda by 3, rejected steps double it; clamped to
// [1e-12, 1e12].
inline double update_lambda(bool accepted, double lambda) {
  lambda = accepted ? lambda / 3.0 : lambda * 2.0;
  return std::clamp(lambda, 1e-12, 1e12);
}

// Runs the LM loop: build normal blocks, form the Schur system, inner solve
// from x0 = 0, backsubstitute, accept the trial state iff the true cost
// decreases. Inner-solver breakdowns and degenerate trial projections count
// as failed steps (lambda increase); the loop aborts after
// max_consecutive_failures of them in a row.
inline LmResult optimize(const BAProblem& problem, const StateVector& x0,
                         const LmConfig& cfg) {
  if (cfg.lambda0 <= 0 || cfg.max_iterations < 1 ||
      cfg.function_tolerance <= 0)
    throw std::invalid_argument("invalid LM configuration");
  const detail::WallTimer timer;

  LmResult out;
  out.state = x0;
  double cost = total_cost(problem, out.state, cfg.threads);
  out.trace.initial_cost = cost;

  double lambda = cfg.lambda0;
  int consecutive_failures = 0;
  std::optional<NormalBlocks> blocks;
  std::optional<Partition> partition;

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    LmIteration record;
    record.index = iter;
    record.cost_before = cost;
    record.cost_after = cost;
    record.lambda = lambda;

    bool step_failed = false;
    std::string failure;
    double trial_cost = cost;
    StateVector trial = out.state;
    try {
      if (!blocks) {
        blocks = build_normal_blocks(problem, out.state, lambda, cfg.damping);
      } else {
        // Rejected previous step: the linearization point is unchanged, only
        // the damping moves.
        blocks->set_lambda(lambda);
      }
      SchurSystem sys = compute_schur(*blocks);
      if (out.trace.iterations.empty())
        out.trace.schur_density = sys.s.density();
      const BlockJacobiPreconditioner precond = block_jacobi(sys.s);
      const VecX zero = VecX::Zero(sys.s.dim());

      const detail::WallTimer solve_timer;
      CgResult inner;
      if (cfg.solver == SolverKind::kPcg) {
        CgConfig inner_cfg = cfg.inner;
        inner_cfg.threads = cfg.threads;
        inner = solve_pcg(sys.s, sys.rhs, precond, zero, inner_cfg);
      } else {
        if (!partition) {
          const int n = cfg.num_subsets > 0
                            ? cfg.num_subsets
                            : std::max(2, problem.num_cameras() / 10);
          partition = make_partition(problem.num_cameras(),
                                     std::min(n, problem.num_cameras()));
        }
        McgConfig inner_cfg;
        inner_cfg.tau = cfg.tau;
        inner_cfg.partition = *partition;
        inner_cfg.epsilon = cfg.inner.epsilon;
        inner_cfg.max_iterations = cfg.inner.max_iterations;
        inner_cfg.threads = cfg.threads;
        inner = solve_mcg(sys.s, sys.rhs, precond, zero, inner_cfg);
      }
      record.solve_seconds = solve_timer.seconds();
      record.inner_iterations = inner.stats.iterations;
      record.inner_converged = inner.stats.converged;

      const VecX delta_landmarks = backsubstitute(*blocks, inner.x);
      trial.poses = out.state.poses + inner.x;
      trial.landmarks = out.state.landmarks + delta_landmarks;
      trial_cost = total_cost(problem, trial, cfg.threads);
    } catch (const NumericalFailure& e) {
      step_failed = true;
      failure = e.what();
    } catch (const DegenerateObservation& e) {
      step_failed = true;
      failure = e.what();
    }

    if (step_failed) {
      lambda = update_lambda(false, lambda);
      record.cumulative_seconds = timer.seconds();
      out.trace.iterations.push_back(record);
      out.trace.total_solve_seconds += record.solve_seconds;
      out.trace.total_inner_iterations += record.inner_iterations;
      if (++consecutive_failures >= cfg.max_consecutive_failures) {
        out.trace.stop_reason = LmStopReason::kFailureLimit;
        break;
      }
      continue;
    }
    consecutive_failures = 0;

    const bool accepted = trial_cost < cost;
    const double relative_decrease =
        cost > 0 ? (cost - trial_cost) / cost : 0.0;
    if (accepted) {
      out.state = std::move(trial);
      cost = trial_cost;
      blocks.reset();  // next iteration linearizes at the new state
      lambda = update_lambda(true, lambda);
      record.accepted = true;
      record.cost_after = cost;
    } else {
      lambda = update_lambda(false, lambda);
    }
    record.cumulative_seconds = timer.seconds();
    out.trace.iterations.push_back(record);
    out.trace.total_solve_seconds += record.solve_seconds;
    out.trace.total_inner_iterations += record.inner_iterations;

    // Converged when an accepted (or exactly-neutral) step changes the cost
    // by less than the relative function tolerance.
    if ((accepted || trial_cost == cost) &&
        relative_decrease < cfg.function_tolerance) {
      out.trace.converged = true;
      out.trace.stop_reason = LmStopReason::kFunctionTolerance;
      break;
    }
  }

  out.trace.final_cost = cost;
  out.trace.total_seconds = timer.seconds();
  return out;
}

}  // namespace mcgba
