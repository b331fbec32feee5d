// Damped normal equations in block form, the Schur complement reduced
// camera system, and landmark backsubstitution.
//
//   U_l = Jp^T Jp + l Dp^T Dp        (n_p 9x9 diagonal blocks)
//   V_l = Jl^T Jl + l Dl^T Dl        (n_l 3x3 diagonal blocks)
//   W   = Jp^T Jl                    (one 9x3 block per observation pair)
//   S   = U_l - W V_l^-1 W^T,  b~ = b_p - W V_l^-1 b_l
//
// The landmark update solves the second block row of the damped system:
//   dx_l = -V_l^-1 (b_l + W^T dx_p)
#pragma once

#include <limits>
#include <map>
#include <vector>

#include "mcgba/camera_model.hpp"
#include "mcgba/schur_matrix.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

enum class Damping {
  kMarquardt,  // D^2 = diag(J^T J) clamped to [1e-10, 1e32]
  kIdentity,
};

class NormalBlocks {
 public:
  struct WEntry {
    int pose = 0;
    Mat93 w = Mat93::Zero();
  };

  int num_poses() const { return static_cast<int>(u_.size()); }
  int num_landmarks() const { return static_cast<int>(v_.size()); }

  double lambda() const { return lambda_; }

  // Changes only the damping; the Jacobian accumulations are reused.
  void set_lambda(double lambda) {
    lambda_ = lambda;
    v_inv_valid_ = false;
  }

  // Damped pose block U_l,i.
  Mat9 u_lambda(int i) const {
    Mat9 m = u_[i];
    m.diagonal() += lambda_ * d2_pose_.segment<kPoseDim>(kPoseDim * i);
    return m;
  }

  // Damped landmark block V_l,j.
  Mat3 v_lambda(int j) const {
    Mat3 m = v_[j];
    m.diagonal() += lambda_ * d2_landmark_.segment<3>(3 * j);
    return m;
  }

  const VecX& b_pose() const { return b_pose_; }
  const VecX& b_landmark() const { return b_landmark_; }
  const VecX& damping_diag_pose() const { return d2_pose_; }
  const VecX& damping_diag_landmark() const { return d2_landmark_; }

  // W blocks of landmark j, sorted by pose index.
  const std::vector<WEntry>& landmark_row(int j) const { return w_rows_[j]; }

  // Blockwise inverses of V_l, computed once per damping value and reused by
  // both the Schur assembly and the backsubstitution. Throws
  // NumericalFailure on a singular block (lambda too small or a degenerate
  // landmark).
  const std::vector<Mat3>& v_lambda_inverses() const {
    if (!v_inv_valid_) {
      v_inv_.resize(num_landmarks());
      for (int j = 0; j < num_landmarks(); ++j) {
        const Eigen::LDLT<Mat3> ldlt(v_lambda(j));
        const Vec3 d = ldlt.vectorD();
        // An undamped single-view landmark gives a rank-2 block; LDLT then
        // produces a pivot at roundoff level rather than failing outright.
        if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0.0 ||
            d.minCoeff() < 1e-12 * d.maxCoeff())
          throw NumericalFailure("V block " + std::to_string(j) +
                                 " is singular (lambda too small or "
                                 "degenerate landmark)");
        v_inv_[j] = ldlt.solve(Mat3::Identity());
      }
      v_inv_valid_ = true;
    }
    return v_inv_;
  }

  friend NormalBlocks build_normal_blocks(const BAProblem&,
                                          const StateVector&, double,
                                          Damping);

 private:
  std::vector<Mat9> u_;  // undamped Jp^T Jp diagonal blocks
  std::vector<Mat3> v_;  // undamped Jl^T Jl diagonal blocks
  std::vector<std::vector<WEntry>> w_rows_;
  VecX b_pose_;
  VecX b_landmark_;
  VecX d2_pose_;      // squared damping diagonal for poses
  VecX d2_landmark_;  // squared damping diagonal for landmarks
  double lambda_ = 0.0;

  mutable std::vector<Mat3> v_inv_;
  mutable bool v_inv_valid_ = false;
};

// Accumulates per-observation outer products into the block structure.
// Throws DegenerateObservation with the observation index when a projection
// is degenerate at `state`.
inline NormalBlocks build_normal_blocks(const BAProblem& problem,
                                        const StateVector& state,
                                        double lambda,
                                        Damping damping = Damping::kMarquardt) {
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  const int n_p = problem.num_cameras();
  const int n_l = problem.num_landmarks();

  NormalBlocks blocks;
  blocks.u_.assign(n_p, Mat9::Zero());
  blocks.v_.assign(n_l, Mat3::Zero());
  blocks.w_rows_.assign(n_l, {});
  blocks.b_pose_ = VecX::Zero(kPoseDim * n_p);
  blocks.b_landmark_ = VecX::Zero(3 * n_l);
  blocks.lambda_ = lambda;

  for (std::int64_t i = 0; i < problem.num_observations(); ++i) {
    const Observation& obs = problem.observations[i];
    ResidualJacobianBlock rj;
    try {
      rj = residual_jacobians(state.camera(obs.camera),
                              state.landmark(obs.landmark), obs.pixel);
    } catch (const DegenerateObservation& e) {
      throw DegenerateObservation(e.what(), i);
    }
    blocks.u_[obs.camera] += rj.j_cam.transpose() * rj.j_cam;
    blocks.v_[obs.landmark] += rj.j_pt.transpose() * rj.j_pt;
    blocks.w_rows_[obs.landmark].push_back(
        {obs.camera, rj.j_cam.transpose() * rj.j_pt});
    blocks.b_pose_.segment<kPoseDim>(kPoseDim * obs.camera) +=
        rj.j_cam.transpose() * rj.residual;
    blocks.b_landmark_.segment<3>(3 * obs.landmark) +=
        rj.j_pt.transpose() * rj.residual;
  }
  for (auto& row : blocks.w_rows_)
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.pose < b.pose; });

  blocks.d2_pose_.resize(kPoseDim * n_p);
  blocks.d2_landmark_.resize(3 * n_l);
  if (damping == Damping::kIdentity) {
    blocks.d2_pose_.setOnes();
    blocks.d2_landmark_.setOnes();
  } else {
    for (int i = 0; i < n_p; ++i)
      blocks.d2_pose_.segment<kPoseDim>(kPoseDim * i) = blocks.u_[i].diagonal();
    for (int j = 0; j < n_l; ++j)
      blocks.d2_landmark_.segment<3>(3 * j) = blocks.v_[j].diagonal();
    blocks.d2_pose_ = blocks.d2_pose_.cwiseMax(1e-10).cwiseMin(1e32);
    blocks.d2_landmark_ = blocks.d2_landmark_.cwiseMax(1e-10).cwiseMin(1e32);
  }
  return blocks;
}

struct SchurSystem {
  SchurMatrix s;
  VecX rhs;  // b~; the solvers handle the sign of S dx_p = -b~
};

// Forms S and b~. The sparsity pattern is exactly the pose co-observation
// graph: block (m, j) is present iff cameras m and j share a landmark.
inline SchurSystem compute_schur(const NormalBlocks& blocks) {
  const int n_p = blocks.num_poses();
  const std::vector<Mat3>& v_inv = blocks.v_lambda_inverses();

  std::vector<std::map<int, Mat9>> upper(n_p);
  for (int m = 0; m < n_p; ++m) upper[m][m] = blocks.u_lambda(m);

  SchurSystem sys;
  sys.rhs = blocks.b_pose();

  std::vector<Mat93> w_times_vinv;
  for (int k = 0; k < blocks.num_landmarks(); ++k) {
    const auto& row = blocks.landmark_row(k);
    const Vec3 y = v_inv[k] * blocks.b_landmark().segment<3>(3 * k);
    w_times_vinv.resize(row.size());
    for (std::size_t a = 0; a < row.size(); ++a) {
      w_times_vinv[a] = row[a].w * v_inv[k];
      sys.rhs.segment<kPoseDim>(kPoseDim * row[a].pose) -= row[a].w * y;
    }
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = a; b < row.size(); ++b) {
        auto [it, inserted] =
            upper[row[a].pose].try_emplace(row[b].pose, Mat9::Zero());
        it->second -= w_times_vinv[a] * row[b].w.transpose();
      }
  }
  // Keep the diagonal exactly symmetric despite accumulation order.
  for (int m = 0; m < n_p; ++m) {
    Mat9& d = upper[m][m];
    d = ((d + d.transpose()) * 0.5).eval();
  }
  sys.s = SchurMatrix::from_upper_rows(std::move(upper));
  return sys;
}

// Landmark update dx_l = -V_l^-1 (b_l + W^T dx_p), blockwise per landmark.
inline VecX backsubstitute(const NormalBlocks& blocks,
                           const VecX& delta_poses) {
  if (delta_poses.size() != kPoseDim * blocks.num_poses())
    throw std::invalid_argument("pose update length mismatch");
  const std::vector<Mat3>& v_inv = blocks.v_lambda_inverses();
  VecX delta_landmarks(3 * blocks.num_landmarks());
  for (int k = 0; k < blocks.num_landmarks(); ++k) {
    Vec3 acc = blocks.b_landmark().segment<3>(3 * k);
    for (const auto& entry : blocks.landmark_row(k))
      acc += entry.w.transpose() *
             delta_poses.segment<kPoseDim>(kPoseDim * entry.pose);
    delta_landmarks.segment<3>(3 * k) = -(v_inv[k] * acc);
  }
  return delta_landmarks;
}

}  // namespace mcgba
