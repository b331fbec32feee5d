// Reprojection model: BAL convention with negated perspective division and
// radial distortion applied after division,
//
//   p_cam  = R(rotation) * point + translation
//   n      = -(p_cam.x, p_cam.y) / p_cam.z
//   radial = 1 + k1 |n|^2 + k2 |n|^4
//   pixel  = focal * radial * n
//
// plus analytic Jacobians of the residual w.r.t. the 9 camera parameters and
// the 3 point coordinates.
#pragma once

#include <cmath>

#include "mcgba/bal_problem.hpp"
#include "mcgba/parallel.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

// Packed optimization state: poses holds 9 scalars per camera in BAL order,
// landmarks 3 per point.
struct StateVector {
  VecX poses;
  VecX landmarks;

  static StateVector from_problem(const BAProblem& problem) {
    StateVector s;
    s.poses.resize(kPoseDim * problem.num_cameras());
    s.landmarks.resize(kLandmarkDim * problem.num_landmarks());
    for (int i = 0; i < problem.num_cameras(); ++i)
      s.poses.segment<kPoseDim>(kPoseDim * i) = problem.cameras[i].to_vector();
    for (int j = 0; j < problem.num_landmarks(); ++j)
      s.landmarks.segment<3>(3 * j) = problem.landmarks[j];
    return s;
  }

  Camera camera(int i) const {
    return Camera::from_vector(poses.segment<kPoseDim>(kPoseDim * i));
  }

  Vec3 landmark(int j) const { return landmarks.segment<3>(3 * j); }

  int num_cameras() const {
    return static_cast<int>(poses.size() / kPoseDim);
  }
  int num_landmarks() const {
    return static_cast<int>(landmarks.size() / kLandmarkDim);
  }

  // Writes the state back into a problem of matching sizes.
  void apply_to(BAProblem& problem) const {
    for (int i = 0; i < problem.num_cameras(); ++i)
      problem.cameras[i] = camera(i);
    for (int j = 0; j < problem.num_landmarks(); ++j)
      problem.landmarks[j] = landmark(j);
  }
};

struct ResidualJacobianBlock {
  Vec2 residual = Vec2::Zero();
  Mat29 j_cam = Mat29::Zero();
  Mat23 j_pt = Mat23::Zero();
};

namespace detail {

// Rodrigues rotation and its derivative with respect to the axis-angle
// vector. With a = |theta|, c = cos a, s = sin a:
//   R x = c x + (s/a) (theta x x) + ((1-c)/a^2) (theta . x) theta
// Column j of d(Rx)/dtheta is
//   (c1 x + c2 (theta x x) + c3 (theta . x) theta) theta_j
//   + (s/a) (e_j x x) + ((1-c)/a^2) (x_j theta + (theta . x) e_j)
// with c1 = -s/a, c2 = (c a - s)/a^3, c3 = (s a - 2(1-c))/a^4. Below the
// series threshold all coefficients switch to their Taylor expansions.
struct RotationDerivatives {
  Mat3 rotation;  // R(theta)
  Mat3 jacobian;  // d(R(theta) x)/dtheta
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

inline Vec3 rotate_point(const Vec3& theta, const Vec3& x) {
  const double a2 = theta.squaredNorm();
  double b, d;
  if (a2 < 1e-6) {
    b = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    d = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
  } else {
    const double a = std::sqrt(a2);
    b = std::sin(a) / a;
    d = (1.0 - std::cos(a)) / a2;
  }
  const double c = 1.0 - d * a2;  // == cos a
  return c * x + b * theta.cross(x) + d * theta.dot(x) * theta;
}

inline RotationDerivatives rotate_point_derivatives(const Vec3& theta,
                                                    const Vec3& x) {
  const double a2 = theta.squaredNorm();
  double b, d, c1, c2, c3;
  if (a2 < 1e-6) {
    b = 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
    d = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
    c1 = -1.0 + a2 / 6.0 - a2 * a2 / 120.0;
    c2 = -1.0 / 3.0 + a2 / 30.0 - a2 * a2 / 840.0;
    c3 = -1.0 / 12.0 + a2 / 180.0 - a2 * a2 / 6720.0;
  } else {
    const double a = std::sqrt(a2);
    const double s = std::sin(a);
    const double c = std::cos(a);
    b = s / a;
    d = (1.0 - c) / a2;
    c1 = -s / a;
    c2 = (c * a - s) / (a2 * a);
    c3 = (s * a - 2.0 * (1.0 - c)) / (a2 * a2);
  }
  const double c = 1.0 - d * a2;
  const double tdx = theta.dot(x);

  RotationDerivatives out;
  out.rotation = c * Mat3::Identity() + b * skew(theta) +
                 d * theta * theta.transpose();
  const Vec3 radial = c1 * x + c2 * theta.cross(x) + c3 * tdx * theta;
  out.jacobian = radial * theta.transpose() - b * skew(x) +
                 d * (theta * x.transpose() + tdx * Mat3::Identity());
  return out;
}

}  // namespace detail

// Projects a world point through a camera. Throws DegenerateObservation when
// the point lies on the camera plane (p_cam.z == 0) or the result is not
// finite.
inline Vec2 project(const Camera& camera, const Vec3& point) {
  const Vec3 p_cam =
      detail::rotate_point(camera.rotation, point) + camera.translation;
  if (p_cam.z() == 0.0)
    throw DegenerateObservation("point on camera plane (z == 0)");
  const Vec2 n = -p_cam.head<2>() / p_cam.z();
  const double s = n.squaredNorm();
  const double radial = 1.0 + camera.k1 * s + camera.k2 * s * s;
  const Vec2 pixel = camera.focal * radial * n;
  if (!pixel.allFinite())
    throw DegenerateObservation("non-finite projection");
  return pixel;
}

inline Vec2 residual(const Camera& camera, const Vec3& point,
                     const Vec2& measurement) {
  return project(camera, point) - measurement;
}

// Residual plus analytic Jacobians. Column order of j_cam matches the BAL
// parameter order: rotation (3), translation (3), focal, k1, k2.
inline ResidualJacobianBlock residual_jacobians(
    const Camera& camera, const Vec3& point,
    const Vec2& measurement = Vec2::Zero()) {
  const auto rot = detail::rotate_point_derivatives(camera.rotation, point);
  // Same evaluation path as project(), so the residual agrees bitwise.
  const Vec3 p_cam =
      detail::rotate_point(camera.rotation, point) + camera.translation;
  if (p_cam.z() == 0.0)
    throw DegenerateObservation("point on camera plane (z == 0)");
  const double inv_z = 1.0 / p_cam.z();
  const Vec2 n = -p_cam.head<2>() / p_cam.z();
  const double s = n.squaredNorm();
  const double radial = 1.0 + camera.k1 * s + camera.k2 * s * s;

  // d(pixel)/dn and dn/dp_cam.
  const double dradial_ds = camera.k1 + 2.0 * camera.k2 * s;
  const Mat2 pixel_by_n =
      camera.focal *
      (radial * Mat2::Identity() + 2.0 * dradial_ds * n * n.transpose());
  Mat23 n_by_pcam;
  n_by_pcam << -inv_z, 0.0, -n.x() * inv_z, 0.0, -inv_z, -n.y() * inv_z;
  const Mat23 pixel_by_pcam = pixel_by_n * n_by_pcam;

  ResidualJacobianBlock block;
  block.residual = camera.focal * radial * n - measurement;
  block.j_cam.block<2, 3>(0, 0) = pixel_by_pcam * rot.jacobian;
  block.j_cam.block<2, 3>(0, 3) = pixel_by_pcam;
  block.j_cam.col(6) = radial * n;
  block.j_cam.col(7) = camera.focal * s * n;
  block.j_cam.col(8) = camera.focal * s * s * n;
  block.j_pt = pixel_by_pcam * rot.rotation;
  if (!block.residual.allFinite() || !block.j_cam.allFinite() ||
      !block.j_pt.allFinite())
    throw DegenerateObservation("non-finite residual or jacobian");
  return block;
}

// Sum of squared residual norms over all observations. Summation uses a
// fixed blocked order, so the value is identical for any thread count.
inline double total_cost(const BAProblem& problem, const StateVector& state,
                         int num_threads = 1) {
  return blocked_sum(problem.num_observations(), num_threads,
                     [&](std::int64_t i) {
                       const Observation& obs = problem.observations[i];
                       const Camera cam = state.camera(obs.camera);
                       const Vec3 pt = state.landmark(obs.landmark);
                       return residual(cam, pt, obs.pixel).squaredNorm();
                     });
}

}  // namespace mcgba
