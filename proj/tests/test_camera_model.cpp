#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "mcgba/camera_model.hpp"
#include "mcgba/synthetic.hpp"
#include "support/oracles.hpp"

using namespace mcgba;

namespace {

Camera simple_camera(double focal = 1.0, double k1 = 0.0, double k2 = 0.0) {
  Camera cam;
  cam.translation = Vec3(0, 0, -1);
  cam.focal = focal;
  cam.k1 = k1;
  cam.k2 = k2;
  return cam;
}

}  // namespace

TEST_CASE("project follows the BAL conventions", "[camera]") {
  SECTION("on-axis point maps to the image center") {
    CHECK(project(simple_camera(), Vec3::Zero()) == Vec2(0, 0));
  }
  SECTION("hand-evaluated off-axis point without distortion") {
    // p_cam = (0.1, 0, -1), n = (0.1, 0), radial = 1, pixel = 2 * (0.1, 0).
    const Vec2 pixel = project(simple_camera(2.0), Vec3(0.1, 0, 0));
    CHECK(pixel[0] == Catch::Approx(0.2).epsilon(1e-14));
    CHECK(pixel[1] == 0.0);
  }
  SECTION("hand-evaluated radial term") {
    // |n|^2 = 0.01: radial = 1 + 0.1 * 0.01 + 0.01 * 0.0001 = 1.001001.
    const Vec2 pixel = project(simple_camera(2.0, 0.1, 0.01), Vec3(0.1, 0, 0));
    CHECK(pixel[0] == Catch::Approx(2.0 * 1.001001 * 0.1).epsilon(1e-14));
  }
  SECTION("point on the camera plane is degenerate") {
    Camera cam = simple_camera();
    cam.translation = Vec3::Zero();
    CHECK_THROWS_AS(project(cam, Vec3(1.0, 2.0, 0.0)), DegenerateObservation);
  }
}

TEST_CASE("residual is the projection minus the measurement", "[camera]") {
  const Camera cam = simple_camera(500.0, 0.01, 0.001);
  const Vec3 pt(0.2, -0.1, 0.3);
  const Vec2 proj = project(cam, pt);
  CHECK(residual(cam, pt, proj) == Vec2(0, 0));
  CHECK(residual(cam, pt, proj + Vec2(1, 0)) == Vec2(-1, 0));

  // Affine in the measurement with slope -identity.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec2 m1(gauss(rng), gauss(rng));
    const Vec2 m2(gauss(rng), gauss(rng));
    const Vec2 diff = residual(cam, pt, m1) - residual(cam, pt, m2);
    CHECK((diff + (m1 - m2)).norm() < 1e-12);
  }
}

TEST_CASE("analytic jacobians match central finite differences", "[camera]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const test::JacobianPair pair = test::random_certifiable_jacobian_pair(rng);
    CHECK(test::max_rel_error(pair.analytic.j_cam, pair.fd.j_cam) < 1e-5);
    CHECK(test::max_rel_error(pair.analytic.j_pt, pair.fd.j_pt) < 1e-5);
  }
  // Spot-check a BAL-scale focal length with a step large enough for the
  // much larger pixel magnitudes.
  const auto [cam, pt] = test::random_camera_point(rng);
  const ResidualJacobianBlock block = residual_jacobians(cam, pt);
  const test::FdJacobians fd =
      test::finite_difference_jacobians(cam, pt, 1e-4);
  CHECK(test::max_rel_error(block.j_cam, fd.j_cam, 1e-2) < 1e-5);
  CHECK(test::max_rel_error(block.j_pt, fd.j_pt, 1e-2) < 1e-5);
}

TEST_CASE("jacobian structure identities", "[camera]") {
  std::mt19937_64 rng(29);
  const auto [cam, pt] = test::random_camera_point(rng);
  const ResidualJacobianBlock block = residual_jacobians(cam, pt);

  SECTION("translation columns are the pure p_cam chain rule") {
    const test::FdJacobians fd = test::finite_difference_jacobians(cam, pt);
    CHECK(test::max_rel_error(block.j_cam.block<2, 3>(0, 3),
                              fd.j_cam.block<2, 3>(0, 3)) < 1e-5);
  }
  SECTION("k1 column is focal * |n|^2 * n") {
    const Vec3 p_cam = detail::rotate_point(cam.rotation, pt) + cam.translation;
    const Vec2 n = -p_cam.head<2>() / p_cam.z();
    const Vec2 expected = cam.focal * n.squaredNorm() * n;
    CHECK((block.j_cam.col(7) - expected).norm() <= 1e-12 * expected.norm());
  }
  SECTION("zero rotation is handled by the series branch") {
    Camera cam0 = simple_camera(800.0, 0.05, -0.01);
    cam0.rotation = Vec3::Zero();
    const Vec3 pt0(0.3, -0.2, 0.4);
    const ResidualJacobianBlock b0 = residual_jacobians(cam0, pt0);
    const test::FdJacobians fd0 = test::finite_difference_jacobians(cam0, pt0);
    CHECK(test::max_rel_error(b0.j_cam, fd0.j_cam) < 1e-5);
    CHECK(test::max_rel_error(b0.j_pt, fd0.j_pt) < 1e-5);
  }
}

TEST_CASE("total_cost sums squared residual norms", "[camera]") {
  SECTION("noiseless synthetic problem costs zero at the ground truth") {
    SyntheticConfig cfg;
    cfg.num_poses = 8;
    cfg.num_landmarks = 40;
    cfg.target_density = 0.375;
    cfg.noise_sigma = 0.0;
    cfg.rng_seed = 5;
    const BAProblem p = generate_synthetic(cfg);
    CHECK(total_cost(p, StateVector::from_problem(p)) <= 1e-18);
  }
  SECTION("single observation with residual (3, 4) costs 25") {
    BAProblem p;
    p.cameras.push_back(simple_camera());
    p.landmarks.push_back(Vec3::Zero());
    const Vec2 proj = project(p.cameras[0], p.landmarks[0]);
    p.observations.push_back({0, 0, proj - Vec2(3, 4)});
    CHECK(total_cost(p, StateVector::from_problem(p)) ==
          Catch::Approx(25.0).epsilon(1e-15));
  }
  SECTION("matches an independent scalar-loop recomputation") {
    SyntheticConfig cfg;
    cfg.num_poses = 12;
    cfg.num_landmarks = 100;
    cfg.target_density = 0.4;
    cfg.noise_sigma = 2.0;
    cfg.rng_seed = 7;
    const BAProblem p = generate_synthetic(cfg);
    const StateVector state = StateVector::from_problem(p);
    // Plain loop, no blocking, no Eigen reductions.
    double expected = 0.0;
    for (const Observation& obs : p.observations) {
      const Vec2 r = project(p.cameras[obs.camera], p.landmarks[obs.landmark]) -
                     obs.pixel;
      expected += r[0] * r[0] + r[1] * r[1];
    }
    const double got = total_cost(p, state);
    CHECK(std::abs(got - expected) <= 1e-12 * expected);
  }
  SECTION("invariant under observation permutation") {
    SyntheticConfig cfg;
    cfg.num_poses = 10;
    cfg.num_landmarks = 80;
    cfg.target_density = 0.5;
    cfg.noise_sigma = 1.0;
    cfg.rng_seed = 13;
    BAProblem p = generate_synthetic(cfg);
    const StateVector state = StateVector::from_problem(p);
    const double before = total_cost(p, state);
    std::mt19937_64 rng(99);
    std::shuffle(p.observations.begin(), p.observations.end(), rng);
    const double after = total_cost(p, state);
    CHECK(std::abs(before - after) <= 1e-10 * before);
  }
  SECTION("thread count does not change the value") {
    SyntheticConfig cfg;
    cfg.num_poses = 10;
    cfg.num_landmarks = 80;
    cfg.target_density = 0.5;
    cfg.noise_sigma = 1.0;
    cfg.rng_seed = 13;
    const BAProblem p = generate_synthetic(cfg);
    const StateVector state = StateVector::from_problem(p);
    CHECK(total_cost(p, state, 1) == total_cost(p, state, 4));
  }
}
