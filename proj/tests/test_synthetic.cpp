#include <catch2/catch_amalgamated.hpp>

#include "mcgba/normal_equations.hpp"
#include "mcgba/synthetic.hpp"
#include "support/oracles.hpp"

using namespace mcgba;

TEST_CASE("two-pose fully dense problem", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.num_poses = 2;
  cfg.num_landmarks = 4;
  cfg.target_density = 1.0;
  cfg.noise_sigma = 0.0;
  cfg.rng_seed = 1;
  const BAProblem p = generate_synthetic(cfg);
  CHECK_NOTHROW(p.validate());
  CHECK(measure_schur_density(p) == 1.0);
  // Both cameras share at least one landmark.
  bool shared = false;
  std::vector<std::pair<bool, bool>> seen(p.num_landmarks());
  for (const Observation& obs : p.observations)
    (obs.camera == 0 ? seen[obs.landmark].first
                     : seen[obs.landmark].second) = true;
  for (const auto& [a, b] : seen) shared |= a && b;
  CHECK(shared);
}

TEST_CASE("density control hits the target band", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.num_poses = 50;
  cfg.num_landmarks = 2000;
  cfg.target_density = 0.25;
  cfg.noise_sigma = 1.0;
  cfg.rng_seed = 7;
  const BAProblem p = generate_synthetic(cfg);
  const double measured = measure_schur_density(p);
  CHECK(measured >= 0.20);
  CHECK(measured <= 0.30);

  // The measured density agrees with the materialized Schur pattern.
  const StateVector state = StateVector::from_problem(p);
  NormalBlocks blocks = build_normal_blocks(p, state, 1e-4);
  const SchurSystem sys = compute_schur(blocks);
  CHECK(sys.s.density() == Catch::Approx(measured).epsilon(1e-12));
}

TEST_CASE("generation is deterministic in the config", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.num_poses = 10;
  cfg.num_landmarks = 60;
  cfg.target_density = 0.5;
  cfg.noise_sigma = 2.0;
  cfg.rng_seed = 99;
  const BAProblem a = generate_synthetic(cfg);
  const BAProblem b = generate_synthetic(cfg);
  REQUIRE(a.num_observations() == b.num_observations());
  for (std::int64_t i = 0; i < a.num_observations(); ++i) {
    CHECK(a.observations[i].camera == b.observations[i].camera);
    CHECK(a.observations[i].pixel == b.observations[i].pixel);
  }
  for (int j = 0; j < a.num_landmarks(); ++j)
    CHECK(a.landmarks[j] == b.landmarks[j]);
  for (int i = 0; i < a.num_cameras(); ++i)
    CHECK(a.cameras[i].to_vector() == b.cameras[i].to_vector());
}

TEST_CASE("infeasible densities are rejected", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.num_poses = 10;
  cfg.num_landmarks = 40;
  cfg.rng_seed = 1;
  cfg.target_density = 0.1;  // below the minimum band (1 + 2)/10 = 0.3
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg.target_density = 0.4;  // between the 0.3 and 0.5 bands, gap > 0.05
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg.target_density = 0.3;
  CHECK(measure_schur_density(generate_synthetic(cfg)) ==
        Catch::Approx(0.3));
}

TEST_CASE("invalid configs are rejected", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.num_poses = 1;
  cfg.num_landmarks = 10;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg.num_poses = 8;
  cfg.num_landmarks = 4;  // fewer landmarks than poses
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg.num_landmarks = 40;
  cfg.target_density = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("every camera and landmark is observed", "[synthetic]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const BAProblem p = test::random_small_problem(rng, 6, 25);
    CHECK_NOTHROW(p.validate());
  }
}
