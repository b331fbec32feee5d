// Synthetic BA problems with controllable Schur density: cameras on a
// circle facing the origin, landmarks uniform in a cube, visibility built
// from circular arcs of poses so that the co-observation band has an exactly
// known width.
#pragma once

#include <cmath>
#include <random>
#include <string>

#include "mcgba/bal_problem.hpp"
#include "mcgba/camera_model.hpp"
#include "mcgba/types.hpp"

namespace mcgba {

struct SyntheticConfig {
  int num_poses = 0;
  int num_landmarks = 0;
  double target_density = 1.0;  // in (0, 1]
  double noise_sigma = 0.0;     // pixels
  std::uint64_t rng_seed = 0;
};

namespace detail {

// Every landmark is observed by an arc of consecutive poses (circular
// indexing). The first num_poses landmarks get full-width arcs starting at
// each pose, which guarantees that every pose pair within circular distance
// h co-observes something; no arc is wider than h + 1, so no pair beyond
// distance h does. The resulting block density is exactly
// (1 + min(2h, n_p - 1)) / n_p.
inline double band_density(int num_poses, int half_width) {
  return (1.0 + std::min(2 * half_width, num_poses - 1)) /
         static_cast<double>(num_poses);
}

}  // namespace detail

// Deterministic in the config. Throws std::invalid_argument when the target
// density cannot be met within +-0.05 for the given pose count.
inline BAProblem generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_poses < 2)
    throw std::invalid_argument("need at least two poses");
  if (cfg.num_landmarks < cfg.num_poses)
    throw std::invalid_argument("need at least as many landmarks as poses");
  if (cfg.target_density <= 0.0 || cfg.target_density > 1.0)
    throw std::invalid_argument("target density must be in (0, 1]");
  if (cfg.noise_sigma < 0.0)
    throw std::invalid_argument("noise sigma must be >= 0");

  const int n_p = cfg.num_poses;
  const int max_half_width = (n_p - 1 + 1) / 2;  // ceil((n_p - 1) / 2)
  int half_width = static_cast<int>(
      std::lround((cfg.target_density * n_p - 1.0) / 2.0));
  half_width = std::clamp(half_width, 1, max_half_width);
  const double achieved = detail::band_density(n_p, half_width);
  if (std::abs(achieved - cfg.target_density) > 0.05)
    throw std::invalid_argument(
        "target density " + std::to_string(cfg.target_density) +
        " infeasible for " + std::to_string(n_p) +
        " poses (closest achievable: " + std::to_string(achieved) + ")");

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);
  std::uniform_int_distribution<int> start_dist(0, n_p - 1);
  std::uniform_int_distribution<int> width_dist(2, half_width + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  BAProblem problem;
  problem.cameras.resize(n_p);
  problem.landmarks.resize(cfg.num_landmarks);
  const double radius = 10.0;
  for (int i = 0; i < n_p; ++i) {
    const double phi = 2.0 * M_PI * i / n_p;
    const Vec3 center(radius * std::cos(phi), radius * std::sin(phi), 0.0);
    // Right-handed frame looking down the camera -z axis at the origin.
    Mat3 rot;
    rot.row(0) = Vec3(std::sin(phi), -std::cos(phi), 0.0);
    rot.row(1) = Vec3(0.0, 0.0, -1.0);
    rot.row(2) = center / radius;
    const Eigen::AngleAxisd aa(rot);
    Camera& cam = problem.cameras[i];
    cam.rotation = aa.angle() * aa.axis();
    cam.translation = -(rot * center);
    cam.focal = 1000.0;
    cam.k1 = 0.0;
    cam.k2 = 0.0;
  }
  for (Vec3& lm : problem.landmarks)
    lm = Vec3(cube(rng), cube(rng), cube(rng));

  problem.observations.reserve(
      static_cast<std::size_t>(cfg.num_landmarks) * (half_width + 1));
  for (int lm = 0; lm < cfg.num_landmarks; ++lm) {
    const int start = lm < n_p ? lm : start_dist(rng);
    const int width = lm < n_p ? half_width + 1 : width_dist(rng);
    for (int k = 0; k < std::min(width, n_p); ++k) {
      Observation obs;
      obs.camera = (start + k) % n_p;
      obs.landmark = lm;
      obs.pixel = project(problem.cameras[obs.camera], problem.landmarks[lm]);
      if (cfg.noise_sigma > 0.0) {
        obs.pixel[0] += cfg.noise_sigma * gauss(rng);
        obs.pixel[1] += cfg.noise_sigma * gauss(rng);
      }
      problem.observations.push_back(obs);
    }
  }
  return problem;
}

// Measured block density of the co-observation pattern, diagonal included;
// counts pose pairs without forming S.
inline double measure_schur_density(const BAProblem& problem) {
  const int n_p = problem.num_cameras();
  std::vector<std::vector<int>> observers(problem.num_landmarks());
  for (const Observation& obs : problem.observations)
    observers[obs.landmark].push_back(obs.camera);
  std::vector<std::unordered_set<int>> neighbors(n_p);
  for (auto& cams : observers)
    for (std::size_t a = 0; a < cams.size(); ++a)
      for (std::size_t b = a + 1; b < cams.size(); ++b) {
        neighbors[cams[a]].insert(cams[b]);
        neighbors[cams[b]].insert(cams[a]);
      }
  std::int64_t blocks = n_p;  // diagonal
  for (const auto& n : neighbors) blocks += static_cast<std::int64_t>(n.size());
  return static_cast<double>(blocks) / (static_cast<double>(n_p) * n_p);
}

}  // namespace mcgba
