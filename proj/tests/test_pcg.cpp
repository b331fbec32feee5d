#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mcgba/normal_equations.hpp"
#include "mcgba/pcg.hpp"
#include "support/oracles.hpp"

using namespace mcgba;

namespace {

VecX random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VecX v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

}  // namespace

TEST_CASE("identity system converges in one exact step", "[pcg]") {
  std::mt19937_64 rng(2);
  const SchurMatrix s = test::diagonal_schur({1.0}, 3);
  const VecX b = random_vector(rng, s.dim());
  CgConfig cfg;
  cfg.epsilon = 1e-12;
  const CgResult result = solve_pcg(
      s, b, test::identity_preconditioner(3), VecX::Zero(s.dim()), cfg);
  CHECK(result.stats.converged);
  CHECK(result.stats.iterations == 1);
  CHECK((result.x + b).norm() == 0.0);  // solves S x = -b
  CHECK(result.stats.residual_norm_history.size() == 2);
}

TEST_CASE("k distinct eigenvalues terminate in k iterations", "[pcg]") {
  std::mt19937_64 rng(5);
  for (int k : {2, 4, 9, 17}) {
    std::vector<double> values;
    for (int i = 0; i < k; ++i) values.push_back(1.0 + 2.5 * i);
    const SchurMatrix s = test::diagonal_schur(values, 5);
    const VecX b = random_vector(rng, s.dim());
    CgConfig cfg;
    cfg.epsilon = 1e-10;
    cfg.max_iterations = 100;
    const CgResult result = solve_pcg(
        s, b, test::identity_preconditioner(5), VecX::Zero(s.dim()), cfg);
    CHECK(result.stats.converged);
    CHECK(result.stats.iterations <= k);
  }
}

TEST_CASE("solution matches a dense solve on a synthetic problem", "[pcg]") {
  std::mt19937_64 rng(11);
  const BAProblem p = test::random_small_problem(rng, 10, 30);
  const StateVector state = test::perturbed_state(p, rng, 1e-3);
  NormalBlocks blocks = build_normal_blocks(p, state, 1e-3);
  const SchurSystem sys = compute_schur(blocks);

  CgConfig cfg;
  cfg.epsilon = 1e-8;
  cfg.max_iterations = 2000;
  const CgResult result = solve_pcg(sys.s, sys.rhs, block_jacobi(sys.s),
                                    VecX::Zero(sys.s.dim()), cfg);
  const VecX dense = sys.s.to_dense().ldlt().solve(-sys.rhs);
  CHECK(result.stats.converged);
  CHECK((result.x - dense).norm() <= 1e-6 * dense.norm());
}

TEST_CASE("recurred residual does not drift", "[pcg]") {
  std::mt19937_64 rng(13);
  const SchurMatrix s = test::random_spd_schur(rng, 10, 3, 1.05);
  const VecX b = random_vector(rng, s.dim());
  CgConfig cfg;
  cfg.epsilon = 1e-10;
  cfg.max_iterations = 500;
  cfg.check_residual_drift = true;
  const CgResult result =
      solve_pcg(s, b, block_jacobi(s), VecX::Zero(s.dim()), cfg);
  CHECK(result.stats.converged);
  CHECK(result.stats.max_residual_drift < 1e-8);
}

TEST_CASE("preconditioned residual norm is monotone on SPD test systems",
          "[pcg]") {
  std::mt19937_64 rng(17);
  const SchurMatrix s = test::random_spd_schur(rng, 8, 2, 1.2);
  const BlockJacobiPreconditioner m = block_jacobi(s);
  const VecX b = random_vector(rng, s.dim());

  // Recompute r^T M r along the run via recorded iterates.
  CgConfig cfg;
  cfg.epsilon = 1e-10;
  cfg.max_iterations = 300;
  cfg.record_iterates = true;
  const CgResult result = solve_pcg(s, b, m, VecX::Zero(s.dim()), cfg);
  REQUIRE(result.stats.converged);
  double prev = std::numeric_limits<double>::infinity();
  for (const VecX& x : result.stats.iterates) {
    const VecX r = -b - s.multiply(x);
    const double value = r.dot(m.apply(r));
    CHECK(value <= prev * (1.0 + 1e-10) + 1e-30);
    prev = value;
  }
}

TEST_CASE("convergence flag matches the history", "[pcg]") {
  std::mt19937_64 rng(19);
  const SchurMatrix s = test::random_spd_schur(rng, 6, 2, 1.02);
  const VecX b = random_vector(rng, s.dim());
  for (int imax : {3, 10, 500}) {
    CgConfig cfg;
    cfg.epsilon = 1e-9;
    cfg.max_iterations = imax;
    const CgResult result =
        solve_pcg(s, b, block_jacobi(s), VecX::Zero(s.dim()), cfg);
    const auto& h = result.stats.residual_norm_history;
    REQUIRE(h.size() == static_cast<std::size_t>(result.stats.iterations) + 1);
    CHECK(result.stats.converged == (h.back() < cfg.epsilon * h.front()));
  }
}

TEST_CASE("breakdown on a non-SPD matrix", "[pcg]") {
  std::vector<std::map<int, Mat9>> rows(2);
  rows[0][0] = -2.0 * Mat9::Identity();
  rows[1][1] = Mat9::Identity();
  const SchurMatrix s = SchurMatrix::from_upper_rows(std::move(rows));
  std::mt19937_64 rng(23);
  const VecX b = random_vector(rng, s.dim());
  CgConfig cfg;
  CHECK_THROWS_AS(solve_pcg(s, b, test::identity_preconditioner(2),
                            VecX::Zero(s.dim()), cfg),
                  NumericalFailure);
}

TEST_CASE("zero right-hand side returns immediately", "[pcg]") {
  const SchurMatrix s = test::diagonal_schur({2.0}, 2);
  CgConfig cfg;
  const CgResult result = solve_pcg(s, VecX::Zero(s.dim()),
                                    test::identity_preconditioner(2),
                                    VecX::Zero(s.dim()), cfg);
  CHECK(result.stats.converged);
  CHECK(result.stats.iterations == 0);
  CHECK(result.x.norm() == 0.0);
}
