// Tests for reverse logistic regression: membership probabilities, the
// quasi-log-likelihood, the zeta -> d map, and the constrained Newton fit.
#include <catch2/catch_amalgamated.hpp>

#include <genis/rlogistic.hpp>

#include "helpers.hpp"

#include <cmath>
#include <numeric>

using namespace genis;
using genis::testing::constant_density;
using genis::testing::gaussian_pair_grid;
using genis::testing::gaussian_bank;
using genis::testing::identical_bank;

TEST_CASE("membership_probs: identical densities with zero zeta are uniform") {
  std::vector<UnnormalizedDensity> dens{constant_density(1, -2.0), constant_density(1, -2.0),
                                        constant_density(1, -2.0)};
  const Vec p = membership_probs(Vec::Zero(1), dens, Vec::Zero(3));
  for (int l = 0; l < 3; ++l) CHECK(p[l] == Catch::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p.sum() == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("membership_probs: hand value 9/10 vs 1/10") {
  std::vector<UnnormalizedDensity> dens{constant_density(1, 0.0), constant_density(1, 0.0)};
  Vec zeta(2);
  zeta << std::log(3.0), -std::log(3.0);
  const Vec p = membership_probs(Vec::Zero(1), dens, zeta);
  CHECK(p[0] == Catch::Approx(0.9).epsilon(1e-14));
  CHECK(p[1] == Catch::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("membership_probs: zero-support component gets probability 0") {
  UnnormalizedDensity dead = constant_density(1, 0.0);
  dead.log_weight = [](const Vec&) { return neg_inf; };
  std::vector<UnnormalizedDensity> dens{constant_density(1, 0.0), dead};
  const Vec p = membership_probs(Vec::Zero(1), dens, Vec::Zero(2));
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 0.0);

  std::vector<UnnormalizedDensity> none{dead, dead};
  CHECK_THROWS_AS(membership_probs(Vec::Zero(1), none, Vec::Zero(2)), std::runtime_error);
}

TEST_CASE("quasi_loglik: identical densities at zero zeta give N log(1/k)") {
  SampleBank bank = identical_bank(50, 17, 3);
  const double N = 150.0;
  CHECK(quasi_loglik(Vec::Zero(3), bank) == Catch::Approx(N * std::log(1.0 / 3)).epsilon(1e-12));
}

TEST_CASE("quasi_loglik: invariant under adding a constant to every component") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 1.0}});
  SampleBank bank = gaussian_bank(grid, 200, 0, 4);
  Vec zeta(2);
  zeta << 0.3, -0.3;
  const Vec shifted = zeta.array() + 7.3;
  CHECK(quasi_loglik(zeta, bank) == Catch::Approx(quasi_loglik(shifted, bank)).epsilon(1e-12));
}

TEST_CASE("quasi_loglik: equals brute-force summation on a two-Gaussian bank") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 1.0}});
  SampleBank bank = gaussian_bank(grid, 100, 0, 9);
  const Vec zeta = Vec::Zero(2);

  // direct evaluation, no shared code with the implementation
  const double N = 200.0;
  double expect = 0.0;
  for (int l = 0; l < 2; ++l) {
    const ChainSample& c = bank.stage1[static_cast<size_t>(l)];
    const double scale = bank.skeleton.a[l] * N / c.length();
    for (int i = 0; i < c.length(); ++i) {
      const double x = c.draws(i, 0);
      const double lw0 = -0.5 * x * x;
      const double lw1 = -0.5 * (x - 1.0) * (x - 1.0);
      const double target = l == 0 ? lw0 : lw1;
      expect += scale * (target - std::log(std::exp(lw0) + std::exp(lw1)));
    }
  }
  CHECK(quasi_loglik(zeta, bank) == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zeta_to_d: log-weight fixed point maps to all-ones") {
  Vec a(3);
  a << 0.2, 0.5, 0.3;
  Vec zeta = a.array().log();
  zeta.array() -= zeta.mean();
  const Vec d = zeta_to_d(zeta, a);
  for (int j = 0; j < 3; ++j) CHECK(d[j] == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zeta_to_d: hand value e^1 and permutation equivariance") {
  Vec a(2), zeta(2);
  a << 0.5, 0.5;
  zeta << 0.5, -0.5;
  const Vec d = zeta_to_d(zeta, a);
  CHECK(d[0] == 1.0);
  CHECK(d[1] == Catch::Approx(std::exp(1.0)).epsilon(1e-14));

  Vec a3(3), z3(3);
  a3 << 0.5, 0.2, 0.3;
  z3 << 0.1, -0.4, 0.3;
  const Vec d3 = zeta_to_d(z3, a3);
  Vec a3p(3), z3p(3);
  a3p << 0.5, 0.3, 0.2;  // swap components 2 and 3
  z3p << 0.1, 0.3, -0.4;
  const Vec d3p = zeta_to_d(z3p, a3p);
  CHECK(d3p[1] == Catch::Approx(d3[2]).epsilon(1e-14));
  CHECK(d3p[2] == Catch::Approx(d3[1]).epsilon(1e-14));
}

TEST_CASE("fit: identical densities recover unit ratios exactly") {
  Vec a(2);
  a << 0.3, 0.7;
  SampleBank bank = identical_bank(64, 21, 2, a);
  const RLFit fit = fit_reverse_logistic(bank);
  CHECK(fit.converged);
  CHECK(fit.zeta_hat.sum() == Catch::Approx(0.0).margin(1e-10));
  CHECK(fit.d_hat[0] == 1.0);
  CHECK(fit.d_hat[1] == Catch::Approx(1.0).epsilon(1e-9));
  // closed-form maximizer: zeta_l = log a_l - mean(log a)
  Vec expect = a.array().log();
  expect.array() -= expect.mean();
  CHECK(fit.zeta_hat[0] == Catch::Approx(expect[0]).margin(1e-9));
}

TEST_CASE("fit: equal-normalizer Gaussians give d2 near 1") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 1.0}});
  SampleBank bank = gaussian_bank(grid, 10000, 0, 31);
  const RLFit fit = fit_reverse_logistic(bank);
  CHECK(fit.converged);
  // true d2 = c2/c1 = 1; generous fixed window, the calibrated 3-SE version
  // lives with the covariance tests
  CHECK(std::abs(fit.d_hat[1] - 1.0) < 0.1);
}

TEST_CASE("fit: scale-2 Gaussian recovers normalizer ratio 2") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 10000, 0, 32);
  const RLFit fit = fit_reverse_logistic(bank);
  CHECK(fit.converged);
  CHECK(std::abs(fit.d_hat[1] - 2.0) < 0.2);
}

TEST_CASE("fit: invariant under within-chain sample permutation") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.5, 1.5}});
  SampleBank bank = gaussian_bank(grid, 500, 0, 77);
  const RLFit base = fit_reverse_logistic(bank);

  SampleBank shuffled = bank;
  Mat& draws = shuffled.stage1[0].draws;
  draws = draws.colwise().reverse().eval();  // reverse time order of chain 1
  const RLFit perm = fit_reverse_logistic(shuffled);
  CHECK(perm.zeta_hat[0] == Catch::Approx(base.zeta_hat[0]).margin(1e-9));
  CHECK(perm.zeta_hat[1] == Catch::Approx(base.zeta_hat[1]).margin(1e-9));
}

TEST_CASE("fit: invariant under scaling every density by the same constant") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.5, 1.5}});
  SampleBank bank = gaussian_bank(grid, 500, 0, 78);
  const RLFit base = fit_reverse_logistic(bank);

  SampleBank scaled = bank;
  for (auto& d : scaled.densities) {
    auto f = d.log_weight;
    d.log_weight = [f](const Vec& x) { return f(x) + 42.0; };
  }
  const RLFit s = fit_reverse_logistic(scaled);
  CHECK(s.zeta_hat[0] == Catch::Approx(base.zeta_hat[0]).margin(1e-9));
  CHECK(s.d_hat[1] == Catch::Approx(base.d_hat[1]).epsilon(1e-9));
}

TEST_CASE("fit: rejects k=1 and unusable starts") {
  SampleBank bank = identical_bank(16, 3, 2);
  SampleBank solo = bank;
  solo.skeleton = make_skeleton({0}, 0);
  solo.densities.resize(1);
  solo.stage1.resize(1);
  solo.stage2.resize(1);
  CHECK_THROWS_AS(fit_reverse_logistic(solo), std::invalid_argument);

  // a sample outside its own component's support makes the start non-finite
  SampleBank broken = bank;
  broken.densities[0].log_weight = [](const Vec&) { return neg_inf; };
  CHECK_THROWS_AS(fit_reverse_logistic(broken), std::invalid_argument);
}

TEST_CASE("fit: step-halved Newton never decreases the objective") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {2.0, 0.5}, {-1.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 400, 0, 55);
  const RLFit fit = fit_reverse_logistic(bank);
  CHECK(fit.converged);
  CHECK(fit.grad_norm <= 1e-10);
  REQUIRE(fit.objective_trace.size() >= 1);
  for (size_t i = 1; i < fit.objective_trace.size(); ++i)
    CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1] - 1e-9);
}
