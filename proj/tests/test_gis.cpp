// Tests for the multi-proposal importance sampling estimators: per-sample
// weights, the normalizer-ratio estimate u_hat, and the expectation estimate
// eta_hat.

#include <catch2/catch_amalgamated.hpp>

#include <genis/gis.hpp>
#include <genis/models/autologistic.hpp>
#include <genis/models/gaussian.hpp>
#include <genis/rlogistic.hpp>

#include "helpers.hpp"

#include <cmath>

using namespace genis;
using genis::testing::constant_density;
using genis::testing::gaussian_bank;
using genis::testing::gaussian_pair_grid;
using genis::testing::identical_bank;

namespace {

double chain_weight_se(const ISWeights& w, const Vec& a) {
  // Var(u_hat) = sum_l a_l^2 Var_l(u) / n_l for independent chains of iid draws
  double var = 0.0;
  for (size_t l = 0; l < w.u.size(); ++l) {
    const Vec& u = w.u[l];
    const double n = static_cast<double>(u.size());
    const double m = u.mean();
    const double s2 = (u.array() - m).square().sum() / (n - 1.0);
    var += a[static_cast<Eigen::Index>(l)] * a[static_cast<Eigen::Index>(l)] * s2 / n;
  }
  return std::sqrt(var);
}

}  // namespace

TEST_CASE("single proposal, target equal to proposal: all weights exactly one") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}});
  SampleBank bank = gaussian_bank(grid, 256, 512, 20250801ull);
  Vec d = Vec::Ones(1);

  ISWeights w = is_weights(grid.density(0), bank, d);
  REQUIRE(w.u.size() == 1);
  for (Eigen::Index i = 0; i < w.u[0].size(); ++i) REQUIRE(w.u[0][i] == 1.0);
  REQUIRE(w.v.empty());

  REQUIRE(u_hat(grid.density(0), bank, d) == 1.0);  // bitwise, not just approx
}

TEST_CASE("identical proposals: weights are one and u_hat is one") {
  SampleBank bank = identical_bank(64, 99ull);
  Vec d = Vec::Ones(2);
  ISWeights w = is_weights(bank.densities[0], bank, d);
  for (const Vec& u : w.u)
    for (Eigen::Index i = 0; i < u.size(); ++i) REQUIRE(u[i] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(u_hat(bank.densities[0], bank, d) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("weights match a direct ratio computed without logs") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 16, 32, 7ull);
  Vec a(2);
  a << 0.3, 0.7;
  bank.skeleton.a = a;
  Vec d(2);
  d << 1.0, 1.7;

  UnnormalizedDensity target = gaussian_density(0.0, 1.0);
  ISWeights w = is_weights(target, bank, d);
  for (int l = 0; l < 2; ++l) {
    const Mat& draws = bank.stage2[static_cast<size_t>(l)].draws;
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
      const double x = draws(i, 0);
      const double nu = std::exp(-0.5 * x * x);
      const double den =
          0.3 * std::exp(-0.5 * x * x) / 1.0 + 0.7 * std::exp(-(x - 1.0) * (x - 1.0) / 8.0) / 1.7;
      REQUIRE(w.u[static_cast<size_t>(l)][i] ==
              Catch::Approx(nu / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("u_hat recovers an exactly enumerable normalizer ratio on a binary lattice") {
  // Proposal gamma=0 is an iid Bernoulli(kappa) field, so draws are iid and
  // the enumeration oracle gives the exact target ratio.
  const AutologisticModel proposal(3, 3, 0.0, 0.5);
  const AutologisticModel target(3, 3, 1.0, 0.5);
  const double truth = std::exp(target.exact_logZ() - proposal.exact_logZ());

  const int n = 50000;
  RandomStream rs(stream(424242ull, StreamTag::STAGE2, 0));
  Mat draws(n, 9);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 9; ++j) draws(i, j) = rs.bernoulli(0.5) ? 1.0 : 0.0;

  SampleBank bank;
  bank.skeleton = make_skeleton({0}, 0);
  bank.densities = {proposal.density()};
  ChainSample cs;
  cs.draws = draws;
  cs.proposal_index = 0;
  cs.kind = ChainKind::Iid;
  cs.seed = 424242ull;
  bank.stage1 = {cs};
  bank.stage2 = {cs};

  Vec d = Vec::Ones(1);
  ISWeights w = is_weights(target.density(), bank, d);
  const double est = u_hat(target.density(), bank, d);
  const double se = chain_weight_se(w, bank.skeleton.a);
  INFO("est=" << est << " truth=" << truth << " se=" << se);
  REQUIRE(std::abs(est - truth) < 4.0 * se);
}

TEST_CASE("u_hat with the true ratio plug-in recovers an analytic Gaussian ratio") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 16, 20000, 31337ull);
  Vec d(2);
  d << 1.0, 2.0;  // exact normalizer ratio for sd 1 vs sd 2

  UnnormalizedDensity target = gaussian_density(0.5, 1.0);  // normalizer equals q1's
  ISWeights w = is_weights(target, bank, d);
  const double est = u_hat(target, bank, d);
  const double se = chain_weight_se(w, bank.skeleton.a);
  INFO("est=" << est << " se=" << se);
  REQUIRE(std::abs(est - 1.0) < 4.0 * se);
}

TEST_CASE("eta_hat with f identically one is exactly one") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 16, 64, 5ull);
  Vec d(2);
  d << 1.0, 2.0;
  auto one = [](const Vec&) { return 1.0; };
  REQUIRE(eta_hat(one, gaussian_density(0.3, 1.2), bank, d) == 1.0);
}

TEST_CASE("eta_hat for a single self-targeting chain is the sample mean") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}});
  SampleBank bank = gaussian_bank(grid, 16, 1024, 88ull);
  Vec d = Vec::Ones(1);
  auto coord = [](const Vec& x) { return x[0]; };

  const Mat& draws = bank.stage2[0].draws;
  double mean = 0.0;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) mean += draws(i, 0);
  mean /= static_cast<double>(draws.rows());

  REQUIRE(eta_hat(coord, grid.density(0), bank, d) == Catch::Approx(mean).margin(1e-14));
}

TEST_CASE("eta_hat recovers the mean of an off-skeleton Gaussian target") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 16, 20000, 2024ull);
  Vec d(2);
  d << 1.0, 2.0;
  auto coord = [](const Vec& x) { return x[0]; };
  const double est = eta_hat(coord, gaussian_density(0.7, 1.0), bank, d);
  REQUIRE(est == Catch::Approx(0.7).margin(0.03));
}

TEST_CASE("u_hat is linear in the target weight and eta_hat is scale-free") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 1.5}});
  SampleBank bank = gaussian_bank(grid, 16, 512, 12ull);
  Vec d(2);
  d << 1.0, 1.5;

  UnnormalizedDensity target = gaussian_density(0.4, 1.1);
  UnnormalizedDensity scaled = target;
  const double c = 17.5;
  auto base = target.log_weight;
  scaled.log_weight = [base, c](const Vec& x) { return base(x) + std::log(c); };

  const double u1 = u_hat(target, bank, d);
  const double u2 = u_hat(scaled, bank, d);
  REQUIRE(u2 == Catch::Approx(c * u1).epsilon(1e-12));

  auto coord = [](const Vec& x) { return x[0]; };
  REQUIRE(eta_hat(coord, scaled, bank, d) ==
          Catch::Approx(eta_hat(coord, target, bank, d)).epsilon(1e-12));
}

TEST_CASE("u_hat is invariant to permuting non-reference skeleton entries") {
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {1.0, 1.5}, {2.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 16, 256, 3ull);
  Vec a(3);
  a << 0.5, 0.3, 0.2;
  bank.skeleton.a = a;
  Vec d(3);
  d << 1.0, 1.5, 2.0;

  UnnormalizedDensity target = gaussian_density(0.8, 1.3);
  const double u_orig = u_hat(target, bank, d);

  SampleBank swapped = bank;
  std::swap(swapped.densities[1], swapped.densities[2]);
  std::swap(swapped.stage1[1], swapped.stage1[2]);
  std::swap(swapped.stage2[1], swapped.stage2[2]);
  swapped.stage1[1].proposal_index = 1;
  swapped.stage1[2].proposal_index = 2;
  swapped.stage2[1].proposal_index = 1;
  swapped.stage2[2].proposal_index = 2;
  swapped.skeleton.a << 0.5, 0.2, 0.3;
  Vec d_swapped(3);
  d_swapped << 1.0, 2.0, 1.5;

  REQUIRE(u_hat(target, swapped, d_swapped) == Catch::Approx(u_orig).epsilon(1e-12));
}

TEST_CASE("a positive target off the mixture support is an error") {
  UnnormalizedDensity half_line;
  half_line.dim = 1;
  half_line.support = Support::ContinuousVector;
  half_line.log_weight = [](const Vec& x) { return x[0] >= 0.0 ? 0.0 : neg_inf; };

  SampleBank bank;
  bank.skeleton = make_skeleton({0}, 0);
  bank.densities = {half_line};
  ChainSample cs;
  cs.draws = Mat(2, 1);
  cs.draws << 0.5, -1.0;  // second point outside the declared support
  cs.proposal_index = 0;
  cs.kind = ChainKind::Iid;
  bank.stage1 = {cs};
  bank.stage2 = {cs};

  Vec d = Vec::Ones(1);
  REQUIRE_THROWS_AS(is_weights(constant_density(1, 0.0), bank, d), std::runtime_error);
  // A target that also vanishes there is fine: 0-weight points contribute 0.
  ISWeights w = is_weights(half_line, bank, d);
  REQUIRE(w.u[0][0] == 1.0);
  REQUIRE(w.u[0][1] == 0.0);
}

TEST_CASE("a target with zero estimated normalizer makes eta_hat fail") {
  SampleBank bank = identical_bank(32, 4ull);
  Vec d = Vec::Ones(2);
  UnnormalizedDensity zero = constant_density(1, neg_inf);
  REQUIRE(u_hat(zero, bank, d) == 0.0);
  auto coord = [](const Vec& x) { return x[0]; };
  REQUIRE_THROWS_AS(eta_hat(coord, zero, bank, d), std::runtime_error);
}

TEST_CASE("invalid d vectors are rejected") {
  SampleBank bank = identical_bank(16, 6ull);
  Vec bad1(2);
  bad1 << 1.0, -2.0;
  REQUIRE_THROWS_AS(is_weights(bank.densities[0], bank, bad1), std::invalid_argument);
  Vec bad2(2);
  bad2 << 2.0, 1.0;  // reference entry must be one
  REQUIRE_THROWS_AS(is_weights(bank.densities[0], bank, bad2), std::invalid_argument);
  Vec bad3(3);
  bad3 << 1.0, 1.0, 1.0;  // length mismatch
  REQUIRE_THROWS_AS(is_weights(bank.densities[0], bank, bad3), std::invalid_argument);
}

TEST_CASE("fitted ratios reproduce themselves when estimated on the fitting samples") {
  // Evaluating the ratio estimator for skeleton member r on the first-stage
  // samples with the fitted d plugged in returns exactly d_hat[r]; this is
  // the score identity of the constrained maximum.
  FamilyGrid grid = gaussian_pair_grid({{0.0, 1.0}, {0.5, 1.5}, {1.0, 2.0}});
  SampleBank bank = gaussian_bank(grid, 2000, 16, 909ull);
  RLFit fit = fit_reverse_logistic(bank);
  REQUIRE(fit.converged);

  SampleBank on_stage1 = bank;
  on_stage1.stage2 = bank.stage1;  // evaluate on the fitting samples

  for (int r = 0; r < 3; ++r) {
    const double est = u_hat(grid.density(r), on_stage1, fit.d_hat);
    REQUIRE(est == Catch::Approx(fit.d_hat[r]).margin(1e-8));
  }
  REQUIRE(std::abs(u_hat(grid.density(0), on_stage1, fit.d_hat) - 1.0) <= 1e-8);
}
