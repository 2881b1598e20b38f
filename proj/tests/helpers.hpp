// Shared fixtures for the test suite: small density families and sample
// banks with known analytic answers.
#pragma once

#include <genis/family.hpp>
#include <genis/models/gaussian.hpp>
#include <genis/rng.hpp>

#include <vector>

namespace genis::testing {

inline UnnormalizedDensity constant_density(int dim, double log_value) {
  UnnormalizedDensity d;
  d.dim = dim;
  d.support = Support::ContinuousVector;
  d.log_weight = [log_value](const Vec&) { return log_value; };
  d.label = Vec::Zero(1);
  return d;
}

// Grid over 1-D Gaussian kernels at the given (mean, sd) pairs.
inline FamilyGrid gaussian_pair_grid(const std::vector<std::pair<double, double>>& pts) {
  FamilyGrid g;
  for (const auto& [m, s] : pts) {
    Vec p(2);
    p << m, s;
    g.points.push_back(p);
  }
  g.make_density = [](const Vec& xi) {
    UnnormalizedDensity d = gaussian_density(xi[0], xi[1]);
    d.label = xi;
    return d;
  };
  g.scaling = default_scaling(g.points);
  return g;
}

// Bank of iid Gaussian chains over the full grid (skeleton = whole grid,
// reference = grid index 0, equal weights).
inline SampleBank gaussian_bank(const FamilyGrid& grid, int n_stage1, int n_stage2,
                                std::uint64_t seed) {
  std::vector<int> idx(static_cast<size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) idx[static_cast<size_t>(i)] = i;
  SkeletonSet skel = make_skeleton(idx, 0);
  std::vector<ChainSample> s1, s2;
  for (int l = 0; l < skel.k(); ++l) {
    const Vec& p = grid.points[static_cast<size_t>(skel.indices[static_cast<size_t>(l)])];
    if (n_stage1 > 0) {
      ChainSample c = gaussian_sample(p[0], p[1], n_stage1, stream(seed, STAGE1, l));
      c.proposal_index = l;
      s1.push_back(c);
    }
    if (n_stage2 > 0) {
      ChainSample c = gaussian_sample(p[0], p[1], n_stage2, stream(seed, STAGE2, l));
      c.proposal_index = l;
      s2.push_back(c);
    }
  }
  return make_bank(grid, skel, std::move(s1), std::move(s2));
}

// Bank over two identical constant densities: every estimator degenerates to
// a closed form on it.
inline SampleBank identical_bank(int n_per_chain, std::uint64_t seed, int k = 2,
                                 Vec a = Vec()) {
  FamilyGrid g;
  for (int i = 0; i < k; ++i) g.points.push_back(Vec::Constant(1, static_cast<double>(i)));
  g.make_density = [](const Vec& xi) {
    UnnormalizedDensity d = constant_density(1, 0.0);
    d.label = xi;
    return d;
  };
  g.scaling = default_scaling(g.points);
  std::vector<int> idx(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<size_t>(i)] = i;
  SkeletonSet skel = make_skeleton(idx, 0, std::move(a));
  std::vector<ChainSample> s1, s2;
  for (int l = 0; l < k; ++l) {
    ChainSample c = gaussian_sample(0.0, 1.0, n_per_chain, stream(seed, STAGE1, l));
    c.proposal_index = l;
    s1.push_back(c);
    ChainSample c2 = gaussian_sample(0.0, 1.0, n_per_chain, stream(seed, STAGE2, l));
    c2.proposal_index = l;
    s2.push_back(c2);
  }
  return make_bank(g, skel, std::move(s1), std::move(s2));
}

}  // namespace genis::testing
