// Analytic Gaussian oracle family.
//
// Densities are stored as bare kernels log phi(x) = -(x-mean)^2 / (2 sd^2)
// with the normalizer deliberately omitted, so the true normalizer
// sd*sqrt(2*pi) -- and hence every normalizer ratio the estimators target --
// is known exactly. The sampler draws iid normals, giving an exact
// "Markov chain" of independence kind for calibration tests.
#pragma once

#include <genis/family.hpp>
#include <genis/rng.hpp>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace genis {

inline UnnormalizedDensity gaussian_density(double mean, double sd) {
  if (sd <= 0.0) throw std::invalid_argument("gaussian sd must be positive");
  UnnormalizedDensity d;
  d.dim = 1;
  d.support = Support::ContinuousVector;
  Vec label(2);
  label << mean, sd;
  d.label = label;
  d.log_weight = [mean, sd](const Vec& x) {
    const double z = (x[0] - mean) / sd;
    return -0.5 * z * z;
  };
  return d;
}

// True normalizer of the kernel above: integral of exp(-(x-m)^2/(2 sd^2)).
inline double gaussian_normalizer(double sd) {
  constexpr double sqrt_two_pi = 2.5066282746310005024;
  return sd * sqrt_two_pi;
}

// Symmetric Kullback-Leibler divergence between two normal distributions.
inline double gaussian_skld(double mu1, double sd1, double mu2, double sd2) {
  const double d2 = (mu1 - mu2) * (mu1 - mu2);
  const double v1 = sd1 * sd1, v2 = sd2 * sd2;
  return (v1 + d2) / (2.0 * v2) + (v2 + d2) / (2.0 * v1) - 1.0;
}

inline ChainSample gaussian_sample(double mean, double sd, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gaussian_sample needs n >= 1");
  RandomStream rs(seed);
  ChainSample c;
  c.draws.resize(n, 1);
  for (int i = 0; i < n; ++i) c.draws(i, 0) = mean + sd * rs.normal();
  c.kind = ChainKind::Iid;
  c.seed = seed;
  c.burnin_discarded = 0;
  return c;
}

// Cartesian (mean, sd) grid in canonical order: mean outer, sd inner.
inline FamilyGrid gaussian_grid(const std::vector<double>& means,
                                const std::vector<double>& sds) {
  FamilyGrid g;
  for (double m : means)
    for (double s : sds) {
      Vec p(2);
      p << m, s;
      g.points.push_back(p);
    }
  g.make_density = [](const Vec& xi) {
    UnnormalizedDensity d = gaussian_density(xi[0], xi[1]);
    d.label = xi;
    return d;
  };
  g.sample_member = [](const Vec& xi, int n, int /*burnin: exact sampler*/, uint64_t seed) {
    return gaussian_sample(xi[0], xi[1], n, seed);
  };
  g.scaling = default_scaling(g.points);
  return g;
}

}  // namespace genis
