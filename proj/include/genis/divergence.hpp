// Symmetric Kullback-Leibler divergence between unnormalized densities.
//
// Normalizers cancel in the symmetric form
//
//   SKLD(pi1, pi2) = E_{pi1}[log(nu1/nu2)] - E_{pi2}[log(nu1/nu2)],
//
// so everything here works on the log weights alone. Three routes:
//
//   skld_mc        plug exact or Markov chain samples into the two means
//   skld_laplace   expand each mean around the mode of its own density;
//                  the second-order expansion is exact for Gaussian pairs
//   pairwise_divergence_matrix
//                  all grid pairs at once, also offering plain (scaled)
//                  euclidean parameter distance as a cheap stand-in
#pragma once

#include <genis/family.hpp>
#include <genis/numeric.hpp>
#include <genis/rng.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace genis {

enum class SKLDOrder { First, Second };
enum class DivergenceMethod { MC, Laplace, Euclidean };

// Shared knobs for anything that has to draw its own chains.
struct SamplerConfig {
  int n = 3000;        // retained draws per chain
  int burnin = 400;    // discarded sweeps (exact samplers ignore it)
  std::uint64_t seed = 0;
  int threads = 1;     // worker threads for pairwise matrices
};

// --- Monte Carlo -----------------------------------------------------------

inline double skld_mc(const UnnormalizedDensity& d1, const UnnormalizedDensity& d2,
                      const ChainSample& s1, const ChainSample& s2) {
  if (s1.length() < 1 || s2.length() < 1)
    throw std::invalid_argument("MC divergence needs at least one draw per sample");

  auto mean_log_ratio = [&](const ChainSample& s) {
    double acc = 0.0;
    for (int i = 0; i < s.length(); ++i) {
      const Vec x = s.draws.row(i).transpose();
      const double r = checked_log_weight(d1, x) - checked_log_weight(d2, x);
      if (!std::isfinite(r))
        throw std::runtime_error("log density ratio of " + d1.describe() + " over " +
                                 d2.describe() + " is not finite at a sampled point");
      acc += r;
    }
    return acc / s.length();
  };
  return mean_log_ratio(s1) - mean_log_ratio(s2);
}

// --- finite differences ----------------------------------------------------

namespace detail_fd {

using RealFn = std::function<double(const Vec&)>;

// Central-difference steps scale with the coordinate; the exponent trades the
// truncation error of the stencil against rounding in the cancellations, so
// higher derivative order gets a larger step.
inline double fd_step(double xi, double exponent) {
  return std::pow(std::numeric_limits<double>::epsilon(), exponent) * (1.0 + std::abs(xi));
}

inline Vec fd_gradient(const RealFn& f, const Vec& x) {
  const auto r = x.size();
  Vec g(r);
  Vec xp = x, xm = x;
  for (Eigen::Index i = 0; i < r; ++i) {
    const double h = fd_step(x[i], 1.0 / 3.0);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i]);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

inline Mat fd_hessian(const RealFn& f, const Vec& x) {
  const auto r = x.size();
  const double f0 = f(x);
  Mat h_mat(r, r);
  Vec step(r);
  for (Eigen::Index i = 0; i < r; ++i) step[i] = fd_step(x[i], 0.25);

  Vec y = x;
  for (Eigen::Index i = 0; i < r; ++i) {
    y[i] = x[i] + step[i];
    const double fp = f(y);
    y[i] = x[i] - step[i];
    const double fm = f(y);
    y[i] = x[i];
    h_mat(i, i) = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
    for (Eigen::Index j = i + 1; j < r; ++j) {
      y[i] = x[i] + step[i]; y[j] = x[j] + step[j]; const double fpp = f(y);
      y[j] = x[j] - step[j]; const double fpm = f(y);
      y[i] = x[i] - step[i]; const double fmm = f(y);
      y[j] = x[j] + step[j]; const double fmp = f(y);
      y[i] = x[i]; y[j] = x[j];
      h_mat(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
      h_mat(j, i) = h_mat(i, j);
    }
  }
  return h_mat;
}

// Third derivatives T[c](a,b) by nesting a central first difference in
// coordinate c around the second-difference stencils, flattened so every
// stencil reads f directly (one shared step size keeps the cancellation
// error at the eps^(2/5) level the contraction below needs).
inline std::vector<Mat> fd_third(const RealFn& f, const Vec& x) {
  const auto r = x.size();
  Vec step(r);
  for (Eigen::Index i = 0; i < r; ++i) step[i] = fd_step(x[i], 0.2);

  auto at = [&](Vec y) { return f(y); };
  std::vector<Mat> t(static_cast<size_t>(r), Mat::Zero(r, r));
  Vec y = x;
  for (Eigen::Index c = 0; c < r; ++c) {
    Mat& tc = t[static_cast<size_t>(c)];
    const double hc = step[c];

    // pure: f(x+2h) - 2 f(x+h) + 2 f(x-h) - f(x-2h) over 2 h^3
    {
      y[c] = x[c] + 2.0 * hc; const double f2p = at(y);
      y[c] = x[c] + hc;       const double f1p = at(y);
      y[c] = x[c] - hc;       const double f1m = at(y);
      y[c] = x[c] - 2.0 * hc; const double f2m = at(y);
      y[c] = x[c];
      tc(c, c) = (f2p - 2.0 * f1p + 2.0 * f1m - f2m) / (2.0 * hc * hc * hc);
    }

    for (Eigen::Index a = 0; a < r; ++a) {
      if (a == c) continue;
      const double ha = step[a];
      // d^3/dc da^2: second difference in a, first difference in c
      y[c] = x[c] + hc;
      const double cp0 = at(y);
      y[a] = x[a] + ha; const double cpp = at(y);
      y[a] = x[a] - ha; const double cpm = at(y);
      y[a] = x[a];
      y[c] = x[c] - hc;
      const double cm0 = at(y);
      y[a] = x[a] + ha; const double cmp = at(y);
      y[a] = x[a] - ha; const double cmm = at(y);
      y[a] = x[a]; y[c] = x[c];
      tc(a, a) = ((cpp - 2.0 * cp0 + cpm) - (cmp - 2.0 * cm0 + cmm)) / (2.0 * hc * ha * ha);

      for (Eigen::Index b = a + 1; b < r; ++b) {
        if (b == c) continue;
        const double hb = step[b];
        double acc = 0.0;
        for (int sc = -1; sc <= 1; sc += 2)
          for (int sa = -1; sa <= 1; sa += 2)
            for (int sb = -1; sb <= 1; sb += 2) {
              y[c] = x[c] + sc * hc;
              y[a] = x[a] + sa * ha;
              y[b] = x[b] + sb * hb;
              acc += sc * sa * sb * at(y);
            }
        y[c] = x[c]; y[a] = x[a]; y[b] = x[b];
        tc(a, b) = acc / (8.0 * hc * ha * hb);
        tc(b, a) = tc(a, b);
      }
    }
  }
  return t;
}

// Maximize a log density by damped Newton ascent on finite-difference
// derivatives; falls back to the gradient direction when the Hessian step
// is unusable or points downhill.
inline Vec newton_mode(const RealFn& f, Vec x, double tol = 1e-8, int max_iter = 100) {
  double fx = f(x);
  if (!std::isfinite(fx))
    throw std::runtime_error("mode search started where the log density is not finite");
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = fd_gradient(f, x);
    if (g.lpNorm<Eigen::Infinity>() < tol) return x;

    const Mat h_mat = fd_hessian(f, x);
    Vec p = Eigen::LDLT<Mat>(h_mat).solve(-g);
    if (!p.allFinite() || g.dot(p) <= 0.0) p = g / std::max(1.0, g.norm());

    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      const Vec cand = x + scale * p;
      const double fc = f(cand);
      if (std::isfinite(fc) && fc > fx) {
        x = cand;
        fx = fc;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) throw std::runtime_error("mode search stalled before reaching its tolerance");
  }
  throw std::runtime_error("mode search did not converge");
}

}  // namespace detail_fd

// --- mode expansion --------------------------------------------------------

// First order: log(nu1/nu2) evaluated at the two modes. Second order adds,
// for each mode and its own log density F with curvature inverse Finv,
//
//   1/2 (Finv grad J)' t  -  1/2 sum_ab (hess J)_ab Finv_ab,
//   t_c = sum_ab F_cab Finv_ab,
//
// where J = log nu1 - log nu2. Start points default to the origin.
inline double skld_laplace(const UnnormalizedDensity& d1, const UnnormalizedDensity& d2,
                           SKLDOrder order, Vec start1 = Vec(), Vec start2 = Vec()) {
  if (d1.dim < 1 || d1.dim != d2.dim)
    throw std::invalid_argument("mode expansion needs two densities of equal positive dimension");
  if (d1.support != Support::ContinuousVector || d2.support != Support::ContinuousVector)
    throw std::invalid_argument("mode expansion is defined for continuous-vector support only");
  if (start1.size() == 0) start1 = Vec::Zero(d1.dim);
  if (start2.size() == 0) start2 = Vec::Zero(d1.dim);
  if (start1.size() != d1.dim || start2.size() != d1.dim)
    throw std::invalid_argument("mode search start point has the wrong dimension");

  using detail_fd::RealFn;
  const RealFn g_fn = [&](const Vec& x) { return checked_log_weight(d1, x); };
  const RealFn h_fn = [&](const Vec& x) { return checked_log_weight(d2, x); };
  const RealFn j_fn = [&](const Vec& x) {
    return checked_log_weight(d1, x) - checked_log_weight(d2, x);
  };

  const Vec mode1 = detail_fd::newton_mode(g_fn, std::move(start1));
  const Vec mode2 = detail_fd::newton_mode(h_fn, std::move(start2));
  const double first = j_fn(mode1) - j_fn(mode2);
  if (order == SKLDOrder::First) return first;

  auto correction = [&](const RealFn& own, const Vec& mode) {
    const Mat curv = detail_fd::fd_hessian(own, mode);
    Eigen::FullPivLU<Mat> lu(curv);
    lu.setThreshold(1e-8);
    if (!lu.isInvertible())
      throw std::runtime_error("log density Hessian at the mode is numerically singular");
    const Mat inv = lu.inverse();

    const Vec grad_j = detail_fd::fd_gradient(j_fn, mode);
    const Mat hess_j = detail_fd::fd_hessian(j_fn, mode);
    const std::vector<Mat> third = detail_fd::fd_third(own, mode);
    Vec t(mode.size());
    for (Eigen::Index c = 0; c < mode.size(); ++c)
      t[c] = (third[static_cast<size_t>(c)].array() * inv.array()).sum();
    return 0.5 * (inv * grad_j).dot(t) - 0.5 * (hess_j.array() * inv.array()).sum();
  };
  return (first + correction(g_fn, mode1)) - correction(h_fn, mode2);
}

// --- pairwise matrix -------------------------------------------------------

namespace detail_fd {

// Run fn(p) over p = 0..count-1 on the requested number of threads; the
// work per index is independent, so the result is thread-count invariant.
template <typename Fn>
void parallel_over_pairs(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int p = 0; p < count; ++p) fn(p);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w]() {
      try {
        for (int p = w; p < count; p += threads) fn(p);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail_fd

// Distance matrix over the whole grid: zero diagonal, symmetric, entries
// clamped to be nonnegative (an MC estimate may dip below zero; as a design
// distance it is floored at 0, while skld_mc itself reports the raw value).
inline Mat pairwise_divergence_matrix(const FamilyGrid& grid, DivergenceMethod method,
                                      const SamplerConfig& config = SamplerConfig{}) {
  const int m = grid.size();
  if (m < 1) throw std::invalid_argument("pairwise divergences need a nonempty grid");
  if (method == DivergenceMethod::MC && !grid.sample_member)
    throw std::invalid_argument("MC divergences need a member sampler on the grid");

  Mat out = Mat::Zero(m, m);
  if (method == DivergenceMethod::Euclidean) {
    const auto scaling = grid.scaling.empty() ? default_scaling(grid.points) : grid.scaling;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        double s2 = 0.0;
        for (size_t c = 0; c < scaling.size(); ++c) {
          const double range = scaling[c].second - scaling[c].first;
          if (range <= 0.0) continue;  // constant coordinate carries no distance
          const double delta =
              (grid.points[static_cast<size_t>(i)][static_cast<Eigen::Index>(c)] -
               grid.points[static_cast<size_t>(j)][static_cast<Eigen::Index>(c)]) /
              range;
          s2 += delta * delta;
        }
        out(i, j) = out(j, i) = std::sqrt(s2);
      }
    return out;
  }

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(m) * (m - 1) / 2);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);

  std::vector<double> value(pairs.size(), 0.0);
  detail_fd::parallel_over_pairs(
      static_cast<int>(pairs.size()), config.threads, [&](int p) {
        const auto [i, j] = pairs[static_cast<size_t>(p)];
        const UnnormalizedDensity di = grid.density(i);
        const UnnormalizedDensity dj = grid.density(j);
        double v;
        if (method == DivergenceMethod::Laplace) {
          v = skld_laplace(di, dj, SKLDOrder::Second);
        } else {
          const ChainSample ci = grid.sample(i, config.n, config.burnin,
                                             stream(config.seed, StreamTag::PAIRWISE,
                                                    static_cast<std::uint64_t>(i),
                                                    static_cast<std::uint64_t>(j), 0ull));
          const ChainSample cj = grid.sample(j, config.n, config.burnin,
                                             stream(config.seed, StreamTag::PAIRWISE,
                                                    static_cast<std::uint64_t>(i),
                                                    static_cast<std::uint64_t>(j), 1ull));
          v = skld_mc(di, dj, ci, cj);
        }
        value[static_cast<size_t>(p)] = std::max(v, 0.0);
      });

  for (size_t p = 0; p < pairs.size(); ++p)
    out(pairs[p].first, pairs[p].second) = out(pairs[p].second, pairs[p].first) = value[p];
  return out;
}

}  // namespace genis
