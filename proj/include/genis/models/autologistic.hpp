// Centered autologistic model on a rectangular torus.
//
// Each binary site x(s_i) has the conditional distribution
//
//   logit P(x_i = 1 | rest) = logit(kappa) + (gamma/w) * sum_{j in nb(i)} (x_j - kappa)
//
// with w = 4 nearest neighbors (wrap-around). The matching joint pmf is
//
//   pi(x) propto exp{ (logit(kappa) - gamma*kappa) * sum_i x_i
//                     + gamma/(2w) * sum_i sum_{j in nb(i)} x_i x_j }
//
// kappa is the marginal success probability at gamma = 0 (where the model
// factorizes into independent Bernoulli(kappa) sites). The normalizer has no
// closed form; exact_logZ() enumerates all 2^m states for lattices with at
// most 20 sites and serves as the test oracle.
#pragma once

#include <genis/family.hpp>
#include <genis/rng.hpp>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace genis {

enum class ScanOrder { Systematic, Random };

class AutologisticModel {
 public:
  static constexpr int w = 4;

  AutologisticModel(int rows, int cols, double gamma, double kappa)
      : rows_(rows), cols_(cols), gamma_(gamma), kappa_(kappa) {
    if (rows < 2 || cols < 2)
      throw std::invalid_argument("autologistic torus needs rows, cols >= 2");
    if (!(kappa > 0.0 && kappa < 1.0))
      throw std::invalid_argument("kappa must lie strictly inside (0,1)");
    nb_.resize(static_cast<size_t>(sites()));
    for (int s = 0; s < sites(); ++s) {
      const int r = s / cols_, c = s % cols_;
      nb_[static_cast<size_t>(s)] = {((r - 1 + rows_) % rows_) * cols_ + c,
                                     ((r + 1) % rows_) * cols_ + c,
                                     r * cols_ + (c - 1 + cols_) % cols_,
                                     r * cols_ + (c + 1) % cols_};
    }
    logit_kappa_ = std::log(kappa_ / (1.0 - kappa_));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int sites() const { return rows_ * cols_; }
  double gamma() const { return gamma_; }
  double kappa() const { return kappa_; }

  double conditional_p(const Vec& state, int site) const {
    double centered = 0.0;
    for (int j : nb_[static_cast<size_t>(site)]) centered += state[j] - kappa_;
    const double logit = logit_kappa_ + gamma_ / w * centered;
    return 1.0 / (1.0 + std::exp(-logit));
  }

  double log_pmf_unnormalized(const Vec& state) const {
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < sites(); ++i) {
      s1 += state[i];
      if (state[i] != 0.0) {
        double nbsum = 0.0;
        for (int j : nb_[static_cast<size_t>(i)]) nbsum += state[j];
        s2 += state[i] * nbsum;
      }
    }
    return (logit_kappa_ - gamma_ * kappa_) * s1 + gamma_ / (2.0 * w) * s2;
  }

  UnnormalizedDensity density() const {
    UnnormalizedDensity d;
    d.dim = sites();
    d.support = Support::BinaryLattice;
    Vec label(2);
    label << gamma_, kappa_;
    d.label = label;
    d.log_weight = [model = *this](const Vec& x) { return model.log_pmf_unnormalized(x); };
    return d;
  }

  // Single-site Gibbs sampler; one stored row per full sweep.
  ChainSample gibbs(int n, int burnin, std::uint64_t seed,
                    ScanOrder scan = ScanOrder::Systematic) const {
    if (n < 1) throw std::invalid_argument("gibbs needs n >= 1");
    RandomStream rs(seed);
    const int m = sites();
    Vec state(m);
    for (int i = 0; i < m; ++i) state[i] = rs.bernoulli(kappa_) ? 1.0 : 0.0;

    ChainSample out;
    out.draws.resize(n, m);
    out.proposal_index = -1;
    out.kind = ChainKind::Markov;
    out.seed = seed;
    out.burnin_discarded = burnin;

    auto sweep = [&] {
      for (int i = 0; i < m; ++i) {
        const int s = scan == ScanOrder::Systematic
                          ? i
                          : static_cast<int>(rs.uniform_index(static_cast<std::uint64_t>(m)));
        state[s] = rs.bernoulli(conditional_p(state, s)) ? 1.0 : 0.0;
      }
    };
    for (int t = 0; t < burnin; ++t) sweep();
    for (int t = 0; t < n; ++t) {
      sweep();
      out.draws.row(t) = state.transpose();
    }
    return out;
  }

  // log sum over all binary states of exp(log pmf); enumeration oracle.
  double exact_logZ() const {
    const int m = sites();
    if (m > 20) throw std::invalid_argument("exact normalizer limited to <= 20 sites");
    Vec state = Vec::Zero(m);
    double run_max = neg_inf, run_sum = 0.0;
    const std::uint64_t total = 1ull << m;
    for (std::uint64_t code = 0; code < total; ++code) {
      for (int i = 0; i < m; ++i) state[i] = static_cast<double>((code >> i) & 1ull);
      const double t = log_pmf_unnormalized(state);
      if (t <= run_max) {
        run_sum += std::exp(t - run_max);
      } else {
        run_sum = run_sum * std::exp(run_max - t) + 1.0;
        run_max = t;
      }
    }
    return run_max + std::log(run_sum);
  }

 private:
  int rows_, cols_;
  double gamma_, kappa_;
  double logit_kappa_;
  std::vector<std::array<int, 4>> nb_;
};

// Family over (gamma, kappa) pairs on a fixed torus. Members are Gibbs
// sampled; grid points are (gamma, kappa) with kappa varying fastest.
inline FamilyGrid autologistic_grid(int rows, int cols, const std::vector<double>& gammas,
                                    const std::vector<double>& kappas) {
  FamilyGrid g;
  for (double gm : gammas)
    for (double kp : kappas) {
      Vec p(2);
      p << gm, kp;
      g.points.push_back(p);
    }
  g.make_density = [rows, cols](const Vec& xi) {
    return AutologisticModel(rows, cols, xi[0], xi[1]).density();
  };
  g.sample_member = [rows, cols](const Vec& xi, int n, int burnin, uint64_t seed) {
    return AutologisticModel(rows, cols, xi[0], xi[1]).gibbs(n, burnin, seed);
  };
  g.scaling = default_scaling(g.points);
  return g;
}

}  // namespace genis
