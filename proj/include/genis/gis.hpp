// Multi-proposal importance sampling estimators.
//
// Given stage-2 chains X^{(l)} from the skeleton proposals and a plug-in
// ratio vector d (normalizers relative to the reference), every target nu
// in the family is estimated from the same pooled draws:
//
//   u^pi(x; d) = nu(x) / sum_j a_j phi_j(x) / d_j          (ratio weight)
//   u_hat      = sum_l (a_l / n_l) sum_i u^pi(X_i^{(l)})   (-> theta_pi/c_1)
//   eta_hat    = v_hat^{[f]} / u_hat                       (-> E_pi f)
//
// with v the f-weighted analogue of u. Weight evaluation is done in log
// space; a target that is positive where the proposal mixture vanishes is a
// support violation and aborts rather than silently dropping the point.

#pragma once

#include <genis/family.hpp>

#include <functional>
#include <stdexcept>
#include <vector>

namespace genis {

struct ISWeights {
  std::vector<Vec> u;  // one vector per stage-2 chain, temporal order
  std::vector<Vec> v;  // f(x) * u, filled only when an f was supplied
};

namespace detail {

inline void check_d(const Vec& d, int k) {
  if (d.size() != k) throw std::invalid_argument("d length != skeleton size");
  if ((d.array() <= 0.0).any()) throw std::invalid_argument("d must be positive");
  if (d[0] != 1.0) throw std::invalid_argument("d[0] must be 1 (reference normalization)");
}

// Ratio weights for one chain from precomputed log target values and log
// mixture denominators. Points with zero target weight get weight zero; a
// positive target over a zero-weight mixture point aborts.
inline Vec weights_from_logs(const Vec& log_nu, const Vec& log_den) {
  Vec u(log_nu.size());
  for (Eigen::Index i = 0; i < log_nu.size(); ++i) {
    if (log_nu[i] == neg_inf) {
      u[i] = 0.0;
    } else if (log_den[i] == neg_inf) {
      throw std::runtime_error(
          "importance weights: target is positive at a point where the proposal mixture "
          "has zero weight (support violation)");
    } else {
      u[i] = std::exp(log_nu[i] - log_den[i]);
    }
  }
  return u;
}

inline Vec chain_log_denominators(const ChainSample& chain,
                                  const std::vector<UnnormalizedDensity>& densities,
                                  const Vec& a, const Vec& d) {
  Vec out(chain.length());
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i)
    out[i] = log_mixture_denominator(chain.draws.row(i).transpose(), densities, a, d);
  return out;
}

// Weighted mean of per-chain weight means: sum_l a_l * (sum_i w_i / n_l).
// Computed per chain so that the k=1 self-targeting case stays exactly 1.
inline double weighted_chain_mean(const std::vector<Vec>& per_chain, const Vec& a) {
  double total = 0.0;
  for (size_t l = 0; l < per_chain.size(); ++l)
    total += a[static_cast<Eigen::Index>(l)] * per_chain[l].mean();
  return total;
}

}  // namespace detail

inline ISWeights is_weights(const UnnormalizedDensity& target, const SampleBank& bank,
                            const Vec& d,
                            const std::function<double(const Vec&)>* f = nullptr) {
  detail::check_d(d, bank.k());
  if (bank.stage2.empty()) throw std::invalid_argument("is_weights: no stage-2 chains");
  ISWeights w;
  for (const ChainSample& chain : bank.stage2) {
    const Vec log_nu = log_target_column(chain, target);
    const Vec log_den = detail::chain_log_denominators(chain, bank.densities,
                                                       bank.skeleton.a, d);
    Vec u = detail::weights_from_logs(log_nu, log_den);
    if (f) {
      Vec v(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double fx = (*f)(chain.draws.row(i).transpose());
        if (!std::isfinite(fx))
          throw std::runtime_error("is_weights: f is not finite at a sample point");
        v[i] = fx * u[i];
      }
      w.v.push_back(std::move(v));
    }
    w.u.push_back(std::move(u));
  }
  return w;
}

inline ISWeights is_weights(const std::function<double(const Vec&)>& f,
                            const UnnormalizedDensity& target, const SampleBank& bank,
                            const Vec& d) {
  return is_weights(target, bank, d, &f);
}

inline double u_hat(const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d) {
  const ISWeights w = is_weights(target, bank, d);
  return detail::weighted_chain_mean(w.u, bank.skeleton.a);
}

inline double v_hat(const std::function<double(const Vec&)>& f,
                    const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d) {
  const ISWeights w = is_weights(f, target, bank, d);
  return detail::weighted_chain_mean(w.v, bank.skeleton.a);
}

inline double eta_hat(const std::function<double(const Vec&)>& f,
                      const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d) {
  const ISWeights w = is_weights(f, target, bank, d);
  const double u = detail::weighted_chain_mean(w.u, bank.skeleton.a);
  if (u == 0.0)
    throw std::runtime_error("eta_hat: estimated normalizer is zero (degenerate estimator)");
  const double v = detail::weighted_chain_mean(w.v, bank.skeleton.a);
  return v / u;
}

}  // namespace genis
