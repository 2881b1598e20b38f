// Spectral-variance standard errors for the two-stage estimators.
//
// Every variance here is built from one primitive: the lag-window
// spectral-variance (SV) estimate of the long-run covariance of a
// vector-valued time series,
//
//   Sigma_hat = sum_{|j| < b_n} w(j) gamma(j),   gamma(j) the lag-j sample
//   autocovariance (mean-centered, divisor n).
//
// Stage 1 (ratio fitting) uncertainty: the sandwich V_hat = D' B+ Omega B+ D
// built from the SV estimate of the membership-probability chains.
// Stage 2 (weight averaging) uncertainty: tau2/Gamma/T from the SV
// estimates of the importance-weight chains. The two combine via the
// sensitivity vectors c and e into sigma2_u and sigma2_eta, the asymptotic
// variances of u_hat and eta_hat, and into their multi-target analogues.

#pragma once

#include <genis/gis.hpp>
#include <genis/rlogistic.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace genis {

enum class WindowKind { TukeyHanning, Bartlett };

struct LagWindow {
  WindowKind kind = WindowKind::TukeyHanning;
  int fixed_b = 0;  // 0 means use the default rule b_n = floor(sqrt(n))

  int truncation(Eigen::Index n) const {
    if (fixed_b > 0) return fixed_b;
    return static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  }

  double weight(int j, int b) const {
    const int aj = j < 0 ? -j : j;
    if (aj >= b) return 0.0;
    if (kind == WindowKind::TukeyHanning)
      return 0.5 * (1.0 + std::cos(std::numbers::pi * aj / b));
    return 1.0 - static_cast<double>(aj) / static_cast<double>(b);
  }
};

// Lag-window long-run covariance of a time-ordered matrix of observations
// (rows are time). Autocovariances use divisor n; the result is symmetrized.
inline Mat sv_matrix(const Mat& z, const LagWindow& window) {
  const Eigen::Index n = z.rows();
  if (n < 4) throw std::invalid_argument("sv_matrix: need at least 4 rows");
  const int b = window.truncation(n);
  // Shift by the first row before centering so a constant column yields an
  // exact zero (the mean of n identical values need not round to itself).
  const Mat shifted = z.rowwise() - z.row(0);
  const Mat centered = shifted.rowwise() - shifted.colwise().mean();
  Mat s = Mat::Zero(z.cols(), z.cols());
  for (int j = 0; j < b && j < n; ++j) {
    const double w = window.weight(j, b);
    if (w == 0.0) continue;
    const Mat g =
        (centered.topRows(n - j).transpose() * centered.bottomRows(n - j)) /
        static_cast<double>(n);
    if (j == 0)
      s += w * g;
    else
      s += w * (g + g.transpose());  // gamma(-j) = gamma(j)'
  }
  return 0.5 * (s + s.transpose());
}

// Moore-Penrose inverse via symmetric eigendecomposition; eigenvalues below
// 1e-12 of the largest magnitude are treated as exact zeros (the curvature
// matrix has a known one-dimensional null space).
inline Mat pseudo_inverse(const Mat& m) {
  if (m.rows() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("pseudo_inverse: eigendecomposition failed to converge");
  const Vec& ev = es.eigenvalues();
  const double lmax = ev.cwiseAbs().maxCoeff();
  Vec inv = Vec::Zero(ev.size());
  if (lmax > 0.0)
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (std::abs(ev[i]) > 1e-12 * lmax) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Gradient of the zeta -> d map at the fit, written in terms of d itself:
// first row (d_2 ... d_k), then -diag(d_2 ... d_k).
inline Mat d_matrix(const Vec& d) {
  const Eigen::Index k = d.size();
  Mat D = Mat::Zero(k, k - 1);
  for (Eigen::Index j = 1; j < k; ++j) {
    D(0, j - 1) = d[j];
    D(j, j - 1) = -d[j];
  }
  return D;
}

struct RLCovariance {
  Mat B;      // k x k curvature of the fitting objective (per observation)
  Mat Omega;  // k x k long-run covariance of the score
  Mat U;      // k x k sandwich B+ Omega B+
  Mat V;      // (k-1) x (k-1) covariance of the fitted ratios
  Mat D;      // k x (k-1) gradient of the zeta -> d map
};

// Sandwich covariance of the fitted normalizer ratios, built from the
// stage-1 chains of membership probabilities.
inline RLCovariance rl_covariance(const SampleBank& bank, const RLFit& fit,
                                  const LagWindow& window) {
  if (!fit.converged)
    throw std::invalid_argument("rl_covariance: the ratio fit did not converge");
  const int k = bank.k();
  const Vec& a = bank.skeleton.a;
  std::vector<Mat> tables;
  for (const ChainSample& c : bank.stage1) tables.push_back(log_phi_table(c, bank.densities));
  const double N = static_cast<double>(bank.stage1_total());

  RLCovariance out;
  Vec grad(k);
  detail::score_and_curvature(fit.zeta_hat, tables, a, grad, out.B);
  out.B = (0.5 * (out.B + out.B.transpose())).eval();

  out.Omega = Mat::Zero(k, k);
  for (int l = 0; l < k; ++l) {
    const Mat& t = tables[static_cast<size_t>(l)];
    Mat z(t.rows(), k);
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      z.row(i) = detail::membership_from_row(t.row(i), fit.zeta_hat).transpose();
    const double nl = static_cast<double>(t.rows());
    out.Omega += (N / nl) * a[l] * a[l] * sv_matrix(z, window);
  }

  const Mat bp = pseudo_inverse(out.B);
  out.U = (0.5 * (bp * out.Omega * bp + (bp * out.Omega * bp).transpose())).eval();
  out.D = d_matrix(fit.d_hat);
  out.V = (0.5 * (out.D.transpose() * out.U * out.D +
                  (out.D.transpose() * out.U * out.D).transpose()))
              .eval();
  return out;
}

namespace detail {

// Shared accumulation for the sensitivity vectors: the base factor of entry
// j-1 at sample x is a_j a_l nu(x) phi_j(x) / (den(x)^2 d_j^2); c sums it
// with weight 1 and the f-weighted analogue sums it with weight f(x). Chain
// means of the ratio weights u (and v when f is given) come along for free.
struct Sensitivities {
  Vec c;       // length k-1
  Vec e1;      // length k-1, f-weighted counterpart of c (zero without f)
  double u = 0.0;
  double v = 0.0;
};

inline Sensitivities sensitivity_core(const std::function<double(const Vec&)>* f,
                                      const UnnormalizedDensity& target,
                                      const SampleBank& bank, const Vec& d) {
  check_d(d, bank.k());
  const Eigen::Index k = bank.k();
  const Vec& a = bank.skeleton.a;
  const Vec log_a = a.array().log();
  const Vec log_d = d.array().log();

  Sensitivities out;
  out.c = Vec::Zero(k - 1);
  out.e1 = Vec::Zero(k - 1);
  for (size_t l = 0; l < bank.stage2.size(); ++l) {
    const ChainSample& chain = bank.stage2[l];
    const Mat t = log_phi_table(chain, bank.densities);
    const Vec log_nu = log_target_column(chain, target);
    const double nl = static_cast<double>(chain.length());
    const double log_al = log_a[static_cast<Eigen::Index>(l)];

    double usum = 0.0;
    double vsum = 0.0;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const Vec terms = log_a + t.row(i).transpose() - log_d;
      const double log_den = logsumexp(terms);
      if (log_nu[i] == neg_inf) continue;  // zero weight, zero contribution
      if (log_den == neg_inf)
        throw std::runtime_error(
            "sensitivity vectors: target is positive where the proposal mixture has zero "
            "weight (support violation)");
      const double ui = std::exp(log_nu[i] - log_den);
      usum += ui;
      double fx = 0.0;
      if (f) {
        fx = (*f)(chain.draws.row(i).transpose());
        if (!std::isfinite(fx))
          throw std::runtime_error("sensitivity vectors: f is not finite at a sample point");
        vsum += fx * ui;
      }
      for (Eigen::Index j = 1; j < k; ++j) {
        if (t(i, j) == neg_inf) continue;
        const double base = std::exp(log_a[j] + log_al + log_nu[i] + t(i, j) -
                                     2.0 * log_den - 2.0 * log_d[j]) /
                            nl;
        out.c[j - 1] += base;
        if (f) out.e1[j - 1] += fx * base;
      }
    }
    out.u += a[static_cast<Eigen::Index>(l)] * usum / nl;
    out.v += a[static_cast<Eigen::Index>(l)] * vsum / nl;
  }
  return out;
}

}  // namespace detail

// Sensitivity of u_hat to the fitted ratios (length k-1).
inline Vec c_hat(const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d) {
  return detail::sensitivity_core(nullptr, target, bank, d).c;
}

// Sensitivity of eta_hat to the fitted ratios (length k-1).
inline Vec e_hat(const std::function<double(const Vec&)>& f, const UnnormalizedDensity& target,
                 const SampleBank& bank, const Vec& d) {
  const detail::Sensitivities s = detail::sensitivity_core(&f, target, bank, d);
  if (s.u == 0.0)
    throw std::runtime_error("e_hat: estimated normalizer is zero (degenerate estimator)");
  const double eta = s.v / s.u;
  return s.e1 / s.u - s.c * eta / s.u;
}

// Stage-2 variance of the weight averages: tau2 = sum_l (a_l^2 n/n_l) tau2_l
// with tau2_l the scalar SV estimate of chain l's weight sequence.
inline double tau2_hat(const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d,
                       const LagWindow& window) {
  const ISWeights w = is_weights(target, bank, d);
  const double n = static_cast<double>(bank.stage2_total());
  const Vec& a = bank.skeleton.a;
  double total = 0.0;
  for (size_t l = 0; l < w.u.size(); ++l) {
    const double nl = static_cast<double>(w.u[l].size());
    const Mat z = w.u[l];
    total += a[static_cast<Eigen::Index>(l)] * a[static_cast<Eigen::Index>(l)] * (n / nl) *
             sv_matrix(z, window)(0, 0);
  }
  return total;
}

// Joint stage-2 covariance of (v_hat, u_hat) for one target.
inline Mat gamma_hat(const std::function<double(const Vec&)>& f,
                     const UnnormalizedDensity& target, const SampleBank& bank, const Vec& d,
                     const LagWindow& window) {
  const ISWeights w = is_weights(f, target, bank, d);
  const double n = static_cast<double>(bank.stage2_total());
  const Vec& a = bank.skeleton.a;
  Mat total = Mat::Zero(2, 2);
  for (size_t l = 0; l < w.u.size(); ++l) {
    const double nl = static_cast<double>(w.u[l].size());
    Mat z(w.u[l].size(), 2);
    z.col(0) = w.v[l];
    z.col(1) = w.u[l];
    total += a[static_cast<Eigen::Index>(l)] * a[static_cast<Eigen::Index>(l)] * (n / nl) *
             sv_matrix(z, window);
  }
  return total;
}

// Asymptotic variance of sqrt(n) (u_hat - u): ratio-uncertainty quadratic
// form plus the stage-2 weight variance.
inline double sigma2_u_hat(const UnnormalizedDensity& target, const SampleBank& bank,
                           const RLFit& fit, const RLCovariance& rlcov,
                           const LagWindow& window) {
  const Vec c = c_hat(target, bank, fit.d_hat);
  const double n = static_cast<double>(bank.stage2_total());
  const double N = static_cast<double>(bank.stage1_total());
  const double quad = c.size() > 0 ? (n / N) * c.dot(rlcov.V * c) : 0.0;
  return quad + tau2_hat(target, bank, fit.d_hat, window);
}

// Asymptotic variance of sqrt(n) (eta_hat - E f): ratio-uncertainty
// quadratic form plus the delta-method contraction of Gamma.
inline double sigma2_eta_hat(const std::function<double(const Vec&)>& f,
                             const UnnormalizedDensity& target, const SampleBank& bank,
                             const RLFit& fit, const RLCovariance& rlcov,
                             const LagWindow& window) {
  const Vec e = e_hat(f, target, bank, fit.d_hat);
  const double n = static_cast<double>(bank.stage2_total());
  const double N = static_cast<double>(bank.stage1_total());
  const double quad = e.size() > 0 ? (n / N) * e.dot(rlcov.V * e) : 0.0;

  const ISWeights w = is_weights(f, target, bank, fit.d_hat);
  const double u = detail::weighted_chain_mean(w.u, bank.skeleton.a);
  if (u == 0.0)
    throw std::runtime_error("sigma2_eta_hat: estimated normalizer is zero");
  const double v = detail::weighted_chain_mean(w.v, bank.skeleton.a);
  const Mat g = gamma_hat(f, target, bank, fit.d_hat, window);
  // (v/u)/u rather than v/u^2: when v == u the components are exact
  // negatives, so a constant integrand gets an exactly zero variance.
  Vec grad(2);
  grad << 1.0 / u, -(v / u) / u;
  return quad + grad.dot(g * grad);
}

// Stage-2 covariance of the weight averages across a set of targets:
// sum_l (a_l^2 n/n_l) T_l with T_l the SV estimate of the stacked
// per-target weight sequences of chain l.
inline Mat t_hat(const std::vector<UnnormalizedDensity>& targets, const SampleBank& bank,
                 const Vec& d, const LagWindow& window) {
  const auto P = static_cast<Eigen::Index>(targets.size());
  const double n = static_cast<double>(bank.stage2_total());
  const Vec& a = bank.skeleton.a;
  std::vector<ISWeights> per_target;
  per_target.reserve(targets.size());
  for (const UnnormalizedDensity& t : targets) per_target.push_back(is_weights(t, bank, d));

  Mat total = Mat::Zero(P, P);
  for (size_t l = 0; l < bank.stage2.size(); ++l) {
    const Eigen::Index nl = per_target[0].u[l].size();
    Mat z(nl, P);
    for (Eigen::Index p = 0; p < P; ++p) z.col(p) = per_target[static_cast<size_t>(p)].u[l];
    total += a[static_cast<Eigen::Index>(l)] * a[static_cast<Eigen::Index>(l)] *
             (n / static_cast<double>(nl)) * sv_matrix(z, window);
  }
  return total;
}

// Joint asymptotic covariance of the normalizer-ratio estimates across
// targets; its diagonal reproduces sigma2_u_hat target by target.
inline Mat joint_sigma22(const std::vector<UnnormalizedDensity>& targets,
                         const SampleBank& bank, const RLFit& fit, const RLCovariance& rlcov,
                         const LagWindow& window) {
  const auto P = static_cast<Eigen::Index>(targets.size());
  const Eigen::Index km1 = bank.k() - 1;
  const double n = static_cast<double>(bank.stage2_total());
  const double N = static_cast<double>(bank.stage1_total());
  Mat C(P, km1);
  for (Eigen::Index p = 0; p < P; ++p)
    C.row(p) = c_hat(targets[static_cast<size_t>(p)], bank, fit.d_hat).transpose();
  Mat s = (n / N) * (C * rlcov.V * C.transpose()) + t_hat(targets, bank, fit.d_hat, window);
  return 0.5 * (s + s.transpose());
}

// Long-run covariance of the stacked per-target (v, u) averages: columns
// 0..P-1 hold the f-weighted sequences, columns P..2P-1 the plain weights.
inline Mat lambda_hat(const std::function<double(const Vec&)>& f,
                      const std::vector<UnnormalizedDensity>& targets, const SampleBank& bank,
                      const Vec& d, const LagWindow& window) {
  const auto P = static_cast<Eigen::Index>(targets.size());
  const double n = static_cast<double>(bank.stage2_total());
  const Vec& a = bank.skeleton.a;
  std::vector<ISWeights> per_target;
  per_target.reserve(targets.size());
  for (const UnnormalizedDensity& t : targets) per_target.push_back(is_weights(f, t, bank, d));

  Mat total = Mat::Zero(2 * P, 2 * P);
  for (size_t l = 0; l < bank.stage2.size(); ++l) {
    const Eigen::Index nl = per_target[0].u[l].size();
    Mat z(nl, 2 * P);
    for (Eigen::Index p = 0; p < P; ++p) {
      z.col(p) = per_target[static_cast<size_t>(p)].v[l];
      z.col(P + p) = per_target[static_cast<size_t>(p)].u[l];
    }
    total += a[static_cast<Eigen::Index>(l)] * a[static_cast<Eigen::Index>(l)] *
             (n / static_cast<double>(nl)) * sv_matrix(z, window);
  }
  return total;
}

// Delta-method covariance of the mean estimates across targets; diagonal
// entries are the rho components of sigma2_eta_hat.
inline Mat rho_vec_hat(const std::function<double(const Vec&)>& f,
                       const std::vector<UnnormalizedDensity>& targets, const SampleBank& bank,
                       const Vec& d, const LagWindow& window) {
  const auto P = static_cast<Eigen::Index>(targets.size());
  const Mat lam = lambda_hat(f, targets, bank, d, window);
  Mat H = Mat::Zero(P, 2 * P);
  for (Eigen::Index p = 0; p < P; ++p) {
    const ISWeights w = is_weights(f, targets[static_cast<size_t>(p)], bank, d);
    const double u = detail::weighted_chain_mean(w.u, bank.skeleton.a);
    if (u == 0.0) throw std::runtime_error("rho_vec_hat: estimated normalizer is zero");
    const double v = detail::weighted_chain_mean(w.v, bank.skeleton.a);
    H(p, p) = 1.0 / u;
    H(p, P + p) = -v / (u * u);
  }
  Mat rho = H * lam * H.transpose();
  return 0.5 * (rho + rho.transpose());
}

// Relative standard error for hypothetical stage sizes (N, n), from the
// fitted pieces: (sqrt(c'Vc)/sqrt(N) + sqrt(tau2)/sqrt(n)) / u_hat.
inline double rel_se_value(double upsilon1, double upsilon2, double u, double N, double n) {
  return (upsilon1 / std::sqrt(N) + upsilon2 / std::sqrt(n)) / u;
}

inline double rel_se(const UnnormalizedDensity& target, const SampleBank& bank,
                     const RLFit& fit, const RLCovariance& rlcov, const LagWindow& window,
                     double N, double n) {
  const Vec c = c_hat(target, bank, fit.d_hat);
  const double quad = c.size() > 0 ? c.dot(rlcov.V * c) : 0.0;
  const double upsilon1 = std::sqrt(std::max(0.0, quad));
  const double upsilon2 = std::sqrt(std::max(0.0, tau2_hat(target, bank, fit.d_hat, window)));
  const double u = u_hat(target, bank, fit.d_hat);
  if (u <= 0.0)
    throw std::runtime_error("rel_se: estimated normalizer is not positive");
  return rel_se_value(upsilon1, upsilon2, u, N, n);
}

}  // namespace genis
