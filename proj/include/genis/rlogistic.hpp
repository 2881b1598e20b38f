// Reverse logistic regression.
//
// Pooled stage-1 samples are treated as multinomially labeled by the
// proposal that generated them. With zeta_l = -log(c_l) + log(a_l), the
// membership probability of component l at a point x is
//
//   p_l(x, zeta) = phi_l(x) e^{zeta_l} / sum_s phi_s(x) e^{zeta_s}
//
// and maximizing the quasi-log-likelihood
//
//   l_N(zeta) = sum_l a_l (N/N_l) sum_i log p_l(X_i^{(l)}, zeta)
//
// over the sum-zero hyperplane (the likelihood is invariant to a common
// shift) estimates the normalizer ratios d_j = c_j/c_1 up to that shift.
// The maximizer is found by Newton-Raphson on the reduced parameterization
// zeta_k = -sum_{j<k} zeta_j with step halving; the objective is concave, so
// the zero start is immaterial.
#pragma once

#include <genis/family.hpp>

#include <stdexcept>
#include <vector>

namespace genis {

struct RLFit {
  Vec zeta_hat;  // length k, sums to zero
  Vec d_hat;     // length k, d_hat[0] = 1 exactly
  bool converged = false;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::infinity();  // per-observation score sup-norm
  std::vector<double> objective_trace;  // accepted quasi-log-likelihood values
};

inline Vec membership_probs(const Vec& x, const std::vector<UnnormalizedDensity>& densities,
                            const Vec& zeta) {
  const auto k = static_cast<Eigen::Index>(densities.size());
  if (zeta.size() != k)
    throw std::invalid_argument("membership_probs: zeta length != number of densities");
  Vec terms(k);
  for (Eigen::Index l = 0; l < k; ++l)
    terms[l] = checked_log_weight(densities[static_cast<size_t>(l)], x) + zeta[l];
  const double lse = logsumexp(terms);
  if (lse == neg_inf)
    throw std::runtime_error("membership_probs: every component has zero weight at the point");
  // std::exp rather than Eigen's packet exp: the latter maps -inf to a
  // denormal instead of an exact zero.
  for (Eigen::Index l = 0; l < k; ++l) terms[l] = std::exp(terms[l] - lse);
  return terms;
}

// d_j = exp(zeta_1 - zeta_j) * a_j / a_1, the map from the shift-normalized
// fit back to normalizer ratios relative to the reference.
inline Vec zeta_to_d(const Vec& zeta, const Vec& a) {
  const auto k = zeta.size();
  if (a.size() != k) throw std::invalid_argument("zeta_to_d: a length != zeta length");
  if ((a.array() <= 0.0).any()) throw std::invalid_argument("zeta_to_d: a must be positive");
  Vec d(k);
  d[0] = 1.0;
  for (Eigen::Index j = 1; j < k; ++j) d[j] = std::exp(zeta[0] - zeta[j]) * a[j] / a[0];
  return d;
}

namespace detail {

// Membership probabilities from one precomputed row of log phi values.
inline Vec membership_from_row(const Eigen::RowVectorXd& log_phi_row, const Vec& zeta) {
  const auto k = zeta.size();
  Vec terms = log_phi_row.transpose() + zeta;
  const double lse = logsumexp(terms);
  if (lse == neg_inf)
    throw std::runtime_error("membership probabilities undefined: zero mixture weight");
  for (Eigen::Index l = 0; l < k; ++l) terms[l] = std::exp(terms[l] - lse);
  return terms;
}

inline double quasi_loglik_tables(const Vec& zeta, const std::vector<Mat>& tables,
                                  const Vec& a) {
  const auto k = zeta.size();
  double N = 0.0;
  for (const Mat& t : tables) N += static_cast<double>(t.rows());
  double total = 0.0;
  for (Eigen::Index l = 0; l < k; ++l) {
    const Mat& t = tables[static_cast<size_t>(l)];
    const double scale = a[l] * N / static_cast<double>(t.rows());
    double chain = 0.0;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      Vec terms = t.row(i).transpose() + zeta;
      chain += terms[l] - logsumexp(terms);
    }
    total += scale * chain;
  }
  return total;
}

// Gradient of the quasi-log-likelihood and the curvature matrix
//   B(zeta)_rr =  sum_l a_l/N_l sum_i p_r (1 - p_r)
//   B(zeta)_rs = -sum_l a_l/N_l sum_i p_r p_s
// (B = -Hessian/N; it is the sandwich "bread" at the optimum).
inline void score_and_curvature(const Vec& zeta, const std::vector<Mat>& tables, const Vec& a,
                                Vec& grad, Mat& B) {
  const auto k = zeta.size();
  double N = 0.0;
  for (const Mat& t : tables) N += static_cast<double>(t.rows());
  grad = Vec::Zero(k);
  B = Mat::Zero(k, k);
  for (Eigen::Index l = 0; l < k; ++l) {
    const Mat& t = tables[static_cast<size_t>(l)];
    const double w = a[l] / static_cast<double>(t.rows());
    Vec psum = Vec::Zero(k);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const Vec p = membership_from_row(t.row(i), zeta);
      psum += p;
      B += w * (Mat(p.asDiagonal()) - p * p.transpose());
    }
    grad -= (N * w) * psum;
  }
  grad += N * a;
}

inline RLFit fit_tables(const std::vector<Mat>& tables, const Vec& a, double tol,
                        int max_iter) {
  const auto k = a.size();
  if (k < 2) throw std::invalid_argument("reverse logistic fit needs k >= 2");
  for (const Mat& t : tables)
    if (t.rows() < 1) throw std::invalid_argument("reverse logistic fit: empty chain");

  Vec zeta = Vec::Zero(k);
  double obj = quasi_loglik_tables(zeta, tables, a);
  if (!std::isfinite(obj))
    throw std::invalid_argument(
        "reverse logistic fit: quasi-log-likelihood is not finite at the zero start "
        "(a sample has zero weight under every component)");

  RLFit fit;
  fit.objective_trace.push_back(obj);
  Vec grad(k);
  Mat B(k, k);
  double N = 0.0;
  for (const Mat& t : tables) N += static_cast<double>(t.rows());
  for (int it = 0; it < max_iter; ++it) {
    score_and_curvature(zeta, tables, a, grad, B);
    // Per-observation score: the raw score scales with N, so an absolute
    // tolerance on it would become unattainable for large sample sizes
    // (rounding noise in the summed probabilities grows past it).
    const Vec projected = grad.array() - grad.mean();  // gradient along the constraint
    fit.grad_norm = projected.lpNorm<Eigen::Infinity>() / N;
    if (fit.grad_norm <= tol) {
      fit.converged = true;
      break;
    }

    // reduced coordinates theta = zeta_{1..k-1}, zeta_k = -sum theta
    const auto r = k - 1;
    Vec grad_red(r);
    for (Eigen::Index i = 0; i < r; ++i) grad_red[i] = grad[i] - grad[k - 1];
    Mat hess_red(r, r);  // Hessian of the objective = -N * B
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j)
        hess_red(i, j) = -N * (B(i, j) - B(i, k - 1) - B(k - 1, j) + B(k - 1, k - 1));

    Vec step = -hess_red.ldlt().solve(grad_red);

    Vec dir(k);
    auto build_dir = [&](const Vec& s) {
      dir.head(r) = s;
      dir[k - 1] = -s.sum();
    };
    build_dir(step);
    // Guard a degenerate curvature solve: fall back to the scaled score
    // whenever the Newton direction is not an ascent direction.
    if (!dir.allFinite() || grad.dot(dir) <= 0.0) build_dir(grad_red / N);
    // Damping: an optimum can sit tens of log-units from the zero start
    // (weakly overlapping proposals), and a full first step overshoots into
    // the region where every membership saturates, the objective goes
    // numerically flat, and the iteration dies. Capped steps follow the
    // concave ridge instead; the cap never binds near the optimum.
    const double cap = 8.0;
    const double dir_norm = dir.lpNorm<Eigen::Infinity>();
    if (dir_norm > cap) dir *= cap / dir_norm;

    // Accept within the objective's own evaluation noise (the summed terms
    // round like sqrt(N) eps |obj|); a tighter slack can reject the final
    // sub-ulp Newton step forever and the fit never reports convergence.
    const double noise = 16.0 * std::sqrt(N) * std::numeric_limits<double>::epsilon() *
                         (1.0 + std::abs(obj));
    double alpha = 1.0;
    double cand = neg_inf;
    for (int h = 0; h < 60; ++h) {
      cand = quasi_loglik_tables(zeta + alpha * dir, tables, a);
      if (std::isfinite(cand) && cand >= obj - noise) break;
      alpha *= 0.5;
    }
    zeta += alpha * dir;
    obj = std::max(obj, cand);
    fit.objective_trace.push_back(obj);
    fit.iterations = it + 1;
  }

  fit.zeta_hat = zeta.array() - zeta.mean();  // exact sum-zero normalization
  return fit;
}

}  // namespace detail

inline double quasi_loglik(const Vec& zeta, const SampleBank& bank) {
  if (bank.stage1.empty()) throw std::invalid_argument("quasi_loglik: no stage-1 chains");
  std::vector<Mat> tables;
  for (const ChainSample& c : bank.stage1) tables.push_back(log_phi_table(c, bank.densities));
  const double v = detail::quasi_loglik_tables(zeta, tables, bank.skeleton.a);
  if (std::isnan(v))
    throw std::runtime_error("quasi_loglik: a sample has zero total mixture weight");
  return v;
}

// Fit from precomputed per-chain log-weight tables (N_l x k each); this is
// the entry point the design-search cache drives.
inline RLFit fit_reverse_logistic(const std::vector<Mat>& stage1_log_weights, const Vec& a,
                                  double tol = 1e-10, int max_iter = 200) {
  RLFit fit = detail::fit_tables(stage1_log_weights, a, tol, max_iter);
  fit.d_hat = zeta_to_d(fit.zeta_hat, a);
  return fit;
}

inline RLFit fit_reverse_logistic(const SampleBank& bank, double tol = 1e-10,
                                  int max_iter = 200) {
  if (bank.k() < 2) throw std::invalid_argument("reverse logistic fit needs k >= 2");
  if (bank.stage1.empty() || static_cast<int>(bank.stage1.size()) != bank.k())
    throw std::invalid_argument("reverse logistic fit: need one stage-1 chain per proposal");
  std::vector<Mat> tables;
  for (const ChainSample& c : bank.stage1) tables.push_back(log_phi_table(c, bank.densities));
  return fit_reverse_logistic(tables, bank.skeleton.a, tol, max_iter);
}

}  // namespace genis
