// Small numeric helpers shared across the library: overflow-safe
// log-sum-exp reductions and infinity conventions.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace genis {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(terms[i])) without overflow; -inf iff every term is -inf.
inline double logsumexp(std::span<const double> terms) {
  double m = neg_inf;
  for (double t : terms) m = std::max(m, t);
  if (m == neg_inf) return neg_inf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

inline double logsumexp(const Vec& terms) {
  return logsumexp(std::span<const double>(terms.data(), static_cast<size_t>(terms.size())));
}

inline double logsumexp(std::initializer_list<double> terms) {
  return logsumexp(std::span<const double>(terms.begin(), terms.size()));
}

}  // namespace genis
