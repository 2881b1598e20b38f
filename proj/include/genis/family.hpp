// Core data model for multi-proposal importance sampling:
//
//   UnnormalizedDensity  log phi(x) evaluator with unknown normalizer
//   FamilyGrid           ordered finite parameter grid, each point a density
//   ChainSample          time-ordered draws from one proposal
//   SkeletonSet          the k grid points serving as proposals (+ weights a)
//   SampleBank           per-proposal chains split into stage 1 and stage 2
//
// plus the pooled mixture denominator sum_j a_j phi_j(x)/d_j evaluated in log
// space, which every estimator downstream divides by.
#pragma once

#include <genis/numeric.hpp>

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace genis {

enum class Support { ContinuousVector, BinaryLattice };

struct UnnormalizedDensity {
  int dim = 0;
  Support support = Support::ContinuousVector;
  std::function<double(const Vec&)> log_weight;  // finite or -inf, never NaN
  Vec label;                                     // the parameter point xi

  std::string describe() const {
    std::ostringstream os;
    os << "density(xi=[";
    for (int i = 0; i < label.size(); ++i) os << (i ? "," : "") << label[i];
    os << "])";
    return os.str();
  }
};

// Evaluate log phi(x) with the NaN guard every caller needs.
inline double checked_log_weight(const UnnormalizedDensity& d, const Vec& x) {
  if (x.size() != d.dim)
    throw std::invalid_argument("point dimension " + std::to_string(x.size()) +
                                " does not match " + d.describe() + " of dimension " +
                                std::to_string(d.dim));
  const double v = d.log_weight(x);
  if (std::isnan(v))
    throw std::runtime_error("log weight evaluated to NaN for " + d.describe());
  return v;
}

inline std::vector<std::pair<double, double>> default_scaling(const std::vector<Vec>& points) {
  if (points.empty()) return {};
  const auto dim = points.front().size();
  std::vector<std::pair<double, double>> sc(static_cast<size_t>(dim),
                                            {std::numeric_limits<double>::infinity(),
                                             -std::numeric_limits<double>::infinity()});
  for (const Vec& p : points)
    for (Eigen::Index c = 0; c < dim; ++c) {
      sc[static_cast<size_t>(c)].first = std::min(sc[static_cast<size_t>(c)].first, p[c]);
      sc[static_cast<size_t>(c)].second = std::max(sc[static_cast<size_t>(c)].second, p[c]);
    }
  return sc;
}

enum class ChainKind { Iid, Markov };

struct ChainSample {
  Mat draws;  // rows in temporal order, columns = state coordinates
  int proposal_index = -1;  // position in the skeleton this chain was drawn from
  ChainKind kind = ChainKind::Markov;
  std::uint64_t seed = 0;
  int burnin_discarded = 0;

  int length() const { return static_cast<int>(draws.rows()); }
};

struct FamilyGrid {
  std::vector<Vec> points;  // canonical order for every vector/matrix over the family
  std::function<UnnormalizedDensity(const Vec&)> make_density;
  std::vector<std::pair<double, double>> scaling;  // per-coordinate (min,max)
  // Optional: draw a chain from the normalized member at a grid point
  // (exact samplers ignore the burn-in). Required by sample-based selection
  // methods and Monte Carlo divergences.
  std::function<ChainSample(const Vec& xi, int n, int burnin, uint64_t seed)> sample_member;

  int size() const { return static_cast<int>(points.size()); }

  UnnormalizedDensity density(int i) const {
    if (i < 0 || i >= size()) throw std::invalid_argument("grid index out of range");
    return make_density(points[static_cast<size_t>(i)]);
  }

  ChainSample sample(int i, int n, int burnin, uint64_t seed) const {
    if (i < 0 || i >= size()) throw std::invalid_argument("grid index out of range");
    if (!sample_member)
      throw std::invalid_argument("this family grid has no member sampler attached");
    return sample_member(points[static_cast<size_t>(i)], n, burnin, seed);
  }
};

// The k proposal points. Canonical internal order: the reference (the density
// whose normalizer anchors every ratio, d_1 = 1) sits first, the remaining
// indices follow in ascending grid order.
struct SkeletonSet {
  std::vector<int> indices;  // distinct indices into a FamilyGrid
  int reference = 0;         // grid index; always equals indices[0]
  Vec a;                     // k positive mixing weights summing to 1

  int k() const { return static_cast<int>(indices.size()); }
};

inline SkeletonSet make_skeleton(std::vector<int> indices, int reference, Vec a = Vec()) {
  if (indices.empty()) throw std::invalid_argument("skeleton needs at least one index");
  std::vector<int> rest;
  bool found = false;
  for (int i : indices) {
    if (i == reference) {
      if (found) throw std::invalid_argument("duplicate skeleton index " + std::to_string(i));
      found = true;
    } else {
      rest.push_back(i);
    }
  }
  if (!found) throw std::invalid_argument("reference index " + std::to_string(reference) +
                                          " is not a member of the skeleton");
  std::sort(rest.begin(), rest.end());
  for (size_t i = 1; i < rest.size(); ++i)
    if (rest[i] == rest[i - 1])
      throw std::invalid_argument("duplicate skeleton index " + std::to_string(rest[i]));

  SkeletonSet s;
  s.reference = reference;
  s.indices.push_back(reference);
  s.indices.insert(s.indices.end(), rest.begin(), rest.end());
  const int k = s.k();
  if (a.size() == 0) a = Vec::Constant(k, 1.0 / k);
  if (a.size() != k) throw std::invalid_argument("weight vector length != k");
  if ((a.array() <= 0.0).any()) throw std::invalid_argument("mixing weights must be positive");
  if (std::abs(a.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixing weights must sum to 1");
  s.a = std::move(a);
  return s;
}

struct SampleBank {
  SkeletonSet skeleton;
  std::vector<UnnormalizedDensity> densities;  // aligned with skeleton.indices
  std::vector<ChainSample> stage1;             // sizes N_l, one per proposal
  std::vector<ChainSample> stage2;             // sizes n_l (may be empty: stage-1-only bank)

  int k() const { return skeleton.k(); }
  int stage1_total() const {
    int n = 0;
    for (const auto& c : stage1) n += c.length();
    return n;
  }
  int stage2_total() const {
    int n = 0;
    for (const auto& c : stage2) n += c.length();
    return n;
  }
};

inline SampleBank make_bank(const FamilyGrid& grid, const SkeletonSet& skeleton,
                            std::vector<ChainSample> stage1, std::vector<ChainSample> stage2) {
  SampleBank bank;
  bank.skeleton = skeleton;
  for (int gi : skeleton.indices) bank.densities.push_back(grid.density(gi));
  auto check_stage = [&](const std::vector<ChainSample>& chains, const char* name) {
    if (chains.empty()) return;
    if (static_cast<int>(chains.size()) != skeleton.k())
      throw std::invalid_argument(std::string(name) + " chain count != k");
    for (int l = 0; l < skeleton.k(); ++l)
      if (chains[static_cast<size_t>(l)].proposal_index != l)
        throw std::invalid_argument(std::string(name) + " chain " + std::to_string(l) +
                                    " is misaligned with the skeleton order");
  };
  check_stage(stage1, "stage1");
  check_stage(stage2, "stage2");
  bank.stage1 = std::move(stage1);
  bank.stage2 = std::move(stage2);
  return bank;
}

// log sum_j a_j phi_j(x)/d_j, the mixture denominator of the pooled
// importance-sampling estimator; -inf only when every phi_j(x) = 0.
inline double log_mixture_denominator(const Vec& x,
                                      const std::vector<UnnormalizedDensity>& densities,
                                      const Vec& a, const Vec& d) {
  const auto k = static_cast<Eigen::Index>(densities.size());
  if (a.size() != k || d.size() != k)
    throw std::invalid_argument("log_mixture_denominator: a, d, and densities disagree on k");
  if ((d.array() <= 0.0).any())
    throw std::invalid_argument("log_mixture_denominator: d must be positive");
  Vec terms(k);
  for (Eigen::Index j = 0; j < k; ++j)
    terms[j] = std::log(a[j]) + checked_log_weight(densities[static_cast<size_t>(j)], x) -
               std::log(d[j]);
  return logsumexp(terms);
}

// n x k table of log phi_j(X_i) for one chain; the shared precomputation
// behind the reverse-logistic fit and every per-target reweighting.
inline Mat log_phi_table(const ChainSample& chain,
                         const std::vector<UnnormalizedDensity>& densities) {
  const int n = chain.length();
  const auto k = static_cast<Eigen::Index>(densities.size());
  Mat table(n, k);
  for (int i = 0; i < n; ++i) {
    const Vec x = chain.draws.row(i).transpose();
    for (Eigen::Index j = 0; j < k; ++j)
      table(i, j) = checked_log_weight(densities[static_cast<size_t>(j)], x);
  }
  return table;
}

// log nu(X_i) for one chain against one target.
inline Vec log_target_column(const ChainSample& chain, const UnnormalizedDensity& target) {
  const int n = chain.length();
  Vec col(n);
  for (int i = 0; i < n; ++i) col[i] = checked_log_weight(target, chain.draws.row(i).transpose());
  return col;
}

}  // namespace genis
