// Proposal-set (skeleton) selection over a family grid.
//
// Search algorithms:
//   point_swap            greedy best-improving swaps, for cheap criteria
//   simulated_annealing   random swaps on a logarithmic cooling ladder,
//                         returning the best set visited
//
// Criteria / selectors:
//   coverage_criterion    soft-minimax distance coverage (select_sfe/select_sfs)
//   select_seq            grow the set where the estimated relative SE peaks
//   select_mnx            minimize the worst relative SE over the family at
//                         the best stage split of a fixed budget
//   select_ent            maximize the entropy of the fitted ratio vector
//                         (minimize -log det of its scaled covariance)
//   optimal_split         split a total budget between the ratio-fitting
//                         stage and the estimation stage
//
// Sample-hungry criteria share a SampleCache so a grid point is sampled at
// most once per stage no matter how often the search revisits it, and the
// cached chains are handed back in SelectionResult::samples_used for reuse.
#pragma once

#include <genis/divergence.hpp>
#include <genis/family.hpp>
#include <genis/gis.hpp>
#include <genis/mcse.hpp>
#include <genis/rlogistic.hpp>
#include <genis/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace genis {

enum class CriterionKind { SpaceFilling, MinimaxRelSE, NegLogDetEntropy };

// A skeleton-set objective; lower is better. Implementations must be
// deterministic for a given set (sample-based ones achieve this by drawing
// through a seeded cache).
struct DesignCriterion {
  CriterionKind kind = CriterionKind::SpaceFilling;
  std::function<double(const SkeletonSet&)> evaluate;
};

struct SelectionResult {
  SkeletonSet skeleton;
  double criterion_value = 0.0;
  std::vector<std::pair<int, double>> trace;  // (iteration, current value)
  SampleBank samples_used;                    // pilot chains for later reuse
};

// Deterministic starting set: the fixed indices, then the remaining slots at
// even quantiles of the grid order (nearest free index on collision).
inline std::vector<int> initial_indices(int m, int k, const std::vector<int>& fixed) {
  if (m < 1 || k < 1 || k > m)
    throw std::invalid_argument("selection needs 1 <= k <= grid size");
  std::vector<int> chosen;
  std::set<int> taken;
  for (int f : fixed) {
    if (f < 0 || f >= m) throw std::invalid_argument("fixed index out of range");
    if (!taken.insert(f).second) throw std::invalid_argument("duplicate fixed index");
    chosen.push_back(f);
  }
  if (static_cast<int>(chosen.size()) > k)
    throw std::invalid_argument("more fixed indices than skeleton slots");
  const int need = k - static_cast<int>(chosen.size());
  for (int t = 0; t < need; ++t) {
    int want = std::min(m - 1, static_cast<int>((t + 0.5) * m / need));
    int pick = -1;
    for (int off = 0; off < m && pick < 0; ++off) {
      if (want - off >= 0 && !taken.count(want - off))
        pick = want - off;
      else if (want + off < m && !taken.count(want + off))
        pick = want + off;
    }
    chosen.push_back(pick);
    taken.insert(pick);
  }
  return chosen;
}

namespace detail_design {

// Coverage value for validated, sorted, distinct indices. psi for one grid
// member is the p-power mean of its distances to the skeleton (p < 0, so it
// leans on the nearest member); the criterion is the p~-power mean of the
// psis. Both sums run in log space; a zero distance short-circuits to
// psi = 0, the p -> -inf limit.
inline double coverage_value(const Mat& dist, const std::vector<int>& skeleton, double p,
                             double p_tilde) {
  const Eigen::Index m = dist.rows();
  std::vector<double> scaled;  // p_tilde * log psi for members with psi > 0
  scaled.reserve(static_cast<size_t>(m));
  std::vector<double> terms(skeleton.size());
  for (Eigen::Index pi = 0; pi < m; ++pi) {
    bool covered = false;
    for (size_t s = 0; s < skeleton.size(); ++s) {
      const double d = dist(pi, skeleton[s]);
      if (d == 0.0) {
        covered = true;
        break;
      }
      terms[s] = p * std::log(d);
    }
    if (covered) continue;  // contributes psi = 0
    double mx = terms[0];
    for (double t : terms) mx = std::max(mx, t);
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    scaled.push_back(p_tilde * (mx + std::log(acc)) / p);
  }
  if (scaled.empty()) return 0.0;
  double mx = scaled[0];
  for (double t : scaled) mx = std::max(mx, t);
  double acc = 0.0;
  for (double t : scaled) acc += std::exp(t - mx);
  return std::exp((mx + std::log(acc)) / p_tilde);
}

inline void check_powers(double p, double p_tilde) {
  if (!(p < 0.0) || !(p_tilde > 0.0))
    throw std::invalid_argument("coverage powers must satisfy p < 0 < p_tilde");
}

inline void check_distance_matrix(const Mat& dist) {
  if (dist.rows() != dist.cols())
    throw std::invalid_argument("distance matrix must be square");
  if ((dist.array() < 0.0).any())
    throw std::invalid_argument("distances must be nonnegative");
}

}  // namespace detail_design

inline double coverage_criterion(const Mat& dist, std::vector<int> skeleton, double p = -30.0,
                                 double p_tilde = 30.0) {
  detail_design::check_distance_matrix(dist);
  detail_design::check_powers(p, p_tilde);
  if (skeleton.empty()) throw std::invalid_argument("coverage needs a nonempty skeleton");
  std::sort(skeleton.begin(), skeleton.end());
  for (size_t i = 0; i < skeleton.size(); ++i) {
    if (skeleton[i] < 0 || skeleton[i] >= dist.rows())
      throw std::invalid_argument("skeleton index out of range");
    if (i > 0 && skeleton[i] == skeleton[i - 1])
      throw std::invalid_argument("duplicate skeleton index");
  }
  return detail_design::coverage_value(dist, skeleton, p, p_tilde);
}

// Greedy search: for each slot in turn, apply the swap with the largest
// strict criterion drop (scanning candidates in index order, so ties keep
// the lowest index); stop when a full pass leaves the set unchanged.
inline SelectionResult point_swap(const FamilyGrid& grid, int k, const Mat& dist,
                                  const std::vector<int>& fixed = {}, double p = -30.0,
                                  double p_tilde = 30.0) {
  const int m = grid.size();
  detail_design::check_distance_matrix(dist);
  if (dist.rows() != m) throw std::invalid_argument("distance matrix size != grid size");
  detail_design::check_powers(p, p_tilde);

  std::vector<int> current = initial_indices(m, k, fixed);
  const std::set<int> fixed_set(fixed.begin(), fixed.end());
  auto value = [&](const std::vector<int>& idx) {
    std::vector<int> s = idx;
    std::sort(s.begin(), s.end());
    return detail_design::coverage_value(dist, s, p, p_tilde);
  };

  double cur = value(current);
  SelectionResult out;
  out.trace.push_back({0, cur});
  int step = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pos = 0; pos < k; ++pos) {
      if (fixed_set.count(current[static_cast<size_t>(pos)])) continue;
      const std::set<int> members(current.begin(), current.end());
      double best = cur;
      int best_j = -1;
      const int keep = current[static_cast<size_t>(pos)];
      for (int j = 0; j < m; ++j) {
        if (members.count(j)) continue;
        current[static_cast<size_t>(pos)] = j;
        const double v = value(current);
        if (v < best) {
          best = v;
          best_j = j;
        }
      }
      current[static_cast<size_t>(pos)] = keep;
      if (best_j >= 0) {
        current[static_cast<size_t>(pos)] = best_j;
        cur = best;
        changed = true;
        out.trace.push_back({++step, cur});
      }
    }
  }

  const int reference =
      fixed.empty() ? *std::min_element(current.begin(), current.end()) : fixed.front();
  out.skeleton = make_skeleton(current, reference);
  out.criterion_value = cur;
  return out;
}

// T = T0 / log(floor((i-1)/B)*B + e): constant for B iterations at a time,
// equal to T0 on the first rung.
inline double annealing_temperature(int i, double T0, int B) {
  return T0 / std::log(static_cast<double>(((i - 1) / B) * B) + std::exp(1.0));
}

// Random single-point swaps; a candidate is always accepted when it does not
// increase the criterion, otherwise with probability exp(-increase/T). The
// best set visited is returned (an improving candidate is always accepted,
// so the minimum over evaluations equals the minimum over the trace).
inline SelectionResult simulated_annealing(const FamilyGrid& grid, int k,
                                           const DesignCriterion& criterion,
                                           const std::vector<int>& fixed, double T0, int B,
                                           int i_max, std::uint64_t seed,
                                           std::vector<int> start = {}) {
  const int m = grid.size();
  if (!(T0 > 0.0)) throw std::invalid_argument("annealing needs T0 > 0");
  if (B < 1) throw std::invalid_argument("annealing needs B >= 1");
  if (i_max < 1) throw std::invalid_argument("annealing needs i_max >= 1");
  if (!criterion.evaluate) throw std::invalid_argument("annealing needs a criterion");
  if (start.empty()) {
    start = initial_indices(m, k, fixed);
  } else {
    if (static_cast<int>(start.size()) != k)
      throw std::invalid_argument("annealing start set size != k");
    std::set<int> s(start.begin(), start.end());
    if (static_cast<int>(s.size()) != k || *s.begin() < 0 || *s.rbegin() >= m)
      throw std::invalid_argument("annealing start set must be distinct in-range indices");
    for (int f : fixed)
      if (!s.count(f)) throw std::invalid_argument("annealing start set must contain fixed indices");
  }
  const std::set<int> fixed_set(fixed.begin(), fixed.end());
  const int reference =
      fixed.empty() ? *std::min_element(start.begin(), start.end()) : fixed.front();

  auto evaluate = [&](const std::vector<int>& idx) -> double {
    const SkeletonSet skel = make_skeleton(idx, reference);
    try {
      return criterion.evaluate(skel);
    } catch (const std::exception& err) {
      std::ostringstream os;
      os << "criterion evaluation failed for skeleton {";
      for (size_t i = 0; i < skel.indices.size(); ++i)
        os << (i ? "," : "") << skel.indices[i];
      os << "}: " << err.what();
      throw std::runtime_error(os.str());
    }
  };

  std::vector<int> current = std::move(start);
  double cur = evaluate(current);
  std::vector<int> best = current;
  double best_val = cur;
  SelectionResult out;
  out.trace.push_back({0, cur});

  RandomStream rng(stream(seed, StreamTag::ANNEAL));
  for (int i = 1; i <= i_max; ++i) {
    std::vector<int> removable;
    for (int pos = 0; pos < k; ++pos)
      if (!fixed_set.count(current[static_cast<size_t>(pos)])) removable.push_back(pos);
    std::vector<int> outside;
    const std::set<int> members(current.begin(), current.end());
    for (int j = 0; j < m; ++j)
      if (!members.count(j)) outside.push_back(j);
    if (removable.empty() || outside.empty()) {
      out.trace.push_back({i, cur});
      continue;
    }

    const int pos = removable[rng.uniform_index(removable.size())];
    const int incoming = outside[rng.uniform_index(outside.size())];
    std::vector<int> cand = current;
    cand[static_cast<size_t>(pos)] = incoming;
    const double cand_val = evaluate(cand);

    bool accept;
    if (!(cand_val > cur)) {
      accept = true;  // covers ties and the both-infinite case without NaNs
    } else {
      const double t = annealing_temperature(i, T0, B);
      accept = rng.uniform() <= std::exp((cur - cand_val) / t);
    }
    if (accept) {
      current = std::move(cand);
      cur = cand_val;
      if (cur < best_val) {
        best = current;
        best_val = cur;
      }
    }
    out.trace.push_back({i, cur});
  }

  out.skeleton = make_skeleton(best, reference);
  out.criterion_value = best_val;
  return out;
}

// --- shared pilot-sampling machinery ----------------------------------------

// Chains drawn once per (grid point, stage) on first use; reads are safe
// concurrently with exclusive inserts. Seeds depend only on (config seed,
// stage, grid index), so cached chains are identical across search methods.
class SampleCache {
 public:
  SampleCache(const FamilyGrid& grid, const SamplerConfig& config)
      : grid_(&grid), config_(config) {}

  const ChainSample& stage1(int index) { return chain(s1_, index, StreamTag::PILOT1); }
  const ChainSample& stage2(int index) { return chain(s2_, index, StreamTag::PILOT2); }

 private:
  const ChainSample& chain(std::map<int, ChainSample>& store, int index, StreamTag tag) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = store.find(index);
    if (it == store.end()) {
      ChainSample c = grid_->sample(index, config_.n, config_.burnin,
                                    stream(config_.seed, tag, static_cast<std::uint64_t>(index)));
      it = store.emplace(index, std::move(c)).first;
    }
    return it->second;
  }

  const FamilyGrid* grid_;
  SamplerConfig config_;
  std::map<int, ChainSample> s1_, s2_;
  std::mutex mu_;
};

namespace detail_design {

inline SampleBank pilot_bank(const FamilyGrid& grid, const SkeletonSet& skel, SampleCache& cache,
                             bool with_stage2) {
  std::vector<ChainSample> s1, s2;
  for (int l = 0; l < skel.k(); ++l) {
    ChainSample c = cache.stage1(skel.indices[static_cast<size_t>(l)]);
    c.proposal_index = l;
    s1.push_back(std::move(c));
    if (with_stage2) {
      ChainSample c2 = cache.stage2(skel.indices[static_cast<size_t>(l)]);
      c2.proposal_index = l;
      s2.push_back(std::move(c2));
    }
  }
  return make_bank(grid, skel, std::move(s1), std::move(s2));
}

// A one-proposal bank needs no ratio fit: the only ratio is pinned at 1.
inline RLFit single_proposal_fit() {
  RLFit fit;
  fit.zeta_hat = Vec::Zero(1);
  fit.d_hat = Vec::Ones(1);
  fit.converged = true;
  return fit;
}

inline RLFit fit_bank(const SampleBank& bank) {
  return bank.k() == 1 ? single_proposal_fit() : fit_reverse_logistic(bank);
}

inline RLCovariance cov_bank(const SampleBank& bank, const RLFit& fit, const LagWindow& window) {
  if (bank.k() == 1) {
    RLCovariance cov;
    cov.B = Mat::Zero(1, 1);
    cov.Omega = Mat::Zero(1, 1);
    cov.U = Mat::Zero(1, 1);
    cov.V = Mat(0, 0);
    cov.D = Mat(1, 0);
    return cov;
  }
  return rl_covariance(bank, fit, window);
}

inline double neg_log_det(const Mat& u) {
  if (u.rows() == 0) return 0.0;
  const double det = u.determinant();
  if (!std::isfinite(det) || !(det > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(det);
}

}  // namespace detail_design

// The two error components and the point estimate behind a relative SE, kept
// separate so the same pilot fit can be re-priced at any stage split.
struct RelSEParts {
  double upsilon1 = 0.0;  // stage-1 component sqrt(c' V c)
  double upsilon2 = 0.0;  // stage-2 component sqrt(tau^2)
  double u = 0.0;
};

inline RelSEParts rel_se_parts(const UnnormalizedDensity& target, const SampleBank& bank,
                               const RLFit& fit, const RLCovariance& cov,
                               const LagWindow& window) {
  RelSEParts out;
  const Vec c = c_hat(target, bank, fit.d_hat);
  const double quad = c.size() > 0 ? c.dot(cov.V * c) : 0.0;
  out.upsilon1 = std::sqrt(std::max(0.0, quad));
  out.upsilon2 = std::sqrt(std::max(0.0, tau2_hat(target, bank, fit.d_hat, window)));
  out.u = u_hat(target, bank, fit.d_hat);
  return out;
}

// Mean-estimation analogue: error components of eta = v/u around |eta|.
inline RelSEParts rel_se_parts(const std::function<double(const Vec&)>& f,
                               const UnnormalizedDensity& target, const SampleBank& bank,
                               const RLFit& fit, const RLCovariance& cov,
                               const LagWindow& window) {
  RelSEParts out;
  const Vec e = e_hat(f, target, bank, fit.d_hat);
  const double quad = e.size() > 0 ? e.dot(cov.V * e) : 0.0;
  out.upsilon1 = std::sqrt(std::max(0.0, quad));
  const double u = u_hat(target, bank, fit.d_hat);
  const double v = v_hat(f, target, bank, fit.d_hat);
  const Mat gamma = gamma_hat(f, target, bank, fit.d_hat, window);
  Vec grad(2);
  grad << 1.0 / u, -(v / u) / u;
  out.upsilon2 = std::sqrt(std::max(0.0, grad.dot(gamma * grad)));
  out.u = std::abs(v / u);
  return out;
}

struct SplitResult {
  int stage1 = 0;
  int stage2 = 0;
  double objective = 0.0;
};

// Exhaustive scan of N in {k, 2k, ...} with N and M-N both >= k, minimizing
// the worst relative SE across the supplied per-target components; the first
// minimizer wins on ties. min_per_stage raises the floor to that many draws
// per proposal in each stage (callers that will actually run the spectral
// machinery on the chains need a few draws even when the objective is flat).
inline SplitResult optimal_split(int budget, const Vec& v1, const Vec& v2, const Vec& u,
                                 int k, int min_per_stage = 1) {
  if (k < 1) throw std::invalid_argument("stage split needs k >= 1");
  if (min_per_stage < 1) throw std::invalid_argument("stage split needs min_per_stage >= 1");
  if (budget < 2 * k * min_per_stage)
    throw std::invalid_argument("budget must allow k draws in each stage");
  if (v1.size() == 0 || v1.size() != v2.size() || v1.size() != u.size())
    throw std::invalid_argument("stage split needs equally sized nonempty component vectors");
  if ((u.array() <= 0.0).any())
    throw std::invalid_argument("stage split needs positive point estimates");
  if ((v1.array() < 0.0).any() || (v2.array() < 0.0).any())
    throw std::invalid_argument("stage split needs nonnegative error components");

  SplitResult best;
  best.objective = std::numeric_limits<double>::infinity();
  const int floor_n = k * min_per_stage;
  for (int N = floor_n; N <= budget - floor_n; N += k) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      worst = std::max(worst, rel_se_value(v1[i], v2[i], u[i], N, budget - N));
    if (worst < best.objective) best = {N, budget - N, worst};
  }
  return best;
}

// --- selectors ---------------------------------------------------------------

inline SelectionResult select_sfe(const FamilyGrid& grid, int k,
                                  const std::vector<int>& fixed = {}) {
  return point_swap(grid, k, pairwise_divergence_matrix(grid, DivergenceMethod::Euclidean),
                    fixed);
}

// Divergence-based space filling; the divergence route defaults to the mode
// expansion on continuous support and Monte Carlo otherwise.
inline SelectionResult select_sfs(const FamilyGrid& grid, int k,
                                  const std::vector<int>& fixed = {},
                                  const SamplerConfig& config = SamplerConfig{},
                                  std::optional<DivergenceMethod> method = std::nullopt) {
  if (grid.size() < 1) throw std::invalid_argument("selection needs a nonempty grid");
  const DivergenceMethod chosen =
      method.value_or(grid.density(0).support == Support::ContinuousVector
                          ? DivergenceMethod::Laplace
                          : DivergenceMethod::MC);
  return point_swap(grid, k, pairwise_divergence_matrix(grid, chosen, config), fixed);
}

// Grow the set one proposal at a time, always adding the family member whose
// estimated relative SE under the current set is worst. The trace records
// (set size, worst remaining relative SE) after each refit; the last entry
// is the criterion value of the returned set.
inline SelectionResult select_seq(const FamilyGrid& grid, int k, int reference,
                                  const SamplerConfig& config, const LagWindow& window) {
  const int m = grid.size();
  if (reference < 0 || reference >= m)
    throw std::invalid_argument("reference index out of range");
  if (k < 1 || k > m) throw std::invalid_argument("selection needs 1 <= k <= grid size");

  SampleCache cache(grid, config);
  std::vector<int> current = {reference};
  SelectionResult out;
  while (true) {
    const SkeletonSet skel = make_skeleton(current, reference);
    SampleBank bank = detail_design::pilot_bank(grid, skel, cache, true);
    const RLFit fit = detail_design::fit_bank(bank);
    const RLCovariance cov = detail_design::cov_bank(bank, fit, window);
    const double n1 = static_cast<double>(bank.stage1_total());
    const double n2 = static_cast<double>(bank.stage2_total());

    const std::set<int> members(current.begin(), current.end());
    std::vector<double> rse(static_cast<size_t>(m), -1.0);
    detail_fd::parallel_over_pairs(m, config.threads, [&](int j) {
      if (members.count(j)) return;
      rse[static_cast<size_t>(j)] = rel_se(grid.density(j), bank, fit, cov, window, n1, n2);
    });
    double worst = 0.0;
    int arg = -1;
    for (int j = 0; j < m; ++j)
      if (rse[static_cast<size_t>(j)] > worst) {
        worst = rse[static_cast<size_t>(j)];
        arg = j;
      }

    out.trace.push_back({static_cast<int>(current.size()), worst});
    if (static_cast<int>(current.size()) == k || arg < 0) {
      out.skeleton = skel;
      out.samples_used = std::move(bank);
      break;
    }
    current.push_back(arg);
  }
  out.criterion_value = out.trace.back().second;
  return out;
}

// Annealed minimax: the criterion of a candidate set is the worst relative
// SE over the whole family, priced at the best split of the given budget.
// An optional integrand switches the objective to mean estimation.
inline SelectionResult select_mnx(const FamilyGrid& grid, int k, int reference, int budget,
                                  const SamplerConfig& config, const LagWindow& window,
                                  double T0 = 10.0, int B = 10, int i_max = 250,
                                  std::uint64_t seed = 0, std::vector<int> start = {},
                                  const std::function<double(const Vec&)>* f = nullptr) {
  const int m = grid.size();
  if (reference < 0 || reference >= m)
    throw std::invalid_argument("reference index out of range");
  if (budget < 2 * k) throw std::invalid_argument("budget must allow k draws in each stage");

  SampleCache cache(grid, config);
  DesignCriterion crit;
  crit.kind = CriterionKind::MinimaxRelSE;
  crit.evaluate = [&](const SkeletonSet& skel) -> double {
    SampleBank bank = detail_design::pilot_bank(grid, skel, cache, true);
    const RLFit fit = detail_design::fit_bank(bank);
    // A set whose ratio fit cannot be pinned down is a hopeless proposal
    // set; price it out of the search instead of aborting the annealing.
    if (!fit.converged) return std::numeric_limits<double>::infinity();
    const RLCovariance cov = detail_design::cov_bank(bank, fit, window);
    Vec v1(m), v2(m), u(m);
    detail_fd::parallel_over_pairs(m, config.threads, [&](int j) {
      const UnnormalizedDensity target = grid.density(j);
      const RelSEParts parts = f ? rel_se_parts(*f, target, bank, fit, cov, window)
                                 : rel_se_parts(target, bank, fit, cov, window);
      v1[j] = parts.upsilon1;
      v2[j] = parts.upsilon2;
      u[j] = parts.u;
    });
    if (!v1.allFinite() || !v2.allFinite() || !u.allFinite() || (u.array() <= 0.0).any())
      return std::numeric_limits<double>::infinity();
    return optimal_split(budget, v1, v2, u, skel.k()).objective;
  };

  SelectionResult out =
      simulated_annealing(grid, k, crit, {reference}, T0, B, i_max, seed, std::move(start));
  out.samples_used = detail_design::pilot_bank(grid, out.skeleton, cache, true);
  return out;
}

// Annealed maximum entropy: prefer the set whose fitted ratio vector is the
// most uncertain, via -log det of its covariance with entries scaled by the
// fitted ratios (set scaled=false for the raw covariance). Stage-1 chains
// only; a nonpositive determinant prices the candidate at +infinity.
inline SelectionResult select_ent(const FamilyGrid& grid, int k, int reference,
                                  const SamplerConfig& config, const LagWindow& window,
                                  double T0 = 1.0, int B = 10, int i_max = 250,
                                  std::uint64_t seed = 0, std::vector<int> start = {},
                                  bool scaled = true) {
  const int m = grid.size();
  if (reference < 0 || reference >= m)
    throw std::invalid_argument("reference index out of range");

  SampleCache cache(grid, config);
  DesignCriterion crit;
  crit.kind = CriterionKind::NegLogDetEntropy;
  crit.evaluate = [&](const SkeletonSet& skel) -> double {
    if (skel.k() == 1) return 0.0;  // no free ratios to be uncertain about
    SampleBank bank = detail_design::pilot_bank(grid, skel, cache, false);
    const RLFit fit = fit_reverse_logistic(bank);
    if (!fit.converged) return std::numeric_limits<double>::infinity();
    const RLCovariance cov = rl_covariance(bank, fit, window);
    Mat u = cov.V;
    if (scaled)
      for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index j = 0; j < u.cols(); ++j)
          u(i, j) /= fit.d_hat[i + 1] * fit.d_hat[j + 1];
    return detail_design::neg_log_det(u);
  };

  SelectionResult out =
      simulated_annealing(grid, k, crit, {reference}, T0, B, i_max, seed, std::move(start));
  out.samples_used = detail_design::pilot_bank(grid, out.skeleton, cache, false);
  return out;
}

}  // namespace genis
