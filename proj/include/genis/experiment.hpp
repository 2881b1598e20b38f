// Config-driven experiment layer: builds a family grid from a parsed
// Config, dispatches proposal-set selection, runs two-stage estimation over
// the whole grid, and reads/writes the three on-disk artifacts (config,
// skeleton file, profile table). Everything here is a deterministic
// function of (config, master seed); worker threads only change wall time.
#pragma once

#include <genis/config.hpp>
#include <genis/design.hpp>
#include <genis/models/autologistic.hpp>
#include <genis/models/gaussian.hpp>

#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace genis {

struct Experiment {
  FamilyGrid grid;
  LagWindow window;
  std::uint64_t seed = 0;
  int threads = 1;
  Config config;
};

namespace detail_experiment {

// 17 significant digits: enough for doubles to round-trip exactly, so
// rereading a file reproduces the computed values bit for bit.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void require_all_used(const Config& cfg) {
  const std::vector<std::string> unused = cfg.unused_keys();
  if (unused.empty()) return;
  std::string msg = cfg.name() + ": unknown key";
  if (unused.size() > 1) msg += "s";
  for (size_t i = 0; i < unused.size(); ++i)
    msg += std::string(i ? "," : "") + " '" + unused[i] + "' (line " +
           std::to_string(cfg.line(unused[i])) + ")";
  throw ConfigError(msg);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail_experiment

inline Experiment build_experiment(Config cfg) {
  Experiment ex;
  const std::string model = cfg.get_string("model");
  if (model == "gaussian") {
    const std::vector<double> means = cfg.get_numbers("gaussian.means");
    if (means.empty())
      throw ConfigError(cfg.context("gaussian.means") + ": needs at least one mean");
    const std::vector<double> sds = cfg.get_numbers("gaussian.sds", {1.0});
    if (sds.empty()) throw ConfigError(cfg.context("gaussian.sds") + ": needs at least one sd");
    for (double s : sds)
      if (!(s > 0.0))
        throw ConfigError(cfg.context("gaussian.sds") + ": sds must be positive");
    ex.grid = gaussian_grid(means, sds);
  } else if (model == "autologistic") {
    const int rows = cfg.get_int("lattice.rows");
    const int cols = cfg.get_int("lattice.cols");
    if (rows < 1) throw ConfigError(cfg.context("lattice.rows") + ": must be positive");
    if (cols < 1) throw ConfigError(cfg.context("lattice.cols") + ": must be positive");
    const std::vector<double> gammas = cfg.get_numbers("lattice.gamma");
    if (gammas.empty())
      throw ConfigError(cfg.context("lattice.gamma") + ": needs at least one value");
    const std::vector<double> kappas = cfg.get_numbers("lattice.kappa", {0.5});
    for (double k : kappas)
      if (!(k > 0.0) || !(k < 1.0))
        throw ConfigError(cfg.context("lattice.kappa") + ": values must lie in (0, 1)");
    ex.grid = autologistic_grid(rows, cols, gammas, kappas);
  } else {
    throw ConfigError(cfg.context("model") + ": unknown model '" + model +
                      "' (expected gaussian or autologistic)");
  }

  const std::string window = cfg.get_string("window", "tukey_hanning");
  if (window == "tukey_hanning")
    ex.window.kind = WindowKind::TukeyHanning;
  else if (window == "bartlett")
    ex.window.kind = WindowKind::Bartlett;
  else
    throw ConfigError(cfg.context("window") + ": unknown lag window '" + window +
                      "' (expected tukey_hanning or bartlett)");
  ex.window.fixed_b = cfg.get_int("window.b", 0);

  ex.seed = cfg.get_uint64("seed", 0);
  ex.threads = cfg.get_int("threads", 1);
  if (ex.threads < 1) throw ConfigError(cfg.context("threads") + ": must be positive");
  ex.config = std::move(cfg);
  return ex;
}

// --- selection ----------------------------------------------------------------

struct SelectionOutput {
  std::string method;
  SelectionResult result;
};

inline SelectionOutput run_select(const Experiment& ex) {
  const Config& cfg = ex.config;
  const int m = ex.grid.size();
  const std::string method = cfg.get_string("select.method");

  SamplerConfig pilot;
  pilot.n = cfg.get_int("pilot.n", 3000);
  pilot.burnin = cfg.get_int("pilot.burnin", 400);
  pilot.seed = ex.seed;
  pilot.threads = ex.threads;

  auto checked_k = [&](int fallback) {
    const int k = fallback > 0 ? cfg.get_int("select.k", fallback) : cfg.get_int("select.k");
    if (k < 1 || k > m)
      throw ConfigError(cfg.context("select.k") + ": needs 1 <= k <= " + std::to_string(m));
    return k;
  };
  auto checked_reference = [&]() {
    const int r = cfg.get_int("select.reference");
    if (r < 0 || r >= m)
      throw ConfigError(cfg.context("select.reference") + ": index out of range for a " +
                        std::to_string(m) + "-member grid");
    return r;
  };

  SelectionOutput out;
  out.method = method;
  if (method == "nis") {
    const int k = checked_k(1);
    if (k != 1)
      throw ConfigError(cfg.context("select.k") + ": the single-proposal method uses k = 1");
    const int reference = checked_reference();
    out.result.skeleton = make_skeleton({reference}, reference);
    out.result.criterion_value = 0.0;
    out.result.trace = {{0, 0.0}};
  } else if (method == "sfe" || method == "sfs") {
    const int k = checked_k(0);
    std::vector<int> fixed = cfg.get_ints("select.fixed", {});
    if (cfg.has("select.reference")) {
      const int reference = checked_reference();
      std::erase(fixed, reference);
      fixed.insert(fixed.begin(), reference);  // the reference leads the fixed set
    }
    if (method == "sfe") {
      out.result = select_sfe(ex.grid, k, fixed);
    } else {
      const std::string dv = cfg.get_string("select.divergence", "auto");
      std::optional<DivergenceMethod> dm;
      if (dv == "mc")
        dm = DivergenceMethod::MC;
      else if (dv == "laplace")
        dm = DivergenceMethod::Laplace;
      else if (dv == "euclidean")
        dm = DivergenceMethod::Euclidean;
      else if (dv != "auto")
        throw ConfigError(cfg.context("select.divergence") + ": unknown divergence '" + dv +
                          "' (expected auto, mc, laplace, or euclidean)");
      out.result = select_sfs(ex.grid, k, fixed, pilot, dm);
    }
  } else if (method == "seq") {
    out.result = select_seq(ex.grid, checked_k(0), checked_reference(), pilot, ex.window);
  } else if (method == "mnx" || method == "ent") {
    const int k = checked_k(0);
    const int reference = checked_reference();
    const double t0 = cfg.get_double("select.t0", method == "mnx" ? 10.0 : 1.0);
    const int batch = cfg.get_int("select.batch", 10);
    const int iterations = cfg.get_int("select.iterations", 250);
    if (method == "mnx") {
      const int budget = cfg.get_int("select.budget");
      out.result = select_mnx(ex.grid, k, reference, budget, pilot, ex.window, t0, batch,
                              iterations, ex.seed);
    } else {
      const bool scaled = cfg.get_bool("select.scaled", true);
      out.result = select_ent(ex.grid, k, reference, pilot, ex.window, t0, batch, iterations,
                              ex.seed, {}, scaled);
    }
  } else {
    throw ConfigError(cfg.context("select.method") + ": unknown method '" + method +
                      "' (expected nis, sfe, sfs, seq, mnx, or ent)");
  }

  cfg.allow_prefix("estimate.");
  detail_experiment::require_all_used(cfg);
  return out;
}

// --- skeleton files -------------------------------------------------------------

struct LoadedSkeleton {
  std::string method = "file";
  SkeletonSet skeleton;
  double criterion = 0.0;
};

inline void write_skeleton(std::ostream& out, const FamilyGrid& grid,
                           const SelectionOutput& sel) {
  using detail_experiment::fmt17;
  const SkeletonSet& s = sel.result.skeleton;
  out << "# proposal set selected over a " << grid.size() << "-member family\n";
  out << "skeleton.method = " << sel.method << "\n";
  out << "skeleton.k = " << s.k() << "\n";
  out << "skeleton.reference = " << s.reference << "\n";
  out << "skeleton.indices = ";
  for (size_t i = 0; i < s.indices.size(); ++i) out << (i ? "," : "") << s.indices[i];
  out << "\n";
  out << "skeleton.criterion = " << fmt17(sel.result.criterion_value) << "\n";
  for (size_t i = 0; i < s.indices.size(); ++i) {
    const Vec& p = grid.points[static_cast<size_t>(s.indices[i])];
    out << "skeleton.point." << i << " = ";
    for (Eigen::Index c = 0; c < p.size(); ++c) out << (c ? "," : "") << fmt17(p[c]);
    out << "\n";
  }
  for (size_t t = 0; t < sel.result.trace.size(); ++t)
    out << "trace." << t << " = " << sel.result.trace[t].first << ","
        << fmt17(sel.result.trace[t].second) << "\n";
}

inline LoadedSkeleton read_skeleton(std::istream& in, const FamilyGrid& grid,
                                    const std::string& name = "<skeleton>") {
  std::ostringstream os;
  os << in.rdbuf();
  const Config cfg = Config::from_text(os.str(), name);

  LoadedSkeleton out;
  out.method = cfg.get_string("skeleton.method", "file");
  const std::vector<int> indices = cfg.get_ints("skeleton.indices");
  if (indices.empty()) throw ConfigError(name + ": skeleton.indices is empty");
  for (int idx : indices)
    if (idx < 0 || idx >= grid.size())
      throw ConfigError(cfg.context("skeleton.indices") + ": index " + std::to_string(idx) +
                        " out of range for a " + std::to_string(grid.size()) +
                        "-member grid");
  const int reference = cfg.get_int("skeleton.reference", indices.front());
  try {
    out.skeleton = make_skeleton(indices, reference);
  } catch (const std::exception& err) {
    throw ConfigError(name + ": invalid skeleton: " + err.what());
  }
  if (cfg.has("skeleton.k") && cfg.get_int("skeleton.k") != out.skeleton.k())
    throw ConfigError(cfg.context("skeleton.k") + ": disagrees with the index list");
  out.criterion = cfg.get_double("skeleton.criterion", 0.0);

  // Stored parameter vectors must match the grid the caller built: catching
  // a skeleton file applied to the wrong experiment.
  for (size_t i = 0; i < indices.size(); ++i) {
    const std::string key = "skeleton.point." + std::to_string(i);
    if (!cfg.has(key)) continue;
    const std::vector<double> stored = cfg.get_numbers(key);
    const Vec& actual = grid.points[static_cast<size_t>(indices[i])];
    bool same = stored.size() == static_cast<size_t>(actual.size());
    for (size_t c = 0; same && c < stored.size(); ++c)
      same = stored[c] == actual[static_cast<Eigen::Index>(c)];
    if (!same)
      throw ConfigError(name + ": skeleton/grid mismatch: stored parameters of member " +
                        std::to_string(i) + " differ from grid point " +
                        std::to_string(indices[i]) +
                        " (was the skeleton selected for a different config?)");
  }
  return out;
}

// --- estimation -----------------------------------------------------------------

struct ProfileTable {
  int dim = 0;
  bool has_eta = false;
  std::vector<Vec> xi;
  std::vector<double> log_u, se_u, rel_se;
  std::vector<double> eta, se_eta;
  int stage1_total = 0;
  int stage2_total = 0;
};

inline std::function<double(const Vec&)> named_integrand(const std::string& name,
                                                         const Config& cfg) {
  if (name == "one") return [](const Vec&) { return 1.0; };
  if (name == "coord1") return [](const Vec& x) { return x[0]; };
  if (name == "mean") return [](const Vec& x) { return x.mean(); };
  throw ConfigError(cfg.context("estimate.f") + ": unknown integrand '" + name +
                    "' (expected none, one, coord1, or mean)");
}

// Two-stage estimation over the whole grid. The budget is divided equally
// among the proposals; its split between the ratio-fitting stage and the
// estimation stage is chosen by the pilot minimax rule (a single proposal
// needs no ratio fit, so everything goes to stage 2). Final chains are
// seeded by (master seed, stage, grid index) and so are independent of the
// pilot draws and of each other.
inline ProfileTable run_estimate(const Experiment& ex, const SkeletonSet& skeleton) {
  const Config& cfg = ex.config;
  const int k = skeleton.k();
  const int m = ex.grid.size();
  for (int gi : skeleton.indices)
    if (gi < 0 || gi >= m)
      throw ConfigError(cfg.name() + ": skeleton index " + std::to_string(gi) +
                        " out of range for a " + std::to_string(m) + "-member grid");

  const int budget = cfg.get_int("estimate.budget");
  const int burnin = cfg.get_int("estimate.burnin", 400);
  SamplerConfig pilot;
  pilot.n = cfg.get_int("pilot.n", 3000);
  pilot.burnin = cfg.get_int("pilot.burnin", 400);
  pilot.seed = ex.seed;
  pilot.threads = ex.threads;
  const std::string fname = cfg.get_string("estimate.f", "none");
  std::function<double(const Vec&)> f;
  if (fname != "none") f = named_integrand(fname, cfg);

  // Each proposal needs enough draws per stage for the lag-window variance
  // machinery to be defined, even when the pilot objective is flat.
  constexpr int kMinPerStage = 4;
  const int per = budget / k;
  if (per < (k == 1 ? 1 : 2 * kMinPerStage))
    throw ConfigError(cfg.context("estimate.budget") + ": budget " + std::to_string(budget) +
                      " is too small for " + std::to_string(k) + " two-stage proposals");
  const int total = per * k;

  int n1 = 0;
  int n2 = total;
  if (k > 1) {
    SampleCache cache(ex.grid, pilot);
    const SampleBank pbank = detail_design::pilot_bank(ex.grid, skeleton, cache, true);
    const RLFit pfit = detail_design::fit_bank(pbank);
    const RLCovariance pcov = detail_design::cov_bank(pbank, pfit, ex.window);
    Vec v1(m), v2(m), u(m);
    detail_fd::parallel_over_pairs(m, ex.threads, [&](int j) {
      const UnnormalizedDensity target = ex.grid.density(j);
      const RelSEParts parts = f ? rel_se_parts(f, target, pbank, pfit, pcov, ex.window)
                                 : rel_se_parts(target, pbank, pfit, pcov, ex.window);
      v1[j] = parts.upsilon1;
      v2[j] = parts.upsilon2;
      u[j] = parts.u;
    });
    const SplitResult split = optimal_split(total, v1, v2, u, k, kMinPerStage);
    n1 = split.stage1;
    n2 = split.stage2;
  }

  std::vector<ChainSample> s1, s2;
  for (int l = 0; l < k; ++l) {
    const int gi = skeleton.indices[static_cast<size_t>(l)];
    if (n1 > 0) {
      ChainSample c = ex.grid.sample(gi, n1 / k, burnin,
                                     stream(ex.seed, StreamTag::STAGE1,
                                            static_cast<std::uint64_t>(gi)));
      c.proposal_index = l;
      s1.push_back(std::move(c));
    }
    ChainSample c2 = ex.grid.sample(gi, n2 / k, burnin,
                                    stream(ex.seed, StreamTag::STAGE2,
                                           static_cast<std::uint64_t>(gi)));
    c2.proposal_index = l;
    s2.push_back(std::move(c2));
  }
  SampleBank bank = make_bank(ex.grid, skeleton, std::move(s1), std::move(s2));
  const RLFit fit = detail_design::fit_bank(bank);
  const RLCovariance cov = detail_design::cov_bank(bank, fit, ex.window);
  const double n_stage1 = std::max(1.0, static_cast<double>(bank.stage1_total()));
  const double n_stage2 = static_cast<double>(bank.stage2_total());

  ProfileTable t;
  t.dim = static_cast<int>(ex.grid.points[0].size());
  t.has_eta = static_cast<bool>(f);
  t.xi = ex.grid.points;
  t.log_u.assign(static_cast<size_t>(m), 0.0);
  t.se_u.assign(static_cast<size_t>(m), 0.0);
  t.rel_se.assign(static_cast<size_t>(m), 0.0);
  if (f) {
    t.eta.assign(static_cast<size_t>(m), 0.0);
    t.se_eta.assign(static_cast<size_t>(m), 0.0);
  }
  t.stage1_total = bank.stage1_total();
  t.stage2_total = bank.stage2_total();

  detail_fd::parallel_over_pairs(m, ex.threads, [&](int j) {
    const auto ji = static_cast<size_t>(j);
    const UnnormalizedDensity target = ex.grid.density(j);
    const double u = u_hat(target, bank, fit.d_hat);
    if (!(u > 0.0))
      throw std::runtime_error("profile: estimated normalizer ratio for grid point " +
                               std::to_string(j) +
                               " is not positive; the proposal set does not cover it");
    t.log_u[ji] = std::log(u);
    t.se_u[ji] =
        std::sqrt(std::max(0.0, sigma2_u_hat(target, bank, fit, cov, ex.window)) / n_stage2);
    t.rel_se[ji] = rel_se(target, bank, fit, cov, ex.window, n_stage1, n_stage2);
    if (f) {
      t.eta[ji] = eta_hat(f, target, bank, fit.d_hat);
      t.se_eta[ji] = std::sqrt(
          std::max(0.0, sigma2_eta_hat(f, target, bank, fit, cov, ex.window)) / n_stage2);
    }
  });

  cfg.allow_prefix("select.");
  detail_experiment::require_all_used(cfg);
  return t;
}

// --- profile files ----------------------------------------------------------------

inline void write_profile(std::ostream& out, const ProfileTable& t) {
  using detail_experiment::fmt17;
  for (int c = 0; c < t.dim; ++c) out << "xi_" << (c + 1) << ",";
  out << "log_u_hat,se_u,rel_se";
  if (t.has_eta) out << ",eta_hat,se_eta";
  out << "\n";
  for (size_t r = 0; r < t.xi.size(); ++r) {
    for (int c = 0; c < t.dim; ++c) out << fmt17(t.xi[r][c]) << ",";
    out << fmt17(t.log_u[r]) << "," << fmt17(t.se_u[r]) << "," << fmt17(t.rel_se[r]);
    if (t.has_eta) out << "," << fmt17(t.eta[r]) << "," << fmt17(t.se_eta[r]);
    out << "\n";
  }
}

inline ProfileTable read_profile(std::istream& in, const std::string& name = "<profile>") {
  using detail_experiment::split_csv;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(name + ": empty profile file");
  const std::vector<std::string> head = split_csv(line);

  ProfileTable t;
  size_t pos = 0;
  while (pos < head.size() && head[pos] == "xi_" + std::to_string(pos + 1)) ++pos;
  t.dim = static_cast<int>(pos);
  const std::vector<std::string> rest(head.begin() + static_cast<long>(pos), head.end());
  if (t.dim < 1 || (rest != std::vector<std::string>{"log_u_hat", "se_u", "rel_se"} &&
                    rest != std::vector<std::string>{"log_u_hat", "se_u", "rel_se", "eta_hat",
                                                     "se_eta"}))
    throw ConfigError(name + ": unrecognized profile header '" + line + "'");
  t.has_eta = rest.size() == 5;

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != head.size())
      throw ConfigError(name + ": line " + std::to_string(lineno) + ": expected " +
                        std::to_string(head.size()) + " fields, got " +
                        std::to_string(fields.size()));
    std::vector<double> vals;
    vals.reserve(fields.size());
    for (const std::string& fd : fields) {
      double v = 0.0;
      if (!detail_config::parse_double(fd, v))
        throw ConfigError(name + ": line " + std::to_string(lineno) + ": '" + fd +
                          "' is not a number");
      vals.push_back(v);
    }
    Vec xi(t.dim);
    for (int c = 0; c < t.dim; ++c) xi[c] = vals[static_cast<size_t>(c)];
    t.xi.push_back(xi);
    const size_t o = static_cast<size_t>(t.dim);
    t.log_u.push_back(vals[o]);
    t.se_u.push_back(vals[o + 1]);
    t.rel_se.push_back(vals[o + 2]);
    if (t.has_eta) {
      t.eta.push_back(vals[o + 3]);
      t.se_eta.push_back(vals[o + 4]);
    }
  }
  return t;
}

// --- comparison ------------------------------------------------------------------

struct ProfileSummary {
  std::string label;
  int rows = 0;
  double max_rel_se = 0.0;
  Vec argmax_xi;
  double mean_rel_se = 0.0;
  double max_ratio_to_first = 1.0;
};

inline std::vector<ProfileSummary> compare_profiles(
    const std::vector<std::pair<std::string, ProfileTable>>& profiles) {
  if (profiles.empty()) throw ConfigError("compare needs at least one profile");
  std::vector<ProfileSummary> out;
  for (const auto& [label, table] : profiles) {
    if (table.xi.empty()) throw ConfigError(label + ": profile has no rows");
    ProfileSummary s;
    s.label = label;
    s.rows = static_cast<int>(table.xi.size());
    size_t arg = 0;
    double sum = 0.0;
    for (size_t r = 0; r < table.rel_se.size(); ++r) {
      sum += table.rel_se[r];
      if (table.rel_se[r] > table.rel_se[arg]) arg = r;
    }
    s.max_rel_se = table.rel_se[arg];
    s.argmax_xi = table.xi[arg];
    s.mean_rel_se = sum / static_cast<double>(s.rows);
    out.push_back(std::move(s));
  }
  const double base = out.front().max_rel_se;
  for (ProfileSummary& s : out)
    s.max_ratio_to_first =
        base != 0.0 ? s.max_rel_se / base
                    : (s.max_rel_se == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  return out;
}

inline void write_comparison(std::ostream& out, const std::vector<ProfileSummary>& rows) {
  using detail_experiment::fmt17;
  out << "profile,rows,max_rel_se,argmax_xi,mean_rel_se,max_ratio_to_first\n";
  for (const ProfileSummary& s : rows) {
    out << s.label << "," << s.rows << "," << fmt17(s.max_rel_se) << ",";
    for (Eigen::Index c = 0; c < s.argmax_xi.size(); ++c)
      out << (c ? ";" : "") << fmt17(s.argmax_xi[c]);
    out << "," << fmt17(s.mean_rel_se) << "," << fmt17(s.max_ratio_to_first) << "\n";
  }
}

}  // namespace genis
