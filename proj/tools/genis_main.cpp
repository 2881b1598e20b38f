// Command-line front end for the two-stage importance-sampling toolkit.
//
//   genis select   --config exp.cfg --out skeleton.txt [--seed S] [--threads T]
//   genis estimate --config exp.cfg --skeleton skeleton.txt --out profile.csv
//                  [--seed S] [--threads T]
//   genis compare  profile.csv...  [--out summary.csv]
//
// --threads falls back to the ISF_THREADS environment variable and then to
// the config; outputs are bit-exact functions of (config, seed).
#include <genis/config.hpp>
#include <genis/experiment.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

void apply_overrides(genis::Experiment& ex, const CLI::Option* seed_opt, std::uint64_t seed,
                     const CLI::Option* threads_opt, int threads) {
  if (seed_opt->count() > 0) ex.seed = seed;
  if (threads_opt->count() > 0) {
    ex.threads = threads;
  } else if (const char* env = std::getenv("ISF_THREADS")) {
    long long v = 0;
    if (!genis::detail_config::parse_long(env, v) || v < 1)
      throw genis::ConfigError(std::string("ISF_THREADS must be a positive integer, got '") +
                               env + "'");
    ex.threads = static_cast<int>(v);
  }
  if (ex.threads < 1) throw genis::ConfigError("--threads must be positive");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw genis::ConfigError("cannot open output file '" + path + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proposal-set selection and two-stage importance-sampling estimation"};
  app.require_subcommand(1);

  std::string config_path, skeleton_path, out_path, compare_out;
  std::vector<std::string> profile_paths;
  std::uint64_t seed = 0;
  int threads = 1;

  CLI::App* sel = app.add_subcommand("select", "choose a proposal set over the family grid");
  sel->add_option("--config", config_path, "experiment config file")->required();
  sel->add_option("--out", out_path, "skeleton output file")->required();
  CLI::Option* sel_seed = sel->add_option("--seed", seed, "master seed (overrides the config)");
  CLI::Option* sel_threads =
      sel->add_option("--threads", threads, "worker threads (overrides ISF_THREADS and config)");

  CLI::App* est = app.add_subcommand("estimate", "profile every family member from a skeleton");
  est->add_option("--config", config_path, "experiment config file")->required();
  est->add_option("--skeleton", skeleton_path, "skeleton file from 'select'")->required();
  est->add_option("--out", out_path, "profile csv output file")->required();
  CLI::Option* est_seed = est->add_option("--seed", seed, "master seed (overrides the config)");
  CLI::Option* est_threads =
      est->add_option("--threads", threads, "worker threads (overrides ISF_THREADS and config)");

  CLI::App* cmp = app.add_subcommand("compare", "summarize profile csv files");
  cmp->add_option("profiles", profile_paths, "profile csv files from 'estimate'")->required();
  cmp->add_option("--out", compare_out, "summary output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sel->parsed()) {
      genis::Experiment ex = genis::build_experiment(genis::Config::from_file(config_path));
      apply_overrides(ex, sel_seed, seed, sel_threads, threads);
      const genis::SelectionOutput out = genis::run_select(ex);
      auto file = open_out(out_path);
      genis::write_skeleton(file, ex.grid, out);
      if (!file.good()) throw genis::ConfigError("failed writing '" + out_path + "'");
      std::cout << "selected " << out.result.skeleton.k() << " proposals by " << out.method
                << ": indices";
      for (int idx : out.result.skeleton.indices) std::cout << " " << idx;
      std::cout << " (criterion " << genis::detail_experiment::fmt17(out.result.criterion_value)
                << ")\n";
    } else if (est->parsed()) {
      genis::Experiment ex = genis::build_experiment(genis::Config::from_file(config_path));
      apply_overrides(ex, est_seed, seed, est_threads, threads);
      std::ifstream skel_in(skeleton_path, std::ios::binary);
      if (!skel_in.good())
        throw genis::ConfigError("cannot open skeleton file '" + skeleton_path + "'");
      const genis::LoadedSkeleton skel = genis::read_skeleton(skel_in, ex.grid, skeleton_path);
      const genis::ProfileTable table = genis::run_estimate(ex, skel.skeleton);
      auto file = open_out(out_path);
      genis::write_profile(file, table);
      if (!file.good()) throw genis::ConfigError("failed writing '" + out_path + "'");
      std::cout << "wrote " << table.xi.size() << " profile rows (stage sizes "
                << table.stage1_total << " + " << table.stage2_total << ")\n";
    } else if (cmp->parsed()) {
      std::vector<std::pair<std::string, genis::ProfileTable>> profiles;
      for (const std::string& path : profile_paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in.good()) throw genis::ConfigError("cannot open profile file '" + path + "'");
        profiles.emplace_back(path, genis::read_profile(in, path));
      }
      const auto rows = genis::compare_profiles(profiles);
      if (compare_out.empty()) {
        genis::write_comparison(std::cout, rows);
      } else {
        auto file = open_out(compare_out);
        genis::write_comparison(file, rows);
        if (!file.good()) throw genis::ConfigError("failed writing '" + compare_out + "'");
      }
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
