#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "modngd/dataset.hpp"
#include "modngd/dynamics.hpp"
#include "modngd/errors.hpp"
#include "modngd/experiment.hpp"

namespace fs = std::filesystem;
using namespace modngd;

namespace {

const std::vector<std::string> kConfigKeys = {
    "n_train", "n_val", "n_test", "sigma2", "sigma2_list", "seed", "seeds",
    "label_before_perturb", "input_dim", "hidden_widths", "activation", "bias_init", "eta", "epochs",
    "lr_halving_period", "sigma0", "algorithm", "refresh_spectrum", "linearized", "rank_tol",
    "alpha_floor_scale", "out_dir", "with_cut_smallest", "dump_modes", "jobs", "force"};

struct ConfigArgs {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* sub, ConfigArgs& args) {
  sub->add_option("--config", args.config_path, "flat key=value config file");
  for (const auto& key : kConfigKeys) {
    sub->add_option("--" + key, args.values[key], "config key " + key);
  }
}

ExperimentConfig build_config(CLI::App* sub, const ConfigArgs& args) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& key : kConfigKeys) {
    if (sub->count("--" + key) > 0) overrides.emplace_back(key, args.values.at(key));
  }
  std::optional<fs::path> path;
  if (!args.config_path.empty()) path = args.config_path;
  return parse_config(path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modified natural gradient descent: data, training runs, sweeps, reports"};
  app.require_subcommand(1);

  ConfigArgs gen_args, train_args, sweep_args;

  auto* gen = app.add_subcommand("gen-data", "generate synthetic splits and dump them to CSV");
  add_config_options(gen, gen_args);
  std::string gen_out;
  gen->add_option("--out", gen_out, "output CSV path (default: <out_dir>/dataset.csv)");

  auto* train_cmd = app.add_subcommand("train", "run one training configuration");
  add_config_options(train_cmd, train_args);
  std::string train_out;
  train_cmd->add_option("--out", train_out, "output run directory (default: out_dir)");

  auto* sweep = app.add_subcommand("sweep", "run the sigma2 x seed experiment grid");
  add_config_options(sweep, sweep_args);

  auto* rdiff = app.add_subcommand("report-diff", "aggregate ngd - modified_ngd differences");
  std::vector<std::string> summary_paths;
  std::string diff_out;
  rdiff->add_option("summaries", summary_paths, "summary.csv paths")->required();
  rdiff->add_option("--out", diff_out, "output path (default: diff.csv next to the first summary)");

  auto* rpres =
      app.add_subcommand("report-preservation", "per-mode preservation fractions of one run");
  std::string pres_dir;
  rpres->add_option("run_dir", pres_dir, "run directory with modes_epoch<k>.csv files")
      ->required();

  auto* verify = app.add_subcommand("verify-summary", "recompute summary.csv from per-run files");
  std::string verify_dir;
  verify->add_option("sweep_dir", verify_dir, "sweep output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = build_config(gen, gen_args);
      fs::path out = gen_out.empty() ? (cfg.out_dir.empty() ? fs::path("dataset.csv")
                                                            : cfg.out_dir / "dataset.csv")
                                     : fs::path(gen_out);
      if (fs::exists(out) && !cfg.force) {
        throw OverwriteRefusal(out.string() + " already exists (use --force true)");
      }
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_splits_csv(make_splits(cfg.data), out);
      std::cout << "wrote " << out.string() << "\n";
    } else if (train_cmd->parsed()) {
      const ExperimentConfig cfg = build_config(train_cmd, train_args);
      const fs::path out = train_out.empty() ? cfg.out_dir : fs::path(train_out);
      if (out.empty()) {
        throw ConfigError("train: no output directory (--out, out_dir, or MODNGD_OUT)");
      }
      if (fs::exists(out / "epochs.csv") && !cfg.force) {
        throw OverwriteRefusal(out.string() + " already holds a run (use --force true)");
      }
      const Splits splits = make_splits(cfg.data);
      TrainConfig tc = cfg.train;
      if (tc.algorithm == Algorithm::cut_smallest && tc.cut_count_trace.empty()) {
        TrainConfig ref = tc;
        ref.algorithm = Algorithm::modified_ngd;
        tc.cut_count_trace = train(splits, cfg.net, ref).cut_counts();
      }
      run_single(out, splits, cfg.net, tc, cfg.dump_modes);
      std::cout << "wrote " << (out / "epochs.csv").string() << "\n";
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = build_config(sweep, sweep_args);
      const SweepResult result = run_sweep(cfg);
      std::cout << "wrote " << (cfg.out_dir / "summary.csv").string() << "\n";
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " runs failed:\n";
        for (const auto& f : result.failures) {
          std::cerr << "  sigma2=" << f.sigma2 << " seed=" << f.seed << " " << f.algorithm
                    << ": " << f.error << "\n";
        }
        return 4;
      }
    } else if (rdiff->parsed()) {
      std::vector<fs::path> paths(summary_paths.begin(), summary_paths.end());
      const fs::path out =
          diff_out.empty() ? paths.front().parent_path() / "diff.csv" : fs::path(diff_out);
      report_diff(paths, out);
      std::cout << "wrote " << out.string() << "\n";
    } else if (rpres->parsed()) {
      report_preservation(pres_dir);
      std::cout << "wrote " << (fs::path(pres_dir) / "preservation.csv").string() << " and "
                << (fs::path(pres_dir) / "n_preserved.csv").string() << "\n";
    } else if (verify->parsed()) {
      verify_summary(verify_dir);
      std::cout << "summary verified\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const OverwriteRefusal& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
