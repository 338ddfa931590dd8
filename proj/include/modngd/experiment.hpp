#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modngd/dataset.hpp"
#include "modngd/dynamics.hpp"
#include "modngd/network.hpp"

namespace modngd {

struct ExperimentConfig {
  DataConfig data;
  MLPConfig net;
  TrainConfig train;
  std::vector<double> sigma2_list = {10.0, 5.0, 1.5, 1.0};
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  bool with_cut_smallest = false;
  bool dump_modes = false;
  std::size_t jobs = 0;  // 0 = hardware concurrency
  bool force = false;
};

// Defaults: 256/64/64 splits, one hidden layer of width 4096, relu, lr 0.1
// halving every 100 epochs, 500 epochs, sigma2 list {10, 5, 1.5, 1}, seeds
// 0..19. Unless a config sets sigma0 explicitly it defaults to
// 1 / sqrt(n_train), which puts the per-step contraction eta * N * sigma0^2
// at eta and keeps the discrete dynamics stable.
ExperimentConfig default_config();

// Flat key=value config file (# comments); `overrides` come from same-named
// CLI flags and win over the file. Unknown keys and malformed values raise
// ConfigError naming the key.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

// "0..19" (inclusive range) or a comma-separated list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Subdirectory names used under <out_dir>/runs.
std::string sigma2_dir_name(double sigma2);
std::string seed_dir_name(std::uint64_t seed);

struct SummaryRow {
  double sigma2 = 0.0;
  std::string seed;  // an integer, "mean", or "std"
  std::string algorithm;
  double final10_test_mse = 0.0;
  std::optional<double> diff_vs_modified;  // ngd rows: ngd - modified_ngd
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
};

struct SweepFailure {
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string error;
};

struct SweepResult {
  SummaryTable summary;
  std::vector<SweepFailure> failures;
};

// One training run written into dir: epochs.csv, spectrum.csv (initial
// spectrum and mask), final_params.{csv,json}, and modes_epoch<k>.csv per
// epoch when dump_modes is set.
Trajectory run_single(const std::filesystem::path& dir, const Splits& splits,
                      const MLPConfig& net, const TrainConfig& train_config, bool dump_modes);

// Sweep over sigma2_list x seeds x {modified_ngd, ngd, cut_smallest?}. Each
// cell trains modified_ngd first (cut_smallest consumes its per-epoch cut
// counts), cells run concurrently up to `jobs`. Refuses to overwrite an
// existing runs/ directory unless force is set. Failed runs are recorded in
// manifest.json and the sweep carries on; the summary covers completed runs
// and is recomputed from the epochs.csv files on disk.
SweepResult run_sweep(const ExperimentConfig& config);

// diff.csv (sigma2,mean_diff,std_diff, sigma2 descending) from the per-seed
// rows of one or more summary.csv files.
void report_diff(const std::vector<std::filesystem::path>& summary_paths,
                 const std::filesystem::path& out_path);

// preservation.csv (mode_index,fraction_of_epochs_preserved) and
// n_preserved.csv (epoch,n_preserved) from a run directory's
// modes_epoch<k>.csv files.
void report_preservation(const std::filesystem::path& run_dir);

// Re-derives every number in <out_dir>/summary.csv from the per-run
// epochs.csv files; throws ReportError on any mismatch.
void verify_summary(const std::filesystem::path& out_dir);

}  // namespace modngd
