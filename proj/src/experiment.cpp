#include "modngd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "modngd/csv.hpp"
#include "modngd/errors.hpp"
#include "modngd/risk.hpp"
#include "modngd/spectral.hpp"

namespace modngd {

namespace fs = std::filesystem;

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (std::uint64_t s = 0; s < 20; ++s) cfg.seeds.push_back(s);
  cfg.train.sigma0 = 1.0 / std::sqrt(static_cast<double>(cfg.data.n_train));
  // Experiment defaults depart from the bare type defaults in two places.
  // Labels are computed from the pre-perturbation inputs, so the perturbation
  // acts as input corruption of the training set; with post-perturbation
  // labels a noiseless interpolant already generalizes and there is nothing
  // for the modified update to cut. Biases follow the framework-default
  // uniform fan-in law; zero biases make a scalar-input relu net rank
  // degenerate (see BiasInit).
  cfg.data.label_before_perturb = true;
  cfg.net.bias_init = BiasInit::uniform_fan_in;
  return cfg;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  const auto range = text.find("..");
  std::vector<std::uint64_t> seeds;
  if (range != std::string::npos) {
    const long long lo = parse_int(text.substr(0, range));
    const long long hi = parse_int(text.substr(range + 2));
    if (lo < 0 || hi < lo) throw std::invalid_argument("bad seed range '" + text + "'");
    for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    return seeds;
  }
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long s = parse_int(item);
    if (s < 0) throw std::invalid_argument("negative seed '" + item + "'");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

// Shortest decimal that round-trips; used for path components.
static std::string shortest_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string sigma2_dir_name(double sigma2) { return "sigma2_" + shortest_double(sigma2); }
std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

static std::size_t parse_count(const std::string& value) {
  const long long v = parse_int(value);
  if (v < 0) throw std::invalid_argument("negative count");
  return static_cast<std::size_t>(v);
}

template <typename T, typename Parse>
static std::vector<T> parse_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

namespace {

struct ConfigBuilder {
  ExperimentConfig cfg = default_config();
  bool sigma0_set = false;

  void apply(const std::string& key, const std::string& value) {
    try {
      if (key == "n_train") {
        cfg.data.n_train = parse_count(value);
      } else if (key == "n_val") {
        cfg.data.n_val = parse_count(value);
      } else if (key == "n_test") {
        cfg.data.n_test = parse_count(value);
      } else if (key == "sigma2") {
        cfg.data.sigma2 = parse_double(value);
        cfg.sigma2_list = {cfg.data.sigma2};
      } else if (key == "sigma2_list") {
        cfg.sigma2_list = parse_list<double>(value, [](const std::string& s) { return parse_double(s); });
      } else if (key == "seed") {
        const std::size_t s = parse_count(value);
        cfg.data.seed = s;
        cfg.net.seed = s;
        cfg.seeds = {s};
      } else if (key == "seeds") {
        cfg.seeds = parse_seed_list(value);
      } else if (key == "label_before_perturb") {
        cfg.data.label_before_perturb = parse_bool(value);
      } else if (key == "input_dim") {
        cfg.net.input_dim = parse_count(value);
      } else if (key == "hidden_widths") {
        cfg.net.hidden_widths =
            parse_list<std::size_t>(value, [](const std::string& s) { return parse_count(s); });
      } else if (key == "activation") {
        cfg.net.activation = activation_from_string(value);
      } else if (key == "bias_init") {
        cfg.net.bias_init = bias_init_from_string(value);
      } else if (key == "eta") {
        cfg.train.eta = parse_double(value);
      } else if (key == "epochs") {
        cfg.train.epochs = parse_count(value);
      } else if (key == "lr_halving_period") {
        cfg.train.lr_halving_period = parse_count(value);
      } else if (key == "sigma0") {
        cfg.train.sigma0 = parse_double(value);
        sigma0_set = true;
      } else if (key == "algorithm") {
        cfg.train.algorithm = algorithm_from_string(value);
      } else if (key == "refresh_spectrum") {
        cfg.train.refresh_spectrum = parse_bool(value);
      } else if (key == "linearized") {
        cfg.train.linearized = parse_bool(value);
      } else if (key == "rank_tol") {
        cfg.train.rank_tol = parse_double(value);
      } else if (key == "alpha_floor_scale") {
        cfg.train.alpha_floor_scale = parse_double(value);
      } else if (key == "out_dir") {
        cfg.out_dir = value;
      } else if (key == "with_cut_smallest") {
        cfg.with_cut_smallest = parse_bool(value);
      } else if (key == "dump_modes") {
        cfg.dump_modes = parse_bool(value);
      } else if (key == "jobs") {
        cfg.jobs = parse_count(value);
      } else if (key == "force") {
        cfg.force = parse_bool(value);
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
};

}  // namespace

static std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

static void apply_config_file(ConfigBuilder& builder, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    builder.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

static void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (cfg.data.n_train == 0) fail("n_train", "must be positive");
  if (cfg.data.n_val == 0) fail("n_val", "must be positive");
  if (cfg.data.n_test == 0) fail("n_test", "must be positive");
  if (!(cfg.data.sigma2 > 0.0)) fail("sigma2", "must be positive");
  if (cfg.sigma2_list.empty()) fail("sigma2_list", "must be nonempty");
  for (double s : cfg.sigma2_list) {
    if (!(s > 0.0)) fail("sigma2_list", "entries must be positive");
  }
  if (cfg.seeds.empty()) fail("seeds", "must be nonempty");
  if (cfg.net.input_dim == 0) fail("input_dim", "must be positive");
  for (std::size_t w : cfg.net.hidden_widths) {
    if (w == 0) fail("hidden_widths", "entries must be positive");
  }
  if (!(cfg.train.eta > 0.0)) fail("eta", "must be positive");
  if (cfg.train.epochs == 0) fail("epochs", "must be positive");
  if (cfg.train.lr_halving_period == 0) fail("lr_halving_period", "must be positive");
  if (!(cfg.train.sigma0 > 0.0)) fail("sigma0", "must be positive");
  if (!(cfg.train.rank_tol > 0.0)) fail("rank_tol", "must be positive");
  if (!(cfg.train.alpha_floor_scale >= 0.0)) fail("alpha_floor_scale", "must be nonnegative");
}

ExperimentConfig parse_config(const std::optional<fs::path>& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  ConfigBuilder builder;
  if (path) apply_config_file(builder, *path);
  for (const auto& [key, value] : overrides) builder.apply(key, value);
  if (!builder.sigma0_set) {
    builder.cfg.train.sigma0 = 1.0 / std::sqrt(static_cast<double>(builder.cfg.data.n_train));
  }
  if (builder.cfg.out_dir.empty()) {
    if (const char* env = std::getenv("MODNGD_OUT")) builder.cfg.out_dir = env;
  }
  validate_config(builder.cfg);
  return builder.cfg;
}

Trajectory run_single(const fs::path& dir, const Splits& splits, const MLPConfig& net,
                      const TrainConfig& train_config, bool dump_modes) {
  fs::create_directories(dir);
  const std::size_t n = splits.train.size();
  EpochHook hook = [&](const EpochContext& ctx) {
    if (ctx.epoch == 0) write_spectrum_csv(ctx.decomp, ctx.mask, dir / "spectrum.csv");
    if (dump_modes) {
      write_mode_report_csv(ctx.stats(), ctx.mask, n,
                            dir / ("modes_epoch" + std::to_string(ctx.epoch) + ".csv"));
    }
  };
  Trajectory traj = train(splits, net, train_config, hook);

  CsvWriter writer(dir / "epochs.csv",
                   {"epoch", "lr", "train_mse", "val_mse", "test_mse", "n_preserved"});
  for (const auto& rec : traj.epochs) {
    writer.write_row({std::to_string(rec.epoch), format_double(rec.lr),
                      format_double(rec.train_mse), format_double(rec.val_mse),
                      format_double(rec.test_mse), std::to_string(rec.n_preserved)});
  }
  save_checkpoint(traj.final_state, dir / "final_params");
  return traj;
}

static double final10_from_epochs_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t col = table.column("test_mse");
  if (table.rows.empty()) throw ReportError("no epochs in " + path.string());
  const std::size_t take = std::min<std::size_t>(10, table.rows.size());
  double sum = 0.0;
  for (std::size_t i = table.rows.size() - take; i < table.rows.size(); ++i) {
    sum += parse_double(table.rows[i][col]);
  }
  return sum / static_cast<double>(take);
}

static double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

static double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

static std::vector<std::string> sweep_algorithms(const ExperimentConfig& config) {
  std::vector<std::string> algs = {"modified_ngd", "ngd"};
  if (config.with_cut_smallest) algs.push_back("cut_smallest");
  return algs;
}

static fs::path run_dir(const fs::path& out_dir, double sigma2, std::uint64_t seed,
                        const std::string& alg) {
  return out_dir / "runs" / sigma2_dir_name(sigma2) / seed_dir_name(seed) / alg;
}

// Summary assembled by reading the epochs.csv files back from disk, so a
// later verification pass reproduces every number bit for bit.
static SummaryTable build_summary_from_disk(const ExperimentConfig& config) {
  const auto algs = sweep_algorithms(config);
  SummaryTable table;
  for (double sigma2 : config.sigma2_list) {
    std::map<std::string, std::vector<double>> finals_by_alg;
    std::vector<double> diffs;
    std::vector<SummaryRow> seed_rows;
    for (std::uint64_t seed : config.seeds) {
      std::map<std::string, double> finals;
      for (const auto& alg : algs) {
        const fs::path path = run_dir(config.out_dir, sigma2, seed, alg) / "epochs.csv";
        if (!fs::exists(path)) continue;
        finals[alg] = final10_from_epochs_csv(path);
      }
      for (const auto& alg : algs) {
        auto it = finals.find(alg);
        if (it == finals.end()) continue;
        SummaryRow row;
        row.sigma2 = sigma2;
        row.seed = std::to_string(seed);
        row.algorithm = alg;
        row.final10_test_mse = it->second;
        if (alg == "ngd" && finals.count("modified_ngd")) {
          row.diff_vs_modified = it->second - finals.at("modified_ngd");
          diffs.push_back(*row.diff_vs_modified);
        }
        finals_by_alg[alg].push_back(it->second);
        seed_rows.push_back(std::move(row));
      }
    }
    table.rows.insert(table.rows.end(), seed_rows.begin(), seed_rows.end());
    for (const auto& alg : algs) {
      const auto it = finals_by_alg.find(alg);
      if (it == finals_by_alg.end() || it->second.empty()) continue;
      SummaryRow mean_row{sigma2, "mean", alg, mean_of(it->second), std::nullopt};
      SummaryRow std_row{sigma2, "std", alg, sample_std(it->second), std::nullopt};
      if (alg == "ngd" && !diffs.empty()) {
        mean_row.diff_vs_modified = mean_of(diffs);
        std_row.diff_vs_modified = sample_std(diffs);
      }
      table.rows.push_back(std::move(mean_row));
      table.rows.push_back(std::move(std_row));
    }
  }
  return table;
}

static void write_summary_csv(const SummaryTable& table, const fs::path& path) {
  CsvWriter writer(path, {"sigma2", "seed", "algorithm", "final10_test_mse", "diff_vs_modified"});
  for (const auto& row : table.rows) {
    writer.write_row({format_double(row.sigma2), row.seed, row.algorithm,
                      format_double(row.final10_test_mse),
                      row.diff_vs_modified ? format_double(*row.diff_vs_modified) : ""});
  }
}

static nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["n_train"] = cfg.data.n_train;
  j["n_val"] = cfg.data.n_val;
  j["n_test"] = cfg.data.n_test;
  j["label_before_perturb"] = cfg.data.label_before_perturb;
  j["input_dim"] = cfg.net.input_dim;
  j["hidden_widths"] = cfg.net.hidden_widths;
  j["activation"] = to_string(cfg.net.activation);
  j["bias_init"] = to_string(cfg.net.bias_init);
  j["eta"] = cfg.train.eta;
  j["epochs"] = cfg.train.epochs;
  j["lr_halving_period"] = cfg.train.lr_halving_period;
  j["sigma0"] = cfg.train.sigma0;
  j["refresh_spectrum"] = cfg.train.refresh_spectrum;
  j["linearized"] = cfg.train.linearized;
  j["rank_tol"] = cfg.train.rank_tol;
  j["alpha_floor_scale"] = cfg.train.alpha_floor_scale;
  j["sigma2_list"] = cfg.sigma2_list;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir.string();
  j["with_cut_smallest"] = cfg.with_cut_smallest;
  j["dump_modes"] = cfg.dump_modes;
  j["jobs"] = cfg.jobs;
  return j;
}

static void write_json_file(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

SweepResult run_sweep(const ExperimentConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("config key 'out_dir': required for sweep");
  if (config.sigma2_list.empty()) throw ConfigError("config key 'sigma2_list': must be nonempty");
  if (config.seeds.empty()) throw ConfigError("config key 'seeds': must be nonempty");

  const fs::path runs_root = config.out_dir / "runs";
  if (fs::exists(runs_root) || fs::exists(config.out_dir / "summary.csv")) {
    if (!config.force) {
      throw OverwriteRefusal("output directory " + config.out_dir.string() +
                             " already holds sweep results (use force to overwrite)");
    }
    fs::remove_all(runs_root);
    fs::remove(config.out_dir / "summary.csv");
    fs::remove(config.out_dir / "summary.json");
    fs::remove(config.out_dir / "manifest.json");
  }
  fs::create_directories(runs_root);

  struct Cell {
    double sigma2;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double sigma2 : config.sigma2_list) {
    for (std::uint64_t seed : config.seeds) cells.push_back({sigma2, seed});
  }
  const auto algs = sweep_algorithms(config);
  std::vector<std::vector<SweepFailure>> cell_failures(cells.size());

  auto run_cell = [&](const Cell& cell, std::vector<SweepFailure>& failures) {
    DataConfig data = config.data;
    data.sigma2 = cell.sigma2;
    data.seed = cell.seed;
    MLPConfig net = config.net;
    net.seed = cell.seed;
    Splits splits;
    try {
      splits = make_splits(data);
    } catch (const std::exception& e) {
      for (const auto& alg : algs) failures.push_back({cell.sigma2, cell.seed, alg, e.what()});
      return;
    }
    std::vector<std::size_t> trace;
    for (const auto& alg : algs) {
      TrainConfig tc = config.train;
      tc.algorithm = algorithm_from_string(alg);
      if (tc.algorithm == Algorithm::cut_smallest) {
        if (trace.empty()) {
          failures.push_back(
              {cell.sigma2, cell.seed, alg, "paired modified_ngd run failed or missing"});
          continue;
        }
        tc.cut_count_trace = trace;
      }
      const fs::path dir = run_dir(config.out_dir, cell.sigma2, cell.seed, alg);
      try {
        const Trajectory traj = run_single(dir, splits, net, tc, config.dump_modes);
        for (const auto& rec : traj.epochs) {
          if (!std::isfinite(rec.train_mse) || !std::isfinite(rec.val_mse) ||
              !std::isfinite(rec.test_mse)) {
            throw std::runtime_error("non-finite loss at epoch " + std::to_string(rec.epoch));
          }
        }
        if (tc.algorithm == Algorithm::modified_ngd) trace = traj.cut_counts();
      } catch (const std::exception& e) {
        failures.push_back({cell.sigma2, cell.seed, alg, e.what()});
        fs::remove(dir / "epochs.csv");
      }
    }
  };

  std::size_t jobs = config.jobs ? config.jobs
                                 : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  jobs = std::min(jobs, cells.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(cells[i], cell_failures[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        run_cell(cells[i], cell_failures[i]);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepResult result;
  for (const auto& fl : cell_failures) {
    result.failures.insert(result.failures.end(), fl.begin(), fl.end());
  }

  std::set<std::tuple<double, std::uint64_t, std::string>> failed;
  nlohmann::json manifest;
  manifest["failures"] = nlohmann::json::array();
  for (const auto& f : result.failures) {
    failed.insert({f.sigma2, f.seed, f.algorithm});
    manifest["failures"].push_back(
        {{"sigma2", f.sigma2}, {"seed", f.seed}, {"algorithm", f.algorithm}, {"error", f.error}});
  }
  manifest["cells"] = nlohmann::json::array();
  for (const auto& cell : cells) {
    for (const auto& alg : algs) {
      manifest["cells"].push_back({{"sigma2", cell.sigma2},
                                   {"seed", cell.seed},
                                   {"algorithm", alg},
                                   {"status", failed.count({cell.sigma2, cell.seed, alg})
                                                  ? "failed"
                                                  : "ok"}});
    }
  }
  write_json_file(manifest, config.out_dir / "manifest.json");

  result.summary = build_summary_from_disk(config);
  write_summary_csv(result.summary, config.out_dir / "summary.csv");

  nlohmann::json summary_json;
  summary_json["config"] = config_json(config);
  summary_json["rows"] = nlohmann::json::array();
  for (const auto& row : result.summary.rows) {
    nlohmann::json r = {{"sigma2", row.sigma2},
                        {"seed", row.seed},
                        {"algorithm", row.algorithm},
                        {"final10_test_mse", row.final10_test_mse}};
    r["diff_vs_modified"] =
        row.diff_vs_modified ? nlohmann::json(*row.diff_vs_modified) : nlohmann::json(nullptr);
    summary_json["rows"].push_back(std::move(r));
  }
  summary_json["failures"] = manifest["failures"];
  write_json_file(summary_json, config.out_dir / "summary.json");
  return result;
}

void report_diff(const std::vector<fs::path>& summary_paths, const fs::path& out_path) {
  if (summary_paths.empty()) throw ReportError("report_diff: no summary files given");
  // by sigma2 -> seed -> algorithm -> final10
  std::map<double, std::map<long long, std::map<std::string, double>>> by_sigma2;
  bool saw_modified = false;
  bool saw_ngd = false;
  for (const auto& path : summary_paths) {
    const CsvTable table = read_csv(path);
    const std::size_t c_sigma2 = table.column("sigma2");
    const std::size_t c_seed = table.column("seed");
    const std::size_t c_alg = table.column("algorithm");
    const std::size_t c_final = table.column("final10_test_mse");
    for (const auto& row : table.rows) {
      if (row[c_seed] == "mean" || row[c_seed] == "std") continue;
      const std::string& alg = row[c_alg];
      if (alg == "modified_ngd") saw_modified = true;
      if (alg == "ngd") saw_ngd = true;
      by_sigma2[parse_double(row[c_sigma2])][parse_int(row[c_seed])][alg] =
          parse_double(row[c_final]);
    }
  }
  if (!saw_modified) throw ReportError("report_diff: no modified_ngd rows in summaries");
  if (!saw_ngd) throw ReportError("report_diff: no ngd rows in summaries");

  CsvWriter writer(out_path, {"sigma2", "mean_diff", "std_diff"});
  for (auto it = by_sigma2.rbegin(); it != by_sigma2.rend(); ++it) {
    std::vector<double> diffs;
    for (const auto& [seed, finals] : it->second) {
      const auto m = finals.find("modified_ngd");
      const auto g = finals.find("ngd");
      if (m != finals.end() && g != finals.end()) diffs.push_back(g->second - m->second);
    }
    if (diffs.empty()) continue;
    writer.write_row({format_double(it->first), format_double(mean_of(diffs)),
                      format_double(sample_std(diffs))});
  }
}

void report_preservation(const fs::path& dir) {
  const CsvTable epochs = read_csv(dir / "epochs.csv");
  const std::size_t n_epochs = epochs.rows.size();
  std::vector<std::string> gaps;
  std::vector<std::size_t> preserved_count(n_epochs, 0);
  std::vector<double> fraction;
  for (std::size_t e = 0; e < n_epochs; ++e) {
    const fs::path path = dir / ("modes_epoch" + std::to_string(e) + ".csv");
    if (!fs::exists(path)) {
      if (gaps.size() < 10) gaps.push_back(path.filename().string());
      continue;
    }
    const CsvTable modes = read_csv(path);
    const std::size_t c_preserved = modes.column("preserved");
    if (fraction.empty()) fraction.assign(modes.rows.size(), 0.0);
    if (fraction.size() != modes.rows.size()) {
      throw ReportError("inconsistent mode count in " + path.string());
    }
    for (std::size_t i = 0; i < modes.rows.size(); ++i) {
      if (modes.rows[i][c_preserved] == "1") {
        fraction[i] += 1.0;
        ++preserved_count[e];
      }
    }
  }
  if (!gaps.empty()) {
    std::string msg = "missing per-epoch mode files:";
    for (const auto& g : gaps) msg += " " + g;
    throw ReportError(msg);
  }
  CsvWriter pres(dir / "preservation.csv", {"mode_index", "fraction_of_epochs_preserved"});
  for (std::size_t i = 0; i < fraction.size(); ++i) {
    pres.write_row({std::to_string(i),
                    format_double(fraction[i] / static_cast<double>(n_epochs))});
  }
  CsvWriter series(dir / "n_preserved.csv", {"epoch", "n_preserved"});
  for (std::size_t e = 0; e < n_epochs; ++e) {
    series.write_row({std::to_string(e), std::to_string(preserved_count[e])});
  }
}

void verify_summary(const fs::path& out_dir) {
  const CsvTable table = read_csv(out_dir / "summary.csv");
  const std::size_t c_sigma2 = table.column("sigma2");
  const std::size_t c_seed = table.column("seed");
  const std::size_t c_alg = table.column("algorithm");
  const std::size_t c_final = table.column("final10_test_mse");
  const std::size_t c_diff = table.column("diff_vs_modified");

  std::vector<std::string> mismatches;
  auto check = [&mismatches](const std::string& what, double expected, double found) {
    if (expected == found) return;
    if (mismatches.size() < 10) {
      mismatches.push_back(what + ": recomputed " + format_double(expected) + ", summary has " +
                           format_double(found));
    }
  };

  // (sigma2 text, algorithm) -> recomputed per-seed values in row order
  std::map<std::pair<std::string, std::string>, std::vector<double>> finals;
  std::map<std::string, std::vector<double>> diffs;  // sigma2 text -> diffs
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cell_finals;
  for (const auto& row : table.rows) {
    const std::string& seed = row[c_seed];
    const std::string label =
        "sigma2=" + row[c_sigma2] + " seed=" + seed + " algorithm=" + row[c_alg];
    if (seed == "mean" || seed == "std") {
      const auto key = std::make_pair(row[c_sigma2], row[c_alg]);
      const auto it = finals.find(key);
      if (it == finals.end()) {
        if (mismatches.size() < 10) mismatches.push_back(label + ": no per-seed rows before it");
        continue;
      }
      const bool is_mean = seed == "mean";
      check(label, is_mean ? mean_of(it->second) : sample_std(it->second),
            parse_double(row[c_final]));
      if (!row[c_diff].empty()) {
        const auto& d = diffs[row[c_sigma2]];
        if (d.empty()) {
          if (mismatches.size() < 10) mismatches.push_back(label + ": no diffs to aggregate");
        } else {
          check(label + " diff", is_mean ? mean_of(d) : sample_std(d), parse_double(row[c_diff]));
        }
      }
      continue;
    }
    const fs::path path = run_dir(out_dir, parse_double(row[c_sigma2]),
                                  static_cast<std::uint64_t>(parse_int(seed)), row[c_alg]) /
                          "epochs.csv";
    double recomputed = 0.0;
    try {
      recomputed = final10_from_epochs_csv(path);
    } catch (const std::exception& e) {
      if (mismatches.size() < 10) mismatches.push_back(label + ": " + e.what());
      continue;
    }
    check(label, recomputed, parse_double(row[c_final]));
    finals[{row[c_sigma2], row[c_alg]}].push_back(recomputed);
    cell_finals[{row[c_sigma2], seed}][row[c_alg]] = recomputed;
    if (!row[c_diff].empty()) {
      const auto& cell = cell_finals[{row[c_sigma2], seed}];
      const auto m = cell.find("modified_ngd");
      if (m == cell.end()) {
        if (mismatches.size() < 10) {
          mismatches.push_back(label + ": diff present but modified_ngd row missing");
        }
      } else {
        const double diff = recomputed - m->second;
        check(label + " diff", diff, parse_double(row[c_diff]));
        diffs[row[c_sigma2]].push_back(diff);
      }
    }
  }

  if (!mismatches.empty()) {
    std::string msg = "summary verification failed:";
    for (const auto& m : mismatches) msg += "\n  " + m;
    throw ReportError(msg);
  }
}

}  // namespace modngd
