#include "modngd/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "modngd/csv.hpp"
#include "modngd/rng.hpp"

namespace modngd {

std::vector<double> sample_inputs(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_inputs: n must be positive");
  Rng rng(seed, kStreamDataInputs);
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.uniform();
  return xs;
}

double perturb_input(double x, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("perturb_input: sigma2 must be positive");
  const double d = 1.0 - x;
  return x * std::exp(-d * d / sigma2);
}

double target(double x) { return std::cos(x) * std::sin(x); }

static void validate(const DataConfig& config) {
  if (config.n_train == 0 || config.n_val == 0 || config.n_test == 0) {
    throw std::invalid_argument("make_splits: all split sizes must be positive");
  }
  if (!(config.sigma2 > 0.0)) {
    throw std::invalid_argument("make_splits: sigma2 must be positive");
  }
}

Splits make_splits(const DataConfig& config) {
  validate(config);
  const std::size_t total = config.n_train + config.n_val + config.n_test;
  const std::vector<double> raw = sample_inputs(total, config.seed);

  Splits splits;
  splits.train.inputs.resize(config.n_train);
  splits.train.labels.resize(config.n_train);
  for (std::size_t i = 0; i < config.n_train; ++i) {
    const double x = raw[i];
    const double px = perturb_input(x, config.sigma2);
    splits.train.inputs[i] = px;
    splits.train.labels[i] = target(config.label_before_perturb ? x : px);
  }

  auto fill = [&raw](Dataset& out, std::size_t offset, std::size_t n) {
    out.inputs.resize(n);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.inputs[i] = raw[offset + i];
      out.labels[i] = target(raw[offset + i]);
    }
  };
  fill(splits.val, config.n_train, config.n_val);
  fill(splits.test, config.n_train + config.n_val, config.n_test);
  return splits;
}

Eigen::MatrixXd input_matrix(const Dataset& data) {
  Eigen::MatrixXd m(data.inputs.size(), 1);
  m.col(0) = data.inputs;
  return m;
}

void write_splits_csv(const Splits& splits, const std::filesystem::path& path) {
  CsvWriter writer(path, {"split", "x", "y"});
  auto dump = [&writer](const char* name, const Dataset& d) {
    for (Eigen::Index i = 0; i < d.inputs.size(); ++i) {
      writer.write_row({name, format_double(d.inputs[i]), format_double(d.labels[i])});
    }
  };
  dump("train", splits.train);
  dump("val", splits.val);
  dump("test", splits.test);
}

}  // namespace modngd
