#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace modngd {

struct DataConfig {
  std::size_t n_train = 256;
  std::size_t n_val = 64;
  std::size_t n_test = 64;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;
  // When true, training labels come from the pre-perturbation inputs,
  // turning the covariate shift into a label shift as well.
  bool label_before_perturb = false;
};

struct Dataset {
  Eigen::VectorXd inputs;
  Eigen::VectorXd labels;

  std::size_t size() const { return static_cast<std::size_t>(inputs.size()); }
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// n i.i.d. uniform draws from [0, 1), deterministic given seed.
std::vector<double> sample_inputs(std::size_t n, std::uint64_t seed);

// x * exp(-(1 - x)^2 / sigma2): compresses inputs toward 0, most strongly
// for small sigma2 and small x.
double perturb_input(double x, double sigma2);

// Ground-truth regression target cos(x) * sin(x).
double target(double x);

// Draws train/val/test inputs from one stream, perturbs only the training
// inputs, then labels every split via target().
Splits make_splits(const DataConfig& config);

// One-column view of the scalar inputs for network code.
Eigen::MatrixXd input_matrix(const Dataset& data);

// CSV dump with header split,x,y.
void write_splits_csv(const Splits& splits, const std::filesystem::path& path);

}  // namespace modngd
