#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace modngd {

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// zeros matches the classic He scheme. uniform_fan_in draws biases from
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the common deep-learning-framework
// default, which places relu kinks inside the data range; with zero biases a
// relu net on scalar positive inputs is positively homogeneous and its
// Jacobian has rank 2 regardless of width.
enum class BiasInit { zeros, uniform_fan_in };

BiasInit bias_init_from_string(const std::string& name);
std::string to_string(BiasInit b);

struct MLPConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths = {4096};
  Activation activation = Activation::relu;
  BiasInit bias_init = BiasInit::zeros;
  std::uint64_t seed = 0;

  // Layer widths including input and the scalar output.
  std::vector<std::size_t> layer_widths() const;
  std::size_t param_count() const;
};

// Scalar-output fully connected network. The flattened parameter vector is
// layer-major: for each layer, the weight matrix in column-major order
// followed by the bias vector. The output layer is linear.
struct MLPState {
  MLPConfig config;
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: n_l x n_{l-1}
  std::vector<Eigen::VectorXd> biases;   // biases[l]: n_l

  std::size_t param_count() const { return config.param_count(); }
};

// Weights ~ Normal(0, 2 / fan_in); biases per config.bias_init (zero by
// default).
MLPState he_init(const MLPConfig& config);

double forward(const MLPState& state, const Eigen::VectorXd& x);

// One forward value per row of inputs (rows are data points).
Eigen::VectorXd forward_batch(const MLPState& state, const Eigen::MatrixXd& inputs);

// Exact reverse-mode derivatives; row i is the gradient of forward at
// inputs.row(i) with respect to the flattened parameters. The relu
// subgradient at exactly 0 is taken to be 0.
Eigen::MatrixXd jacobian(const MLPState& state, const Eigen::MatrixXd& inputs);

// First-order predictor around state0: forward(state0, x) + <jac_row, delta_theta>.
double linearized_forward(const MLPState& state0, const Eigen::VectorXd& jac_row,
                          const Eigen::VectorXd& delta_theta, const Eigen::VectorXd& x);

Eigen::VectorXd flatten(const MLPState& state);
MLPState unflatten(const MLPConfig& config, const Eigen::VectorXd& theta);

// In-place theta += scale * delta in the flattened order.
void add_scaled(MLPState& state, const Eigen::VectorXd& delta, double scale);

// Checkpoint: <prefix>.csv holds the flattened parameters (header theta),
// <prefix>.json holds the MLPConfig.
void save_checkpoint(const MLPState& state, const std::filesystem::path& prefix);
MLPState load_checkpoint(const std::filesystem::path& prefix);

}  // namespace modngd
