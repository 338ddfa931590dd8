#include "modngd/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "modngd/csv.hpp"
#include "modngd/errors.hpp"
#include "modngd/rng.hpp"

namespace modngd {

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

BiasInit bias_init_from_string(const std::string& name) {
  if (name == "zeros") return BiasInit::zeros;
  if (name == "uniform_fan_in") return BiasInit::uniform_fan_in;
  throw std::invalid_argument("unknown bias_init '" + name + "'");
}

std::string to_string(BiasInit b) {
  return b == BiasInit::zeros ? "zeros" : "uniform_fan_in";
}

std::vector<std::size_t> MLPConfig::layer_widths() const {
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
  widths.push_back(1);
  return widths;
}

std::size_t MLPConfig::param_count() const {
  const auto widths = layer_widths();
  std::size_t p = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) p += (widths[l - 1] + 1) * widths[l];
  return p;
}

static void validate(const MLPConfig& config) {
  if (config.input_dim == 0) throw std::invalid_argument("input_dim must be positive");
  for (std::size_t w : config.hidden_widths) {
    if (w == 0) throw std::invalid_argument("hidden widths must be positive");
  }
}

MLPState he_init(const MLPConfig& config) {
  validate(config);
  Rng rng(config.seed, kStreamWeightInit);
  const auto widths = config.layer_widths();
  MLPState state;
  state.config = config;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(widths[l]);
    const auto cols = static_cast<Eigen::Index>(widths[l - 1]);
    Eigen::MatrixXd w(rows, cols);
    const double scale = std::sqrt(2.0 / static_cast<double>(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = scale * rng.normal();
    }
    state.weights.push_back(std::move(w));
    state.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  // Biases draw after all weights so the weight draw does not depend on the
  // bias mode.
  if (config.bias_init == BiasInit::uniform_fan_in) {
    for (std::size_t l = 1; l < widths.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l - 1]));
      for (Eigen::Index r = 0; r < state.biases[l - 1].size(); ++r) {
        state.biases[l - 1][r] = bound * (2.0 * rng.uniform() - 1.0);
      }
    }
  }
  return state;
}

static double activate(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? z : 0.0;
  return std::tanh(z);
}

// Derivative expressed through (z, act(z)) so tanh reuses its output.
static double activate_prime(Activation a, double z, double az) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0 - az * az;
}

double forward(const MLPState& state, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != state.config.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  const std::size_t depth = state.weights.size();
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::VectorXd z = state.weights[l] * a + state.biases[l];
    if (l + 1 < depth) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(state.config.activation, z[i]);
    }
    a = std::move(z);
  }
  return a[0];
}

Eigen::VectorXd forward_batch(const MLPState& state, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != state.config.input_dim) {
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  }
  const std::size_t depth = state.weights.size();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = a * state.weights[l].transpose();
    z.rowwise() += state.biases[l].transpose();
    if (l + 1 < depth) {
      if (state.config.activation == Activation::relu) {
        z = z.cwiseMax(0.0);
      } else {
        z = z.array().tanh().matrix();
      }
    }
    a = std::move(z);
  }
  return a.col(0);
}

Eigen::MatrixXd jacobian(const MLPState& state, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() == 0) throw std::invalid_argument("jacobian: inputs must be nonempty");
  if (static_cast<std::size_t>(inputs.cols()) != state.config.input_dim) {
    throw std::invalid_argument("jacobian: input dimension mismatch");
  }
  const std::size_t depth = state.weights.size();
  const auto p = static_cast<Eigen::Index>(state.param_count());
  Eigen::MatrixXd jac(inputs.rows(), p);

  std::vector<Eigen::VectorXd> acts(depth + 1);
  std::vector<Eigen::VectorXd> zs(depth);
  for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
    acts[0] = inputs.row(n).transpose();
    for (std::size_t l = 0; l < depth; ++l) {
      zs[l] = state.weights[l] * acts[l] + state.biases[l];
      acts[l + 1] = zs[l];
      if (l + 1 < depth) {
        for (Eigen::Index i = 0; i < acts[l + 1].size(); ++i) {
          acts[l + 1][i] = activate(state.config.activation, zs[l][i]);
        }
      }
    }

    // Output layer is scalar, so the seed sensitivity is 1.
    Eigen::VectorXd delta = Eigen::VectorXd::Ones(1);
    Eigen::Index offset = p;
    for (std::size_t l = depth; l-- > 0;) {
      const Eigen::Index rows = state.weights[l].rows();
      const Eigen::Index cols = state.weights[l].cols();
      offset -= rows * cols + rows;
      // Column-major weight gradient delta * acts[l]^T, then bias gradient.
      for (Eigen::Index c = 0; c < cols; ++c) {
        jac.block(n, offset + c * rows, 1, rows) = (delta * acts[l][c]).transpose();
      }
      jac.block(n, offset + rows * cols, 1, rows) = delta.transpose();
      if (l > 0) {
        Eigen::VectorXd next = state.weights[l].transpose() * delta;
        for (Eigen::Index i = 0; i < next.size(); ++i) {
          next[i] *= activate_prime(state.config.activation, zs[l - 1][i], acts[l][i]);
        }
        delta = std::move(next);
      }
    }
  }
  return jac;
}

double linearized_forward(const MLPState& state0, const Eigen::VectorXd& jac_row,
                          const Eigen::VectorXd& delta_theta, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(delta_theta.size()) != state0.param_count() ||
      jac_row.size() != delta_theta.size()) {
    throw std::invalid_argument("linearized_forward: parameter length mismatch");
  }
  return forward(state0, x) + jac_row.dot(delta_theta);
}

Eigen::VectorXd flatten(const MLPState& state) {
  Eigen::VectorXd theta(state.param_count());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    const auto& w = state.weights[l];
    theta.segment(offset, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    offset += w.size();
    theta.segment(offset, state.biases[l].size()) = state.biases[l];
    offset += state.biases[l].size();
  }
  return theta;
}

MLPState unflatten(const MLPConfig& config, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != config.param_count()) {
    throw std::invalid_argument("unflatten: parameter length mismatch");
  }
  MLPState state;
  state.config = config;
  const auto widths = config.layer_widths();
  Eigen::Index offset = 0;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const auto rows = static_cast<Eigen::Index>(widths[l]);
    const auto cols = static_cast<Eigen::Index>(widths[l - 1]);
    Eigen::MatrixXd w(rows, cols);
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = theta.segment(offset, rows * cols);
    offset += rows * cols;
    state.weights.push_back(std::move(w));
    state.biases.push_back(theta.segment(offset, rows));
    offset += rows;
  }
  return state;
}

void add_scaled(MLPState& state, const Eigen::VectorXd& delta, double scale) {
  if (static_cast<std::size_t>(delta.size()) != state.param_count()) {
    throw std::invalid_argument("add_scaled: parameter length mismatch");
  }
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    auto& w = state.weights[l];
    Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) += scale * delta.segment(offset, w.size());
    offset += w.size();
    state.biases[l] += scale * delta.segment(offset, state.biases[l].size());
    offset += state.biases[l].size();
  }
}

void save_checkpoint(const MLPState& state, const std::filesystem::path& prefix) {
  {
    CsvWriter writer(prefix.string() + ".csv", {"theta"});
    const Eigen::VectorXd theta = flatten(state);
    for (Eigen::Index i = 0; i < theta.size(); ++i) writer.write_row({format_double(theta[i])});
  }
  nlohmann::json j;
  j["input_dim"] = state.config.input_dim;
  j["hidden_widths"] = state.config.hidden_widths;
  j["activation"] = to_string(state.config.activation);
  j["bias_init"] = to_string(state.config.bias_init);
  j["seed"] = state.config.seed;
  std::ofstream out(prefix.string() + ".json", std::ios::binary);
  if (!out) throw ReportError("cannot write " + prefix.string() + ".json");
  out << j.dump(2) << '\n';
}

MLPState load_checkpoint(const std::filesystem::path& prefix) {
  std::ifstream in(prefix.string() + ".json");
  if (!in) throw ReportError("cannot open " + prefix.string() + ".json");
  nlohmann::json j;
  in >> j;
  MLPConfig config;
  config.input_dim = j.at("input_dim").get<std::size_t>();
  config.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  config.activation = activation_from_string(j.at("activation").get<std::string>());
  if (j.contains("bias_init")) {
    config.bias_init = bias_init_from_string(j.at("bias_init").get<std::string>());
  }
  config.seed = j.at("seed").get<std::uint64_t>();

  const CsvTable table = read_csv(prefix.string() + ".csv");
  const std::size_t col = table.column("theta");
  Eigen::VectorXd theta(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) theta[i] = parse_double(table.rows[i][col]);
  return unflatten(config, theta);
}

}  // namespace modngd
