#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "modngd/network.hpp"
#include "modngd/rng.hpp"

using namespace modngd;

namespace {

MLPConfig tiny_config(Activation act, std::vector<std::size_t> widths, std::uint64_t seed) {
  MLPConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden_widths = std::move(widths);
  cfg.activation = act;
  cfg.seed = seed;
  return cfg;
}

// Independent evaluator: plain nested loops, no Eigen products.
double forward_oracle(const MLPState& state, const std::vector<double>& x) {
  std::vector<double> act = x;
  const std::size_t depth = state.weights.size();
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& w = state.weights[l];
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double z = state.biases[l][r];
      for (Eigen::Index c = 0; c < w.cols(); ++c) z += w(r, c) * act[static_cast<std::size_t>(c)];
      if (l + 1 < depth) {
        if (state.config.activation == Activation::relu) {
          z = z > 0.0 ? z : 0.0;
        } else {
          z = std::tanh(z);
        }
      }
      next[static_cast<std::size_t>(r)] = z;
    }
    act = std::move(next);
  }
  return act[0];
}

}  // namespace

TEST_CASE("layer widths and parameter counts") {
  MLPConfig cfg;
  CHECK(cfg.layer_widths() == std::vector<std::size_t>{1, 4096, 1});
  CHECK(cfg.param_count() == 12289);

  const MLPConfig two = tiny_config(Activation::tanh, {3, 2}, 0);
  CHECK(two.layer_widths() == std::vector<std::size_t>{1, 3, 2, 1});
  CHECK(two.param_count() == (1 + 1) * 3 + (3 + 1) * 2 + (2 + 1) * 1);
}

TEST_CASE("invalid configs are rejected") {
  MLPConfig cfg;
  cfg.input_dim = 0;
  CHECK_THROWS_AS(he_init(cfg), std::invalid_argument);
  cfg = MLPConfig{};
  cfg.hidden_widths = {8, 0};
  CHECK_THROWS_AS(he_init(cfg), std::invalid_argument);
}

TEST_CASE("he_init weight variance tracks 2 / fan_in") {
  const MLPConfig cfg = tiny_config(Activation::relu, {2048}, 5);
  const MLPState state = he_init(cfg);
  const auto& w1 = state.weights[1];
  double sumsq = 0.0;
  for (Eigen::Index c = 0; c < w1.cols(); ++c) sumsq += w1(0, c) * w1(0, c);
  const double variance = sumsq / static_cast<double>(w1.cols());
  const double expected = 2.0 / 2048.0;
  CHECK(variance > 0.9 * expected);
  CHECK(variance < 1.1 * expected);
}

TEST_CASE("he_init is deterministic per seed") {
  const MLPConfig cfg = tiny_config(Activation::relu, {16}, 33);
  const MLPState a = he_init(cfg);
  const MLPState b = he_init(cfg);
  CHECK(flatten(a) == flatten(b));
  MLPConfig other = cfg;
  other.seed = 34;
  CHECK(flatten(a) != flatten(he_init(other)));
}

TEST_CASE("bias init modes") {
  MLPConfig cfg = tiny_config(Activation::relu, {64}, 3);
  SUBCASE("zeros by default") {
    const MLPState state = he_init(cfg);
    CHECK(state.biases[0].isZero(0.0));
    CHECK(state.biases[1].isZero(0.0));
  }
  SUBCASE("uniform_fan_in stays inside its bound and changes only biases") {
    const MLPState zero_state = he_init(cfg);
    cfg.bias_init = BiasInit::uniform_fan_in;
    const MLPState state = he_init(cfg);
    CHECK(state.weights[0] == zero_state.weights[0]);
    CHECK(state.weights[1] == zero_state.weights[1]);
    CHECK(state.biases[0].cwiseAbs().maxCoeff() <= 1.0);
    CHECK(state.biases[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(64.0));
    CHECK(state.biases[0].cwiseAbs().minCoeff() > 0.0);
  }
}

TEST_CASE("bias_init string round-trip") {
  CHECK(bias_init_from_string("zeros") == BiasInit::zeros);
  CHECK(bias_init_from_string("uniform_fan_in") == BiasInit::uniform_fan_in);
  CHECK(to_string(BiasInit::uniform_fan_in) == "uniform_fan_in");
  CHECK_THROWS_AS(bias_init_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("activation string round-trip") {
  CHECK(activation_from_string("relu") == Activation::relu);
  CHECK(activation_from_string("tanh") == Activation::tanh);
  CHECK(to_string(Activation::tanh) == "tanh");
  CHECK_THROWS_AS(activation_from_string("sigmoid"), std::invalid_argument);
}

TEST_CASE("hand-built relu net computes the identity") {
  MLPConfig cfg = tiny_config(Activation::relu, {2}, 0);
  MLPState state;
  state.config = cfg;
  Eigen::MatrixXd w1(2, 1);
  w1 << 1.0, -1.0;
  Eigen::MatrixXd w2(1, 2);
  w2 << 1.0, -1.0;
  state.weights = {w1, w2};
  state.biases = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)};

  Eigen::VectorXd x(1);
  for (double v : {0.7, -0.3, 0.0, 2.5}) {
    x[0] = v;
    CHECK(forward(state, x) == doctest::Approx(v).epsilon(1e-15));
  }
}

TEST_CASE("forward agrees with the straight-line oracle") {
  for (Activation act : {Activation::relu, Activation::tanh}) {
    MLPConfig cfg = tiny_config(act, {7, 5}, 17);
    cfg.bias_init = BiasInit::uniform_fan_in;
    const MLPState state = he_init(cfg);
    Eigen::VectorXd x(1);
    for (double v : {0.0, 0.21, 0.68, 0.99, -0.4}) {
      x[0] = v;
      CHECK(forward(state, x) == doctest::Approx(forward_oracle(state, {v})).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward_batch matches forward per row") {
  MLPConfig cfg = tiny_config(Activation::tanh, {9}, 4);
  cfg.bias_init = BiasInit::uniform_fan_in;
  const MLPState state = he_init(cfg);
  Eigen::MatrixXd inputs(4, 1);
  inputs << 0.05, 0.3, 0.62, 0.97;
  const Eigen::VectorXd batch = forward_batch(state, inputs);
  REQUIRE(batch.size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::VectorXd x = inputs.row(i).transpose();
    CHECK(batch[i] == doctest::Approx(forward(state, x)).epsilon(1e-14));
  }
}

TEST_CASE("forward rejects dimension mismatches") {
  const MLPState state = he_init(tiny_config(Activation::relu, {4}, 0));
  Eigen::VectorXd bad(2);
  bad << 0.1, 0.2;
  CHECK_THROWS_AS(forward(state, bad), std::invalid_argument);
  Eigen::MatrixXd bad_batch(3, 2);
  bad_batch.setZero();
  CHECK_THROWS_AS(forward_batch(state, bad_batch), std::invalid_argument);
  CHECK_THROWS_AS(jacobian(state, bad_batch), std::invalid_argument);
  CHECK_THROWS_AS(jacobian(state, Eigen::MatrixXd(0, 1)), std::invalid_argument);
}

TEST_CASE("jacobian of a purely linear layer is [x, 1]") {
  MLPConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden_widths = {};
  cfg.seed = 2;
  MLPState state = he_init(cfg);
  Eigen::MatrixXd inputs(2, 1);
  inputs << 0.4, -1.3;
  const Eigen::MatrixXd jac = jacobian(state, inputs);
  REQUIRE(jac.rows() == 2);
  REQUIRE(jac.cols() == 2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(jac(i, 0) == inputs(i, 0));
    CHECK(jac(i, 1) == 1.0);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  for (Activation act : {Activation::tanh, Activation::relu}) {
    MLPConfig cfg = tiny_config(act, {6, 4}, 23);
    cfg.bias_init = BiasInit::uniform_fan_in;
    const MLPState state = he_init(cfg);
    const Eigen::VectorXd theta = flatten(state);
    Eigen::MatrixXd inputs(3, 1);
    inputs << 0.13, 0.55, 0.86;
    const Eigen::MatrixXd jac = jacobian(state, inputs);
    const double h = 1e-6;
    for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
      Eigen::VectorXd x = inputs.row(n).transpose();
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        Eigen::VectorXd tp = theta;
        tp[j] += h;
        Eigen::VectorXd tm = theta;
        tm[j] -= h;
        const double fd =
            (forward(unflatten(cfg, tp), x) - forward(unflatten(cfg, tm), x)) / (2.0 * h);
        CHECK(jac(n, j) == doctest::Approx(fd).epsilon(5e-7).scale(1.0));
      }
    }
  }
}

TEST_CASE("relu subgradient at an exact kink is zero") {
  MLPConfig cfg = tiny_config(Activation::relu, {1}, 0);
  MLPState state;
  state.config = cfg;
  Eigen::MatrixXd w1(1, 1);
  w1 << 2.0;
  Eigen::MatrixXd w2(1, 1);
  w2 << 3.0;
  state.weights = {w1, w2};
  Eigen::VectorXd b1(1);
  b1 << -1.0;  // pre-activation 2x - 1 hits 0 at x = 0.5
  state.biases = {b1, Eigen::VectorXd::Zero(1)};

  Eigen::MatrixXd at_kink(1, 1);
  at_kink << 0.5;
  const Eigen::MatrixXd jac = jacobian(state, at_kink);
  // Order: w1, b1, w2, b2. Upstream of the dead unit everything vanishes and
  // the unit output itself is 0.
  CHECK(jac(0, 0) == 0.0);
  CHECK(jac(0, 1) == 0.0);
  CHECK(jac(0, 2) == 0.0);
  CHECK(jac(0, 3) == 1.0);
}

TEST_CASE("jacobian rows line up with the flattened parameter order") {
  MLPConfig cfg = tiny_config(Activation::tanh, {3}, 8);
  cfg.bias_init = BiasInit::uniform_fan_in;
  const MLPState state = he_init(cfg);
  const Eigen::VectorXd theta = flatten(state);
  Eigen::MatrixXd inputs(1, 1);
  inputs << 0.42;
  const Eigen::MatrixXd jac = jacobian(state, inputs);
  // Directional derivative along theta itself vs finite differences.
  const double h = 1e-7;
  Eigen::VectorXd x = inputs.row(0).transpose();
  const double plus = forward(unflatten(cfg, theta + h * theta), x);
  const double minus = forward(unflatten(cfg, theta - h * theta), x);
  const double fd = (plus - minus) / (2.0 * h);
  CHECK(jac.row(0).dot(theta) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("linearized_forward reduces to forward at delta zero and is exact for linear nets") {
  MLPConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden_widths = {};
  cfg.seed = 6;
  const MLPState state = he_init(cfg);
  Eigen::MatrixXd inputs(1, 1);
  inputs << 0.77;
  const Eigen::MatrixXd jac = jacobian(state, inputs);
  Eigen::VectorXd x = inputs.row(0).transpose();

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(linearized_forward(state, jac.row(0), zero, x) == forward(state, x));

  Eigen::VectorXd delta(2);
  delta << 0.3, -0.9;
  MLPState moved = state;
  add_scaled(moved, delta, 1.0);
  CHECK(linearized_forward(state, jac.row(0), delta, x) ==
        doctest::Approx(forward(moved, x)).epsilon(1e-14));

  Eigen::VectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(linearized_forward(state, jac.row(0), bad, x), std::invalid_argument);
}

TEST_CASE("flatten, unflatten, and add_scaled round-trip") {
  MLPConfig cfg = tiny_config(Activation::relu, {5, 3}, 12);
  cfg.bias_init = BiasInit::uniform_fan_in;
  const MLPState state = he_init(cfg);
  const Eigen::VectorXd theta = flatten(state);
  REQUIRE(static_cast<std::size_t>(theta.size()) == cfg.param_count());

  const MLPState rebuilt = unflatten(cfg, theta);
  CHECK(flatten(rebuilt) == theta);
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    CHECK(rebuilt.weights[l] == state.weights[l]);
    CHECK(rebuilt.biases[l] == state.biases[l]);
  }

  MLPState shifted = state;
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(theta.size(), 0.25);
  add_scaled(shifted, delta, -2.0);
  CHECK((flatten(shifted) - (theta - 0.5 * Eigen::VectorXd::Ones(theta.size()))).cwiseAbs().maxCoeff() <=
        1e-15);

  Eigen::VectorXd bad(theta.size() + 1);
  bad.setZero();
  CHECK_THROWS_AS(unflatten(cfg, bad), std::invalid_argument);
  CHECK_THROWS_AS(add_scaled(shifted, bad, 1.0), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip state and config") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "modngd_test_network";
  fs::create_directories(dir);
  MLPConfig cfg = tiny_config(Activation::tanh, {4, 2}, 19);
  cfg.bias_init = BiasInit::uniform_fan_in;
  const MLPState state = he_init(cfg);
  save_checkpoint(state, dir / "ckpt");

  const MLPState loaded = load_checkpoint(dir / "ckpt");
  CHECK(loaded.config.input_dim == cfg.input_dim);
  CHECK(loaded.config.hidden_widths == cfg.hidden_widths);
  CHECK(loaded.config.activation == cfg.activation);
  CHECK(loaded.config.bias_init == cfg.bias_init);
  CHECK(loaded.config.seed == cfg.seed);
  CHECK(flatten(loaded) == flatten(state));
  fs::remove_all(dir);
}
