#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "modngd/dataset.hpp"
#include "modngd/dynamics.hpp"
#include "modngd/network.hpp"
#include "modngd/spectral.hpp"

using namespace modngd;

namespace {

struct Instance {
  Splits splits;
  MLPConfig net;
  MLPState state;
  SpectralDecomposition decomp;
  Eigen::VectorXd labels;
  Eigen::VectorXd residual0;
};

Instance make_instance(int n_train, std::uint64_t seed) {
  DataConfig dc;
  dc.n_train = n_train;
  dc.n_val = 16;
  dc.n_test = 16;
  dc.sigma2 = 1.0;
  dc.seed = seed;
  dc.label_before_perturb = true;
  Instance inst;
  inst.splits = make_splits(dc);

  inst.net.hidden_widths = {64};
  inst.net.activation = Activation::tanh;
  inst.net.bias_init = BiasInit::uniform_fan_in;
  inst.net.seed = seed;
  inst.state = he_init(inst.net);
  const Eigen::MatrixXd x = input_matrix(inst.splits.train);
  inst.decomp = decompose(jacobian(inst.state, x), 1e-14);
  inst.labels.resize(n_train);
  for (int i = 0; i < n_train; ++i) inst.labels[i] = inst.splits.train.labels[i];
  inst.residual0 = forward_batch(inst.state, x) - inst.labels;
  return inst;
}

ModificationMask bits_mask(unsigned bits, int n) {
  ModificationMask mask;
  mask.preserved.resize(n);
  for (int i = 0; i < n; ++i) mask.preserved[i] = (bits >> i) & 1u;
  return mask;
}

Eigen::VectorXd mode_coords(const SpectralDecomposition& decomp, const Eigen::VectorXd& r) {
  return decomp.U.transpose() * r;
}

}  // namespace

TEST_CASE("algorithm names round-trip") {
  for (Algorithm a : {Algorithm::modified_ngd, Algorithm::ngd, Algorithm::cut_smallest}) {
    CHECK(algorithm_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(algorithm_from_string("sgd"), std::invalid_argument);
}

TEST_CASE("linearized NGD contracts the residual geometrically") {
  const Instance inst = make_instance(6, 5);
  TrainConfig tc;
  tc.eta = 0.1;
  tc.sigma0 = 0.5;
  tc.epochs = 12;
  tc.lr_halving_period = 1000;
  tc.algorithm = Algorithm::ngd;
  tc.linearized = true;

  std::vector<Eigen::VectorXd> residuals;
  const Trajectory traj = train(inst.splits, inst.net, tc, [&](const EpochContext& ctx) {
    residuals.push_back(ctx.residual);
  });
  REQUIRE(residuals.size() == 12);
  CHECK((residuals[0] - inst.residual0).cwiseAbs().maxCoeff() <= 1e-12);

  const double z = tc.eta * 6 * tc.sigma0 * tc.sigma0;
  for (std::size_t k = 0; k + 1 < residuals.size(); ++k) {
    const Eigen::VectorXd predicted = (1.0 - z) * residuals[k];
    CHECK((residuals[k + 1] - predicted).cwiseAbs().maxCoeff() <= 1e-10);
  }
  const double mse0 = inst.residual0.squaredNorm() / 6.0;
  CHECK(traj.epochs.back().train_mse ==
        doctest::Approx(mse0 * std::pow(1.0 - z, 24)).epsilon(1e-8));
}

TEST_CASE("closed form matches the RK4 integration of the residual flow") {
  const Instance inst = make_instance(6, 9);
  const ModificationMask mask = bits_mask(0b101101, 6);
  const double eta = 0.1;
  const double sigma0 = 0.4;
  const std::vector<double> times = {0.0, 0.3, 1.7, 5.0};
  const auto residuals = ode_integrate(times, inst.decomp, mask, inst.residual0, eta, sigma0, 6);
  REQUIRE(residuals.size() == times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::VectorXd closed = training_set_solution(times[k], inst.decomp, mask,
                                                         inst.residual0, inst.labels, eta,
                                                         sigma0, 6) -
                                   inst.labels;
    CHECK((residuals[k] - closed).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("ODE decays preserved coordinates and freezes cut ones") {
  const Instance inst = make_instance(6, 9);
  const ModificationMask mask = bits_mask(0b001110, 6);
  const std::vector<double> times = {0.0, 0.5, 1.0, 2.0, 4.0};
  const auto residuals = ode_integrate(times, inst.decomp, mask, inst.residual0, 0.1, 0.4, 6);
  const Eigen::VectorXd a0 = mode_coords(inst.decomp, residuals[0]);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const Eigen::VectorXd a = mode_coords(inst.decomp, residuals[k]);
    const Eigen::VectorXd prev = mode_coords(inst.decomp, residuals[k - 1]);
    for (int i = 0; i < 6; ++i) {
      if (mask.preserved[i]) {
        CHECK(std::abs(a[i]) < std::abs(prev[i]) + 1e-15);
      } else {
        CHECK(a[i] == doctest::Approx(a0[i]).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("training_set_solution endpoints") {
  const Instance inst = make_instance(6, 13);
  const ModificationMask mixed = bits_mask(0b011010, 6);
  const double inf = std::numeric_limits<double>::infinity();

  const Eigen::VectorXd at0 = training_set_solution(0.0, inst.decomp, mixed, inst.residual0,
                                                    inst.labels, 0.1, 0.5, 6);
  CHECK((at0 - (inst.labels + inst.residual0)).cwiseAbs().maxCoeff() <= 1e-12);

  const Eigen::VectorXd all_on = training_set_solution(
      inf, inst.decomp, ModificationMask::all_preserved(6), inst.residual0, inst.labels, 0.1,
      0.5, 6);
  CHECK((all_on - inst.labels).cwiseAbs().maxCoeff() <= 1e-14);

  const Eigen::VectorXd all_off = training_set_solution(
      inf, inst.decomp, ModificationMask::all_cut(6), inst.residual0, inst.labels, 0.1, 0.5, 6);
  CHECK((all_off - (inst.labels + inst.residual0)).cwiseAbs().maxCoeff() <= 1e-12);

  // At infinity the preserved part is gone and the cut part survives intact.
  const Eigen::VectorXd at_inf = training_set_solution(inf, inst.decomp, mixed, inst.residual0,
                                                       inst.labels, 0.1, 0.5, 6);
  const Eigen::VectorXd a = mode_coords(inst.decomp, at_inf - inst.labels);
  const Eigen::VectorXd a0 = mode_coords(inst.decomp, inst.residual0);
  for (int i = 0; i < 6; ++i) {
    const double want = mixed.preserved[i] ? 0.0 : a0[i];
    CHECK(a[i] == doctest::Approx(want).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("prediction forms agree with each other") {
  const Instance inst = make_instance(6, 17);
  const ModificationMask mask = bits_mask(0b110101, 6);
  for (double xval : {0.05, 0.37, 0.62, 0.95}) {
    Eigen::VectorXd x(1);
    x << xval;
    const double converged =
        converged_prediction(x, inst.state, inst.decomp, mask, inst.residual0);
    const double via_modified_jacobian =
        modified_jacobian_gd_prediction(x, inst.state, inst.decomp, mask, inst.residual0);
    CHECK(converged == doctest::Approx(via_modified_jacobian).epsilon(1e-12));

    const double late = closed_form_prediction(x, 1e6, inst.state, inst.decomp, mask,
                                               inst.residual0, 0.1, 0.5, 6);
    CHECK(converged == doctest::Approx(late).epsilon(1e-12));

    const double at0 = closed_form_prediction(x, 0.0, inst.state, inst.decomp, mask,
                                              inst.residual0, 0.1, 0.5, 6);
    CHECK(at0 == doctest::Approx(forward(inst.state, x)).epsilon(1e-12));
  }
}

TEST_CASE("linearized modified run converges to the closed-form prediction") {
  const Instance inst = make_instance(6, 21);
  TrainConfig tc;
  tc.eta = 0.1;
  tc.sigma0 = 0.5;
  tc.epochs = 400;
  tc.lr_halving_period = 1000000;
  tc.algorithm = Algorithm::modified_ngd;
  tc.linearized = true;
  tc.rank_tol = 1e-16;
  tc.forced_mask = bits_mask(0b011011, 6);

  const Trajectory traj = train(inst.splits, inst.net, tc);
  for (const auto& record : traj.epochs) {
    CHECK(record.preserved == tc.forced_mask->preserved);
    CHECK(record.n_preserved == 4);
  }

  const Eigen::VectorXd delta = flatten(traj.final_state) - flatten(inst.state);
  const Eigen::MatrixXd x_test = input_matrix(inst.splits.test);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = x_test.row(i).transpose();
    const double expect =
        converged_prediction(x, inst.state, inst.decomp, *tc.forced_mask, inst.residual0);
    const Eigen::VectorXd jac_row = jacobian(inst.state, x.transpose()).row(0).transpose();
    const double got = linearized_forward(inst.state, jac_row, delta, x);
    CHECK(got == doctest::Approx(expect).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("NGD training drives the train loss down monotonically") {
  const Instance inst = make_instance(8, 3);
  TrainConfig tc;
  tc.eta = 0.1;
  tc.sigma0 = 0.35;
  tc.epochs = 40;
  tc.lr_halving_period = 1000;
  tc.algorithm = Algorithm::ngd;

  const Trajectory traj = train(inst.splits, inst.net, tc);
  REQUIRE(traj.epochs.size() == 40);
  for (std::size_t k = 0; k + 1 < traj.epochs.size(); ++k) {
    CHECK(traj.epochs[k + 1].train_mse <= traj.epochs[k].train_mse * (1.0 + 1e-9));
  }
  const double mse0 = inst.residual0.squaredNorm() / 8.0;
  CHECK(traj.epochs.back().train_mse < 1e-3 * mse0);
  for (const auto& record : traj.epochs) CHECK(record.n_preserved == 8);
}

TEST_CASE("training is bitwise deterministic") {
  const Instance inst = make_instance(6, 29);
  TrainConfig tc;
  tc.eta = 0.05;
  tc.sigma0 = 0.5;
  tc.epochs = 10;
  tc.algorithm = Algorithm::modified_ngd;

  const Trajectory a = train(inst.splits, inst.net, tc);
  const Trajectory b = train(inst.splits, inst.net, tc);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t k = 0; k < a.epochs.size(); ++k) {
    CHECK(a.epochs[k].train_mse == b.epochs[k].train_mse);
    CHECK(a.epochs[k].val_mse == b.epochs[k].val_mse);
    CHECK(a.epochs[k].test_mse == b.epochs[k].test_mse);
    CHECK(a.epochs[k].preserved == b.epochs[k].preserved);
  }
  CHECK(flatten(a.final_state) == flatten(b.final_state));
}

TEST_CASE("cut_smallest pairs with a modified run via the cut count trace") {
  const Instance inst = make_instance(6, 33);
  TrainConfig tc;
  tc.eta = 0.1;
  tc.sigma0 = 0.5;
  tc.epochs = 15;
  tc.algorithm = Algorithm::modified_ngd;
  const Trajectory modified = train(inst.splits, inst.net, tc);

  TrainConfig paired = tc;
  paired.algorithm = Algorithm::cut_smallest;
  paired.cut_count_trace = modified.cut_counts();
  const Trajectory baseline = train(inst.splits, inst.net, paired);

  REQUIRE(baseline.epochs.size() == modified.epochs.size());
  for (std::size_t k = 0; k < baseline.epochs.size(); ++k) {
    const std::size_t cut = paired.cut_count_trace[k];
    CHECK(baseline.epochs[k].n_preserved == 6 - cut);
    // Smallest modes go first: the mask is a prefix of ones.
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(baseline.epochs[k].preserved[i] == (i < 6 - cut));
    }
  }
}

TEST_CASE("learning rate halves on the configured period") {
  const Instance inst = make_instance(6, 37);
  TrainConfig tc;
  tc.eta = 0.2;
  tc.sigma0 = 0.4;
  tc.epochs = 25;
  tc.lr_halving_period = 10;
  tc.algorithm = Algorithm::ngd;

  const Trajectory traj = train(inst.splits, inst.net, tc);
  for (std::size_t k = 0; k < traj.epochs.size(); ++k) {
    const double expect = 0.2 * std::pow(0.5, static_cast<double>(k / 10));
    CHECK(traj.epochs[k].lr == doctest::Approx(expect).epsilon(1e-15));
    CHECK(traj.epochs[k].epoch == k);
  }
}

TEST_CASE("epoch hook sees lazily computed statistics consistent with direct evaluation") {
  const Instance inst = make_instance(6, 41);
  TrainConfig tc;
  tc.eta = 0.1;
  tc.sigma0 = 0.5;
  tc.epochs = 1;
  tc.algorithm = Algorithm::modified_ngd;

  bool seen = false;
  train(inst.splits, inst.net, tc, [&](const EpochContext& ctx) {
    if (ctx.epoch != 0) return;
    seen = true;
    const ModeStatistics& stats = ctx.stats();
    const ModeStatistics direct =
        mode_statistics(inst.decomp, inst.state, inst.splits.train, inst.splits.val);
    CHECK((stats.q - direct.q).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((stats.l - direct.l).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(&ctx.stats() == &stats);
  });
  CHECK(seen);
}
