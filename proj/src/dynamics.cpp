#include "modngd/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace modngd {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "modified_ngd") return Algorithm::modified_ngd;
  if (name == "ngd") return Algorithm::ngd;
  if (name == "cut_smallest") return Algorithm::cut_smallest;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::modified_ngd: return "modified_ngd";
    case Algorithm::ngd: return "ngd";
    default: return "cut_smallest";
  }
}

std::vector<std::size_t> Trajectory::cut_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(epochs.size());
  for (const auto& rec : epochs) counts.push_back(rec.preserved.size() - rec.n_preserved);
  return counts;
}

static void validate(const TrainConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("train: eta must be positive");
  if (cfg.epochs == 0) throw std::invalid_argument("train: epochs must be positive");
  if (cfg.lr_halving_period == 0) {
    throw std::invalid_argument("train: lr_halving_period must be positive");
  }
  if (!(cfg.sigma0 > 0.0)) throw std::invalid_argument("train: sigma0 must be positive");
}

Trajectory train(const Splits& splits, const MLPConfig& net_config,
                 const TrainConfig& cfg, const EpochHook& hook) {
  validate(cfg);
  if (net_config.input_dim != 1) {
    throw std::invalid_argument("train: splits carry scalar inputs, input_dim must be 1");
  }
  const std::size_t n = splits.train.size();
  const Eigen::MatrixXd x_train = input_matrix(splits.train);
  const Eigen::MatrixXd x_val = input_matrix(splits.val);
  const Eigen::MatrixXd x_test = input_matrix(splits.test);
  const Eigen::VectorXd& y_train = splits.train.labels;

  MLPState state = he_init(net_config);
  const bool frozen = cfg.linearized || !cfg.refresh_spectrum;

  Eigen::MatrixXd jac_train;
  SpectralDecomposition decomp;
  auto compute_spectrum = [&](const MLPState& s) {
    jac_train = jacobian(s, x_train);
    decomp = decompose(jac_train, cfg.rank_tol);
  };

  // Frozen-mode precomputations around the initial parameters.
  MLPState state0;
  Eigen::MatrixXd jac_val, jac_test, jac_val_v;
  Eigen::VectorXd f0_train, f0_val, f0_test;
  Eigen::VectorXd delta;
  if (frozen) {
    state0 = state;
    compute_spectrum(state0);
    jac_val_v = jacobian(state0, x_val) * decomp.V_thin;
  }
  if (cfg.linearized) {
    jac_val = jacobian(state0, x_val);
    jac_test = jacobian(state0, x_test);
    f0_train = forward_batch(state0, x_train);
    f0_val = forward_batch(state0, x_val);
    f0_test = forward_batch(state0, x_test);
    delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(state0.param_count()));
  }

  if (cfg.forced_mask && cfg.forced_mask->size() != n) {
    throw std::invalid_argument("train: forced_mask length mismatch");
  }
  if (cfg.algorithm == Algorithm::cut_smallest && !cfg.forced_mask &&
      cfg.cut_count_trace.empty()) {
    throw std::invalid_argument("train: cut_smallest needs a cut_count_trace");
  }

  Trajectory traj;
  traj.epochs.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.eta * std::exp2(-static_cast<double>(epoch / cfg.lr_halving_period));
    if (!frozen) compute_spectrum(state);

    const Eigen::VectorXd f_train =
        cfg.linearized ? (f0_train + jac_train * delta).eval() : forward_batch(state, x_train);
    const Eigen::VectorXd residual = f_train - y_train;

    ModeStatistics stats;
    bool have_stats = false;
    auto compute_stats = [&]() {
      if (have_stats) return;
      if (!frozen) {
        stats = mode_statistics(decomp, state, splits.train, splits.val);
      } else {
        const Eigen::VectorXd alpha_val =
            (cfg.linearized ? (f0_val + jac_val * delta).eval()
                            : forward_batch(state, x_val)) - splits.val.labels;
        stats = mode_statistics_from_parts(decomp, jac_val_v, residual, alpha_val);
      }
      have_stats = true;
    };

    ModificationMask mask;
    if (cfg.forced_mask) {
      mask = *cfg.forced_mask;
    } else if (cfg.algorithm == Algorithm::ngd) {
      mask = ModificationMask::all_preserved(n);
    } else if (cfg.algorithm == Algorithm::modified_ngd) {
      compute_stats();
      mask = criterion_mask(stats, n, cfg.alpha_floor_scale * residual.norm());
    } else {
      const std::size_t idx = std::min(epoch, cfg.cut_count_trace.size() - 1);
      const std::size_t k = std::min(cfg.cut_count_trace[idx], n);
      mask.preserved.assign(n, true);
      for (std::size_t i = n - k; i < n; ++i) mask.preserved[i] = false;
    }

    if (hook) {
      auto lazy_stats = [&]() -> const ModeStatistics& {
        compute_stats();
        return stats;
      };
      hook(EpochContext{epoch, decomp, mask, residual, lazy_stats});
    }

    const Eigen::VectorXd step = natural_gradient_step(decomp, mask, residual, cfg.sigma0, n);
    if (cfg.linearized) {
      delta -= lr * step;
    } else {
      add_scaled(state, step, -lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    if (cfg.linearized) {
      rec.train_mse = (f0_train + jac_train * delta - y_train).squaredNorm() /
                      static_cast<double>(n);
      rec.val_mse = (f0_val + jac_val * delta - splits.val.labels).squaredNorm() /
                    static_cast<double>(splits.val.size());
      rec.test_mse = (f0_test + jac_test * delta - splits.test.labels).squaredNorm() /
                     static_cast<double>(splits.test.size());
    } else {
      rec.train_mse = (forward_batch(state, x_train) - y_train).squaredNorm() /
                      static_cast<double>(n);
      rec.val_mse = (forward_batch(state, x_val) - splits.val.labels).squaredNorm() /
                    static_cast<double>(splits.val.size());
      rec.test_mse = (forward_batch(state, x_test) - splits.test.labels).squaredNorm() /
                     static_cast<double>(splits.test.size());
    }
    rec.n_preserved = mask.n_preserved();
    rec.preserved = mask.preserved;
    traj.epochs.push_back(std::move(rec));
  }

  if (cfg.linearized) {
    traj.final_state = state0;
    add_scaled(traj.final_state, delta, 1.0);
  } else {
    traj.final_state = std::move(state);
  }
  return traj;
}

// Shared core of the closed-form predictors: J(x) V_thin diag(mask/lambda) U^T r0.
static double spectral_correction(const Eigen::VectorXd& x, const MLPState& state0,
                                  const SpectralDecomposition& decomp0,
                                  const ModificationMask& mask,
                                  const Eigen::VectorXd& residual0) {
  Eigen::VectorXd coeffs = decomp0.U.transpose() * residual0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    coeffs[i] = mask.preserved[static_cast<std::size_t>(i)] ? coeffs[i] / decomp0.lambda[i] : 0.0;
  }
  const Eigen::MatrixXd jac_x = jacobian(state0, x.transpose());
  return (jac_x * (decomp0.V_thin * coeffs))(0, 0);
}

double closed_form_prediction(const Eigen::VectorXd& x, double t, const MLPState& state0,
                              const SpectralDecomposition& decomp0,
                              const ModificationMask& mask, const Eigen::VectorXd& residual0,
                              double eta, double sigma0, std::size_t n_train) {
  const double z = eta * static_cast<double>(n_train) * sigma0 * sigma0 * t;
  const double factor = 1.0 - std::exp(-z);
  return forward(state0, x) - factor * spectral_correction(x, state0, decomp0, mask, residual0);
}

double converged_prediction(const Eigen::VectorXd& x, const MLPState& state0,
                            const SpectralDecomposition& decomp0, const ModificationMask& mask,
                            const Eigen::VectorXd& residual0) {
  return forward(state0, x) - spectral_correction(x, state0, decomp0, mask, residual0);
}

Eigen::VectorXd training_set_solution(double t, const SpectralDecomposition& decomp0,
                                      const ModificationMask& mask,
                                      const Eigen::VectorXd& residual0,
                                      const Eigen::VectorXd& labels, double eta, double sigma0,
                                      std::size_t n_train) {
  const double z = eta * static_cast<double>(n_train) * sigma0 * sigma0 * t;
  Eigen::VectorXd coeffs = decomp0.U.transpose() * residual0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    if (mask.preserved[static_cast<std::size_t>(i)]) coeffs[i] *= std::exp(-z);
  }
  return labels + decomp0.U * coeffs;
}

std::vector<Eigen::VectorXd> ode_integrate(const std::vector<double>& times,
                                           const SpectralDecomposition& decomp0,
                                           const ModificationMask& mask,
                                           const Eigen::VectorXd& residual0, double eta,
                                           double sigma0, std::size_t n_train) {
  if (times.empty() || times[0] != 0.0) {
    throw std::invalid_argument("ode_integrate: time grid must start at 0");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("ode_integrate: time grid must be strictly increasing");
    }
  }
  const double rate = eta * static_cast<double>(n_train) * sigma0 * sigma0;
  const Eigen::MatrixXd op =
      rate * (decomp0.U * mask.indicator().asDiagonal() * decomp0.U.transpose());

  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  Eigen::VectorXd r = residual0;
  out.push_back(r);
  constexpr double kMaxPhasePerStep = 0.01;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double span = times[i] - times[i - 1];
    const auto substeps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rate * span / kMaxPhasePerStep)));
    const double h = span / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
      const Eigen::VectorXd k1 = -(op * r);
      const Eigen::VectorXd k2 = -(op * (r + 0.5 * h * k1));
      const Eigen::VectorXd k3 = -(op * (r + 0.5 * h * k2));
      const Eigen::VectorXd k4 = -(op * (r + h * k3));
      r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(r);
  }
  return out;
}

double modified_jacobian_gd_prediction(const Eigen::VectorXd& x, const MLPState& state0,
                                       const SpectralDecomposition& decomp0,
                                       const ModificationMask& mask,
                                       const Eigen::VectorXd& residual0) {
  const Eigen::MatrixXd jac_x = jacobian(state0, x.transpose());
  const Eigen::VectorXd coeffs = decomp0.U.transpose() * residual0;
  double correction = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.preserved[i]) continue;
    const auto idx = static_cast<Eigen::Index>(i);
    const double jv = (jac_x * decomp0.V_thin.col(idx))(0, 0);
    correction += jv * coeffs[idx] / decomp0.lambda[idx];
  }
  return forward(state0, x) - correction;
}

}  // namespace modngd
