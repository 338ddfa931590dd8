#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modngd/dataset.hpp"
#include "modngd/network.hpp"
#include "modngd/risk.hpp"
#include "modngd/spectral.hpp"

namespace modngd {

enum class Algorithm { modified_ngd, ngd, cut_smallest };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);

struct TrainConfig {
  double eta = 0.1;
  std::size_t epochs = 500;
  std::size_t lr_halving_period = 100;
  double sigma0 = 1.0;
  Algorithm algorithm = Algorithm::modified_ngd;
  // When false, the Jacobian and its decomposition stay frozen at
  // initialization (tangent-kernel-regime mode).
  bool refresh_spectrum = true;
  // When true, the network is replaced by its linearization around the
  // initial parameters; implies a frozen spectrum.
  bool linearized = false;
  double rank_tol = 1e-12;
  // The criterion's division by a_i is skipped for modes with
  // |a_i| < alpha_floor_scale * ||residual|| (preserved by convention).
  double alpha_floor_scale = 1e-12;
  // cut_smallest: number of modes to cut per epoch, usually taken from a
  // paired modified_ngd run via Trajectory::cut_counts().
  std::vector<std::size_t> cut_count_trace;
  // Test hook: overrides the per-algorithm mask when set.
  std::optional<ModificationMask> forced_mask;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  // Mean squared errors measured after the epoch's parameter update. The
  // optimizer itself descends the half-sum-of-squares loss.
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_mse = 0.0;
  std::size_t n_preserved = 0;
  std::vector<bool> preserved;
};

struct Trajectory {
  std::vector<EpochRecord> epochs;
  MLPState final_state;

  // Number of cut modes per epoch (feeds a paired cut_smallest run).
  std::vector<std::size_t> cut_counts() const;
};

// Per-epoch observation point, fired after the mask is chosen and before the
// parameter update. `residual` is the pre-update training residual. `stats`
// computes the per-mode statistics lazily (cached within the epoch), so
// hooks that ignore them cost nothing extra.
struct EpochContext {
  std::size_t epoch;
  const SpectralDecomposition& decomp;
  const ModificationMask& mask;
  const Eigen::VectorXd& residual;
  std::function<const ModeStatistics&()> stats;
};
using EpochHook = std::function<void(const EpochContext&)>;

// Full-batch training: theta <- theta - lr_t * natural_gradient_step(...),
// with lr_t = eta * 2^(-floor(epoch / lr_halving_period)). The mask comes
// from the per-epoch criterion (modified_ngd, against the validation split
// and the current residual), all-preserve (ngd), or cutting the smallest
// modes (cut_smallest).
Trajectory train(const Splits& splits, const MLPConfig& net_config,
                 const TrainConfig& train_config, const EpochHook& hook = {});

// Function-space solution at time t around initialization:
// f_t(x) = f_0(x) - (1 - e^(-eta N sigma0^2 t)) * J(x) V_thin diag(mask_i / lambda_i) U^T r_0.
double closed_form_prediction(const Eigen::VectorXd& x, double t, const MLPState& state0,
                              const SpectralDecomposition& decomp0,
                              const ModificationMask& mask, const Eigen::VectorXd& residual0,
                              double eta, double sigma0, std::size_t n_train);

// The t -> infinity limit of closed_form_prediction.
double converged_prediction(const Eigen::VectorXd& x, const MLPState& state0,
                            const SpectralDecomposition& decomp0, const ModificationMask& mask,
                            const Eigen::VectorXd& residual0);

// Training-set values of the function-space solution:
// f_t(X) = Y + U diag(e^(-eta N sigma0^2 t) on preserved, 1 on cut) U^T r_0.
// Accepts t = infinity.
Eigen::VectorXd training_set_solution(double t, const SpectralDecomposition& decomp0,
                                      const ModificationMask& mask,
                                      const Eigen::VectorXd& residual0,
                                      const Eigen::VectorXd& labels, double eta, double sigma0,
                                      std::size_t n_train);

// Classical RK4 integration of the linear residual flow
// dr/dt = -eta N sigma0^2 * U diag(mask) U^T r, returning the residual at
// every grid time. Substeps are chosen so each step advances the phase
// eta N sigma0^2 h by at most 0.01.
std::vector<Eigen::VectorXd> ode_integrate(const std::vector<double>& times,
                                           const SpectralDecomposition& decomp0,
                                           const ModificationMask& mask,
                                           const Eigen::VectorXd& residual0, double eta,
                                           double sigma0, std::size_t n_train);

// Converged prediction of gradient descent with a spectrally modified
// Jacobian, accumulated mode by mode:
// f(x) = f_0(x) - sum over preserved i of (J(x) v_i) (u_i^T r_0) / lambda_i.
// Analytically identical to converged_prediction.
double modified_jacobian_gd_prediction(const Eigen::VectorXd& x, const MLPState& state0,
                                       const SpectralDecomposition& decomp0,
                                       const ModificationMask& mask,
                                       const Eigen::VectorXd& residual0);

}  // namespace modngd
