#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "modngd/dataset.hpp"
#include "modngd/network.hpp"
#include "modngd/spectral.hpp"

namespace modngd {

// Per-mode discrepancy statistics between the training set and a population
// sample standing in for the true distribution. With alpha = f(X) - Y and
// a_i = u_i^T alpha:
//   q_i = mean over population of (J(x) v_i)^2            - lambda_i^2 / N
//   l_i = mean over population of alpha(x, y) * (J(x) v_i) - lambda_i a_i / N
//   B   = mean over population of alpha(x, y)^2            - alpha^T alpha / N
struct ModeStatistics {
  Eigen::VectorXd lambda_sq;  // descending
  Eigen::VectorXd alpha_u;    // U^T alpha
  Eigen::VectorXd q;
  Eigen::VectorXd l;
  double b_total = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(lambda_sq.size()); }
};

// Split of the converged expected risk. r1 covers the residual left on cut
// modes over the training set; r2 carries the distribution discrepancy.
struct RiskReport {
  double r1 = 0.0;
  double r2 = 0.0;
  double total = 0.0;
  // Pairs (preserve_cost, cut_cost): the mode's contribution to r1 + r2
  // under each choice; the scalar B is excluded (mask independent).
  std::vector<std::pair<double, double>> per_mode;
};

// Empirical statistics with the network's current function standing in for
// f: alpha is evaluated with `state` on both sets. Uses the M x N product
// J_pop * V_thin; nothing P x P is formed.
ModeStatistics mode_statistics(const SpectralDecomposition& decomp, const MLPState& state,
                               const Dataset& train, const Dataset& population);

// Same statistics from precomputed pieces (used by the linearized trainer,
// where residuals come from the frozen Jacobian rather than the network).
ModeStatistics mode_statistics_from_parts(const SpectralDecomposition& decomp,
                                          const Eigen::MatrixXd& jac_pop_v,
                                          const Eigen::VectorXd& alpha_train,
                                          const Eigen::VectorXd& alpha_pop);

// Full N x N discrepancy matrix Q (mode_statistics keeps only its diagonal);
// needed for the exact, non-diagonal risk identity.
Eigen::MatrixXd population_q_full(const SpectralDecomposition& decomp, const MLPState& state,
                                  const Dataset& population);

// Cut mode i when q_i / lambda_i^2 - 2 l_i / (a_i lambda_i) - 1/N > 0.
// Ties preserve; modes with |a_i| < alpha_floor preserve by convention.
ModificationMask criterion_mask(const ModeStatistics& stats, std::size_t n_train,
                                double alpha_floor);

// Per-mode criterion value (the quantity compared against 0 above);
// +inf/-inf possible when a_i is tiny, NaN when a_i is exactly 0.
Eigen::VectorXd criterion_values(const ModeStatistics& stats, std::size_t n_train);

// Diagonal-Q risk decomposition:
//   r1 = sum over cut modes of a_i^2 / N
//   r2 = B + sum over preserved modes of (q_i a_i^2 / lambda_i^2 - 2 l_i a_i / lambda_i)
RiskReport risk_decomposition(const ModeStatistics& stats, const ModificationMask& mask,
                              std::size_t n_train);

// Exact variant with the full Q matrix; on a finite population this equals
// the converged expected risk identically.
RiskReport risk_decomposition_full(const ModeStatistics& stats, const Eigen::MatrixXd& q_full,
                                   const ModificationMask& mask, std::size_t n_train);

// Mean squared error of a predictor over a finite sample.
double exact_population_risk(const std::function<double(double)>& predict,
                             const Dataset& population);

// CSV dump with header
// i,lambda_sq,alpha_u,q,l,criterion_value,preserved,preserve_cost,cut_cost.
void write_mode_report_csv(const ModeStatistics& stats, const ModificationMask& mask,
                           std::size_t n_train, const std::filesystem::path& path);

}  // namespace modngd
