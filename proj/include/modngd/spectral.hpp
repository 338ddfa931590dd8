#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

namespace modngd {

// Thin SVD of an N x P Jacobian, J = U * diag(lambda) * V_thin^T, with
// singular values sorted descending. Only the first N columns of V are kept;
// the training dynamics never touch the rest.
struct SpectralDecomposition {
  Eigen::MatrixXd U;       // N x N orthogonal
  Eigen::VectorXd lambda;  // length N, descending, strictly positive
  Eigen::MatrixXd V_thin;  // P x N, orthonormal columns

  std::size_t n() const { return static_cast<std::size_t>(U.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(V_thin.rows()); }
};

// Preserve/cut flags over the N eigenmodes.
struct ModificationMask {
  std::vector<bool> preserved;

  static ModificationMask all_preserved(std::size_t n) { return {std::vector<bool>(n, true)}; }
  static ModificationMask all_cut(std::size_t n) { return {std::vector<bool>(n, false)}; }

  std::size_t size() const { return preserved.size(); }
  std::size_t n_preserved() const;
  // 1.0 for preserved modes, 0.0 for cut ones.
  Eigen::VectorXd indicator() const;
};

// Spectrum of the empirical Fisher (1 / (N sigma0^2)) J^T J: the N values
// lambda_i^2 / (N sigma0^2) padded with P - N zeros.
struct FisherSpectrum {
  double sigma0 = 1.0;
  std::size_t n_train = 0;
  Eigen::VectorXd lambda_sq;

  // The p largest eigenvalues, descending (p up to the parameter count).
  Eigen::VectorXd eigenvalues(std::size_t p) const;
};

// Thin SVD sorted by descending singular value. Each singular pair is
// sign-normalized so the largest-magnitude entry of u_i is positive, making
// downstream mode coefficients reproducible across SVD backends. Throws
// AssumptionViolation when any lambda_i^2 <= rank_tol * lambda_1^2, i.e.
// the neural tangent kernel is not positive definite.
SpectralDecomposition decompose(const Eigen::MatrixXd& jac, double rank_tol = 1e-12);

// Tangent kernel Gram matrix J J^T = U diag(lambda^2) U^T.
Eigen::MatrixXd ntk_gram(const SpectralDecomposition& decomp);

// Modified inverse spectrum: entry i is 1 / lambda_i^2 if preserved, else 0.
Eigen::VectorXd apply_phi(const Eigen::VectorXd& lambda, const ModificationMask& mask);

// Natural gradient direction under the modified inverse Fisher for the l2
// loss: N sigma0^2 * V_thin * diag(mask_i / lambda_i) * U^T * residual.
// The P x P modified inverse Fisher itself is never materialized.
Eigen::VectorXd natural_gradient_step(const SpectralDecomposition& decomp,
                                      const ModificationMask& mask,
                                      const Eigen::VectorXd& residual, double sigma0,
                                      std::size_t n_train);

// Function-space update operator N sigma0^2 * U * diag(mask) * U^T; divided
// by N sigma0^2 it is the orthogonal projector onto the preserved modes.
Eigen::MatrixXd function_space_operator(const SpectralDecomposition& decomp,
                                        const ModificationMask& mask, double sigma0,
                                        std::size_t n_train);

FisherSpectrum fisher_spectrum(const SpectralDecomposition& decomp, double sigma0,
                               std::size_t n_train);

// CSV dump with header i,lambda_sq,preserved.
void write_spectrum_csv(const SpectralDecomposition& decomp, const ModificationMask& mask,
                        const std::filesystem::path& path);

}  // namespace modngd
