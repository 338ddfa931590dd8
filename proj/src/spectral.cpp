#include "modngd/spectral.hpp"

#include <Eigen/SVD>
#include <stdexcept>

#include "modngd/csv.hpp"
#include "modngd/errors.hpp"

namespace modngd {

std::size_t ModificationMask::n_preserved() const {
  std::size_t count = 0;
  for (bool keep : preserved) count += keep ? 1 : 0;
  return count;
}

Eigen::VectorXd ModificationMask::indicator() const {
  Eigen::VectorXd ind(preserved.size());
  for (std::size_t i = 0; i < preserved.size(); ++i) ind[i] = preserved[i] ? 1.0 : 0.0;
  return ind;
}

Eigen::VectorXd FisherSpectrum::eigenvalues(std::size_t p) const {
  Eigen::VectorXd eigs = Eigen::VectorXd::Zero(p);
  const double scale = 1.0 / (static_cast<double>(n_train) * sigma0 * sigma0);
  const std::size_t n = static_cast<std::size_t>(lambda_sq.size());
  for (std::size_t i = 0; i < n && i < p; ++i) eigs[i] = lambda_sq[i] * scale;
  return eigs;
}

SpectralDecomposition decompose(const Eigen::MatrixXd& jac, double rank_tol) {
  if (jac.rows() > jac.cols()) {
    throw std::invalid_argument("decompose: need at least as many parameters as data points");
  }
  if (!(rank_tol > 0.0)) throw std::invalid_argument("decompose: rank_tol must be positive");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SpectralDecomposition decomp;
  decomp.U = svd.matrixU();
  decomp.lambda = svd.singularValues();
  decomp.V_thin = svd.matrixV();

  const double lead = decomp.lambda[0] * decomp.lambda[0];
  const double tail = decomp.lambda[decomp.lambda.size() - 1] * decomp.lambda[decomp.lambda.size() - 1];
  if (!(tail > rank_tol * lead)) {
    throw AssumptionViolation(
        "rank-deficient Jacobian: the neural tangent kernel is not positive definite "
        "(min lambda^2 = " + format_double(tail) + " <= rank_tol * max lambda^2 = " +
        format_double(rank_tol * lead) + ")");
  }

  for (Eigen::Index i = 0; i < decomp.U.cols(); ++i) {
    Eigen::Index arg = 0;
    decomp.U.col(i).cwiseAbs().maxCoeff(&arg);
    if (decomp.U(arg, i) < 0.0) {
      decomp.U.col(i) = -decomp.U.col(i);
      decomp.V_thin.col(i) = -decomp.V_thin.col(i);
    }
  }
  return decomp;
}

Eigen::MatrixXd ntk_gram(const SpectralDecomposition& decomp) {
  return decomp.U * decomp.lambda.array().square().matrix().asDiagonal() * decomp.U.transpose();
}

Eigen::VectorXd apply_phi(const Eigen::VectorXd& lambda, const ModificationMask& mask) {
  if (static_cast<std::size_t>(lambda.size()) != mask.size()) {
    throw std::invalid_argument("apply_phi: length mismatch");
  }
  Eigen::VectorXd out(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    out[i] = mask.preserved[static_cast<std::size_t>(i)] ? 1.0 / (lambda[i] * lambda[i]) : 0.0;
  }
  return out;
}

Eigen::VectorXd natural_gradient_step(const SpectralDecomposition& decomp,
                                      const ModificationMask& mask,
                                      const Eigen::VectorXd& residual, double sigma0,
                                      std::size_t n_train) {
  if (residual.size() != decomp.U.rows()) {
    throw std::invalid_argument("natural_gradient_step: residual length mismatch");
  }
  if (mask.size() != decomp.n()) {
    throw std::invalid_argument("natural_gradient_step: mask length mismatch");
  }
  const double scale = static_cast<double>(n_train) * sigma0 * sigma0;
  Eigen::VectorXd coeffs = decomp.U.transpose() * residual;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    coeffs[i] = mask.preserved[static_cast<std::size_t>(i)] ? coeffs[i] / decomp.lambda[i] : 0.0;
  }
  return scale * (decomp.V_thin * coeffs);
}

Eigen::MatrixXd function_space_operator(const SpectralDecomposition& decomp,
                                        const ModificationMask& mask, double sigma0,
                                        std::size_t n_train) {
  if (mask.size() != decomp.n()) {
    throw std::invalid_argument("function_space_operator: mask length mismatch");
  }
  const double scale = static_cast<double>(n_train) * sigma0 * sigma0;
  return scale * (decomp.U * mask.indicator().asDiagonal() * decomp.U.transpose());
}

FisherSpectrum fisher_spectrum(const SpectralDecomposition& decomp, double sigma0,
                               std::size_t n_train) {
  FisherSpectrum spectrum;
  spectrum.sigma0 = sigma0;
  spectrum.n_train = n_train;
  spectrum.lambda_sq = decomp.lambda.array().square();
  return spectrum;
}

void write_spectrum_csv(const SpectralDecomposition& decomp, const ModificationMask& mask,
                        const std::filesystem::path& path) {
  CsvWriter writer(path, {"i", "lambda_sq", "preserved"});
  for (std::size_t i = 0; i < decomp.n(); ++i) {
    writer.write_row({std::to_string(i),
                      format_double(decomp.lambda[static_cast<Eigen::Index>(i)] *
                                    decomp.lambda[static_cast<Eigen::Index>(i)]),
                      mask.preserved[i] ? "1" : "0"});
  }
}

}  // namespace modngd
