#include "modngd/risk.hpp"

#include <cmath>
#include <stdexcept>

#include "modngd/csv.hpp"

namespace modngd {

ModeStatistics mode_statistics_from_parts(const SpectralDecomposition& decomp,
                                          const Eigen::MatrixXd& jac_pop_v,
                                          const Eigen::VectorXd& alpha_train,
                                          const Eigen::VectorXd& alpha_pop) {
  const auto n = static_cast<double>(decomp.n());
  const auto m = static_cast<double>(jac_pop_v.rows());
  if (jac_pop_v.rows() == 0) throw std::invalid_argument("mode_statistics: empty population");
  if (jac_pop_v.cols() != decomp.U.cols() || alpha_train.size() != decomp.U.rows() ||
      alpha_pop.size() != jac_pop_v.rows()) {
    throw std::invalid_argument("mode_statistics: shape mismatch");
  }

  ModeStatistics stats;
  stats.lambda_sq = decomp.lambda.array().square();
  stats.alpha_u = decomp.U.transpose() * alpha_train;
  stats.q = jac_pop_v.array().square().colwise().mean().transpose().matrix() -
            stats.lambda_sq / n;
  stats.l = (jac_pop_v.transpose() * alpha_pop) / m -
            (decomp.lambda.array() * stats.alpha_u.array()).matrix() / n;
  stats.b_total = alpha_pop.squaredNorm() / m - alpha_train.squaredNorm() / n;
  return stats;
}

ModeStatistics mode_statistics(const SpectralDecomposition& decomp, const MLPState& state,
                               const Dataset& train, const Dataset& population) {
  if (population.size() == 0) throw std::invalid_argument("mode_statistics: empty population");
  const Eigen::VectorXd alpha_train =
      forward_batch(state, input_matrix(train)) - train.labels;
  const Eigen::VectorXd alpha_pop =
      forward_batch(state, input_matrix(population)) - population.labels;
  const Eigen::MatrixXd jac_pop_v = jacobian(state, input_matrix(population)) * decomp.V_thin;
  return mode_statistics_from_parts(decomp, jac_pop_v, alpha_train, alpha_pop);
}

Eigen::MatrixXd population_q_full(const SpectralDecomposition& decomp, const MLPState& state,
                                  const Dataset& population) {
  if (population.size() == 0) throw std::invalid_argument("population_q_full: empty population");
  const Eigen::MatrixXd jac_pop_v = jacobian(state, input_matrix(population)) * decomp.V_thin;
  const auto m = static_cast<double>(jac_pop_v.rows());
  Eigen::MatrixXd q = (jac_pop_v.transpose() * jac_pop_v) / m;
  q.diagonal() -= decomp.lambda.array().square().matrix() / static_cast<double>(decomp.n());
  return q;
}

Eigen::VectorXd criterion_values(const ModeStatistics& stats, std::size_t n_train) {
  const auto n = static_cast<double>(n_train);
  Eigen::VectorXd values(stats.lambda_sq.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double lambda = std::sqrt(stats.lambda_sq[i]);
    values[i] = stats.q[i] / stats.lambda_sq[i] -
                2.0 * stats.l[i] / (stats.alpha_u[i] * lambda) - 1.0 / n;
  }
  return values;
}

ModificationMask criterion_mask(const ModeStatistics& stats, std::size_t n_train,
                                double alpha_floor) {
  const Eigen::VectorXd values = criterion_values(stats, n_train);
  ModificationMask mask;
  mask.preserved.resize(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const bool degenerate = std::abs(stats.alpha_u[idx]) < alpha_floor;
    mask.preserved[i] = degenerate || !(values[idx] > 0.0);
  }
  return mask;
}

static std::pair<double, double> mode_costs(const ModeStatistics& stats, Eigen::Index i,
                                            double n) {
  const double a = stats.alpha_u[i];
  const double lambda = std::sqrt(stats.lambda_sq[i]);
  const double preserve_cost =
      stats.q[i] * a * a / stats.lambda_sq[i] - 2.0 * stats.l[i] * a / lambda;
  const double cut_cost = a * a / n;
  return {preserve_cost, cut_cost};
}

RiskReport risk_decomposition(const ModeStatistics& stats, const ModificationMask& mask,
                              std::size_t n_train) {
  if (mask.size() != stats.size()) throw std::invalid_argument("risk_decomposition: mask length");
  const auto n = static_cast<double>(n_train);
  RiskReport report;
  report.r2 = stats.b_total;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto costs = mode_costs(stats, static_cast<Eigen::Index>(i), n);
    report.per_mode.push_back(costs);
    if (mask.preserved[i]) {
      report.r2 += costs.first;
    } else {
      report.r1 += costs.second;
    }
  }
  report.total = report.r1 + report.r2;
  return report;
}

RiskReport risk_decomposition_full(const ModeStatistics& stats, const Eigen::MatrixXd& q_full,
                                   const ModificationMask& mask, std::size_t n_train) {
  if (mask.size() != stats.size()) throw std::invalid_argument("risk_decomposition: mask length");
  if (q_full.rows() != q_full.cols() ||
      static_cast<std::size_t>(q_full.rows()) != stats.size()) {
    throw std::invalid_argument("risk_decomposition: q_full shape");
  }
  const auto n = static_cast<double>(n_train);
  RiskReport report;
  Eigen::VectorXd c(stats.lambda_sq.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const auto costs = mode_costs(stats, idx, n);
    report.per_mode.push_back(costs);
    c[idx] = mask.preserved[i] ? stats.alpha_u[idx] / std::sqrt(stats.lambda_sq[idx]) : 0.0;
    if (!mask.preserved[i]) report.r1 += costs.second;
  }
  report.r2 = stats.b_total - 2.0 * stats.l.dot(c) + c.dot(q_full * c);
  report.total = report.r1 + report.r2;
  return report;
}

double exact_population_risk(const std::function<double(double)>& predict,
                             const Dataset& population) {
  if (population.size() == 0) {
    throw std::invalid_argument("exact_population_risk: empty population");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < population.inputs.size(); ++i) {
    const double err = predict(population.inputs[i]) - population.labels[i];
    sum += err * err;
  }
  return sum / static_cast<double>(population.size());
}

void write_mode_report_csv(const ModeStatistics& stats, const ModificationMask& mask,
                           std::size_t n_train, const std::filesystem::path& path) {
  const Eigen::VectorXd values = criterion_values(stats, n_train);
  const auto n = static_cast<double>(n_train);
  CsvWriter writer(path, {"i", "lambda_sq", "alpha_u", "q", "l", "criterion_value",
                          "preserved", "preserve_cost", "cut_cost"});
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const auto costs = mode_costs(stats, idx, n);
    writer.write_row({std::to_string(i), format_double(stats.lambda_sq[idx]),
                      format_double(stats.alpha_u[idx]), format_double(stats.q[idx]),
                      format_double(stats.l[idx]), format_double(values[idx]),
                      mask.preserved[i] ? "1" : "0", format_double(costs.first),
                      format_double(costs.second)});
  }
}

}  // namespace modngd
