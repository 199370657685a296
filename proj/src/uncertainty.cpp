#include "pwopsd/uncertainty.hpp"

#include <cmath>
#include <limits>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"

namespace pwopsd {

void require_ensemble(const Eigen::MatrixXd& members) {
  if (members.cols() < 2) throw InvalidInput("ensemble needs at least two members");
  for (Eigen::Index m = 0; m < members.cols(); ++m)
    if (!is_distribution(members.col(m))) throw InvalidInput("ensemble member is not a distribution");
}

double mean_predictive_entropy(const Eigen::MatrixXd& members) {
  require_ensemble(members);
  double total = 0.0;
  for (Eigen::Index m = 0; m < members.cols(); ++m) total += entropy(members.col(m));
  return total / static_cast<double>(members.cols());
}

double mutual_information(const Eigen::MatrixXd& members) {
  const double expected = mean_predictive_entropy(members);
  const Eigen::VectorXd mean = members.rowwise().mean();
  return std::max(entropy(mean) - expected, 0.0);
}

DirichletPrecision dirichlet_precision(const Eigen::MatrixXd& members, double epsilon) {
  require_ensemble(members);
  if (!(epsilon > 0.0)) throw InvalidInput("dirichlet_precision: epsilon must be positive");
  const Eigen::VectorXd mean = members.rowwise().mean();
  const Eigen::MatrixXd centered = members.colwise() - mean;
  const double trace = centered.squaredNorm() / static_cast<double>(members.cols() - 1);
  DirichletPrecision out;
  if (trace == 0.0) {
    out.kappa_hat = std::numeric_limits<double>::infinity();
    out.log_kappa = std::log(1.0 / epsilon);
    return out;
  }
  out.kappa_hat = (1.0 - mean.squaredNorm()) / trace - 1.0;
  out.log_kappa = std::log(std::max(out.kappa_hat, epsilon));
  return out;
}

UncertaintyRecord score_ensemble(const Eigen::MatrixXd& members, const Eigen::VectorXd& reference,
                                 const std::vector<bool>& valid_mask, int top_m, double epsilon) {
  UncertaintyRecord r;
  r.mean_entropy = mean_predictive_entropy(members);
  r.mutual_information = mutual_information(members);
  r.log_kappa = dirichlet_precision(members, epsilon).log_kappa;
  r.truncated_entropy = truncated_entropy(reference, valid_mask, top_m);
  return r;
}

}  // namespace pwopsd
