#pragma once

// Ensemble uncertainty scores. An ensemble is a V × M matrix whose columns
// are the M perturbed teacher distributions at one position.

#include <vector>

#include <Eigen/Core>

namespace pwopsd {

void require_ensemble(const Eigen::MatrixXd& members);

/// (1/M) Σ_m H(p^(m)).
double mean_predictive_entropy(const Eigen::MatrixXd& members);

/// H(p̄) - mean_predictive_entropy; float-noise negatives clamp to 0.
double mutual_information(const Eigen::MatrixXd& members);

struct DirichletPrecision {
  double kappa_hat = 0.0;   // raw moment-matched estimate, may be negative or +inf
  double log_kappa = 0.0;   // ln max(kappa_hat, eps); ln(1/eps) when members agree exactly
};

/// κ̂ = (1 - ‖p̄‖²)/S - 1 with S the trace of the unbiased (M-1) coordinate
/// variances.
DirichletPrecision dirichlet_precision(const Eigen::MatrixXd& members, double epsilon = 1e-6);

struct UncertaintyRecord {
  double mean_entropy = 0.0;
  double mutual_information = 0.0;
  double log_kappa = 0.0;
  double truncated_entropy = 0.0;
};

/// All four scores; the truncated entropy is taken on `reference` (the
/// unperturbed teacher pass).
UncertaintyRecord score_ensemble(const Eigen::MatrixXd& members, const Eigen::VectorXd& reference,
                                 const std::vector<bool>& valid_mask, int top_m, double epsilon = 1e-6);

}  // namespace pwopsd
