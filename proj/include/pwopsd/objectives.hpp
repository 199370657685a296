#pragma once

// Weighted clipped-forward-KL distillation losses over rollout batches,
// their gradients with respect to student logits, and a finite-difference
// check of those gradients.
//
// A sequence stores one column per valid token: teacher(:, t) is the
// (already temperature-scaled) teacher distribution and student_logits(:, t)
// the raw student logits, divided by the distillation temperature inside the
// loss.

#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pwopsd/distributions.hpp"
#include "pwopsd/rng.hpp"
#include "pwopsd/schedule.hpp"

namespace pwopsd {

struct ObjectiveConfig {
  double distill_temperature = 1.1;
  double clip_threshold = 0.05;

  void validate() const;
};

enum class Reduction { GlobalTokenMean, PerSequenceMean };

struct UniformWeight {};
struct PositionWeight {
  PositionSchedule schedule;
};
/// Forward KL where teacher entropy exceeds the threshold, reverse KL elsewhere.
struct EntropyGate {
  double threshold = 0.0;
};
using Weighting = std::variant<UniformWeight, PositionWeight, EntropyGate>;

/// ln(V)/2, the gate used when none is configured.
double default_gate_threshold(Eigen::Index vocab_size);

struct SequenceRollout {
  Eigen::MatrixXd teacher;         // V × L
  Eigen::MatrixXd student_logits;  // V × L

  Eigen::Index length() const { return teacher.cols(); }
  Eigen::Index vocab() const { return teacher.rows(); }
};

struct RolloutBatch {
  std::vector<SequenceRollout> sequences;

  Eigen::Index total_tokens() const;
  /// Throws InvalidInput on empty batches, shape mismatches, invalid teacher
  /// columns or non-finite logits.
  void validate() const;
};

enum class InnerDivergence { ClippedForward, Reverse };

/// Per-token inner loss on logits z at temperature T.
template <typename DerivedQ, typename DerivedZ>
typename DerivedQ::Scalar token_loss(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedZ>& z,
                                     typename DerivedQ::Scalar temperature, typename DerivedQ::Scalar clip,
                                     InnerDivergence inner) {
  const auto p = softmax_with_temperature(z, temperature);
  if (inner == InnerDivergence::Reverse) return reverse_kl(q, p);
  return clipped_fkl_terms(q, p, clip).sum();
}

/// Gradient of the clipped forward-KL token loss with respect to z:
/// g_k = (p_k·Q_U - q_k·[k ∈ U]) / T, U the strictly unclipped terms.
Eigen::VectorXd clipped_fkl_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& z, double temperature,
                                     double clip);

/// Gradient of KL(p || q) with respect to z: g_k = p_k (ln(p_k/q_k) - KL) / T.
Eigen::VectorXd reverse_kl_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& z, double temperature);

/// Which inner divergence each token of a sequence uses under `weighting`.
std::vector<InnerDivergence> inner_divergences(const SequenceRollout& seq, const Weighting& weighting);

/// Outer weights w_{i,t} (ones for Uniform and EntropyGate).
Eigen::VectorXd token_weights(Eigen::Index length, const Weighting& weighting);

/// Factor multiplying w_{i,t}·ℓ_{i,t} in the reduced loss.
double reduction_coefficient(const RolloutBatch& batch, std::size_t sequence, Reduction reduction);

/// Per-token inner losses ℓ_{i,t}; one vector per sequence.
std::vector<Eigen::VectorXd> token_losses(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                          const Weighting& weighting);

/// Reduces per-token losses: GlobalTokenMean = Σ w ℓ / Σ L_i,
/// PerSequenceMean = (1/B) Σ_i (1/L_i) Σ_t w ℓ. Sequence order is fixed.
template <typename Scalar>
Scalar reduce_token_losses(const std::vector<VectorX<Scalar>>& losses, const std::vector<Eigen::VectorXd>& weights,
                           Reduction reduction) {
  if (reduction == Reduction::GlobalTokenMean) {
    Scalar total(0);
    Eigen::Index tokens = 0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      for (Eigen::Index t = 0; t < losses[i].size(); ++t) total += Scalar(weights[i](t)) * losses[i](t);
      tokens += losses[i].size();
    }
    return total / Scalar(tokens);
  }
  Scalar outer(0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    Scalar inner(0);
    for (Eigen::Index t = 0; t < losses[i].size(); ++t) inner += Scalar(weights[i](t)) * losses[i](t);
    outer += inner / Scalar(losses[i].size());
  }
  return outer / Scalar(losses.size());
}

double distillation_loss(const RolloutBatch& batch, const ObjectiveConfig& cfg, const Weighting& weighting,
                         Reduction reduction);

double entropy_gated_loss(const RolloutBatch& batch, const ObjectiveConfig& cfg, double gate_threshold,
                          Reduction reduction);

/// d loss / d student_logits, same shape as the batch's logit matrices.
/// Teacher columns are constants.
std::vector<Eigen::MatrixXd> loss_gradient_wrt_student_logits(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                                              const Weighting& weighting, Reduction reduction);

struct GradientCheck {
  double max_relative_error = 0.0;  // over coordinates with |analytic| > 1e-8
  double max_absolute_error = 0.0;  // over the remaining coordinates
  std::size_t compared = 0;
  std::size_t skipped_at_kink = 0;  // perturbation moved a term across the clip
};

/// Central differences (L(z+h) - L(z-h))/2h per logit against the analytic
/// gradient. The loss is re-evaluated in long double so rounding stays far
/// below the step's truncation error. Coordinates whose ±h perturbation
/// changes the clipped set are excluded.
GradientCheck finite_difference_check(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                      const Weighting& weighting, Reduction reduction, double step);

/// Random batch: lengths uniform in [1, max_length], teacher columns are
/// softmax of N(0, logit_scale²) logits, student logits N(0, logit_scale²).
RolloutBatch random_batch(Rng& rng, int vocab, int sequences, int max_length, double logit_scale = 2.0);

}  // namespace pwopsd
