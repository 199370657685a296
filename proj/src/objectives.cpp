#include "pwopsd/objectives.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pwopsd/error.hpp"

namespace pwopsd {

namespace {

using LongVector = VectorX<long double>;

// Strictly-unclipped vocabulary terms; a term sitting on the boundary counts
// as clipped. Terms whose denominator hit the floor have no dependence on z.
template <typename Scalar>
std::vector<bool> unclipped_set(const VectorX<Scalar>& q, const VectorX<Scalar>& p, Scalar clip) {
  std::vector<bool> in(static_cast<std::size_t>(q.size()), false);
  using std::log;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (!(q(j) > Scalar(0)) || p(j) < Scalar(kProbabilityFloor)) continue;
    in[static_cast<std::size_t>(j)] = q(j) * log(q(j) / p(j)) < clip;
  }
  return in;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(distill_temperature > 0.0) || !std::isfinite(distill_temperature))
    throw InvalidInput("objective: distill_temperature must be positive");
  if (!(clip_threshold > 0.0)) throw InvalidInput("objective: clip_threshold must be positive");
}

double default_gate_threshold(Eigen::Index vocab_size) {
  return 0.5 * std::log(static_cast<double>(vocab_size));
}

Eigen::Index RolloutBatch::total_tokens() const {
  Eigen::Index n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

void RolloutBatch::validate() const {
  if (sequences.empty()) throw InvalidInput("rollout batch is empty");
  const Eigen::Index vocab = sequences.front().vocab();
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = sequences[i];
    const std::string where = "sequence " + std::to_string(i);
    if (s.length() < 1) throw InvalidInput(where + ": valid length must be positive");
    if (s.student_logits.cols() != s.length() || s.student_logits.rows() != s.vocab())
      throw InvalidInput(where + ": teacher and student shapes differ");
    if (s.vocab() != vocab) throw InvalidInput(where + ": vocabulary size differs across the batch");
    if (!s.student_logits.allFinite()) throw InvalidInput(where + ": non-finite student logits");
    for (Eigen::Index t = 0; t < s.length(); ++t)
      if (!is_distribution(s.teacher.col(t))) throw InvalidInput(where + ": invalid teacher distribution");
  }
}

Eigen::VectorXd clipped_fkl_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& z, double temperature,
                                     double clip) {
  const Eigen::VectorXd p = softmax_with_temperature(z, temperature);
  const auto in = unclipped_set<double>(q, p, clip);
  double mass = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j)
    if (in[static_cast<std::size_t>(j)]) mass += q(j);
  Eigen::VectorXd g = p * mass;
  for (Eigen::Index k = 0; k < q.size(); ++k)
    if (in[static_cast<std::size_t>(k)]) g(k) -= q(k);
  return g / temperature;
}

Eigen::VectorXd reverse_kl_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& z, double temperature) {
  const Eigen::VectorXd p = softmax_with_temperature(z, temperature);
  Eigen::VectorXd log_ratio = Eigen::VectorXd::Zero(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (p(j) > 0.0) log_ratio(j) = std::log(p(j) / std::max(q(j), kProbabilityFloor));
  const double kl = p.dot(log_ratio);
  return (p.array() * (log_ratio.array() - kl)).matrix() / temperature;
}

std::vector<InnerDivergence> inner_divergences(const SequenceRollout& seq, const Weighting& weighting) {
  std::vector<InnerDivergence> out(static_cast<std::size_t>(seq.length()), InnerDivergence::ClippedForward);
  if (const auto* gate = std::get_if<EntropyGate>(&weighting)) {
    for (Eigen::Index t = 0; t < seq.length(); ++t)
      if (!(entropy(seq.teacher.col(t)) > gate->threshold))
        out[static_cast<std::size_t>(t)] = InnerDivergence::Reverse;
  }
  return out;
}

Eigen::VectorXd token_weights(Eigen::Index length, const Weighting& weighting) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(length);
  if (const auto* pos = std::get_if<PositionWeight>(&weighting)) {
    for (Eigen::Index t = 0; t < length; ++t)
      w(t) = weight(position_fraction(static_cast<int>(t + 1), static_cast<int>(length)), pos->schedule);
  }
  return w;
}

double reduction_coefficient(const RolloutBatch& batch, std::size_t sequence, Reduction reduction) {
  if (reduction == Reduction::GlobalTokenMean) return 1.0 / static_cast<double>(batch.total_tokens());
  return 1.0 / (static_cast<double>(batch.sequences.size()) *
                static_cast<double>(batch.sequences[sequence].length()));
}

namespace {

void validate_weighting(const Weighting& weighting) {
  if (const auto* pos = std::get_if<PositionWeight>(&weighting)) pos->schedule.validate();
  if (const auto* gate = std::get_if<EntropyGate>(&weighting))
    if (!(gate->threshold >= 0.0)) throw InvalidInput("entropy gate threshold must be non-negative");
}

std::vector<Eigen::VectorXd> all_weights(const RolloutBatch& batch, const Weighting& weighting) {
  std::vector<Eigen::VectorXd> w;
  w.reserve(batch.sequences.size());
  for (const auto& s : batch.sequences) w.push_back(token_weights(s.length(), weighting));
  return w;
}

}  // namespace

std::vector<Eigen::VectorXd> token_losses(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                          const Weighting& weighting) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(batch.sequences.size());
  for (const auto& s : batch.sequences) {
    const auto inner = inner_divergences(s, weighting);
    Eigen::VectorXd l(s.length());
    for (Eigen::Index t = 0; t < s.length(); ++t)
      l(t) = token_loss(s.teacher.col(t), s.student_logits.col(t), cfg.distill_temperature, cfg.clip_threshold,
                        inner[static_cast<std::size_t>(t)]);
    out.push_back(std::move(l));
  }
  return out;
}

double distillation_loss(const RolloutBatch& batch, const ObjectiveConfig& cfg, const Weighting& weighting,
                         Reduction reduction) {
  batch.validate();
  cfg.validate();
  validate_weighting(weighting);
  return reduce_token_losses<double>(token_losses(batch, cfg, weighting), all_weights(batch, weighting), reduction);
}

double entropy_gated_loss(const RolloutBatch& batch, const ObjectiveConfig& cfg, double gate_threshold,
                          Reduction reduction) {
  return distillation_loss(batch, cfg, EntropyGate{gate_threshold}, reduction);
}

std::vector<Eigen::MatrixXd> loss_gradient_wrt_student_logits(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                                              const Weighting& weighting, Reduction reduction) {
  batch.validate();
  cfg.validate();
  validate_weighting(weighting);
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(batch.sequences.size());
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const auto& s = batch.sequences[i];
    const auto inner = inner_divergences(s, weighting);
    const Eigen::VectorXd w = token_weights(s.length(), weighting);
    const double coef = reduction_coefficient(batch, i, reduction);
    Eigen::MatrixXd g(s.vocab(), s.length());
    for (Eigen::Index t = 0; t < s.length(); ++t) {
      const Eigen::VectorXd q = s.teacher.col(t);
      const Eigen::VectorXd z = s.student_logits.col(t);
      const Eigen::VectorXd gt = inner[static_cast<std::size_t>(t)] == InnerDivergence::Reverse
                                     ? reverse_kl_gradient(q, z, cfg.distill_temperature)
                                     : clipped_fkl_gradient(q, z, cfg.distill_temperature, cfg.clip_threshold);
      g.col(t) = (coef * w(t)) * gt;
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradientCheck finite_difference_check(const RolloutBatch& batch, const ObjectiveConfig& cfg,
                                      const Weighting& weighting, Reduction reduction, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite_difference_check: step must be positive");
  const auto analytic = loss_gradient_wrt_student_logits(batch, cfg, weighting, reduction);
  const auto weights = all_weights(batch, weighting);
  const long double temperature = cfg.distill_temperature;
  const long double clip = cfg.clip_threshold;
  const long double h = step;

  std::vector<LongVector> losses;
  std::vector<std::vector<InnerDivergence>> inner;
  for (const auto& s : batch.sequences) {
    inner.push_back(inner_divergences(s, weighting));
    LongVector l(s.length());
    for (Eigen::Index t = 0; t < s.length(); ++t)
      l(t) = token_loss(LongVector(s.teacher.col(t).cast<long double>()),
                        LongVector(s.student_logits.col(t).cast<long double>()), temperature, clip,
                        inner.back()[static_cast<std::size_t>(t)]);
    losses.push_back(std::move(l));
  }

  GradientCheck result;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const auto& s = batch.sequences[i];
    for (Eigen::Index t = 0; t < s.length(); ++t) {
      const LongVector q = s.teacher.col(t).cast<long double>();
      const LongVector z = s.student_logits.col(t).cast<long double>();
      const auto kind = inner[i][static_cast<std::size_t>(t)];
      const auto base_set = unclipped_set(q, softmax_with_temperature(z, temperature), clip);
      const long double saved = losses[i](t);
      for (Eigen::Index k = 0; k < s.vocab(); ++k) {
        LongVector zp = z, zm = z;
        zp(k) += h;
        zm(k) -= h;
        if (kind == InnerDivergence::ClippedForward &&
            (unclipped_set(q, softmax_with_temperature(zp, temperature), clip) != base_set ||
             unclipped_set(q, softmax_with_temperature(zm, temperature), clip) != base_set)) {
          ++result.skipped_at_kink;
          continue;
        }
        losses[i](t) = token_loss(q, zp, temperature, clip, kind);
        const long double plus = reduce_token_losses<long double>(losses, weights, reduction);
        losses[i](t) = token_loss(q, zm, temperature, clip, kind);
        const long double minus = reduce_token_losses<long double>(losses, weights, reduction);
        losses[i](t) = saved;

        const double numeric = static_cast<double>((plus - minus) / (2.0L * h));
        const double exact = analytic[i](k, t);
        const double err = std::abs(numeric - exact);
        if (std::abs(exact) > 1e-8)
          result.max_relative_error = std::max(result.max_relative_error, err / std::abs(exact));
        else
          result.max_absolute_error = std::max(result.max_absolute_error, err);
        ++result.compared;
      }
    }
  }
  return result;
}

RolloutBatch random_batch(Rng& rng, int vocab, int sequences, int max_length, double logit_scale) {
  if (vocab < 2 || sequences < 1 || max_length < 1) throw InvalidInput("random_batch: bad shape");
  RolloutBatch batch;
  for (int i = 0; i < sequences; ++i) {
    const auto L = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::uint64_t>(max_length)));
    SequenceRollout seq;
    seq.teacher.resize(vocab, L);
    seq.student_logits.resize(vocab, L);
    for (Eigen::Index t = 0; t < L; ++t) {
      Eigen::VectorXd z(vocab);
      for (int k = 0; k < vocab; ++k) z(k) = logit_scale * rng.normal();
      seq.teacher.col(t) = softmax_with_temperature(z, 1.0);
      for (int k = 0; k < vocab; ++k) seq.student_logits(k, t) = logit_scale * rng.normal();
    }
    batch.sequences.push_back(std::move(seq));
  }
  return batch;
}

}  // namespace pwopsd
