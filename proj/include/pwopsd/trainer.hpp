#pragma once

// On-policy distillation of a tabular softmax student on the synthetic
// world. Each step samples fresh rollouts from the current student, scores
// visited states with the teacher at the distillation temperature, and takes
// one plain gradient-descent step on the visited-state logits.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pwopsd/objectives.hpp"
#include "pwopsd/world.hpp"

namespace pwopsd {

struct TrainConfig {
  double learning_rate = 1000.0;
  int steps = 100;
  int batch_sequences = 8;
  ObjectiveConfig objective{1.1, 0.05};
  Weighting weighting = PositionWeight{preset("Moderate")};
  Reduction reduction = Reduction::PerSequenceMean;
  std::uint64_t seed = 0;
  int train_problems = 8;
  int eval_samples = 12;

  void validate() const;
};

/// One V × (2L) logit table per problem, columns indexed by state id.
struct StudentParams {
  std::vector<Eigen::MatrixXd> logits;

  bool operator==(const StudentParams& other) const;
};

/// Logits ln p of the world's own student policy.
StudentParams initial_student(const std::vector<ProblemInstance>& problems);

Eigen::VectorXd student_probs(const StudentParams& params, std::size_t problem, int state);

struct TrainStep {
  StudentParams params;
  double loss = 0.0;
  RolloutBatch batch;
  std::vector<Eigen::MatrixXd> gradient;
};

/// Rollout b of step `step` uses problem (step·B + b) mod |problems| and the
/// stream derive_seed(seed, train, step, b).
TrainStep train_step(const StudentParams& params, const std::vector<ProblemInstance>& problems,
                     const TrainConfig& cfg, int step);

struct EvalSummary {
  double avg = 0.0;
  double pass = 0.0;
  double maj = 0.0;
};

/// N sampled answers per problem (T = 1, top-p 0.95) graded with the metrics
/// module; means over problems.
EvalSummary evaluate_student(const StudentParams& params, const std::vector<ProblemInstance>& problems, int samples,
                             std::uint64_t seed);

/// Per-token gradient norms, one vector per sequence.
std::vector<Eigen::VectorXd> token_gradient_norms(const std::vector<Eigen::MatrixXd>& gradient);

inline constexpr int kProfileBins = 10;

struct TrainReport {
  std::vector<double> loss;  // one entry per step
  EvalSummary initial_eval;
  EvalSummary final_eval;
  std::vector<double> gradient_profile;  // mean token-gradient norm per position-fraction bin
  double gradcheck_relative_error = 0.0;
};

TrainReport run_training(const TrainConfig& cfg, const WorldConfig& world);

struct SweepCell {
  std::string group;  // "factorial" or "sweep"
  std::string name;
  Weighting weighting;
  Reduction reduction = Reduction::PerSequenceMean;
  std::vector<TrainReport> runs;  // one per seed
};

/// The 2×2 {Uniform, Position(Moderate)} × {GlobalTokenMean, PerSequenceMean}
/// factorial followed by the four presets under PerSequenceMean, each run at
/// seeds base.seed, base.seed + 1, ...
std::vector<SweepCell> factorial_and_sweep(const WorldConfig& world, const TrainConfig& base, int seeds = 3,
                                           int threads = 1);

/// Mean of the last 10% of a loss trace (at least one step).
double tail_mean(const std::vector<double>& trace);

/// Stability band on a noisy loss trace: all values finite and the mean of the
/// last 10% of steps at most `band`·|trace.front()| above the mean of the 10%
/// before it.
bool tail_non_increasing(const std::vector<double>& trace, double band = 0.05);

std::string weighting_name(const Weighting& weighting);
std::string reduction_name(Reduction reduction);

}  // namespace pwopsd
