#include "pwopsd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"
#include "pwopsd/metrics.hpp"
#include "pwopsd/parallel.hpp"

namespace pwopsd {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("train: learning_rate must be positive");
  if (steps < 1 || batch_sequences < 1 || train_problems < 1 || eval_samples < 1)
    throw InvalidInput("train: steps, batch, problems and eval samples must be positive");
  objective.validate();
  if (const auto* pos = std::get_if<PositionWeight>(&weighting)) pos->schedule.validate();
}

bool StudentParams::operator==(const StudentParams& other) const {
  if (logits.size() != other.logits.size()) return false;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (logits[i].rows() != other.logits[i].rows() || logits[i].cols() != other.logits[i].cols() ||
        logits[i] != other.logits[i])
      return false;
  return true;
}

StudentParams initial_student(const std::vector<ProblemInstance>& problems) {
  StudentParams params;
  for (const auto& p : problems) params.logits.push_back(p.student.array().max(kProbabilityFloor).log().matrix());
  return params;
}

Eigen::VectorXd student_probs(const StudentParams& params, std::size_t problem, int state) {
  return softmax_with_temperature(params.logits[problem].col(state), 1.0);
}

namespace {

StudentPolicy policy_for(const StudentParams& params, std::size_t problem) {
  return [&params, problem](int state) { return student_probs(params, problem, state); };
}

}  // namespace

TrainStep train_step(const StudentParams& params, const std::vector<ProblemInstance>& problems,
                     const TrainConfig& cfg, int step) {
  cfg.validate();
  if (problems.empty()) throw InvalidInput("train_step: no problems");
  TrainStep out;
  out.params = params;
  std::vector<std::pair<std::size_t, std::vector<int>>> visits;
  for (int b = 0; b < cfg.batch_sequences; ++b) {
    const auto which = static_cast<std::size_t>((static_cast<std::size_t>(step) * cfg.batch_sequences + b) %
                                                problems.size());
    const auto& problem = problems[which];
    const auto trace = student_rollout(
        problem, DecodeMode::Sample(1.0, 1.0),
        derive_seed(cfg.seed, {tag::kTrain, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b)}),
        policy_for(params, which));
    if (trace.length() == 0) continue;
    SequenceRollout seq;
    seq.teacher.resize(problem.vocab(), trace.length());
    seq.student_logits.resize(problem.vocab(), trace.length());
    for (int t = 0; t < trace.length(); ++t) {
      const int s = trace.states[static_cast<std::size_t>(t)];
      seq.teacher.col(t) = temper(problem.teacher.col(s), cfg.objective.distill_temperature);
      seq.student_logits.col(t) = params.logits[which].col(s);
    }
    out.batch.sequences.push_back(std::move(seq));
    visits.emplace_back(which, trace.states);
  }
  if (out.batch.sequences.empty()) throw DegenerateInput("train_step: every rollout was empty");

  out.loss = distillation_loss(out.batch, cfg.objective, cfg.weighting, cfg.reduction);
  out.gradient = loss_gradient_wrt_student_logits(out.batch, cfg.objective, cfg.weighting, cfg.reduction);
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const auto& [which, states] = visits[i];
    for (std::size_t t = 0; t < states.size(); ++t)
      out.params.logits[which].col(states[t]) -= cfg.learning_rate * out.gradient[i].col(static_cast<Eigen::Index>(t));
  }
  return out;
}

EvalSummary evaluate_student(const StudentParams& params, const std::vector<ProblemInstance>& problems, int samples,
                             std::uint64_t seed) {
  EvalSummary s;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    std::vector<ExtractedAnswer> answers;
    for (int n = 0; n < samples; ++n) {
      const auto trace =
          student_rollout(problems[i], DecodeMode::Sample(1.0, 0.95),
                          derive_seed(seed, {tag::kEval, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(n)}),
                          policy_for(params, i));
      answers.emplace_back(trace.answer);
    }
    const auto m = problem_metrics(grade_and_cluster(answers, problems[i].gold_answer()));
    s.avg += m.avg_at_n;
    s.pass += m.pass_at_n;
    s.maj += m.maj_at_n;
  }
  const auto n = static_cast<double>(problems.size());
  s.avg /= n;
  s.pass /= n;
  s.maj /= n;
  return s;
}

std::vector<Eigen::VectorXd> token_gradient_norms(const std::vector<Eigen::MatrixXd>& gradient) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& g : gradient) out.push_back(g.colwise().norm().transpose());
  return out;
}

TrainReport run_training(const TrainConfig& cfg, const WorldConfig& world) {
  cfg.validate();
  world.validate();
  std::vector<ProblemInstance> problems;
  for (int i = 0; i < cfg.train_problems; ++i) problems.push_back(generate_problem(world, i));

  TrainReport report;
  const std::uint64_t eval_seed = derive_seed(cfg.seed, {tag::kEval});
  StudentParams params = initial_student(problems);
  report.initial_eval = evaluate_student(params, problems, cfg.eval_samples, eval_seed);

  std::vector<double> profile_sum(kProfileBins, 0.0);
  std::vector<int> profile_n(kProfileBins, 0);
  for (int step = 0; step < cfg.steps; ++step) {
    auto result = train_step(params, problems, cfg, step);
    report.loss.push_back(result.loss);
    const auto norms = token_gradient_norms(result.gradient);
    for (const auto& n : norms) {
      for (Eigen::Index t = 0; t < n.size(); ++t) {
        const double r = position_fraction(static_cast<int>(t + 1), static_cast<int>(n.size()));
        const auto b = std::min<std::size_t>(kProfileBins - 1, static_cast<std::size_t>(r * kProfileBins));
        profile_sum[b] += n(t);
        ++profile_n[b];
      }
    }
    if (step == 0) {
      // Spot-check the analytic gradient on one sampled token.
      Rng pick(derive_seed(cfg.seed, {tag::kTrain, 0xC4ECULL}));
      const auto& seq = result.batch.sequences[pick.below(result.batch.sequences.size())];
      const auto t = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(seq.length())));
      RolloutBatch one;
      one.sequences.push_back({seq.teacher.col(t), seq.student_logits.col(t)});
      report.gradcheck_relative_error =
          finite_difference_check(one, cfg.objective, cfg.weighting, cfg.reduction, 1e-5).max_relative_error;
    }
    params = std::move(result.params);
  }
  for (int b = 0; b < kProfileBins; ++b)
    report.gradient_profile.push_back(profile_n[b] > 0 ? profile_sum[b] / profile_n[b] : 0.0);
  report.final_eval = evaluate_student(params, problems, cfg.eval_samples, eval_seed);
  return report;
}

std::string weighting_name(const Weighting& weighting) {
  if (std::holds_alternative<UniformWeight>(weighting)) return "uniform";
  if (const auto* gate = std::get_if<EntropyGate>(&weighting)) {
    std::ostringstream os;
    os << "entropy_gate(" << gate->threshold << ")";
    return os.str();
  }
  const auto& s = std::get<PositionWeight>(weighting).schedule;
  for (auto name : kPresetNames)
    if (preset(name) == s) return "position:" + std::string(name);
  std::ostringstream os;
  os << "position(" << s.w_min << "," << s.tau << "," << s.scale << ")";
  return os.str();
}

std::string reduction_name(Reduction reduction) {
  return reduction == Reduction::GlobalTokenMean ? "global_token_mean" : "per_sequence_mean";
}

std::vector<SweepCell> factorial_and_sweep(const WorldConfig& world, const TrainConfig& base, int seeds,
                                           int threads) {
  if (seeds < 1) throw InvalidInput("sweep: seeds must be positive");
  std::vector<SweepCell> cells;
  const Weighting moderate = PositionWeight{preset("Moderate")};
  for (const auto& w : {Weighting{UniformWeight{}}, moderate})
    for (auto r : {Reduction::GlobalTokenMean, Reduction::PerSequenceMean})
      cells.push_back({"factorial", weighting_name(w) + "/" + reduction_name(r), w, r, {}});
  for (auto name : kPresetNames) {
    const Weighting w = PositionWeight{preset(name)};
    cells.push_back({"sweep", std::string(name), w, Reduction::PerSequenceMean, {}});
  }

  const std::size_t runs = cells.size() * static_cast<std::size_t>(seeds);
  std::vector<TrainReport> reports(runs);
  parallel_for(runs, threads, [&](std::size_t k) {
    const auto& cell = cells[k / static_cast<std::size_t>(seeds)];
    TrainConfig cfg = base;
    cfg.weighting = cell.weighting;
    cfg.reduction = cell.reduction;
    cfg.seed = base.seed + k % static_cast<std::size_t>(seeds);
    reports[k] = run_training(cfg, world);
  });
  for (std::size_t k = 0; k < runs; ++k) cells[k / static_cast<std::size_t>(seeds)].runs.push_back(reports[k]);
  return cells;
}

double tail_mean(const std::vector<double>& trace) {
  if (trace.empty()) throw InvalidInput("tail_mean: empty trace");
  const std::size_t window = std::max<std::size_t>(1, trace.size() / 10);
  double s = 0.0;
  for (std::size_t i = trace.size() - window; i < trace.size(); ++i) s += trace[i];
  return s / static_cast<double>(window);
}

bool tail_non_increasing(const std::vector<double>& trace, double band) {
  if (trace.empty()) return true;
  for (double v : trace)
    if (!std::isfinite(v)) return false;
  const std::size_t window = std::max<std::size_t>(1, trace.size() / 10);
  if (trace.size() < 2 * window) return true;
  double last = 0.0, before = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    last += trace[trace.size() - 1 - i];
    before += trace[trace.size() - 1 - window - i];
  }
  return last / static_cast<double>(window) <= before / static_cast<double>(window) + band * std::abs(trace.front());
}

}  // namespace pwopsd
