#include "pwopsd/diagnostic.hpp"

#include <algorithm>
#include <set>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"
#include "pwopsd/parallel.hpp"
#include "pwopsd/uncertainty.hpp"

namespace pwopsd {

void DiagnosticConfig::validate() const {
  world.validate();
  filter.validate();
  thresholds.validate();
  bootstrap.validate();
  if (problems < 1) throw InvalidInput("diagnostic: problems must be positive");
  if (continuations < 1) throw InvalidInput("diagnostic: continuations must be positive");
  if (ensemble_size < 2) throw InvalidInput("diagnostic: ensemble_size must be >= 2");
  if (!(perturbation >= 0.0)) throw InvalidInput("diagnostic: perturbation must be non-negative");
}

std::vector<ScoredCandidate> binary_scored(const std::vector<CandidateRecord>& candidates, const std::string& name) {
  std::vector<ScoredCandidate> out;
  for (const auto& c : candidates) {
    if (!c.label) throw InvalidInput("candidate " + c.problem_id + " has no label");
    if (*c.label == Label::Gray) continue;
    const auto it = c.scores.find(name);
    if (it == c.scores.end()) throw InvalidInput("candidate " + c.problem_id + " lacks score " + name);
    out.push_back({c.problem_id, it->second, *c.label == Label::RealUncertain});
  }
  return out;
}

std::vector<ScoreReport> score_report(const std::vector<CandidateRecord>& candidates,
                                      const std::vector<std::string>& names, const BootstrapConfig& bootstrap) {
  std::vector<ScoreReport> reports;
  for (const auto& name : names) {
    const auto items = binary_scored(candidates, name);
    ScoreReport r;
    r.score_name = name;
    r.seed = bootstrap.seed;
    const auto boot = cluster_bootstrap_auroc(items, bootstrap);
    r.point_auroc = boot.point;
    r.ci_low = boot.ci_low;
    r.ci_high = boot.ci_high;
    r.n_degenerate = boot.n_degenerate;
    r.auprc = auprc(residualize_within_problem(items));
    for (const auto& it : items) (it.label ? r.n_pos : r.n_neg)++;
    r.n_problems = static_cast<int>(cluster_by_problem(items).ids.size());
    reports.push_back(r);
  }
  return reports;
}

std::vector<PositionBin> position_bins(const std::vector<CandidateRecord>& candidates, int bins) {
  std::vector<PositionBin> out(static_cast<std::size_t>(bins));
  std::vector<double> truth_sum(out.size(), 0.0), fail_sum(out.size(), 0.0);
  std::vector<int> truth_n(out.size(), 0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].lo = static_cast<double>(b) / bins;
    out[b].hi = static_cast<double>(b + 1) / bins;
  }
  for (const auto& c : candidates) {
    const double r = position_scores(c.spine_pos, c.spine_length).normalized;
    const auto b = std::min(out.size() - 1, static_cast<std::size_t>(r * bins));
    ++out[b].candidates;
    double fail = 0.0;
    for (double v : c.viabilities) fail += 1.0 - v;
    if (!c.viabilities.empty()) fail_sum[b] += fail / static_cast<double>(c.viabilities.size());
    for (bool t : c.truth) {
      truth_sum[b] += t ? 1.0 : 0.0;
      ++truth_n[b];
    }
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    if (out[b].candidates > 0) out[b].failure_rate = fail_sum[b] / out[b].candidates;
    if (truth_n[b] > 0) out[b].truth_viable_rate = truth_sum[b] / truth_n[b];
  }
  return out;
}

namespace {

struct ProblemOutcome {
  Spine spine;
  bool correct_spine = false;
  std::vector<CandidateRecord> candidates;
};

ProblemOutcome diagnose_problem(const DiagnosticConfig& cfg, int index) {
  ProblemOutcome out;
  const auto problem = generate_problem(cfg.world, index);
  const auto idx = static_cast<std::uint64_t>(index);
  const auto spine = student_rollout(problem, DecodeMode::Greedy(), derive_seed(cfg.world.seed, {tag::kSpine, idx}));
  out.correct_spine = spine.correct;
  out.spine = Spine{problem.id, spine.tokens, spine.correct, problem.gold_answer()};
  if (!spine.correct) return out;

  const Spine& sp = out.spine;
  const std::vector<bool> valid(static_cast<std::size_t>(problem.vocab()), true);
  auto candidates = select_candidates(sp, spine.teacher, valid, spine.length() - 1, cfg.filter);

  for (auto& c : candidates) {
    const auto pos = static_cast<std::uint64_t>(c.spine_pos);
    const Eigen::VectorXd q = spine.teacher.col(c.spine_pos);
    Rng ens_rng(derive_seed(cfg.world.seed, {tag::kEnsemble, idx, pos}));
    const auto members = perturbed_ensemble(q, cfg.ensemble_size, cfg.perturbation, ens_rng);
    const auto u = score_ensemble(members, q, valid, cfg.filter.top_m, cfg.kappa_epsilon);

    const int state = spine.states[static_cast<std::size_t>(c.spine_pos)];
    for (std::size_t k = 0; k < c.children.size(); ++k) {
      const int child = c.children[k].token;
      const auto outcomes = forced_continuation(problem, spine, c.spine_pos, child, cfg.continuations,
                                                derive_seed(cfg.world.seed, {tag::kForced, idx, pos, k}));
      c.viabilities.push_back(child_viability(outcomes));
      c.truth.push_back(problem.viable_child(state, child));
    }
    c.label = label_candidate(c.viabilities, cfg.thresholds);
    c.scores["oriented_position"] = position_scores(c.spine_pos, c.spine_length).oriented;
    c.scores["truncated_entropy"] = u.truncated_entropy;
    c.scores["mean_entropy"] = u.mean_entropy;
    c.scores["mutual_information"] = u.mutual_information;
    c.scores["neg_log_kappa"] = -u.log_kappa;
  }
  out.candidates = std::move(candidates);
  return out;
}

}  // namespace

DiagnosticReport run_diagnostic(const DiagnosticConfig& cfg) {
  cfg.validate();
  std::vector<ProblemOutcome> outcomes(static_cast<std::size_t>(cfg.problems));
  parallel_for(outcomes.size(), cfg.threads,
               [&](std::size_t i) { outcomes[i] = diagnose_problem(cfg, static_cast<int>(i)); });

  DiagnosticReport report;
  report.problems = cfg.problems;
  std::set<std::string> labeled;
  for (auto& o : outcomes) {
    report.spines.push_back(std::move(o.spine));
    if (o.correct_spine) ++report.correct_spines;
    for (auto& c : o.candidates) {
      switch (*c.label) {
        case Label::RealUncertain:
          ++report.real_uncertain;
          labeled.insert(c.problem_id);
          break;
        case Label::Diversity:
          ++report.diversity;
          labeled.insert(c.problem_id);
          break;
        case Label::Gray:
          ++report.gray;
          break;
      }
      report.candidates.push_back(std::move(c));
    }
  }
  report.labeled_problems = static_cast<int>(labeled.size());
  if (report.labeled_problems < 2) throw DegenerateInput("diagnostic: fewer than two problems with binary labels");

  BootstrapConfig boot = cfg.bootstrap;
  boot.threads = cfg.threads;
  report.scores = score_report(report.candidates, kDiagnosticScores, boot);
  report.bins = position_bins(report.candidates);
  return report;
}

}  // namespace pwopsd
