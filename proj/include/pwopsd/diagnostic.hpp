#pragma once

// End-to-end branch-viability diagnostic on the synthetic world: spine
// rollout, teacher scoring, candidate selection, ensemble scores, forced
// continuations, labeling, and residualized AUROC with a cluster bootstrap
// for each score.

#include <string>
#include <vector>

#include "pwopsd/stats.hpp"
#include "pwopsd/viability.hpp"
#include "pwopsd/world.hpp"

namespace pwopsd {

/// Score names, each oriented so that larger means "more likely real-uncertain".
inline const std::vector<std::string> kDiagnosticScores = {
    "oriented_position", "truncated_entropy", "mean_entropy", "mutual_information", "neg_log_kappa"};

struct DiagnosticConfig {
  WorldConfig world;
  int problems = 60;
  // Spacing is scaled to the world's 48-token episodes.
  FilterConfig filter{0.02, 0.10, 4, 5, 16, 3};
  LabelThresholds thresholds;
  BootstrapConfig bootstrap;
  int continuations = 6;
  int ensemble_size = 5;
  double perturbation = 0.5;
  double kappa_epsilon = 1e-6;
  int threads = 1;

  void validate() const;
};

struct ScoreReport {
  std::string score_name;
  double point_auroc = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double auprc = 0.0;
  int n_pos = 0;
  int n_neg = 0;
  int n_problems = 0;
  int n_degenerate = 0;
  std::uint64_t seed = 0;
};

struct PositionBin {
  double lo = 0.0;
  double hi = 0.0;
  int candidates = 0;
  double failure_rate = 0.0;       // mean (1 - viability) over children
  double truth_viable_rate = 0.0;  // mean ground-truth child viability
};

struct DiagnosticReport {
  std::vector<Spine> spines;                // one per problem, correct or not
  std::vector<CandidateRecord> candidates;  // every labeled candidate, gray included
  std::vector<ScoreReport> scores;
  std::vector<PositionBin> bins;
  int problems = 0;
  int correct_spines = 0;
  int real_uncertain = 0;
  int diversity = 0;
  int gray = 0;
  int labeled_problems = 0;  // problems contributing binary-labeled candidates
};

/// Gray candidates are dropped; each remaining candidate contributes
/// scores[name] with label = real-uncertain. Candidates must carry a label.
std::vector<ScoredCandidate> binary_scored(const std::vector<CandidateRecord>& candidates, const std::string& name);

/// Residualized AUROC, bootstrap CI and AUPRC for each named score.
std::vector<ScoreReport> score_report(const std::vector<CandidateRecord>& candidates,
                                      const std::vector<std::string>& names, const BootstrapConfig& bootstrap);

/// Failure-rate and ground-truth viability by normalized spine position.
std::vector<PositionBin> position_bins(const std::vector<CandidateRecord>& candidates, int bins = 10);

DiagnosticReport run_diagnostic(const DiagnosticConfig& cfg);

}  // namespace pwopsd
