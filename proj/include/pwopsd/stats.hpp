#pragma once

// Within-problem residualization, mid-rank AUROC, AUPRC and the
// multiplicity-preserving cluster bootstrap over problems.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pwopsd {

struct ScoredCandidate {
  std::string problem_id;
  double score = 0.0;
  bool label = false;  // true = real-uncertain
};

struct BootstrapConfig {
  int resamples = 2000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Subtracts each problem's mean score; order and labels are preserved.
std::vector<ScoredCandidate> residualize_within_problem(std::span<const ScoredCandidate> items);

/// Mann-Whitney U in pair units: Σ over (pos, neg) pairs of 1 / ½ / 0.
/// Computed from mid-ranks, so it is a multiple of ½ held exactly.
struct UStatistic {
  double u = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  double auroc() const { return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg)); }
};

UStatistic mann_whitney_u(std::span<const ScoredCandidate> items);

/// Throws DegenerateInput unless both classes are present.
double auroc(std::span<const ScoredCandidate> items);

/// Average precision over a descending-score sweep with tied scores handled
/// as one block. Throws DegenerateInput without positives.
double auprc(std::span<const ScoredCandidate> items);

/// Linear-interpolated quantile of sorted values (the numpy default).
double quantile_sorted(std::span<const double> sorted, double q);

/// Problems in first-appearance order and, per problem, its item indices.
struct ProblemClusters {
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> members;
};

ProblemClusters cluster_by_problem(std::span<const ScoredCandidate> items);

/// Concatenates the members of each drawn cluster (repeats kept) and
/// residualizes within problem.
std::vector<ScoredCandidate> assemble_resample(std::span<const ScoredCandidate> items, const ProblemClusters& clusters,
                                               std::span<const std::size_t> draw);

struct BootstrapResult {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_degenerate = 0;
  int n_resamples = 0;
};

/// Point = AUROC of residualized scores. Each resample draws |P| problems with
/// replacement (stream derive_seed(seed, bootstrap, r)), re-residualizes and
/// recomputes AUROC; single-class resamples are skipped and counted.
BootstrapResult cluster_bootstrap_auroc(std::span<const ScoredCandidate> items, const BootstrapConfig& cfg);

/// Sample standard deviation (divisor n - 1); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);
double mean(std::span<const double> values);

}  // namespace pwopsd
