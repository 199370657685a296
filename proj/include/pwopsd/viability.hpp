#pragma once

// Candidate selection along a spine, forced-child viability, three-way
// labeling and the normalized position scores.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace pwopsd {

struct Spine {
  std::string problem_id;
  std::vector<int> tokens;
  bool correct = false;
  std::string gold_answer;

  int length() const { return static_cast<int>(tokens.size()); }
};

struct FilterConfig {
  double p2_min = 0.02;
  double ratio_min = 0.10;
  int spacing = 64;
  int max_candidates_per_problem = 5;
  int top_m = 16;
  int top_children = 3;

  void validate() const;
};

struct LabelThresholds {
  double v_high = 0.75;
  double v_low = 0.40;
  int min_high_children = 2;

  void validate() const;
};

enum class Label { RealUncertain, Diversity, Gray };

std::string_view to_string(Label label);
Label label_from_string(std::string_view name);

struct Child {
  int token = 0;
  double prob = 0.0;
};

struct CandidateRecord {
  std::string problem_id;
  int spine_pos = 0;
  int spine_length = 0;
  double h_trunc = 0.0;
  std::vector<Child> children;
  std::vector<double> viabilities;
  std::optional<Label> label;
  std::map<std::string, double> scores;
  // Ground-truth child viability; only the synthetic world fills this.
  std::vector<bool> truth;
};

/// Candidate selection. `teacher` is V × L (one column per spine
/// position); `valid_mask` has one entry per vocabulary index. Positions at or
/// after `answer_position` are never proposed.
std::vector<CandidateRecord> select_candidates(const Spine& spine, const Eigen::MatrixXd& teacher,
                                               const std::vector<bool>& valid_mask,
                                               std::optional<int> answer_position, const FilterConfig& cfg);

/// Fraction of continuations that reached the gold answer.
double child_viability(const std::vector<bool>& outcomes);

Label label_candidate(const std::vector<double>& child_viabilities, const LabelThresholds& th);

struct PositionScores {
  double normalized = 0.0;  // r̃ = (spine_pos + 0.5)/L
  double oriented = 0.0;    // 1 - r̃
};

PositionScores position_scores(int spine_pos, int length);

}  // namespace pwopsd
