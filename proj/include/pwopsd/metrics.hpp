#pragma once

// Multi-sample evaluation: boxed-answer extraction, equivalence clustering,
// and per-problem Avg@N / Pass@N / Maj@N.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pwopsd {

/// nullopt stands for the INVALID key.
using ExtractedAnswer = std::optional<std::string>;

inline constexpr std::string_view kInvalidKey = "INVALID";

/// Brace-balanced content after the last `open_marker` (which must end in
/// '{'). No occurrence, or an unbalanced last occurrence, yields INVALID.
ExtractedAnswer extract_final_answer(std::string_view text, std::string_view open_marker = "\\boxed{");

/// Symmetric, reflexive decision on two answer strings.
using EquivalencePredicate = std::function<bool(std::string_view, std::string_view)>;

/// Lower-cases and drops all whitespace.
std::string normalize_answer(std::string_view s);
bool normalized_equal(std::string_view a, std::string_view b);

struct SampleGrade {
  int cluster = 0;       // cluster index in first-occurrence order
  bool invalid = false;  // member of the INVALID cluster
  std::string key;       // representative answer, or "INVALID"
  bool correct = false;
};

/// A parseable sample joins the cluster of the earliest earlier sample it is
/// equivalent to, otherwise opens a new one. INVALID samples share one cluster
/// and are never correct.
std::vector<SampleGrade> grade_and_cluster(const std::vector<ExtractedAnswer>& samples, std::string_view gold,
                                           const EquivalencePredicate& eq = normalized_equal);

struct ProblemMetrics {
  double avg_at_n = 0.0;
  int pass_at_n = 0;
  int maj_at_n = 0;
  int n = 0;
};

/// Plurality cluster by count, ties to the cluster whose first member comes
/// first; an INVALID winner scores 0.
ProblemMetrics problem_metrics(const std::vector<SampleGrade>& grades);

}  // namespace pwopsd
