#include "pwopsd/viability.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"

namespace pwopsd {

void FilterConfig::validate() const {
  if (!(p2_min > 0.0) || !(ratio_min > 0.0 && ratio_min <= 1.0) || spacing < 1 || max_candidates_per_problem < 1 ||
      top_m < 1 || top_children < 1)
    throw InvalidInput("filter config: all fields must be positive and ratio_min <= 1");
}

void LabelThresholds::validate() const {
  if (!(v_low >= 0.0 && v_low < v_high && v_high <= 1.0))
    throw InvalidInput("label thresholds: need 0 <= v_low < v_high <= 1");
  if (min_high_children < 1) throw InvalidInput("label thresholds: min_high_children must be positive");
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::RealUncertain:
      return "real_uncertain";
    case Label::Diversity:
      return "diversity";
    case Label::Gray:
      return "gray";
  }
  return "gray";
}

Label label_from_string(std::string_view name) {
  if (name == "real_uncertain") return Label::RealUncertain;
  if (name == "diversity") return Label::Diversity;
  if (name == "gray") return Label::Gray;
  throw InvalidInput("unknown label: " + std::string(name));
}

namespace {

// Valid vocabulary indices sorted by descending probability, ties to the
// lower index.
std::vector<int> ranked_valid(const Eigen::VectorXd& p, const std::vector<bool>& valid_mask) {
  std::vector<int> idx;
  for (int j = 0; j < static_cast<int>(p.size()); ++j)
    if (valid_mask[static_cast<std::size_t>(j)]) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p(a) > p(b); });
  return idx;
}

}  // namespace

std::vector<CandidateRecord> select_candidates(const Spine& spine, const Eigen::MatrixXd& teacher,
                                               const std::vector<bool>& valid_mask,
                                               std::optional<int> answer_position, const FilterConfig& cfg) {
  cfg.validate();
  const int length = spine.length();
  if (teacher.cols() != length) throw InvalidInput("select_candidates: one teacher column per spine token required");
  if (valid_mask.size() != static_cast<std::size_t>(teacher.rows()))
    throw InvalidInput("select_candidates: mask length does not match vocabulary");

  struct Proposal {
    int pos;
    double h;
    std::vector<Child> children;
  };
  std::vector<Proposal> pool;
  const int end = answer_position ? std::min(*answer_position, length) : length;
  for (int pos = 0; pos < end; ++pos) {
    const Eigen::VectorXd p = teacher.col(pos);
    const auto ranked = ranked_valid(p, valid_mask);
    if (ranked.size() < 2) continue;
    const double p1 = p(ranked[0]);
    const double p2 = p(ranked[1]);
    if (!(p2 >= cfg.p2_min && p1 > 0.0 && p2 / p1 >= cfg.ratio_min)) continue;
    Proposal prop{pos, truncated_entropy(p, valid_mask, cfg.top_m), {}};
    for (std::size_t c = 0; c < ranked.size() && c < static_cast<std::size_t>(cfg.top_children); ++c)
      if (p(ranked[c]) > 0.0) prop.children.push_back({ranked[c], p(ranked[c])});
    if (!prop.children.empty()) pool.push_back(std::move(prop));
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Proposal& a, const Proposal& b) {
    return a.h > b.h || (a.h == b.h && a.pos < b.pos);
  });

  std::vector<CandidateRecord> out;
  for (auto& prop : pool) {
    if (static_cast<int>(out.size()) >= cfg.max_candidates_per_problem) break;
    const bool crowded = std::any_of(out.begin(), out.end(), [&](const CandidateRecord& c) {
      return std::abs(c.spine_pos - prop.pos) < cfg.spacing;
    });
    if (crowded) continue;
    CandidateRecord rec;
    rec.problem_id = spine.problem_id;
    rec.spine_pos = prop.pos;
    rec.spine_length = length;
    rec.h_trunc = prop.h;
    rec.children = std::move(prop.children);
    out.push_back(std::move(rec));
  }
  return out;
}

double child_viability(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) throw InvalidInput("child_viability: no continuations");
  const auto hits = std::count(outcomes.begin(), outcomes.end(), true);
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

Label label_candidate(const std::vector<double>& child_viabilities, const LabelThresholds& th) {
  if (child_viabilities.empty()) throw InvalidInput("label_candidate: no children");
  const auto high = std::count_if(child_viabilities.begin(), child_viabilities.end(),
                                  [&](double v) { return v >= th.v_high; });
  if (high >= th.min_high_children) return Label::Diversity;
  const bool all_low =
      std::all_of(child_viabilities.begin(), child_viabilities.end(), [&](double v) { return v < th.v_low; });
  const double mean = std::accumulate(child_viabilities.begin(), child_viabilities.end(), 0.0) /
                      static_cast<double>(child_viabilities.size());
  if (all_low && mean < th.v_low) return Label::RealUncertain;
  return Label::Gray;
}

PositionScores position_scores(int spine_pos, int length) {
  if (length < 1 || spine_pos < 0 || spine_pos >= length)
    throw InvalidInput("position_scores: need 0 <= spine_pos < L");
  const double r = (static_cast<double>(spine_pos) + 0.5) / static_cast<double>(length);
  return {r, 1.0 - r};
}

}  // namespace pwopsd
