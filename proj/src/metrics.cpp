#include "pwopsd/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "pwopsd/error.hpp"

namespace pwopsd {

ExtractedAnswer extract_final_answer(std::string_view text, std::string_view open_marker) {
  if (open_marker.empty() || open_marker.back() != '{')
    throw InvalidInput("answer marker must end with an opening brace");
  const auto at = text.rfind(open_marker);
  if (at == std::string_view::npos) return std::nullopt;
  const std::size_t begin = at + open_marker.size();
  int depth = 1;
  for (std::size_t i = begin; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(begin, i - begin));
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  for (unsigned char c : s)
    if (!std::isspace(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

bool normalized_equal(std::string_view a, std::string_view b) { return normalize_answer(a) == normalize_answer(b); }

std::vector<SampleGrade> grade_and_cluster(const std::vector<ExtractedAnswer>& samples, std::string_view gold,
                                           const EquivalencePredicate& eq) {
  if (samples.empty()) throw InvalidInput("grade_and_cluster: no samples");
  std::vector<SampleGrade> grades(samples.size());
  int clusters = 0;
  int invalid_cluster = -1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& g = grades[i];
    if (!samples[i]) {
      if (invalid_cluster < 0) invalid_cluster = clusters++;
      g = {invalid_cluster, true, std::string(kInvalidKey), false};
      continue;
    }
    g.correct = eq(*samples[i], gold);
    g.cluster = -1;
    for (std::size_t j = 0; j < i; ++j) {
      if (samples[j] && eq(*samples[i], *samples[j])) {
        g.cluster = grades[j].cluster;
        g.key = grades[j].key;
        break;
      }
    }
    if (g.cluster < 0) {
      g.cluster = clusters++;
      g.key = *samples[i];
    }
  }
  return grades;
}

ProblemMetrics problem_metrics(const std::vector<SampleGrade>& grades) {
  if (grades.empty()) throw InvalidInput("problem_metrics: no samples");
  ProblemMetrics m;
  m.n = static_cast<int>(grades.size());
  int correct = 0;
  int n_clusters = 0;
  for (const auto& g : grades) {
    correct += g.correct ? 1 : 0;
    n_clusters = std::max(n_clusters, g.cluster + 1);
  }
  m.avg_at_n = static_cast<double>(correct) / static_cast<double>(m.n);
  m.pass_at_n = correct > 0 ? 1 : 0;

  std::vector<int> count(static_cast<std::size_t>(n_clusters), 0);
  std::vector<int> first(static_cast<std::size_t>(n_clusters), -1);
  for (int i = 0; i < m.n; ++i) {
    const auto c = static_cast<std::size_t>(grades[static_cast<std::size_t>(i)].cluster);
    ++count[c];
    if (first[c] < 0) first[c] = i;
  }
  std::size_t winner = 0;
  for (std::size_t c = 0; c < count.size(); ++c) {
    if (first[c] < 0) continue;
    if (first[winner] < 0 || count[c] > count[winner] || (count[c] == count[winner] && first[c] < first[winner]))
      winner = c;
  }
  const auto& rep = grades[static_cast<std::size_t>(first[winner])];
  m.maj_at_n = (!rep.invalid && rep.correct) ? 1 : 0;
  return m;
}

}  // namespace pwopsd
