#include <doctest.h>

#include <cmath>

#include "pwopsd/error.hpp"
#include "pwopsd/rng.hpp"
#include "pwopsd/stats.hpp"

using namespace pwopsd;

namespace {

std::vector<ScoredCandidate> one_problem(const std::vector<double>& scores, const std::vector<bool>& labels) {
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({"p", scores[i], labels[i]});
  return out;
}

double brute_force_auroc(const std::vector<ScoredCandidate>& items) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& a : items)
    for (const auto& b : items)
      if (a.label && !b.label) {
        pairs += 1.0;
        wins += a.score > b.score ? 1.0 : (a.score == b.score ? 0.5 : 0.0);
      }
  return wins / pairs;
}

}  // namespace

TEST_CASE("residualization") {
  const auto r = residualize_within_problem(one_problem({1, 2, 3}, {false, false, true}));
  CHECK(r[0].score == -1.0);
  CHECK(r[1].score == 0.0);
  CHECK(r[2].score == 1.0);
  const std::vector<ScoredCandidate> two = {{"a", 10, true}, {"b", 0, false}, {"a", 12, false}, {"b", 4, true}};
  const auto s = residualize_within_problem(two);
  CHECK(s[0].score == -1.0);
  CHECK(s[2].score == 1.0);
  CHECK(s[1].score == -2.0);
  CHECK(s[3].score == 2.0);
  CHECK(s[3].problem_id == "b");
  CHECK(residualize_within_problem(std::vector<ScoredCandidate>{{"x", 7, true}})[0].score == 0.0);
}

TEST_CASE("AUROC fixtures") {
  CHECK(auroc(one_problem({1, 2, 3, 4}, {false, false, true, true})) == 1.0);
  CHECK(auroc(one_problem({5, 5, 5, 5}, {false, true, false, true})) == 0.5);
  CHECK(auroc(one_problem({3, 1, 2, 4}, {false, true, false, true})) == 0.5);
  CHECK_THROWS_AS(auroc(one_problem({1, 2}, {true, true})), DegenerateInput);
}

TEST_CASE("AUROC equals pairwise brute force with ties") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(199));
    std::vector<ScoredCandidate> items;
    for (int i = 0; i < n; ++i)
      items.push_back({"p", static_cast<double>(rng.below(6)), rng.bernoulli(0.4)});
    items[0].label = true;
    items[1].label = false;
    const auto u = mann_whitney_u(items);
    CHECK(u.auroc() == brute_force_auroc(items));
    auto flipped = items;
    for (auto& it : flipped) it.label = !it.label;
    const auto v = mann_whitney_u(flipped);
    CHECK(u.u + v.u == static_cast<double>(u.n_pos * u.n_neg));
  }
}

TEST_CASE("AUPRC fixtures") {
  CHECK(auprc(one_problem({1, 2, 3, 4}, {false, false, true, true})) == 1.0);
  CHECK(auprc(one_problem({4, 3, 2, 1}, {false, false, false, true})) == doctest::Approx(0.25));
  CHECK(auprc(one_problem({1, 1, 1, 1}, {true, false, false, false})) == doctest::Approx(0.25));
  CHECK_THROWS_AS(auprc(one_problem({1, 2}, {false, false})), DegenerateInput);
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("cluster bootstrap on perfect separation") {
  std::vector<ScoredCandidate> items;
  for (int p = 0; p < 10; ++p) {
    items.push_back({"p" + std::to_string(p), 1.0 + p, true});
    items.push_back({"p" + std::to_string(p), 0.0 + p, false});
  }
  const auto r = cluster_bootstrap_auroc(items, {500, 0.95, 3, 1});
  CHECK(r.point == 1.0);
  CHECK(r.ci_low == 1.0);
  CHECK(r.ci_high == 1.0);
}

TEST_CASE("cluster bootstrap is deterministic and thread independent") {
  Rng rng(5);
  std::vector<ScoredCandidate> items;
  for (int p = 0; p < 30; ++p)
    for (int k = 0; k < 4; ++k) items.push_back({"p" + std::to_string(p), rng.normal(), rng.bernoulli(0.3)});
  const auto a = cluster_bootstrap_auroc(items, {400, 0.95, 11, 1});
  const auto b = cluster_bootstrap_auroc(items, {400, 0.95, 11, 1});
  const auto c = cluster_bootstrap_auroc(items, {400, 0.95, 11, 6});
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
  CHECK(a.ci_low == c.ci_low);
  CHECK(a.ci_high == c.ci_high);
  CHECK(a.n_degenerate == c.n_degenerate);
  CHECK(a.ci_low <= a.point);
  CHECK(a.point <= a.ci_high);
}

TEST_CASE("resampling a problem twice equals duplicating it") {
  const std::vector<ScoredCandidate> items = {
      {"a", 0.3, true}, {"a", 0.1, false}, {"b", 0.9, false}, {"b", 0.2, true}, {"b", 0.5, false}, {"c", 0.7, true}};
  const auto clusters = cluster_by_problem(items);
  CHECK(clusters.ids == std::vector<std::string>{"a", "b", "c"});
  const std::vector<std::size_t> draw = {1, 1, 0};
  const auto resampled = assemble_resample(items, clusters, draw);
  std::vector<ScoredCandidate> duplicated;
  for (std::size_t i : {2, 3, 4}) duplicated.push_back(items[i]);
  for (std::size_t i : {2, 3, 4}) duplicated.push_back(items[i]);
  for (std::size_t i : {0, 1}) duplicated.push_back(items[i]);
  const auto expected = residualize_within_problem(duplicated);
  REQUIRE(resampled.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(resampled[i].score == expected[i].score);
    CHECK(resampled[i].label == expected[i].label);
  }
  CHECK(auroc(resampled) == auroc(expected));
}

TEST_CASE("independent labels give a null AUROC") {
  Rng rng(derive_seed(0, {1}));
  std::vector<ScoredCandidate> items;
  for (int p = 0; p < 50; ++p)
    for (int k = 0; k < 6; ++k) items.push_back({"p" + std::to_string(p), rng.normal(), rng.bernoulli(0.3)});
  const auto r = cluster_bootstrap_auroc(items, {2000, 0.95, 0, 2});
  CHECK(std::abs(r.point - 0.5) <= 0.1);
  CHECK(r.ci_low <= 0.5);
  CHECK(r.ci_high >= 0.5);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(sample_stddev(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(sample_stddev(std::vector<double>{3.0}) == 0.0);
}
