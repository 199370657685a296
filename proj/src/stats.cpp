#include "pwopsd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "pwopsd/error.hpp"
#include "pwopsd/parallel.hpp"
#include "pwopsd/rng.hpp"

namespace pwopsd {

void BootstrapConfig::validate() const {
  if (resamples < 1) throw InvalidInput("bootstrap: resamples must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("bootstrap: confidence must lie in (0, 1)");
}

ProblemClusters cluster_by_problem(std::span<const ScoredCandidate> items) {
  ProblemClusters c;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto [it, fresh] = slot.try_emplace(items[i].problem_id, c.ids.size());
    if (fresh) {
      c.ids.push_back(items[i].problem_id);
      c.members.emplace_back();
    }
    c.members[it->second].push_back(i);
  }
  return c;
}

std::vector<ScoredCandidate> residualize_within_problem(std::span<const ScoredCandidate> items) {
  const auto clusters = cluster_by_problem(items);
  std::vector<ScoredCandidate> out(items.begin(), items.end());
  for (const auto& members : clusters.members) {
    double sum = 0.0;
    for (auto i : members) sum += items[i].score;
    const double centre = sum / static_cast<double>(members.size());
    for (auto i : members) out[i].score = items[i].score - centre;
  }
  return out;
}

UStatistic mann_whitney_u(std::span<const ScoredCandidate> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return items[a].score < items[b].score; });
  UStatistic s;
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && items[order[j]].score == items[order[i]].score) ++j;
    // One-based ranks i+1..j share the mid-rank (i + 1 + j)/2.
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (items[order[k]].label) {
        positive_rank_sum += mid_rank;
        ++s.n_pos;
      } else {
        ++s.n_neg;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(s.n_pos);
  s.u = positive_rank_sum - 0.5 * np * (np + 1.0);
  return s;
}

double auroc(std::span<const ScoredCandidate> items) {
  const auto s = mann_whitney_u(items);
  if (s.n_pos == 0 || s.n_neg == 0) throw DegenerateInput("auroc: both classes must be present");
  return s.auroc();
}

double auprc(std::span<const ScoredCandidate> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return items[a].score > items[b].score; });
  const auto n_pos = std::count_if(items.begin(), items.end(), [](const ScoredCandidate& c) { return c.label; });
  if (n_pos == 0) throw DegenerateInput("auprc: no positive labels");
  double area = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, block_tp = 0;
    while (j < order.size() && items[order[j]].score == items[order[i]].score) {
      if (items[order[j]].label) ++block_tp;
      ++j;
    }
    tp += block_tp;
    seen += j - i;
    if (block_tp > 0)
      area += (static_cast<double>(tp) / static_cast<double>(seen)) *
              (static_cast<double>(block_tp) / static_cast<double>(n_pos));
    i = j;
  }
  return area;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DegenerateInput("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<ScoredCandidate> assemble_resample(std::span<const ScoredCandidate> items, const ProblemClusters& clusters,
                                               std::span<const std::size_t> draw) {
  std::vector<ScoredCandidate> sample;
  for (auto c : draw)
    for (auto i : clusters.members[c]) sample.push_back(items[i]);
  return residualize_within_problem(sample);
}

BootstrapResult cluster_bootstrap_auroc(std::span<const ScoredCandidate> items, const BootstrapConfig& cfg) {
  cfg.validate();
  const auto clusters = cluster_by_problem(items);
  if (clusters.ids.size() < 2) throw DegenerateInput("cluster bootstrap needs at least two problems");
  const auto residual = residualize_within_problem(items);

  BootstrapResult result;
  result.point = auroc(residual);

  const std::size_t n_problems = clusters.ids.size();
  std::vector<double> stats(static_cast<std::size_t>(cfg.resamples), std::nan(""));
  parallel_for(stats.size(), cfg.threads, [&](std::size_t r) {
    Rng rng(derive_seed(cfg.seed, {tag::kBootstrap, r}));
    std::vector<std::size_t> draw(n_problems);
    for (auto& d : draw) d = static_cast<std::size_t>(rng.below(n_problems));
    const auto sample = assemble_resample(items, clusters, draw);
    const auto u = mann_whitney_u(sample);
    if (u.n_pos > 0 && u.n_neg > 0) stats[r] = u.auroc();
  });

  std::vector<double> ok;
  for (double s : stats) {
    if (std::isnan(s))
      ++result.n_degenerate;
    else
      ok.push_back(s);
  }
  if (ok.empty()) throw DegenerateInput("every bootstrap resample contained a single class");
  std::sort(ok.begin(), ok.end());
  const double alpha = 1.0 - cfg.confidence;
  result.ci_low = quantile_sorted(ok, alpha / 2.0);
  result.ci_high = quantile_sorted(ok, 1.0 - alpha / 2.0);
  result.n_resamples = static_cast<int>(ok.size());
  return result;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace pwopsd
