#include "pwopsd/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"
#include "pwopsd/identities.hpp"

namespace pwopsd {

void WorldConfig::validate() const {
  if (vocab_size < 4) throw InvalidInput("world: vocab_size must be >= 4");
  if (depth < 4) throw InvalidInput("world: depth must be >= 4");
  if (branch_count < 2 || branch_count > vocab_size - 2)
    throw InvalidInput("world: branch_count must lie in [2, vocab_size - 2]");
  auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!fraction(early_dead_fraction) || !fraction(late_dead_fraction) || !fraction(branch_density) ||
      !fraction(hard_fraction))
    throw InvalidInput("world: fractions must lie in [0, 1]");
  if (!(ambiguity_mass > 0.0 && ambiguity_mass < 0.9)) throw InvalidInput("world: ambiguity_mass must lie in (0, 0.9)");
}

namespace {

// `mass` spread over `tokens` with a random (Dirichlet(1)) split.
void spread(Eigen::Ref<Eigen::VectorXd> out, const std::vector<int>& tokens, double mass, Rng& rng) {
  if (tokens.empty()) return;
  const Eigen::VectorXd share = random_simplex(rng, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) out(tokens[i]) += mass * share(static_cast<Eigen::Index>(i));
}

std::vector<int> all_except(int vocab, const std::vector<int>& excluded) {
  std::vector<int> out;
  for (int j = 0; j < vocab; ++j)
    if (std::find(excluded.begin(), excluded.end(), j) == excluded.end()) out.push_back(j);
  return out;
}

// Peaked column: `top` gets `mass`, the rest is spread randomly.
Eigen::VectorXd peaked(int vocab, int top, double mass, Rng& rng) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(vocab);
  p(top) = mass;
  spread(p, all_except(vocab, {top}), 1.0 - mass, rng);
  return p;
}

}  // namespace

ProblemInstance generate_problem(const WorldConfig& cfg, int index) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, {tag::kProblem, static_cast<std::uint64_t>(index)}));
  const int V = cfg.vocab_size;

  ProblemInstance p;
  p.index = index;
  p.id = "p" + std::to_string(index);
  const int shortest = std::max(std::min(4, cfg.depth), static_cast<int>(std::ceil(0.6 * cfg.depth)));
  p.length = shortest + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.depth - shortest + 1)));
  p.gold = static_cast<int>(rng.below(static_cast<std::uint64_t>(V)));
  p.hard = rng.bernoulli(cfg.hard_fraction);
  const int L = p.length;
  p.route.resize(static_cast<std::size_t>(L));
  p.alternatives.assign(static_cast<std::size_t>(L), {});
  p.alternative_viable.assign(static_cast<std::size_t>(L), {});
  p.teacher = Eigen::MatrixXd::Zero(V, 2 * L);
  p.student = Eigen::MatrixXd::Zero(V, 2 * L);

  for (int t = 0; t < L; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const int rs = ProblemInstance::route_state(t);
    const int ds = ProblemInstance::dead_state(t);
    const bool last = t == L - 1;
    p.route[ut] = last ? p.gold : static_cast<int>(rng.below(static_cast<std::uint64_t>(V)));
    const int route = p.route[ut];

    if (!last && rng.bernoulli(cfg.branch_density)) {
      std::vector<int> pool = all_except(V, {route});
      for (int a = 0; a < cfg.branch_count; ++a) {
        const auto pick = rng.below(pool.size());
        p.alternatives[ut].push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      const double r = (t + 0.5) / L;
      const double dead = r < kEarlyBoundary ? cfg.early_dead_fraction : cfg.late_dead_fraction;
      for (int a = 0; a < cfg.branch_count; ++a) p.alternative_viable[ut].push_back(!rng.bernoulli(dead));

      // Teacher: primary alternative, the rest of the ambiguity mass split
      // among the others, a small leak everywhere else.
      const double leak = 0.05;
      auto& alts = p.alternatives[ut];
      Eigen::VectorXd q = Eigen::VectorXd::Zero(V);
      q(alts.front()) = 1.0 - cfg.ambiguity_mass - leak;
      const Eigen::VectorXd split =
          0.5 * random_simplex(rng, cfg.branch_count - 1) +
          0.5 * Eigen::VectorXd::Constant(cfg.branch_count - 1, 1.0 / (cfg.branch_count - 1));
      for (int a = 1; a < cfg.branch_count; ++a) q(alts[static_cast<std::size_t>(a)]) = cfg.ambiguity_mass * split(a - 1);
      spread(q, all_except(V, alts), leak, rng);
      p.teacher.col(rs) = q;
      p.student.col(rs) = peaked(V, route, rng.uniform(0.965, 0.99), rng);
    } else if (!last) {
      p.teacher.col(rs) = peaked(V, route, 1.0 - rng.uniform(0.06, 0.16), rng);
      p.student.col(rs) = peaked(V, route, rng.uniform(0.93, 0.99), rng);
    } else {
      p.teacher.col(rs) = peaked(V, p.gold, 1.0 - rng.uniform(0.06, 0.16), rng);
      if (p.hard) {
        const auto others = all_except(V, {p.gold});
        const int wrong = others[rng.below(others.size())];
        Eigen::VectorXd s = Eigen::VectorXd::Zero(V);
        s(wrong) = 0.60;
        s(p.gold) = 0.25;
        spread(s, all_except(V, {wrong, p.gold}), 0.15, rng);
        p.student.col(rs) = s;
      } else {
        p.student.col(rs) = peaked(V, p.gold, rng.uniform(0.88, 0.99), rng);
      }
    }
    // Dead-end track: a confused teacher and an arbitrary confident student.
    p.teacher.col(ds) = random_simplex(rng, V);
    p.student.col(ds) = peaked(V, static_cast<int>(rng.below(static_cast<std::uint64_t>(V))), 0.9, rng);
  }
  return p;
}

int ProblemInstance::next_state(int state, int token) const {
  if (token < 0 || token >= vocab()) throw InvalidInput("token outside the vocabulary");
  if (state < 0 || state >= state_count()) throw InvalidInput("state outside the problem");
  const int t = layer_of(state);
  if (t == length - 1) return -1;
  if (is_dead(state)) return dead_state(t + 1);
  return viable_child(state, token) ? route_state(t + 1) : dead_state(t + 1);
}

bool ProblemInstance::viable_child(int state, int token) const {
  if (is_dead(state)) return false;
  const auto t = static_cast<std::size_t>(layer_of(state));
  const auto& alts = alternatives[t];
  const auto it = std::find(alts.begin(), alts.end(), token);
  if (it == alts.end()) return true;
  return alternative_viable[t][static_cast<std::size_t>(it - alts.begin())];
}

std::string ProblemInstance::answer(int final_state, int token) const {
  return (is_dead(final_state) ? "~" : "") + std::to_string(token);
}

int choose_token(const Eigen::VectorXd& probs, const DecodeMode& mode, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  if (mode.greedy) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(probs.size()); ++j)
      if (probs(j) > probs(best)) best = j;
    return best;
  }
  if (!(mode.top_p > 0.0 && mode.top_p <= 1.0)) throw InvalidInput("top_p must lie in (0, 1]");
  const Eigen::VectorXd p = temper(probs, mode.temperature);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p(a) > p(b); });
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < order.size()) {
    mass += p(order[keep++]);
    if (mass >= mode.top_p) break;
  }
  const double u = rng.uniform() * mass;
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += p(order[i]);
    if (u < acc) return order[i];
  }
  return order[keep - 1];
}

EpisodeTrace rollout_from(const ProblemInstance& problem, const EpisodeTrace& prefix, int start_state,
                          const DecodeMode& mode, Rng& rng, const StudentPolicy& policy) {
  std::vector<int> tokens = prefix.tokens;
  std::vector<int> states = prefix.states;
  int state = start_state;
  int final_state = states.empty() ? start_state : states.back();
  int final_token = tokens.empty() ? -1 : tokens.back();
  while (state >= 0) {
    const Eigen::VectorXd probs = policy ? policy(state) : Eigen::VectorXd(problem.student.col(state));
    const int token = choose_token(probs, mode, rng);
    tokens.push_back(token);
    states.push_back(state);
    final_state = state;
    final_token = token;
    state = problem.next_state(state, token);
  }
  EpisodeTrace trace;
  trace.tokens = std::move(tokens);
  trace.states = std::move(states);
  const auto L = static_cast<Eigen::Index>(trace.tokens.size());
  trace.teacher.resize(problem.vocab(), L);
  trace.student.resize(problem.vocab(), L);
  for (Eigen::Index t = 0; t < L; ++t) {
    const int s = trace.states[static_cast<std::size_t>(t)];
    trace.teacher.col(t) = problem.teacher.col(s);
    trace.student.col(t) = policy ? policy(s) : Eigen::VectorXd(problem.student.col(s));
  }
  trace.answer = problem.answer(final_state, final_token);
  trace.correct = trace.answer == problem.gold_answer();
  return trace;
}

EpisodeTrace student_rollout(const ProblemInstance& problem, const DecodeMode& mode, std::uint64_t seed,
                             const StudentPolicy& policy) {
  Rng rng(seed);
  return rollout_from(problem, EpisodeTrace{}, ProblemInstance::route_state(0), mode, rng, policy);
}

std::vector<bool> forced_continuation(const ProblemInstance& problem, const EpisodeTrace& spine, int pos,
                                      int forced_token, int k, std::uint64_t seed, const DecodeMode& mode) {
  if (pos < 0 || pos >= spine.length()) throw InvalidInput("forced_continuation: position outside the spine");
  if (forced_token < 0 || forced_token >= problem.vocab())
    throw InvalidInput("forced_continuation: forced token is not a legal child");
  if (k < 1) throw InvalidInput("forced_continuation: k must be positive");
  EpisodeTrace prefix;
  prefix.tokens.assign(spine.tokens.begin(), spine.tokens.begin() + pos);
  prefix.states.assign(spine.states.begin(), spine.states.begin() + pos);
  const int at = spine.states[static_cast<std::size_t>(pos)];
  prefix.tokens.push_back(forced_token);
  prefix.states.push_back(at);
  const int after = problem.next_state(at, forced_token);

  std::vector<bool> outcomes;
  outcomes.reserve(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    Rng rng(derive_seed(seed, {tag::kForced, static_cast<std::uint64_t>(a)}));
    if (after < 0) {
      outcomes.push_back(problem.answer(at, forced_token) == problem.gold_answer());
      continue;
    }
    outcomes.push_back(rollout_from(problem, prefix, after, mode, rng).correct);
  }
  return outcomes;
}

Eigen::MatrixXd perturbed_ensemble(const Eigen::VectorXd& teacher, int members, double magnitude, Rng& rng) {
  if (members < 2) throw InvalidInput("ensemble needs at least two members");
  if (!(magnitude >= 0.0)) throw InvalidInput("perturbation magnitude must be non-negative");
  Eigen::MatrixXd out(teacher.size(), members);
  for (int m = 0; m < members; ++m) {
    if (magnitude == 0.0) {
      out.col(m) = teacher;
      continue;
    }
    Eigen::VectorXd logits(teacher.size());
    for (Eigen::Index j = 0; j < teacher.size(); ++j)
      logits(j) = std::log(std::max(teacher(j), kProbabilityFloor)) + magnitude * rng.normal();
    out.col(m) = softmax_with_temperature(logits, 1.0);
  }
  return out;
}

}  // namespace pwopsd
