#pragma once

// Seeded branch-structured world standing in for a language model.
//
// A problem of length L is a layered DAG with two states per layer: the
// route state R(t) and the dead-end state D(t). From R(t) every token leads
// to R(t+1) except the non-viable alternatives of a branch layer, which drop
// into D(t+1); D(t) only leads to D(t+1). The token emitted at layer L-1 is
// the answer; answers reached through the dead-end track are prefixed with
// '~' and therefore never equal the gold answer.
//
// The teacher (answer-conditioned) concentrates on the route token except at
// branch layers, where it spreads `ambiguity_mass` over the alternatives
// regardless of depth, so teacher entropy carries no information about
// viability. Alternatives below normalized depth 0.4 are dead with
// probability `early_dead_fraction`, later ones with `late_dead_fraction`.
// The student policy stays on the route with more than 0.95 of its mass at
// branch layers, so nucleus sampling never strays into an alternative.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pwopsd/rng.hpp"

namespace pwopsd {

struct WorldConfig {
  int vocab_size = 12;
  int depth = 48;
  int branch_count = 3;
  double early_dead_fraction = 0.7;
  double late_dead_fraction = 0.05;
  double ambiguity_mass = 0.45;
  double branch_density = 0.3;  // probability that a layer is a branch layer
  double hard_fraction = 0.15;  // problems whose student greedily answers wrong
  std::uint64_t seed = 0;

  void validate() const;
};

/// Normalized depth below which `early_dead_fraction` applies.
inline constexpr double kEarlyBoundary = 0.4;

struct ProblemInstance {
  std::string id;
  int index = 0;
  int length = 0;
  int gold = 0;
  bool hard = false;
  std::vector<int> route;                          // route token per layer; route[L-1] == gold
  std::vector<std::vector<int>> alternatives;      // empty unless a branch layer
  std::vector<std::vector<bool>> alternative_viable;
  Eigen::MatrixXd teacher;  // V × 2L, column = state id
  Eigen::MatrixXd student;  // V × 2L

  static int route_state(int layer) { return 2 * layer; }
  static int dead_state(int layer) { return 2 * layer + 1; }
  static int layer_of(int state) { return state / 2; }
  static bool is_dead(int state) { return (state & 1) != 0; }

  int vocab() const { return static_cast<int>(teacher.rows()); }
  int state_count() const { return 2 * length; }
  bool is_branch(int layer) const { return !alternatives[static_cast<std::size_t>(layer)].empty(); }
  std::string gold_answer() const { return std::to_string(gold); }

  /// Successor state, or -1 once the answer token has been emitted.
  int next_state(int state, int token) const;
  /// Answer string produced by emitting `token` from final-layer `state`.
  std::string answer(int final_state, int token) const;
  /// Ground truth I: true unless the token enters the dead-end track.
  bool viable_child(int state, int token) const;
};

ProblemInstance generate_problem(const WorldConfig& cfg, int index);

struct DecodeMode {
  bool greedy = true;
  double temperature = 1.0;
  double top_p = 1.0;

  static DecodeMode Greedy() { return {}; }
  static DecodeMode Sample(double temperature, double top_p) { return {false, temperature, top_p}; }
};

/// Greedy takes the argmax (ties to the lowest index). Sampling tempers,
/// keeps the smallest descending-probability prefix with mass >= top_p,
/// renormalizes and draws by inverse CDF in that order.
int choose_token(const Eigen::VectorXd& probs, const DecodeMode& mode, Rng& rng);

struct EpisodeTrace {
  std::vector<int> tokens;
  std::vector<int> states;   // state in which each token was emitted
  Eigen::MatrixXd teacher;   // V × L, teacher distribution at each visited state
  Eigen::MatrixXd student;   // V × L
  std::string answer;
  bool correct = false;

  int length() const { return static_cast<int>(tokens.size()); }
};

/// Student probabilities at a state; defaults to the world's student policy.
using StudentPolicy = std::function<Eigen::VectorXd(int state)>;

/// Continues from `start_state` after `prefix` (whose tokens/states are
/// copied into the trace) until the answer is emitted.
EpisodeTrace rollout_from(const ProblemInstance& problem, const EpisodeTrace& prefix, int start_state,
                          const DecodeMode& mode, Rng& rng, const StudentPolicy& policy = {});

EpisodeTrace student_rollout(const ProblemInstance& problem, const DecodeMode& mode, std::uint64_t seed,
                             const StudentPolicy& policy = {});

/// k independent student continuations after forcing `forced_token` at spine
/// position `pos`; each entry reports whether the gold answer was reached.
std::vector<bool> forced_continuation(const ProblemInstance& problem, const EpisodeTrace& spine, int pos,
                                      int forced_token, int k, std::uint64_t seed,
                                      const DecodeMode& mode = DecodeMode::Sample(1.0, 0.95));

/// Members are softmax(ln q + magnitude·ε_m) with ε_m standard normal; V × M.
Eigen::MatrixXd perturbed_ensemble(const Eigen::VectorXd& teacher, int members, double magnitude, Rng& rng);

}  // namespace pwopsd
