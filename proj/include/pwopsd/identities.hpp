#pragma once

// Exact checks of the branch-mixture identity
//   E_z KL(q^z || p) = KL(q || p) + I(Y; Z)
// for a single token and, by exhaustive enumeration, for short sequences.

#include <vector>

#include <Eigen/Core>

#include "pwopsd/rng.hpp"

namespace pwopsd {

struct BranchMixture {
  Eigen::VectorXd prior;       // α over Z branches
  Eigen::MatrixXd components;  // V × Z, column z = q^z

  void validate() const;
  Eigen::VectorXd marginal() const;
};

/// Σ_z Σ_y α_z q^z_y ln(q^z_y / q_y).
double conditional_mutual_information(const BranchMixture& m);

/// Exact KL(a || b); throws NumericDomain if a puts mass where b has none.
double exact_kl(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// |Σ_z α_z KL(q^z‖p) - KL(q‖p) - I|.
double token_identity_gap(const BranchMixture& m, const Eigen::VectorXd& p);

/// Next-token distributions for every prefix of length < depth, stored as
/// columns in level order: prefixes of length d occupy columns
/// offset(d) .. offset(d) + A^d - 1, indexed by their base-A value.
struct AutoregressiveTree {
  int alphabet = 2;
  int depth = 1;
  Eigen::MatrixXd nodes;  // A × (A^0 + ... + A^{depth-1})

  static Eigen::Index node_count(int alphabet, int depth);
  static Eigen::Index level_offset(int alphabet, int level);
  void validate() const;
  /// Probability of each complete length-`depth` sequence, indexed by its
  /// base-A value (first token most significant).
  Eigen::VectorXd sequence_probabilities() const;
};

struct BranchSequenceModel {
  Eigen::VectorXd prior;
  std::vector<AutoregressiveTree> branches;

  void validate() const;
};

/// Hard limits on exhaustive enumeration.
inline constexpr int kMaxIdentityAlphabet = 8;
inline constexpr int kMaxIdentityDepth = 5;

struct SequenceIdentityTerms {
  double expected_branch_kl = 0.0;   // E_z KL(q^z_seq ‖ p_seq)
  double marginal_kl = 0.0;          // KL(q_seq ‖ p_seq)
  double summed_conditional_mi = 0.0;  // Σ_t I(Y_t; Z | Y_<t)

  double gap() const;
};

SequenceIdentityTerms sequence_identity_terms(const BranchSequenceModel& model, const AutoregressiveTree& student);
double sequence_identity_gap(const BranchSequenceModel& model, const AutoregressiveTree& student);

/// Dirichlet(1) draw over n categories.
Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n);
BranchMixture random_mixture(Rng& rng, int branches, int vocab);
AutoregressiveTree random_tree(Rng& rng, int alphabet, int depth);
BranchSequenceModel random_sequence_model(Rng& rng, int branches, int alphabet, int depth);

}  // namespace pwopsd
