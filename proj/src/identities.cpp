#include "pwopsd/identities.hpp"

#include <cmath>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"

namespace pwopsd {

void BranchMixture::validate() const {
  if (!is_distribution(prior)) throw InvalidInput("branch mixture: prior is not a distribution");
  if (components.cols() != prior.size()) throw InvalidInput("branch mixture: one component per branch required");
  for (Eigen::Index z = 0; z < components.cols(); ++z)
    if (!is_distribution(components.col(z))) throw InvalidInput("branch mixture: invalid component");
}

Eigen::VectorXd BranchMixture::marginal() const {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(components.rows());
  for (Eigen::Index z = 0; z < components.cols(); ++z) q += prior(z) * components.col(z);
  return q;
}

double conditional_mutual_information(const BranchMixture& m) {
  m.validate();
  const Eigen::VectorXd q = m.marginal();
  double info = 0.0;
  for (Eigen::Index z = 0; z < m.components.cols(); ++z) {
    double branch = 0.0;
    for (Eigen::Index y = 0; y < q.size(); ++y) {
      const double qz = m.components(y, z);
      if (qz > 0.0) branch += qz * std::log(qz / q(y));
    }
    info += m.prior(z) * branch;
  }
  return info;
}

double exact_kl(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidInput("kl: size mismatch");
  double kl = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (!(a(j) > 0.0)) continue;
    if (!(b(j) > 0.0)) throw NumericDomain("kl: support violation");
    kl += a(j) * std::log(a(j) / b(j));
  }
  return kl;
}

namespace {

// Shared by the token and sequence identities so that depth-1 sequences
// follow the token path operation for operation.
double mixture_gap_terms(const Eigen::VectorXd& prior, const Eigen::MatrixXd& comps, const Eigen::VectorXd& p,
                         double& expected, double& marginal_kl) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(comps.rows());
  for (Eigen::Index z = 0; z < comps.cols(); ++z) q += prior(z) * comps.col(z);
  expected = 0.0;
  for (Eigen::Index z = 0; z < comps.cols(); ++z)
    if (prior(z) > 0.0) expected += prior(z) * exact_kl(comps.col(z), p);
  marginal_kl = exact_kl(q, p);
  return expected - marginal_kl;
}

}  // namespace

double token_identity_gap(const BranchMixture& m, const Eigen::VectorXd& p) {
  m.validate();
  if (!is_distribution(p)) throw InvalidInput("token_identity_gap: p is not a distribution");
  double expected = 0.0, marginal_kl = 0.0;
  mixture_gap_terms(m.prior, m.components, p, expected, marginal_kl);
  return std::abs(expected - marginal_kl - conditional_mutual_information(m));
}

Eigen::Index AutoregressiveTree::node_count(int alphabet, int depth) { return level_offset(alphabet, depth); }

Eigen::Index AutoregressiveTree::level_offset(int alphabet, int level) {
  Eigen::Index offset = 0, width = 1;
  for (int d = 0; d < level; ++d) {
    offset += width;
    width *= alphabet;
  }
  return offset;
}

void AutoregressiveTree::validate() const {
  if (alphabet < 2 || alphabet > kMaxIdentityAlphabet || depth < 1 || depth > kMaxIdentityDepth)
    throw InvalidInput("autoregressive tree: alphabet must be in [2, 8] and depth in [1, 5]");
  if (nodes.rows() != alphabet || nodes.cols() != node_count(alphabet, depth))
    throw InvalidInput("autoregressive tree: node matrix has the wrong shape");
  for (Eigen::Index c = 0; c < nodes.cols(); ++c)
    if (!is_distribution(nodes.col(c))) throw InvalidInput("autoregressive tree: invalid node distribution");
}

Eigen::VectorXd AutoregressiveTree::sequence_probabilities() const {
  // Level-by-level expansion: prob(prefix·y) = prob(prefix) · node(prefix)(y).
  Eigen::VectorXd level = Eigen::VectorXd::Ones(1);
  for (int d = 0; d < depth; ++d) {
    const Eigen::Index offset = level_offset(alphabet, d);
    Eigen::VectorXd next(level.size() * alphabet);
    for (Eigen::Index prefix = 0; prefix < level.size(); ++prefix)
      for (int y = 0; y < alphabet; ++y) next(prefix * alphabet + y) = level(prefix) * nodes(y, offset + prefix);
    level = std::move(next);
  }
  return level;
}

void BranchSequenceModel::validate() const {
  if (!is_distribution(prior)) throw InvalidInput("sequence model: prior is not a distribution");
  if (branches.size() != static_cast<std::size_t>(prior.size()))
    throw InvalidInput("sequence model: one tree per branch required");
  for (const auto& b : branches) {
    b.validate();
    if (b.alphabet != branches.front().alphabet || b.depth != branches.front().depth)
      throw InvalidInput("sequence model: branch trees must share topology");
  }
}

double SequenceIdentityTerms::gap() const {
  return std::abs(expected_branch_kl - marginal_kl - summed_conditional_mi);
}

SequenceIdentityTerms sequence_identity_terms(const BranchSequenceModel& model, const AutoregressiveTree& student) {
  model.validate();
  student.validate();
  const int A = student.alphabet;
  const int D = student.depth;
  if (model.branches.front().alphabet != A || model.branches.front().depth != D)
    throw InvalidInput("sequence identity: student tree topology differs from the branches");
  const auto Z = static_cast<Eigen::Index>(model.branches.size());

  Eigen::MatrixXd seq(AutoregressiveTree::level_offset(A, D + 1) - AutoregressiveTree::level_offset(A, D), Z);
  for (Eigen::Index z = 0; z < Z; ++z) seq.col(z) = model.branches[static_cast<std::size_t>(z)].sequence_probabilities();

  SequenceIdentityTerms terms;
  mixture_gap_terms(model.prior, seq, student.sequence_probabilities(), terms.expected_branch_kl, terms.marginal_kl);

  // Σ_t Σ_{prefix} q(prefix) · I(Y_t; Z | prefix), with the branch posterior
  // α(z | prefix) ∝ α_z q^z(prefix).
  Eigen::MatrixXd prefix_prob = Eigen::MatrixXd::Ones(1, Z);  // q^z(prefix), row per prefix
  double total = 0.0;
  for (int d = 0; d < D; ++d) {
    const Eigen::Index offset = AutoregressiveTree::level_offset(A, d);
    Eigen::MatrixXd next(prefix_prob.rows() * A, Z);
    for (Eigen::Index prefix = 0; prefix < prefix_prob.rows(); ++prefix) {
      double marginal = 0.0;
      for (Eigen::Index z = 0; z < Z; ++z) marginal += model.prior(z) * prefix_prob(prefix, z);
      BranchMixture local;
      local.components.resize(A, Z);
      local.prior.resize(Z);
      for (Eigen::Index z = 0; z < Z; ++z) {
        local.components.col(z) = model.branches[static_cast<std::size_t>(z)].nodes.col(offset + prefix);
        for (int y = 0; y < A; ++y) next(prefix * A + y, z) = prefix_prob(prefix, z) * local.components(y, z);
      }
      if (d == 0) {
        // The empty prefix has probability one and leaves the prior unchanged.
        local.prior = model.prior;
        total += conditional_mutual_information(local);
        continue;
      }
      if (!(marginal > 0.0)) continue;
      for (Eigen::Index z = 0; z < Z; ++z) local.prior(z) = model.prior(z) * prefix_prob(prefix, z) / marginal;
      total += marginal * conditional_mutual_information(local);
    }
    prefix_prob = std::move(next);
  }
  terms.summed_conditional_mi = total;
  return terms;
}

double sequence_identity_gap(const BranchSequenceModel& model, const AutoregressiveTree& student) {
  return sequence_identity_terms(model, student).gap();
}

Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    v(i) = -std::log(u);
  }
  return v / v.sum();
}

BranchMixture random_mixture(Rng& rng, int branches, int vocab) {
  BranchMixture m;
  m.prior = random_simplex(rng, branches);
  m.components.resize(vocab, branches);
  for (int z = 0; z < branches; ++z) m.components.col(z) = random_simplex(rng, vocab);
  return m;
}

AutoregressiveTree random_tree(Rng& rng, int alphabet, int depth) {
  if (alphabet < 2 || alphabet > kMaxIdentityAlphabet || depth < 1 || depth > kMaxIdentityDepth)
    throw InvalidInput("autoregressive tree: alphabet must be in [2, 8] and depth in [1, 5]");
  AutoregressiveTree t;
  t.alphabet = alphabet;
  t.depth = depth;
  t.nodes.resize(alphabet, AutoregressiveTree::node_count(alphabet, depth));
  for (Eigen::Index c = 0; c < t.nodes.cols(); ++c) t.nodes.col(c) = random_simplex(rng, alphabet);
  t.validate();
  return t;
}

BranchSequenceModel random_sequence_model(Rng& rng, int branches, int alphabet, int depth) {
  BranchSequenceModel m;
  m.prior = random_simplex(rng, branches);
  for (int z = 0; z < branches; ++z) m.branches.push_back(random_tree(rng, alphabet, depth));
  return m;
}

}  // namespace pwopsd
