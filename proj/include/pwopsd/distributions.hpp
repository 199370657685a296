#pragma once

// Probability-vector primitives. Distributions and logits are plain Eigen
// column vectors; every function is templated on the scalar so the
// finite-difference oracle can re-evaluate the same formulas in long double.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pwopsd/error.hpp"

namespace pwopsd {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Floor applied to the denominator inside log-ratios. The distribution
/// itself is never renormalized.
inline constexpr double kProbabilityFloor = 1e-12;

/// Tolerance on Σp = 1 for inputs that claim to be distributions.
inline constexpr double kSumTolerance = 1e-9;

template <typename Derived>
bool is_distribution(const Eigen::MatrixBase<Derived>& p, double tol = kSumTolerance) {
  using Scalar = typename Derived::Scalar;
  if (p.size() == 0 || !p.allFinite()) return false;
  if ((p.array() < Scalar(0)).any()) return false;
  using std::abs;
  return abs(p.sum() - Scalar(1)) <= Scalar(tol);
}

template <typename Derived>
void require_distribution(const Eigen::MatrixBase<Derived>& p, const char* what) {
  if (!is_distribution(p)) throw InvalidInput(std::string(what) + ": not a probability vector");
}

/// probs_j = exp(z_j/T - m) / Σ_k exp(z_k/T - m), m = max_k z_k/T.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax_with_temperature(const Eigen::MatrixBase<Derived>& logits,
                                                            typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw InvalidInput("softmax: temperature must be positive");
  if (logits.size() == 0 || !logits.allFinite()) throw InvalidInput("softmax: logits must be finite");
  VectorX<Scalar> scaled = logits / temperature;
  const Scalar shift = scaled.maxCoeff();
  VectorX<Scalar> e = (scaled.array() - shift).exp().matrix();
  return e / e.sum();
}

/// Raises a distribution to 1/T and renormalizes; the probability-space
/// form of dividing its log-probabilities by T.
template <typename Derived>
VectorX<typename Derived::Scalar> temper(const Eigen::MatrixBase<Derived>& p, typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw InvalidInput("temper: temperature must be positive");
  if (temperature == Scalar(1)) return p;
  VectorX<Scalar> out(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    using std::pow;
    out(j) = p(j) > Scalar(0) ? pow(p(j), Scalar(1) / temperature) : Scalar(0);
  }
  return out / out.sum();
}

/// Shannon entropy in nats, 0·ln 0 := 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  using std::log;
  Scalar h(0);
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (p(j) > Scalar(0)) h -= p(j) * log(p(j));
  return h;
}

/// Entropy of the renormalized `top_m` largest valid probabilities. Ties in
/// the ranking go to the lower vocabulary index.
template <typename Derived>
typename Derived::Scalar truncated_entropy(const Eigen::MatrixBase<Derived>& p, const std::vector<bool>& valid_mask,
                                           int top_m) {
  using Scalar = typename Derived::Scalar;
  if (top_m < 1) throw InvalidInput("truncated_entropy: M must be positive");
  if (valid_mask.size() != static_cast<std::size_t>(p.size()))
    throw InvalidInput("truncated_entropy: mask length does not match vocabulary");
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (valid_mask[static_cast<std::size_t>(j)]) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return p(a) > p(b); });
  if (idx.size() > static_cast<std::size_t>(top_m)) idx.resize(static_cast<std::size_t>(top_m));
  Scalar mass(0);
  for (auto j : idx) mass += p(j);
  if (!(mass > Scalar(0))) throw DegenerateInput("truncated_entropy: no valid probability mass");
  using std::log;
  Scalar h(0);
  for (auto j : idx) {
    const Scalar r = p(j) / mass;
    if (r > Scalar(0)) h -= r * log(r);
  }
  return h;
}

/// term_j = min(q_j ln(q_j / max(p_j, floor)), clip); q_j = 0 gives 0.
template <typename DerivedQ, typename DerivedP>
VectorX<typename DerivedQ::Scalar> clipped_fkl_terms(const Eigen::MatrixBase<DerivedQ>& q,
                                                      const Eigen::MatrixBase<DerivedP>& p,
                                                      typename DerivedQ::Scalar clip) {
  using Scalar = typename DerivedQ::Scalar;
  if (q.size() != p.size()) throw InvalidInput("clipped_fkl_terms: vocabulary mismatch");
  VectorX<Scalar> terms(q.size());
  using std::log;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (!(q(j) > Scalar(0))) {
      terms(j) = Scalar(0);
      continue;
    }
    if (!(p(j) >= Scalar(0)) || !std::isfinite(static_cast<double>(p(j))))
      throw NumericDomain("clipped_fkl_terms: student probability outside [0, 1]");
    const Scalar denom = std::max(p(j), Scalar(kProbabilityFloor));
    terms(j) = std::min(q(j) * log(q(j) / denom), clip);
  }
  return terms;
}

/// Unclipped KL(q || p) with the same floor convention.
template <typename DerivedQ, typename DerivedP>
typename DerivedQ::Scalar forward_kl(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedP>& p) {
  using Scalar = typename DerivedQ::Scalar;
  return clipped_fkl_terms(q, p, std::numeric_limits<Scalar>::infinity()).sum();
}

/// KL(p || q): the student-weighted direction.
template <typename DerivedQ, typename DerivedP>
typename DerivedQ::Scalar reverse_kl(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedP>& p) {
  using Scalar = typename DerivedQ::Scalar;
  if (q.size() != p.size()) throw InvalidInput("reverse_kl: vocabulary mismatch");
  using std::log;
  Scalar kl(0);
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (!(p(j) > Scalar(0))) continue;
    if (!(q(j) >= Scalar(0))) throw NumericDomain("reverse_kl: teacher probability negative");
    kl += p(j) * log(p(j) / std::max(q(j), Scalar(kProbabilityFloor)));
  }
  return kl;
}

}  // namespace pwopsd
