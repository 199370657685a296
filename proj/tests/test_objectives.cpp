#include <doctest.h>

#include <cmath>
#include <limits>

#include "pwopsd/error.hpp"
#include "pwopsd/objectives.hpp"

using namespace pwopsd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SequenceRollout single_token(const VectorXd& q, const VectorXd& p, double temperature) {
  SequenceRollout s;
  s.teacher = q;
  s.student_logits = (p.array().log() * temperature).matrix();
  return s;
}

RolloutBatch fixture_batch() {
  VectorXd q(2), p(2);
  q << 0.5, 0.5;
  p << 0.25, 0.75;
  RolloutBatch b;
  b.sequences.push_back(single_token(q, p, 1.0));
  return b;
}

const ObjectiveConfig kUnit{1.0, 0.05};

}  // namespace

TEST_CASE("single-token fixture") {
  const double loss = distillation_loss(fixture_batch(), kUnit, UniformWeight{}, Reduction::GlobalTokenMean);
  CHECK(loss == doctest::Approx(-0.1527).epsilon(1e-3));
  CHECK(loss == doctest::Approx(0.05 + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("teacher equal to student gives zero loss and zero gradient") {
  Rng rng(3);
  auto batch = random_batch(rng, 7, 3, 6);
  for (auto& s : batch.sequences)
    for (Eigen::Index t = 0; t < s.length(); ++t) s.teacher.col(t) = softmax_with_temperature(s.student_logits.col(t), 1.1);
  const ObjectiveConfig cfg{1.1, 0.05};
  for (auto r : {Reduction::GlobalTokenMean, Reduction::PerSequenceMean}) {
    for (const Weighting& w : {Weighting{UniformWeight{}}, Weighting{PositionWeight{preset("Sharp")}}}) {
      CHECK(std::abs(distillation_loss(batch, cfg, w, r)) < 1e-14);
      for (const auto& g : loss_gradient_wrt_student_logits(batch, cfg, w, r)) CHECK(g.cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("reductions against hand sums") {
  Rng rng(5);
  const auto batch = random_batch(rng, 5, 3, 7);
  const ObjectiveConfig cfg{1.1, 0.05};
  const Weighting w = PositionWeight{preset("Moderate")};
  const auto losses = token_losses(batch, cfg, w);
  double global = 0.0, per_seq = 0.0;
  Eigen::Index tokens = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const auto L = losses[i].size();
    double inner = 0.0;
    for (Eigen::Index t = 0; t < L; ++t) {
      const double wt = weight(position_fraction(static_cast<int>(t + 1), static_cast<int>(L)), preset("Moderate"));
      global += wt * losses[i](t);
      inner += wt * losses[i](t);
    }
    per_seq += inner / static_cast<double>(L);
    tokens += L;
  }
  CHECK(distillation_loss(batch, cfg, w, Reduction::GlobalTokenMean) == doctest::Approx(global / tokens).epsilon(1e-13));
  CHECK(distillation_loss(batch, cfg, w, Reduction::PerSequenceMean) == doctest::Approx(per_seq / 3).epsilon(1e-13));
}

TEST_CASE("w_min of one on equal lengths matches the uniform global loss") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto batch = random_batch(rng, 6, 4, 1);
    for (auto& s : batch.sequences) {
      s.teacher = MatrixXd(6, 5);
      s.student_logits = MatrixXd(6, 5);
      for (int t = 0; t < 5; ++t) {
        VectorXd z(6), y(6);
        for (int k = 0; k < 6; ++k) {
          z(k) = rng.normal();
          y(k) = rng.normal();
        }
        s.teacher.col(t) = softmax_with_temperature(z, 1.0);
        s.student_logits.col(t) = y;
      }
    }
    const ObjectiveConfig cfg{1.1, 0.05};
    const double opsd = distillation_loss(batch, cfg, UniformWeight{}, Reduction::GlobalTokenMean);
    const Weighting flat = PositionWeight{{1.0, 0.7, 0.3}};
    CHECK(std::abs(distillation_loss(batch, cfg, flat, Reduction::PerSequenceMean) - opsd) < 1e-12);
    CHECK(std::abs(distillation_loss(batch, cfg, flat, Reduction::GlobalTokenMean) - opsd) < 1e-12);
  }
}

TEST_CASE("huge clip recovers unclipped forward KL per token") {
  Rng rng(13);
  const auto batch = random_batch(rng, 8, 2, 5);
  const auto clipped = token_losses(batch, {1.1, 1e6}, UniformWeight{});
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    const auto& s = batch.sequences[i];
    for (Eigen::Index t = 0; t < s.length(); ++t) {
      const VectorXd p = softmax_with_temperature(s.student_logits.col(t), 1.1);
      CHECK(std::abs(clipped[i](t) - forward_kl(s.teacher.col(t), p)) < 1e-10);
    }
  }
}

TEST_CASE("entropy gate") {
  VectorXd sharp(2), flat(2), p(2);
  sharp << 0.98, 0.02;  // entropy about 0.098
  flat << 0.5, 0.5;     // entropy about 0.693
  p << 0.3, 0.7;
  SequenceRollout s;
  s.teacher = MatrixXd(2, 2);
  s.teacher << sharp, flat;
  s.student_logits = MatrixXd(2, 2);
  s.student_logits.col(0) = p.array().log().matrix();
  s.student_logits.col(1) = p.array().log().matrix();
  RolloutBatch b;
  b.sequences.push_back(s);

  const double mixed = entropy_gated_loss(b, kUnit, 0.4, Reduction::GlobalTokenMean);
  const double by_hand = (reverse_kl(sharp, p) + clipped_fkl_terms(flat, p, 0.05).sum()) / 2.0;
  CHECK(mixed == doctest::Approx(by_hand).epsilon(1e-13));

  CHECK(entropy_gated_loss(b, kUnit, 0.0, Reduction::GlobalTokenMean) ==
        doctest::Approx(distillation_loss(b, kUnit, UniformWeight{}, Reduction::GlobalTokenMean)).epsilon(1e-14));
  const double closed = entropy_gated_loss(b, kUnit, std::log(2.0) + 1.0, Reduction::GlobalTokenMean);
  CHECK(closed == doctest::Approx((reverse_kl(sharp, p) + reverse_kl(flat, p)) / 2.0).epsilon(1e-13));
  CHECK(default_gate_threshold(16) == doctest::Approx(std::log(16.0) / 2));
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(21);
  const ObjectiveConfig cfg{1.1, 0.05};
  const Weighting weightings[] = {UniformWeight{}, PositionWeight{preset("Moderate")}, EntropyGate{1.5}};
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = random_batch(rng, 12, 3, 8);
    for (const auto& w : weightings) {
      for (auto r : {Reduction::GlobalTokenMean, Reduction::PerSequenceMean}) {
        const auto check = finite_difference_check(batch, cfg, w, r, 1e-5);
        CHECK(check.max_relative_error < 1e-6);
        CHECK(check.max_absolute_error < 1e-9);
        CHECK(check.compared > 0);
      }
    }
  }
}

TEST_CASE("clipped terms carry no direct gradient") {
  VectorXd q(3), z(3);
  q << 0.8, 0.1, 0.1;
  z << -3.0, 1.0, 1.0;  // term 0 far above the clip
  const VectorXd g = clipped_fkl_gradient(q, z, 1.0, 0.05);
  const VectorXd p = softmax_with_temperature(z, 1.0);
  // only coordinates 1 and 2 are unclipped: Q_U = 0.2
  CHECK(g(0) == doctest::Approx(p(0) * 0.2));
  CHECK(g(1) == doctest::Approx(p(1) * 0.2 - 0.1));
  CHECK(g.sum() == doctest::Approx(0.2 - 0.2).epsilon(1e-12));
}

TEST_CASE("gradients scale with position weights under constant per-token loss") {
  VectorXd q(4), z(4);
  q << 0.4, 0.3, 0.2, 0.1;
  z << 0.2, -0.1, 0.5, 0.0;
  SequenceRollout s;
  const int L = 12;
  s.teacher = q.replicate(1, L);
  s.student_logits = z.replicate(1, L);
  RolloutBatch b;
  b.sequences.push_back(s);
  const auto sched = preset("Moderate");
  const auto g = loss_gradient_wrt_student_logits(b, {1.1, 0.05}, PositionWeight{sched}, Reduction::PerSequenceMean);
  const VectorXd norms = g[0].colwise().norm().transpose();
  for (int t = 1; t < L; ++t) {
    const double expected = weight(position_fraction(t + 1, L), sched) / weight(position_fraction(1, L), sched);
    CHECK(std::abs(norms(t) / norms(0) - expected) < 1e-9);
  }
}

TEST_CASE("invalid batches are rejected") {
  RolloutBatch empty;
  CHECK_THROWS_AS(distillation_loss(empty, kUnit, UniformWeight{}, Reduction::GlobalTokenMean), InvalidInput);
  auto b = fixture_batch();
  b.sequences[0].teacher(0, 0) = 0.7;  // no longer sums to one
  CHECK_THROWS_AS(distillation_loss(b, kUnit, UniformWeight{}, Reduction::GlobalTokenMean), InvalidInput);
  auto c = fixture_batch();
  c.sequences[0].student_logits(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(distillation_loss(c, kUnit, UniformWeight{}, Reduction::GlobalTokenMean), InvalidInput);
  CHECK_THROWS_AS(distillation_loss(fixture_batch(), {0.0, 0.05}, UniformWeight{}, Reduction::GlobalTokenMean),
                  InvalidInput);
}
