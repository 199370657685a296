#include <doctest.h>

#include "pwopsd/error.hpp"
#include "pwopsd/viability.hpp"

using namespace pwopsd;
using Eigen::MatrixXd;

namespace {

// Every column is nearly a point mass except the listed (pos, p1, p2) ones.
MatrixXd teacher_with(int vocab, int length, const std::vector<std::tuple<int, double, double>>& peaks) {
  MatrixXd t = MatrixXd::Zero(vocab, length);
  for (int c = 0; c < length; ++c) {
    t(0, c) = 0.999;
    t(1, c) = 0.001;
  }
  for (auto [pos, p1, p2] : peaks) {
    t.col(pos).setZero();
    t(0, pos) = p1;
    t(1, pos) = p2;
    const double rest = (1.0 - p1 - p2) / (vocab - 2);
    for (int k = 2; k < vocab; ++k) t(k, pos) = rest;
  }
  return t;
}

Spine spine_of(int length) { return Spine{"p", std::vector<int>(static_cast<std::size_t>(length), 0), true, "0"}; }

}  // namespace

TEST_CASE("plausibility filter boundaries") {
  const FilterConfig cfg{0.02, 0.10, 64, 5, 16, 3};
  const std::vector<bool> mask(40, true);
  const auto rejected = select_candidates(spine_of(10), teacher_with(40, 10, {{3, 0.6, 0.05}}), mask, {}, cfg);
  CHECK(rejected.empty());
  const auto accepted = select_candidates(spine_of(10), teacher_with(40, 10, {{3, 0.5, 0.05}}), mask, {}, cfg);
  REQUIRE(accepted.size() == 1);
  CHECK(accepted[0].spine_pos == 3);
  CHECK(accepted[0].children.size() == 3);
  CHECK(accepted[0].children[0].token == 0);
  CHECK(accepted[0].children[1].token == 1);
}

TEST_CASE("greedy spacing keeps the higher-entropy position") {
  const FilterConfig cfg{0.02, 0.10, 64, 5, 16, 3};
  const std::vector<bool> mask(6, true);
  // position 50 is flatter than position 10; they are 40 apart
  const auto t = teacher_with(6, 100, {{10, 0.7, 0.25}, {50, 0.4, 0.35}});
  const auto out = select_candidates(spine_of(100), t, mask, {}, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].spine_pos == 50);
}

TEST_CASE("selection respects spacing, cap, answer cutoff and order") {
  FilterConfig cfg{0.02, 0.10, 5, 3, 16, 2};
  const std::vector<bool> mask(6, true);
  std::vector<std::tuple<int, double, double>> peaks;
  for (int pos = 0; pos < 40; pos += 2) peaks.emplace_back(pos, 0.5, 0.3 - 0.005 * pos);
  const auto t = teacher_with(6, 40, peaks);
  const auto out = select_candidates(spine_of(40), t, mask, 30, cfg);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].spine_pos < 30);
    if (i > 0) CHECK(out[i - 1].h_trunc >= out[i].h_trunc);
    for (std::size_t j = 0; j < i; ++j) CHECK(std::abs(out[i].spine_pos - out[j].spine_pos) >= 5);
  }
  CHECK(select_candidates(spine_of(40), t, mask, 30, cfg).size() == out.size());
}

TEST_CASE("masked positions never produce children") {
  const FilterConfig cfg{0.02, 0.10, 1, 5, 16, 3};
  std::vector<bool> mask(4, false);
  mask[2] = true;
  const auto out = select_candidates(spine_of(5), teacher_with(4, 5, {{2, 0.5, 0.4}}), mask, {}, cfg);
  CHECK(out.empty());
}

TEST_CASE("child viability") {
  CHECK(child_viability(std::vector<bool>(6, true)) == 1.0);
  CHECK(child_viability({true, false, false, false, false, false}) == doctest::Approx(1.0 / 6));
  CHECK(child_viability({true, true, true, true, true, false}) == doctest::Approx(5.0 / 6));
  CHECK_THROWS_AS(child_viability({}), InvalidInput);
}

TEST_CASE("labels") {
  const LabelThresholds th;
  CHECK(label_candidate({1.0, 0.8333, 0.0}, th) == Label::Diversity);
  CHECK(label_candidate({0.1667, 0.0, 0.3333}, th) == Label::RealUncertain);
  CHECK(label_candidate({0.5, 0.5, 0.5}, th) == Label::Gray);
  // one child can never reach two high children
  CHECK(label_candidate({1.0}, th) == Label::Gray);
  CHECK(label_candidate({0.0}, th) == Label::RealUncertain);
  CHECK_THROWS_AS(label_candidate({}, th), InvalidInput);
  CHECK_THROWS_AS((LabelThresholds{0.3, 0.4, 2}.validate()), InvalidInput);
  for (auto l : {Label::RealUncertain, Label::Diversity, Label::Gray}) CHECK(label_from_string(to_string(l)) == l);
}

TEST_CASE("position scores") {
  CHECK(position_scores(0, 1).normalized == 0.5);
  CHECK(position_scores(0, 1).oriented == 0.5);
  CHECK(position_scores(0, 100).oriented == doctest::Approx(0.995));
  CHECK(position_scores(99, 100).oriented == doctest::Approx(0.005));
  CHECK_THROWS_AS(position_scores(100, 100), InvalidInput);
}
