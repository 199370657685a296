#include <doctest.h>

#include <cmath>
#include <random>

#include "pwopsd/distributions.hpp"
#include "pwopsd/error.hpp"
#include "pwopsd/rng.hpp"
#include "pwopsd/uncertainty.hpp"

using namespace pwopsd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd two_members(double a0, double a1, double b0, double b1) {
  MatrixXd m(2, 2);
  m << a0, b0, a1, b1;
  return m;
}

MatrixXd random_ensemble(Rng& rng, int vocab, int members) {
  MatrixXd m(vocab, members);
  for (int j = 0; j < members; ++j) {
    VectorXd z(vocab);
    for (int k = 0; k < vocab; ++k) z(k) = 1.5 * rng.normal();
    m.col(j) = softmax_with_temperature(z, 1.0);
  }
  return m;
}

}  // namespace

TEST_CASE("mean entropy and mutual information fixtures") {
  const MatrixXd same = two_members(0.5, 0.5, 0.5, 0.5);
  const MatrixXd hard = two_members(1, 0, 0, 1);
  const MatrixXd soft = two_members(0.75, 0.25, 0.25, 0.75);
  CHECK(mean_predictive_entropy(same) == doctest::Approx(std::log(2.0)));
  CHECK(mean_predictive_entropy(hard) == 0.0);
  CHECK(mean_predictive_entropy(soft) == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK(mutual_information(same) == 0.0);
  CHECK(mutual_information(hard) == doctest::Approx(std::log(2.0)));
  CHECK(mutual_information(soft) == doctest::Approx(0.1308).epsilon(1e-3));
}

TEST_CASE("entropy decomposition and Jensen bound") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd m = random_ensemble(rng, 10, 5);
    const VectorXd mean = m.rowwise().mean();
    const double mi = mutual_information(m);
    CHECK(mi >= 0.0);
    CHECK(mi <= entropy(mean) + 1e-15);
    CHECK(std::abs(mean_predictive_entropy(m) + mi - entropy(mean)) < 1e-12);
  }
}

TEST_CASE("Dirichlet precision fixtures") {
  const auto d = dirichlet_precision(two_members(1, 0, 0, 1), 1e-6);
  CHECK(d.kappa_hat == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(d.log_kappa == doctest::Approx(std::log(1e-6)).epsilon(1e-14));
  const auto same = dirichlet_precision(two_members(0.3, 0.7, 0.3, 0.7), 1e-6);
  CHECK(std::isinf(same.kappa_hat));
  CHECK(same.kappa_hat > 0);
  CHECK(same.log_kappa == doctest::Approx(std::log(1e6)));
}

TEST_CASE("Dirichlet precision recovers the concentration of Dirichlet samples") {
  // Independent oracle: gamma-based Dirichlet sampling from the standard library.
  std::mt19937_64 gen(2024);
  const int V = 8, M = 10000;
  const double kappa = 50.0;
  VectorXd base(V);
  base << 0.3, 0.2, 0.15, 0.1, 0.1, 0.08, 0.04, 0.03;
  MatrixXd members(V, M);
  for (int m = 0; m < M; ++m) {
    double total = 0.0;
    for (int k = 0; k < V; ++k) {
      std::gamma_distribution<double> g(kappa * base(k), 1.0);
      members(k, m) = g(gen);
      total += members(k, m);
    }
    members.col(m) /= total;
  }
  const auto d = dirichlet_precision(members);
  CHECK(std::abs(d.kappa_hat - kappa) / kappa < 0.10);
}

TEST_CASE("Dirichlet precision is permutation invariant") {
  Rng rng(23);
  const MatrixXd m = random_ensemble(rng, 6, 7);
  const double k = dirichlet_precision(m).kappa_hat;
  MatrixXd members_swapped = m;
  members_swapped.col(0).swap(members_swapped.col(4));
  MatrixXd vocab_swapped = m;
  vocab_swapped.row(1).swap(vocab_swapped.row(5));
  CHECK(dirichlet_precision(members_swapped).kappa_hat == doctest::Approx(k).epsilon(1e-12));
  CHECK(dirichlet_precision(vocab_swapped).kappa_hat == doctest::Approx(k).epsilon(1e-12));
}

TEST_CASE("score_ensemble bundles every score") {
  Rng rng(29);
  const MatrixXd m = random_ensemble(rng, 12, 5);
  const VectorXd ref = m.col(0);
  const std::vector<bool> mask(12, true);
  const auto rec = score_ensemble(m, ref, mask, 4);
  CHECK(rec.mean_entropy == doctest::Approx(mean_predictive_entropy(m)));
  CHECK(rec.mutual_information == doctest::Approx(mutual_information(m)));
  CHECK(rec.log_kappa == doctest::Approx(dirichlet_precision(m).log_kappa));
  CHECK(rec.truncated_entropy == doctest::Approx(truncated_entropy(ref, mask, 4)));
}

TEST_CASE("ensembles are validated") {
  MatrixXd one(2, 1);
  one << 0.5, 0.5;
  CHECK_THROWS_AS(dirichlet_precision(one), InvalidInput);
  CHECK_THROWS_AS(mutual_information(two_members(0.6, 0.6, 0.5, 0.5)), InvalidInput);
}
