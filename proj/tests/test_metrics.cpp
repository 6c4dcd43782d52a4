// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "playitback/metrics.hpp"

using namespace pib;

namespace {

// Pairwise count with ties worth one half.
double brute_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Precision at every positive, scanning a descending order (stable in index).
double brute_ap(const std::vector<double>& s, const std::vector<bool>& pos) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  double hits = 0.0, total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (pos[order[r]]) {
      hits += 1.0;
      total += hits / static_cast<double>(r + 1);
    }
  return total / hits;
}

}  // namespace

TEST_CASE("d-prime anchors") {
  CHECK(std::abs(d_prime(0.978) - 2.846) <= 0.01);
  CHECK(d_prime(0.5) == 0.0);
  CHECK(std::isfinite(d_prime(1.0)));
  CHECK(std::isfinite(d_prime(0.0)));
  CHECK(d_prime(1.0) == doctest::Approx(std::sqrt(2.0) * inverse_normal_cdf(1.0 - kAucCap)));
}

TEST_CASE("d-prime round trip through the analytic AUC") {
  for (double d : {0.5, 1.0, 2.0, 3.0}) CHECK(std::abs(d_prime(normal_cdf(d / std::sqrt(2.0))) - d) < 1e-6);
}

TEST_CASE("inverse normal CDF accuracy") {
  // Above x = 5 the upper tail of a double near 1 is too coarse to round-trip.
  for (double x = -7.5; x <= 5.0; x += 0.01) {
    const double p = normal_cdf(x);
    CHECK(std::abs(inverse_normal_cdf(p) - x) < 1e-9);
    CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("AUC and AP agree with brute-force oracles") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coarse(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 40;
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? coarse(rng) : std::normal_distribution<double>()(rng);
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[1] = false;
    CHECK(roc_auc(s, pos) == doctest::Approx(brute_auc(s, pos)).epsilon(1e-12));
    CHECK(average_precision(s, pos) == doctest::Approx(brute_ap(s, pos)).epsilon(1e-12));
  }
  CHECK(std::isnan(roc_auc({0.1, 0.2}, {true, true})));
  CHECK(std::isnan(average_precision({0.1, 0.2}, {false, false})));
}

TEST_CASE("uniform random scores on balanced labels give AUC near 0.5") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(20000);
  std::vector<bool> pos(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    pos[i] = i % 2 == 0;
  }
  CHECK(std::abs(roc_auc(s, pos) - 0.5) <= 0.03);
}

TEST_CASE("perfect ranking on a 3-class toy set") {
  const std::vector<std::vector<double>> scores{{0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}, {0.2, 0.1, 0.7}, {0.6, 0.3, 0.1}};
  const std::vector<std::vector<double>> targets{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  const auto m = compute_metrics(scores, targets);
  CHECK(m.top1 == 100.0);
  CHECK(m.top5 == 100.0);
  CHECK(m.mean_ap == 1.0);
  CHECK(m.auc == 1.0);
  CHECK(m.d_prime == doctest::Approx(std::sqrt(2.0) * inverse_normal_cdf(1.0 - kAucCap)));
  CHECK(m.n_samples == 4);
}

TEST_CASE("metric bounds and skipped classes") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> scores(50, std::vector<double>(7)), targets(50, std::vector<double>(7, 0.0));
  for (std::size_t i = 0; i < 50; ++i) {
    for (double& v : scores[i]) v = u(rng);
    targets[i][i % 6] = 1.0;  // class 6 never occurs
  }
  const auto m = compute_metrics(scores, targets);
  CHECK(m.skipped_classes == std::vector<std::size_t>{6});
  CHECK(0.0 <= m.top1);
  CHECK(m.top1 <= m.top5);
  CHECK(m.top5 <= 100.0);
  CHECK(m.mean_ap >= 0.0);
  CHECK(m.mean_ap <= 1.0);
  CHECK(m.auc >= 0.0);
  CHECK(m.auc <= 1.0);
  CHECK(top_k_accuracy(scores, targets, 7) == 100.0);
  const auto j = nlohmann::json(m);
  CHECK(j.at("top1") == m.top1);
  CHECK(j.at("skipped_classes").size() == 1);
}
