// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>

#include "playitback/errors.hpp"

namespace pib {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("inverse_normal_cdf: p must lie in (0, 1)");
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double d_prime(double auc) {
  const double capped = std::clamp(auc, kAucCap, 1.0 - kAucCap);
  return std::numbers::sqrt2 * inverse_normal_cdf(capped);
}

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positive[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(hits);
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double top_k_accuracy(const std::vector<std::vector<double>>& scores,
                      const std::vector<std::vector<double>>& targets, std::size_t k) {
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t kk = std::min(k, s.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); });
    for (std::size_t r = 0; r < kk; ++r) {
      if (targets[i][order[r]] >= 0.5) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.size());
}

MetricsReport compute_metrics(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<double>>& targets) {
  if (scores.size() != targets.size()) throw ShapeError("compute_metrics: scores and targets differ in count");
  MetricsReport m;
  m.n_samples = scores.size();
  if (scores.empty()) return m;
  const std::size_t n_classes = scores[0].size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != n_classes || targets[i].size() != n_classes)
      throw ShapeError("compute_metrics: ragged score/target rows");
    for (double s : scores[i])
      if (!std::isfinite(s)) throw NumericError("compute_metrics: non-finite score at sample " + std::to_string(i));
  }
  m.top1 = top_k_accuracy(scores, targets, 1);
  m.top5 = top_k_accuracy(scores, targets, 5);

  double ap_sum = 0.0, auc_sum = 0.0;
  std::size_t ap_n = 0, auc_n = 0;
  std::vector<double> col(scores.size());
  std::vector<bool> pos(scores.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col[i] = scores[i][c];
      pos[i] = targets[i][c] >= 0.5;
    }
    const double ap = average_precision(col, pos);
    if (std::isnan(ap)) {
      m.skipped_classes.push_back(c);
      continue;
    }
    ap_sum += ap;
    ++ap_n;
    const double auc = roc_auc(col, pos);
    if (!std::isnan(auc)) {
      auc_sum += auc;
      ++auc_n;
    }
  }
  if (!m.skipped_classes.empty())
    std::clog << "metrics: " << m.skipped_classes.size() << " class(es) without positives excluded\n";
  m.mean_ap = ap_n ? ap_sum / static_cast<double>(ap_n) : 0.0;
  m.auc = auc_n ? auc_sum / static_cast<double>(auc_n) : 0.5;
  m.d_prime = d_prime(m.auc);
  return m;
}

void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = {{"top1", m.top1}, {"top5", m.top5},           {"mAP", m.mean_ap},
       {"AUC", m.auc},   {"d_prime", m.d_prime},     {"n_samples", m.n_samples},
       {"skipped_classes", m.skipped_classes}};
}

}  // namespace pib
