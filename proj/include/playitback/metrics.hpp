// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"

namespace pib {

struct MetricsReport {
  double top1 = 0.0;  // percent
  double top5 = 0.0;  // percent
  double mean_ap = 0.0;
  double auc = 0.0;
  double d_prime = 0.0;
  std::size_t n_samples = 0;
  /// Classes without positives; excluded from mAP and AUC.
  std::vector<std::size_t> skipped_classes;
};

/// AUC is capped to [1e-12, 1 - 1e-12] before inversion.
constexpr double kAucCap = 1e-12;

/// Inverse of the standard normal CDF (rational approximation plus one
/// Halley refinement step; absolute error well below 1e-9).
double inverse_normal_cdf(double p);
double normal_cdf(double x);
/// sqrt(2) * inverse_normal_cdf(auc).
double d_prime(double auc);

/// Mean of the precision at the rank of each positive (scores sorted
/// descending, ties broken by sample order). NaN when there are no positives.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);
/// Mann-Whitney U / (n_pos * n_neg) with average ranks for ties. NaN when
/// either class is empty.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Percentage of samples with a positive class among the k highest scores.
double top_k_accuracy(const std::vector<std::vector<double>>& scores,
                      const std::vector<std::vector<double>>& targets, std::size_t k);

/// `targets` are multi-hot (one-hot for single-label data); entries >= 0.5 are positives.
MetricsReport compute_metrics(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<double>>& targets);

void to_json(nlohmann::json& j, const MetricsReport& m);

}  // namespace pib
