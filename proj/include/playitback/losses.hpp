// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <vector>

#include "playitback/autodiff.hpp"
#include "playitback/config.hpp"

namespace pib {

struct LossConfig {
  double gamma = 0.05;  // ranking margin
  double beta = 0.7;    // weight of later-pass classification vs ranking
  LabelMode label_mode = LabelMode::kSingle;

  void validate() const;
};

/// Hinge ranking of pass `i` (1-based, i >= 2) against every earlier pass m:
///   sum_{m < i} max(0, gamma - p_i + p_m) / (i - m)
/// `p_correct[m - 1]` holds the 1 x 1 correct-class probability of pass m.
ad::Tensor rank_loss(const std::vector<ad::Tensor>& p_correct, std::size_t i, double gamma);

/// Cross-entropy against a (possibly soft) target distribution, or mean
/// binary cross-entropy in multi-label mode.
ad::Tensor classification_loss(const ad::Tensor& logits, const std::vector<double>& target, LabelMode mode);

/// Probability assigned to the reference class: the dominant target class in
/// single-label mode, the mean sigmoid over positive classes in multi-label mode.
ad::Tensor correct_class_probability(const ad::Tensor& logits, const std::vector<double>& target,
                                     LabelMode mode);

/// L_CLS(1) + sum_{i=2..P} [beta * L_CLS(i) + (1 - beta) * L_rank(i)].
ad::Tensor total_loss(const std::vector<ad::Tensor>& logits_per_pass, const std::vector<double>& target,
                      const LossConfig& cfg);

std::vector<double> one_hot(int label, std::size_t n_classes);

}  // namespace pib
