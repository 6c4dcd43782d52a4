// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/losses.hpp"

#include <algorithm>

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

void LossConfig::validate() const {
  if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
}

Tensor rank_loss(const std::vector<Tensor>& p_correct, std::size_t i, double gamma) {
  if (i < 2) throw ContractError("rank_loss: pass index must be at least 2, got " + std::to_string(i));
  if (p_correct.size() < i)
    throw ContractError("rank_loss: need " + std::to_string(i) + " pass probabilities, got " +
                        std::to_string(p_correct.size()));
  const Tensor& p_i = p_correct[i - 1];
  Tensor total;
  for (std::size_t m = 1; m < i; ++m) {
    const double lambda = 1.0 / static_cast<double>(i - m);
    const Tensor hinge = ad::max_with_zero(ad::add_scalar(ad::sub(p_correct[m - 1], p_i), gamma));
    const Tensor term = ad::scale(hinge, lambda);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

namespace {

std::size_t dominant_class(const std::vector<double>& target) {
  return static_cast<std::size_t>(std::max_element(target.begin(), target.end()) - target.begin());
}

void check_target(const Tensor& logits, const std::vector<double>& target, const char* op) {
  if (logits.rows() != 1 || logits.cols() != target.size())
    throw ShapeError(std::string(op) + ": logits " + logits.shape().str() + " vs " +
                     std::to_string(target.size()) + " target classes");
}

}  // namespace

Tensor classification_loss(const Tensor& logits, const std::vector<double>& target, LabelMode mode) {
  check_target(logits, target, "classification_loss");
  const Tensor y = Tensor::constant({1, target.size()}, target);
  if (mode == LabelMode::kSingle) {
    return ad::scale(ad::sum(ad::mul(y, ad::log_softmax(logits, 1))), -1.0);
  }
  // -[y log s(x) + (1 - y) log s(-x)], averaged over classes.
  const Tensor log_pos = ad::log(ad::sigmoid(logits));
  const Tensor log_neg = ad::log(ad::sigmoid(ad::scale(logits, -1.0)));
  std::vector<double> one_minus(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) one_minus[k] = 1.0 - target[k];
  const Tensor y_neg = Tensor::constant({1, target.size()}, std::move(one_minus));
  return ad::scale(ad::mean(ad::add(ad::mul(y, log_pos), ad::mul(y_neg, log_neg))), -1.0);
}

Tensor correct_class_probability(const Tensor& logits, const std::vector<double>& target, LabelMode mode) {
  check_target(logits, target, "correct_class_probability");
  if (mode == LabelMode::kSingle) {
    return ad::slice_cols(ad::softmax(logits, 1), dominant_class(target), 1);
  }
  std::vector<double> pick(target.size(), 0.0);
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < target.size(); ++k) n_pos += target[k] >= 0.5 ? 1 : 0;
  if (n_pos == 0) {
    pick[dominant_class(target)] = 1.0;
  } else {
    for (std::size_t k = 0; k < target.size(); ++k)
      if (target[k] >= 0.5) pick[k] = 1.0 / static_cast<double>(n_pos);
  }
  return ad::matmul(ad::sigmoid(logits), Tensor::constant({target.size(), 1}, std::move(pick)));
}

Tensor total_loss(const std::vector<Tensor>& logits_per_pass, const std::vector<double>& target,
                  const LossConfig& cfg) {
  if (logits_per_pass.empty()) throw ContractError("total_loss: no passes");
  Tensor loss = classification_loss(logits_per_pass[0], target, cfg.label_mode);
  if (logits_per_pass.size() == 1) return loss;
  std::vector<Tensor> p_correct;
  p_correct.reserve(logits_per_pass.size());
  for (const auto& l : logits_per_pass) p_correct.push_back(correct_class_probability(l, target, cfg.label_mode));
  for (std::size_t i = 2; i <= logits_per_pass.size(); ++i) {
    const Tensor cls = classification_loss(logits_per_pass[i - 1], target, cfg.label_mode);
    loss = ad::add(loss, ad::scale(cls, cfg.beta));
    loss = ad::add(loss, ad::scale(rank_loss(p_correct, i, cfg.gamma), 1.0 - cfg.beta));
  }
  return loss;
}

std::vector<double> one_hot(int label, std::size_t n_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= n_classes)
    throw ContractError("one_hot: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(n_classes) + ")");
  std::vector<double> v(n_classes, 0.0);
  v[static_cast<std::size_t>(label)] = 1.0;
  return v;
}

}  // namespace pib
