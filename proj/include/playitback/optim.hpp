// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "playitback/autodiff.hpp"

namespace pib {

/// Momentum buffers and schedule settings for SGD with L2 weight decay.
struct OptimState {
  std::vector<std::vector<double>> momentum;
  std::size_t step = 0;
  double momentum_coef = 0.9;
  double weight_decay = 1e-4;
  double base_lr = 0.01;
  double warmup_epochs = 2.5;
  double total_epochs = 50.0;
  double max_grad_norm = 0.0;  // global-norm clipping threshold; 0 disables
};

/// Global L2 norm over every parameter gradient.
double grad_norm(std::span<const ad::Tensor> params);

/// v <- mu * v + g + wd * w;  w <- w - lr * v.
/// Gradients are read from each parameter's grad buffer and, when
/// max_grad_norm > 0, scaled so their global norm does not exceed it.
void sgd_step(std::span<ad::Tensor> params, OptimState& state, double lr);

/// Linear warm-up to `base_lr`, then half-cosine decay to zero at `total_epochs`.
double cosine_lr(double epoch_fraction, double base_lr, double warmup_epochs, double total_epochs);

}  // namespace pib
