// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pib {

double grad_norm(std::span<const ad::Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

void sgd_step(std::span<ad::Tensor> params, OptimState& state, double lr) {
  if (state.momentum.size() != params.size()) {
    state.momentum.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) state.momentum[i].assign(params[i].size(), 0.0);
  }
  double clip = 1.0;
  if (state.max_grad_norm > 0.0) {
    const double norm = grad_norm(params);
    if (norm > state.max_grad_norm) clip = state.max_grad_norm / norm;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value();
    const auto g = params[i].grad();
    auto& v = state.momentum[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = state.momentum_coef * v[k] + clip * g[k] + state.weight_decay * w[k];
      w[k] -= lr * v[k];
    }
  }
  ++state.step;
}

double cosine_lr(double epoch_fraction, double base_lr, double warmup_epochs, double total_epochs) {
  if (warmup_epochs > 0.0 && epoch_fraction < warmup_epochs)
    return base_lr * epoch_fraction / warmup_epochs;
  const double span = total_epochs - warmup_epochs;
  if (span <= 0.0) return base_lr;
  const double progress = std::clamp((epoch_fraction - warmup_epochs) / span, 0.0, 1.0);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace pib
