// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace pib {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

constexpr double kPrimitiveGradTol = 1e-5;
constexpr double kComponentGradTol = 1e-4;

/// Finite-difference checks of every autodiff primitive, the GRU cell, one slot
/// iteration, one decode block and the ranking loss. `full` adds the tiny
/// end-to-end model (1 s clip, 32 mel bins, one playback).
std::vector<GradCheckCase> run_gradient_suite(bool full, std::uint64_t seed = 0);

void to_json(nlohmann::json& j, const GradCheckCase& c);

}  // namespace pib
