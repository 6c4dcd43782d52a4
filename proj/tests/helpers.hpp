// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <random>
#include <vector>

#include "playitback/autodiff.hpp"

namespace pib::test {

inline std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline ad::Tensor rand_param(ad::Shape s, std::mt19937_64& rng, double sd = 1.0) {
  return ad::Tensor::parameter(s, randn(s.size(), rng, sd));
}

/// Fixed random weights turn any tensor into a scalar with a generic gradient.
inline ad::Tensor probe(const ad::Tensor& t, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(t, ad::Tensor::constant(t.shape(), randn(t.size(), rng))));
}

}  // namespace pib::test
