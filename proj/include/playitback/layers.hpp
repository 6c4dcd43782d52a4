// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "playitback/autodiff.hpp"
#include "playitback/params.hpp"

namespace pib {

/// y = x W + b, with W stored in x out layout. W starts at N(0, 1/in), b at zero.
struct Linear {
  ad::Tensor weight;
  ad::Tensor bias;  // undefined when built without bias

  Linear() = default;
  Linear(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng, bool with_bias = true);
  ad::Tensor operator()(const ad::Tensor& x) const;
};

/// Row-wise layer norm with learned gain and shift.
struct LayerNorm {
  ad::Tensor gain;
  ad::Tensor shift;

  LayerNorm() = default;
  LayerNorm(ParameterStore& ps, const std::string& name, std::size_t dim);
  ad::Tensor operator()(const ad::Tensor& x) const;
};

enum class Activation { kRelu, kGelu };

struct Mlp {
  Linear fc1;
  Linear fc2;
  Activation act = Activation::kGelu;

  Mlp() = default;
  Mlp(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
      std::size_t out, Activation act, std::mt19937_64& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
};

/// Scaled dot-product attention with `heads` heads. Queries come from one
/// sequence and keys/values from another (equal for self-attention).
struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  std::size_t heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& ps, const std::string& name, std::size_t dim,
                     std::size_t heads, std::mt19937_64& rng);
  /// `probs`, when given, receives one row-stochastic matrix per head.
  ad::Tensor operator()(const ad::Tensor& q_in, const ad::Tensor& kv_in,
                        std::vector<ad::Tensor>* probs = nullptr) const;
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
struct TransformerBlock {
  LayerNorm norm1;
  MultiHeadAttention attn;
  LayerNorm norm2;
  Mlp mlp;

  TransformerBlock() = default;
  TransformerBlock(ParameterStore& ps, const std::string& name, std::size_t dim, std::size_t heads,
                   std::size_t mlp_ratio, std::mt19937_64& rng);
  ad::Tensor operator()(const ad::Tensor& x, std::vector<ad::Tensor>* probs = nullptr) const;
};

/// Standard GRU cell; rows of x and h are independent batch entries.
///   r  = sigmoid(x W_r + h U_r + b_r)
///   u  = sigmoid(x W_u + h U_u + b_u)
///   n  = tanh(x W_n + r * (h U_n) + b_n)
///   h' = (1 - u) * n + u * h
struct GruCell {
  ad::Tensor w_r, u_r, b_r;
  ad::Tensor w_u, u_u, b_u;
  ad::Tensor w_n, u_n, b_n;

  GruCell() = default;
  GruCell(ParameterStore& ps, const std::string& name, std::size_t dim, std::mt19937_64& rng);
  ad::Tensor operator()(const ad::Tensor& x, const ad::Tensor& h) const;
  std::vector<ad::Tensor> parameters() const;
};

}  // namespace pib
