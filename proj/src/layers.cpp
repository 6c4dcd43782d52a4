// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/layers.hpp"

#include <cmath>

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

Linear::Linear(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng, bool with_bias) {
  weight = ps.add_normal(name + ".weight", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (with_bias) bias = ps.add_constant(name + ".bias", {1, out}, 0.0);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = ad::matmul(x, weight);
  return bias.defined() ? ad::add(y, bias) : y;
}

LayerNorm::LayerNorm(ParameterStore& ps, const std::string& name, std::size_t dim) {
  gain = ps.add_constant(name + ".gain", {1, dim}, 1.0);
  shift = ps.add_constant(name + ".shift", {1, dim}, 0.0);
}

Tensor LayerNorm::operator()(const Tensor& x) const {
  return ad::add(ad::mul(ad::layer_norm(x), gain), shift);
}

Mlp::Mlp(ParameterStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
         std::size_t out, Activation a, std::mt19937_64& rng)
    : fc1(ps, name + ".fc1", in, hidden, rng), fc2(ps, name + ".fc2", hidden, out, rng), act(a) {}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = fc1(x);
  h = act == Activation::kGelu ? ad::gelu(h) : ad::relu(h);
  return fc2(h);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& ps, const std::string& name, std::size_t dim,
                                       std::size_t n_heads, std::mt19937_64& rng)
    : query(ps, name + ".query", dim, dim, rng),
      key(ps, name + ".key", dim, dim, rng),
      value(ps, name + ".value", dim, dim, rng),
      out(ps, name + ".out", dim, dim, rng),
      heads(n_heads) {
  if (n_heads == 0 || dim % n_heads != 0)
    throw ConfigError(name + ": width " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(n_heads) + " heads");
}

Tensor MultiHeadAttention::operator()(const Tensor& q_in, const Tensor& kv_in,
                                      std::vector<Tensor>* probs) const {
  const Tensor q = query(q_in);
  const Tensor k = key(kv_in);
  const Tensor v = value(kv_in);
  const std::size_t dim = q.cols();
  const std::size_t head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : ad::slice_cols(q, h * head_dim, head_dim);
    const Tensor kh = heads == 1 ? k : ad::slice_cols(k, h * head_dim, head_dim);
    const Tensor vh = heads == 1 ? v : ad::slice_cols(v, h * head_dim, head_dim);
    const Tensor scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    const Tensor a = ad::softmax(scores, 1);
    if (probs) probs->push_back(a);
    outputs.push_back(ad::matmul(a, vh));
  }
  const Tensor merged = heads == 1 ? outputs[0] : ad::concat_cols(outputs);
  return out(merged);
}

TransformerBlock::TransformerBlock(ParameterStore& ps, const std::string& name, std::size_t dim,
                                   std::size_t n_heads, std::size_t mlp_ratio, std::mt19937_64& rng)
    : norm1(ps, name + ".norm1", dim),
      attn(ps, name + ".attn", dim, n_heads, rng),
      norm2(ps, name + ".norm2", dim),
      mlp(ps, name + ".mlp", dim, dim * mlp_ratio, dim, Activation::kGelu, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x, std::vector<Tensor>* probs) const {
  const Tensor n1 = norm1(x);
  const Tensor y = ad::add(x, attn(n1, n1, probs));
  return ad::add(y, mlp(norm2(y)));
}

GruCell::GruCell(ParameterStore& ps, const std::string& name, std::size_t dim, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  w_r = ps.add_normal(name + ".w_r", {dim, dim}, s, rng);
  u_r = ps.add_normal(name + ".u_r", {dim, dim}, s, rng);
  b_r = ps.add_constant(name + ".b_r", {1, dim}, 0.0);
  w_u = ps.add_normal(name + ".w_u", {dim, dim}, s, rng);
  u_u = ps.add_normal(name + ".u_u", {dim, dim}, s, rng);
  b_u = ps.add_constant(name + ".b_u", {1, dim}, 0.0);
  w_n = ps.add_normal(name + ".w_n", {dim, dim}, s, rng);
  u_n = ps.add_normal(name + ".u_n", {dim, dim}, s, rng);
  b_n = ps.add_constant(name + ".b_n", {1, dim}, 0.0);
}

Tensor GruCell::operator()(const Tensor& x, const Tensor& h) const {
  if (x.shape() != h.shape() || x.cols() != w_r.rows())
    throw ShapeError("gru_cell: input " + x.shape().str() + " and state " + h.shape().str() +
                     " must both have width " + std::to_string(w_r.rows()));
  using ad::add;
  using ad::matmul;
  const Tensor r = ad::sigmoid(add(add(matmul(x, w_r), matmul(h, u_r)), b_r));
  const Tensor u = ad::sigmoid(add(add(matmul(x, w_u), matmul(h, u_u)), b_u));
  const Tensor n = ad::tanh(add(add(matmul(x, w_n), ad::mul(r, matmul(h, u_n))), b_n));
  // (1 - u) * n + u * h  ==  n + u * (h - n)
  return add(n, ad::mul(u, ad::sub(h, n)));
}

std::vector<Tensor> GruCell::parameters() const {
  return {w_r, u_r, b_r, w_u, u_u, b_u, w_n, u_n, b_n};
}

}  // namespace pib
