// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/encoder.hpp"

#include <cmath>

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

TokenSequence patchify(const MelSpectrogram& spec, std::size_t patch_f, std::size_t patch_t) {
  if (patch_f == 0 || patch_t == 0 || spec.n_mels % patch_f != 0 || spec.n_frames % patch_t != 0) {
    std::string valid_f, valid_t;
    for (std::size_t d = 1; d <= spec.n_mels; ++d)
      if (spec.n_mels % d == 0) valid_f += (valid_f.empty() ? "" : ",") + std::to_string(d);
    for (std::size_t d = 1; d <= spec.n_frames; ++d)
      if (spec.n_frames % d == 0) valid_t += (valid_t.empty() ? "" : ",") + std::to_string(d);
    throw ConfigError("patchify: " + std::to_string(patch_f) + "x" + std::to_string(patch_t) +
                      " patches do not tile a " + std::to_string(spec.n_mels) + "x" +
                      std::to_string(spec.n_frames) + " spectrogram; valid patch_f: {" + valid_f +
                      "}, valid patch_t: {" + valid_t + "}");
  }
  const std::size_t gf = spec.n_mels / patch_f;
  const std::size_t gt = spec.n_frames / patch_t;
  const std::size_t dim = patch_f * patch_t;
  std::vector<double> flat(gf * gt * dim);
  for (std::size_t f = 0; f < gf; ++f) {
    for (std::size_t t = 0; t < gt; ++t) {
      double* row = flat.data() + (f * gt + t) * dim;
      for (std::size_t i = 0; i < patch_f; ++i)
        for (std::size_t j = 0; j < patch_t; ++j) row[i * patch_t + j] = spec.at(f * patch_f + i, t * patch_t + j);
    }
  }
  return {Tensor::constant({gf * gt, dim}, std::move(flat)), gf, gt};
}

MelSpectrogram standardize(const MelSpectrogram& spec) {
  MelSpectrogram out = spec;
  const double n = static_cast<double>(spec.values.size());
  double mu = 0.0;
  for (double v : spec.values) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : spec.values) var += (v - mu) * (v - mu);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& v : out.values) v = sd > 1e-12 ? (v - mu) / sd : 0.0;
  return out;
}

Encoder::Encoder(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng)
    : projection(ps, "encoder.patch_embed", cfg.patch_f * cfg.patch_t, cfg.width, rng),
      patch_f_(cfg.patch_f),
      patch_t_(cfg.patch_t) {
  pos_freq = ps.add_normal("encoder.pos_freq", {cfg.grid_f(), cfg.width}, 0.02, rng);
  pos_time = ps.add_normal("encoder.pos_time", {cfg.grid_t(), cfg.width}, 0.02, rng);
  for (std::size_t l = 0; l < cfg.depth; ++l)
    blocks.emplace_back(ps, "encoder.block" + std::to_string(l), cfg.width, cfg.heads, cfg.mlp_ratio, rng);
}

TokenSequence Encoder::embed(const TokenSequence& patches) const {
  return {projection(patches.tokens), patches.grid_f, patches.grid_t};
}

TokenSequence Encoder::add_positional(const TokenSequence& tokens) const {
  if (tokens.grid_f != pos_freq.rows() || tokens.grid_t != pos_time.rows() ||
      tokens.tokens.cols() != pos_freq.cols())
    throw ShapeError("add_positional: token grid " + std::to_string(tokens.grid_f) + "x" +
                     std::to_string(tokens.grid_t) + " (width " + std::to_string(tokens.tokens.cols()) +
                     ") does not match tables " + pos_freq.shape().str() + " and " + pos_time.shape().str());
  const std::size_t k = tokens.grid_f * tokens.grid_t;
  std::vector<std::size_t> f_index(k), t_index(k);
  for (std::size_t i = 0; i < k; ++i) {
    f_index[i] = i / tokens.grid_t;
    t_index[i] = i % tokens.grid_t;
  }
  const Tensor pe = ad::add(ad::gather_rows(pos_freq, f_index), ad::gather_rows(pos_time, t_index));
  return {ad::add(tokens.tokens, pe), tokens.grid_f, tokens.grid_t};
}

EncodedFeatures Encoder::encode(const TokenSequence& tokens, std::vector<Tensor>* attn) const {
  Tensor x = tokens.tokens;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    x = blocks[l](x, attn);
    ad::check_finite(x, "encoder block " + std::to_string(l));
  }
  // Mean over the frequency patch axis: z[t] = (1/gf) sum_f x[f * gt + t].
  const std::size_t gf = tokens.grid_f;
  const std::size_t gt = tokens.grid_t;
  std::vector<double> pool(gt * gf * gt, 0.0);
  for (std::size_t t = 0; t < gt; ++t)
    for (std::size_t f = 0; f < gf; ++f) pool[t * (gf * gt) + f * gt + t] = 1.0 / static_cast<double>(gf);
  return {ad::matmul(Tensor::constant({gt, gf * gt}, std::move(pool)), x)};
}

EncodedFeatures Encoder::operator()(const MelSpectrogram& spec) const {
  return encode(add_positional(embed(patchify(spec, patch_f_, patch_t_))));
}

}  // namespace pib
