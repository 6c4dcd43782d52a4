// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include "playitback/decoder.hpp"

#include "playitback/errors.hpp"

namespace pib {

using ad::Tensor;

PlaybackDecoder::PlaybackDecoder(ParameterStore& ps, const ModelConfig& cfg, std::mt19937_64& rng) {
  latent_init = ps.add_normal("decoder.latent_init", {cfg.latent_tokens, cfg.width}, 0.02, rng);
  patch_pos = ps.add_normal("decoder.patch_pos", {cfg.grid_t(), cfg.width}, 0.02, rng);
  playback_embed = ps.add_normal("decoder.playback_embed", {cfg.max_passes, cfg.width}, 0.02, rng);
  norm_latent = LayerNorm(ps, "decoder.norm_latent", cfg.width);
  norm_context = LayerNorm(ps, "decoder.norm_context", cfg.width);
  cross = MultiHeadAttention(ps, "decoder.cross", cfg.width, cfg.decoder_heads, rng);
  self_block = TransformerBlock(ps, "decoder.self", cfg.width, cfg.decoder_heads, cfg.mlp_ratio, rng);
  head = Linear(ps, "decoder.head", cfg.width, cfg.n_classes, rng);
}

DecoderLatent PlaybackDecoder::decode(const EncodedFeatures& z, const DecoderLatent& prev, int pass_index,
                                      DecoderProbe* probe) const {
  if (pass_index < 1 || static_cast<std::size_t>(pass_index) > playback_embed.rows())
    throw ConfigError("decode: pass " + std::to_string(pass_index) + " exceeds the playback embedding table (" +
                      std::to_string(playback_embed.rows()) + " rows)");
  if (z.z.shape() != patch_pos.shape())
    throw ShapeError("decode: features " + z.z.shape().str() + " do not match patch encodings " +
                     patch_pos.shape().str());
  const Tensor pass_row = ad::slice_rows(playback_embed, static_cast<std::size_t>(pass_index - 1), 1);
  const Tensor context = norm_context(ad::add(ad::add(z.z, patch_pos), pass_row));
  std::vector<Tensor>* cross_probe = probe ? &probe->cross_attention : nullptr;
  std::vector<Tensor>* self_probe = probe ? &probe->self_attention : nullptr;
  const Tensor v = ad::add(prev.v, cross(norm_latent(prev.v), context, cross_probe));
  return {self_block(v, self_probe), pass_index};
}

Tensor PlaybackDecoder::classify(const DecoderLatent& v) const { return head(ad::mean_rows(v.v)); }

}  // namespace pib
